#pragma once

#include <string>
#include <vector>

#include "mcsec/numerics.hpp"

namespace mcsec {

/// Problem dimensions and scalar physical parameters shared by the MSE
/// evaluators and the transceiver designers. Noise standard deviations are
/// per receiver; the scalar setters fill every entry with the same value.
struct SystemDims {
  int K_T = 1;  // coordinated base stations
  int K_R = 1;  // legitimate users
  int K_E = 0;  // eavesdroppers
  int N_T = 1;  // transmit antennas per BS
  int N_R = 1;  // receive antennas per user
  int N_E = 1;  // receive antennas per eavesdropper
  int N_s = 1;  // data streams

  double P_T = 1.0;        // per-BS transmit power budget (linear)
  double sigma_z = 0.0;    // artificial-noise std-dev per BS
  double Gamma = 0.0;      // eavesdropper MSE floor
  RealVector sigma_nl;     // per-user noise std-dev, size K_R
  RealVector sigma_ne;     // per-eve noise std-dev, size K_E

  void set_uniform_noise(double nl, double ne);
  double sigma_z_sq() const { return sigma_z * sigma_z; }

  /// Throws std::invalid_argument naming the offending field when the
  /// configuration is not usable (counts < 1, N_s > min(N_T, N_R), ...).
  void validate() const;
};

enum class ErrorKind { Perfect, Stochastic, NormBounded };

/// CSI error description for one side of the system (legitimate or eve):
/// one scalar per (BS, receiver) link. For Stochastic the scalar is the
/// error variance sigma^2 (error entries i.i.d. CN(0, sigma^2 / N_T) so that
/// E[Delta Delta^H] = sigma^2 I); for NormBounded it is the squared
/// Frobenius radius tau (errors live in ||Delta||_F^2 <= tau).
struct ErrorModel {
  ErrorKind kind = ErrorKind::Perfect;
  RealMatrix value;  // K_T x (number of receivers), unused for Perfect

  static ErrorModel perfect() { return ErrorModel{}; }
  static ErrorModel stochastic(int k_t, int receivers, double sigma_sq);
  static ErrorModel norm_bounded(int k_t, int receivers, double tau);

  double at(int t, int receiver) const;
};

/// Channel estimates for one design instance: C_hat[t][l] is N_R x N_T,
/// G_hat[t][e] is N_E x N_T. The same container carries true realizations
/// during evaluation.
struct ChannelSet {
  std::vector<std::vector<ComplexMatrix>> C_hat;  // [K_T][K_R]
  std::vector<std::vector<ComplexMatrix>> G_hat;  // [K_T][K_E]
  ErrorModel leg_error;
  ErrorModel eve_error;
};

/// Flat Rayleigh fading scaled by a path gain: entries i.i.d.
/// CN(0, pathloss_gain).
ComplexMatrix draw_rayleigh_channel(Eigen::Index rows, Eigen::Index cols,
                                    double pathloss_gain, Rng& rng);

/// One CSI error realization for a single link. Perfect -> zero matrix;
/// Stochastic(sigma^2) -> i.i.d. CN(0, sigma^2/cols); NormBounded(tau) ->
/// uniform over the Frobenius ball of radius sqrt(tau).
ComplexMatrix draw_error(ErrorKind kind, double value, Eigen::Index rows,
                         Eigen::Index cols, Rng& rng);

/// Draw a full set of channel estimates with unit path gain (the
/// physical-layer experiments) and attach the error models.
ChannelSet draw_channel_set(const SystemDims& dims, const ErrorModel& leg,
                            const ErrorModel& eve, Rng& rng);

/// Okumura-Hata urban (small/medium city) path gain, linear scale.
/// distance_m is clamped below at 1 m. Default antenna heights: 30 m BS,
/// 1.5 m terminal.
double okumura_hata_gain(double distance_m, double carrier_freq_hz,
                         double h_bs_m = 30.0, double h_ue_m = 1.5);

struct LayoutParams {
  double area_km2 = 10.0;
  int n_bs = 100;
  int sync_size = 20;        // base stations in the synchronization area
  int n_members = 9;         // group members around the leader
  int n_eves = 2;
  double group_radius_m = 500.0;
  double carrier_freq_hz = 700e6;
  double h_bs_m = 30.0;
  double h_ue_m = 1.5;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// A drawn deployment: BS positions over a square area, the subset of BSs
/// forming the synchronization area (nearest the area centroid), and one
/// multicast group (leader + members + eavesdroppers).
struct NetworkLayout {
  double side_m = 0.0;            // square side length
  std::vector<Point2> bs;         // all base stations
  std::vector<int> sync_area;     // indices into bs, ascending
  Point2 leader;
  std::vector<Point2> users;      // leader first, then members
  std::vector<Point2> eves;
  LayoutParams params;
};

/// Uniform BS drop over the square area, synchronization area = sync_size
/// BSs nearest the area centroid, leader uniform over the sub-region whose
/// nearest BS lies in the synchronization area, members/eves uniform in a
/// disc of group_radius_m around the leader.
NetworkLayout generate_system_scenario(const LayoutParams& params, Rng& rng);

/// Text form, one node per line: "kind index x y" with kind in
/// {bs, sync, leader, user, eve}; coordinates in meters.
std::string serialize_layout(const NetworkLayout& layout);

/// Path gain table: rows = BS index, columns = users (leader first) followed
/// by eavesdroppers.
RealMatrix layout_gain_table(const NetworkLayout& layout);

}  // namespace mcsec
