#include "mcsec/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

namespace mcsec {

void SystemDims::set_uniform_noise(double nl, double ne) {
  sigma_nl = RealVector::Constant(K_R, nl);
  sigma_ne = RealVector::Constant(std::max(K_E, 0), ne);
}

void SystemDims::validate() const {
  auto fail = [](const std::string& msg) {
    throw std::invalid_argument("SystemDims: " + msg);
  };
  if (K_T < 1) fail("K_T must be >= 1");
  if (K_R < 1) fail("K_R must be >= 1");
  if (K_E < 0) fail("K_E must be >= 0");
  if (N_T < 1) fail("N_T must be >= 1");
  if (N_R < 1) fail("N_R must be >= 1");
  if (N_E < 1) fail("N_E must be >= 1");
  if (N_s < 1) fail("N_s must be >= 1");
  if (N_s > std::min(N_T, N_R))
    fail("N_s must satisfy N_s <= min(N_T, N_R)");
  if (!(P_T > 0)) fail("P_T must be positive");
  if (sigma_z < 0) fail("sigma_z must be non-negative");
  if (sigma_z_sq() >= P_T)
    fail("AN power sigma_z^2 must stay below the power budget P_T");
  if (K_E > 0) {
    if (!(Gamma > 0)) fail("Gamma must be positive when eavesdroppers exist");
    if (Gamma > double(N_s))
      fail("Gamma must not exceed N_s (an eavesdropper can always reach "
           "MSE = N_s with a zero filter)");
  }
  if (sigma_nl.size() != K_R) fail("sigma_nl must have one entry per user");
  if (sigma_ne.size() != K_E) fail("sigma_ne must have one entry per eve");
  for (int l = 0; l < K_R; ++l)
    if (sigma_nl(l) < 0) fail("sigma_nl entries must be non-negative");
  for (int e = 0; e < K_E; ++e)
    if (sigma_ne(e) < 0) fail("sigma_ne entries must be non-negative");
}

ErrorModel ErrorModel::stochastic(int k_t, int receivers, double sigma_sq) {
  ErrorModel m;
  m.kind = ErrorKind::Stochastic;
  m.value = RealMatrix::Constant(k_t, receivers, sigma_sq);
  return m;
}

ErrorModel ErrorModel::norm_bounded(int k_t, int receivers, double tau) {
  ErrorModel m;
  m.kind = ErrorKind::NormBounded;
  m.value = RealMatrix::Constant(k_t, receivers, tau);
  return m;
}

double ErrorModel::at(int t, int receiver) const {
  if (kind == ErrorKind::Perfect) return 0.0;
  return value(t, receiver);
}

ComplexMatrix draw_rayleigh_channel(Eigen::Index rows, Eigen::Index cols,
                                    double pathloss_gain, Rng& rng) {
  if (rows < 1 || cols < 1)
    throw ShapeMismatchError("draw_rayleigh_channel: empty shape");
  if (pathloss_gain < 0)
    throw std::invalid_argument("draw_rayleigh_channel: negative gain");
  return random_cgaussian(rows, cols, pathloss_gain, rng);
}

ComplexMatrix draw_error(ErrorKind kind, double value, Eigen::Index rows,
                         Eigen::Index cols, Rng& rng) {
  switch (kind) {
    case ErrorKind::Perfect:
      return ComplexMatrix::Zero(rows, cols);
    case ErrorKind::Stochastic:
      // Per-entry variance sigma^2 / cols gives E[Delta Delta^H] = sigma^2 I.
      return random_cgaussian(rows, cols, value / double(cols), rng);
    case ErrorKind::NormBounded: {
      // Uniform over the Frobenius ball of radius sqrt(tau): isotropic
      // Gaussian direction, radius via inverse-CDF in 2*rows*cols real dims.
      if (value == 0.0) return ComplexMatrix::Zero(rows, cols);
      ComplexMatrix dir = random_cgaussian(rows, cols, 1.0, rng);
      const double norm = dir.norm();
      const double u = rng.uniform();
      const double dims = 2.0 * double(rows) * double(cols);
      const double radius = std::sqrt(value) * std::pow(u, 1.0 / dims);
      if (norm == 0.0) return ComplexMatrix::Zero(rows, cols);
      return (radius / norm) * dir;
    }
  }
  throw std::logic_error("draw_error: unknown kind");
}

ChannelSet draw_channel_set(const SystemDims& dims, const ErrorModel& leg,
                            const ErrorModel& eve, Rng& rng) {
  ChannelSet ch;
  ch.C_hat.assign(dims.K_T, {});
  ch.G_hat.assign(dims.K_T, {});
  for (int t = 0; t < dims.K_T; ++t) {
    ch.C_hat[t].reserve(dims.K_R);
    for (int l = 0; l < dims.K_R; ++l)
      ch.C_hat[t].push_back(
          draw_rayleigh_channel(dims.N_R, dims.N_T, 1.0, rng));
    ch.G_hat[t].reserve(dims.K_E);
    for (int e = 0; e < dims.K_E; ++e)
      ch.G_hat[t].push_back(
          draw_rayleigh_channel(dims.N_E, dims.N_T, 1.0, rng));
  }
  ch.leg_error = leg;
  ch.eve_error = eve;
  return ch;
}

double okumura_hata_gain(double distance_m, double carrier_freq_hz,
                         double h_bs_m, double h_ue_m) {
  if (carrier_freq_hz <= 0 || h_bs_m <= 0 || h_ue_m <= 0)
    throw std::invalid_argument("okumura_hata_gain: non-positive parameter");
  const double f_mhz = carrier_freq_hz / 1e6;
  const double d_km = std::max(distance_m, 1.0) / 1000.0;
  const double lf = std::log10(f_mhz);
  // Small/medium-city mobile antenna correction.
  const double a_ue =
      (1.1 * lf - 0.7) * h_ue_m - (1.56 * lf - 0.8);
  const double loss_db = 69.55 + 26.16 * lf - 13.82 * std::log10(h_bs_m) -
                         a_ue +
                         (44.9 - 6.55 * std::log10(h_bs_m)) * std::log10(d_km);
  return std::pow(10.0, -loss_db / 10.0);
}

namespace {

Point2 uniform_point(double side, Rng& rng) {
  return Point2{side * rng.uniform(), side * rng.uniform()};
}

Point2 uniform_disc(const Point2& center, double radius, Rng& rng) {
  const double r = radius * std::sqrt(rng.uniform());
  const double theta = 2.0 * std::numbers::pi * rng.uniform();
  return Point2{center.x + r * std::cos(theta),
                center.y + r * std::sin(theta)};
}

double dist(const Point2& a, const Point2& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

int nearest_bs(const std::vector<Point2>& bs, const Point2& p) {
  int best = 0;
  double best_d = dist(bs[0], p);
  for (int i = 1; i < int(bs.size()); ++i) {
    const double d = dist(bs[i], p);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

}  // namespace

NetworkLayout generate_system_scenario(const LayoutParams& params, Rng& rng) {
  if (params.n_bs < 1 || params.sync_size < 1 ||
      params.sync_size > params.n_bs)
    throw std::invalid_argument(
        "generate_system_scenario: need 1 <= sync_size <= n_bs");
  NetworkLayout layout;
  layout.params = params;
  layout.side_m = std::sqrt(params.area_km2) * 1000.0;

  layout.bs.reserve(params.n_bs);
  for (int i = 0; i < params.n_bs; ++i)
    layout.bs.push_back(uniform_point(layout.side_m, rng));

  // Synchronization area: the sync_size BSs closest to the area centroid.
  const Point2 centroid{layout.side_m / 2.0, layout.side_m / 2.0};
  std::vector<int> order(params.n_bs);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return dist(layout.bs[a], centroid) < dist(layout.bs[b], centroid);
  });
  layout.sync_area.assign(order.begin(), order.begin() + params.sync_size);
  std::sort(layout.sync_area.begin(), layout.sync_area.end());

  // Leader: uniform over the sub-region served by the sync area (nearest-BS
  // assignment). Rejection sampling with a deterministic fallback.
  std::vector<char> in_sync(params.n_bs, 0);
  for (int idx : layout.sync_area) in_sync[idx] = 1;
  bool placed = false;
  for (int attempt = 0; attempt < 10000; ++attempt) {
    const Point2 p = uniform_point(layout.side_m, rng);
    if (in_sync[nearest_bs(layout.bs, p)]) {
      layout.leader = p;
      placed = true;
      break;
    }
  }
  if (!placed) {
    // Degenerate geometry: fall back to the sync-area centroid.
    Point2 c{0, 0};
    for (int idx : layout.sync_area) {
      c.x += layout.bs[idx].x;
      c.y += layout.bs[idx].y;
    }
    c.x /= layout.sync_area.size();
    c.y /= layout.sync_area.size();
    layout.leader = c;
  }

  layout.users.push_back(layout.leader);
  for (int i = 0; i < params.n_members; ++i)
    layout.users.push_back(
        uniform_disc(layout.leader, params.group_radius_m, rng));
  for (int i = 0; i < params.n_eves; ++i)
    layout.eves.push_back(
        uniform_disc(layout.leader, params.group_radius_m, rng));
  return layout;
}

std::string serialize_layout(const NetworkLayout& layout) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed;
  for (int i = 0; i < int(layout.bs.size()); ++i)
    os << "bs " << i << " " << layout.bs[i].x << " " << layout.bs[i].y << "\n";
  for (int idx : layout.sync_area)
    os << "sync " << idx << " " << layout.bs[idx].x << " " << layout.bs[idx].y
       << "\n";
  os << "leader 0 " << layout.leader.x << " " << layout.leader.y << "\n";
  for (int i = 0; i < int(layout.users.size()); ++i)
    os << "user " << i << " " << layout.users[i].x << " " << layout.users[i].y
       << "\n";
  for (int i = 0; i < int(layout.eves.size()); ++i)
    os << "eve " << i << " " << layout.eves[i].x << " " << layout.eves[i].y
       << "\n";
  return os.str();
}

RealMatrix layout_gain_table(const NetworkLayout& layout) {
  const int n_bs = int(layout.bs.size());
  const int n_users = int(layout.users.size());
  const int n_eves = int(layout.eves.size());
  RealMatrix g(n_bs, n_users + n_eves);
  for (int t = 0; t < n_bs; ++t) {
    for (int u = 0; u < n_users; ++u)
      g(t, u) = okumura_hata_gain(dist(layout.bs[t], layout.users[u]),
                                  layout.params.carrier_freq_hz,
                                  layout.params.h_bs_m, layout.params.h_ue_m);
    for (int e = 0; e < n_eves; ++e)
      g(t, n_users + e) = okumura_hata_gain(
          dist(layout.bs[t], layout.eves[e]), layout.params.carrier_freq_hz,
          layout.params.h_bs_m, layout.params.h_ue_m);
  }
  return g;
}

}  // namespace mcsec
