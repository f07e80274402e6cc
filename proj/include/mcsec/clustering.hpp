#pragma once

#include <vector>

#include "mcsec/numerics.hpp"

namespace mcsec {

struct EmptyGroupError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Input to the serving-cluster selection for one multicast group.
/// `gains(t, u)` is the path gain from BS t to group user u (linear); rows
/// cover every BS that can interfere, `candidates` lists the BSs eligible
/// for the cluster (the synchronization area), ascending.
struct ClusterRequest {
  RealMatrix gains;             // n_bs x n_users
  std::vector<int> candidates;  // eligible BS indices, ascending
  int target_size = 1;          // desired cluster size K_T'
  double tx_power = 1.0;        // per-BS transmit power (linear)
  double noise_power = 1.0;     // receiver noise power (linear)
};

/// Received SINR of user u for a serving set S: sum of in-cluster received
/// powers over out-of-cluster received powers plus noise. Every BS outside S
/// (eligible or not) interferes.
double sinr_for_cluster(const ClusterRequest& req, const std::vector<int>& s,
                        int u);

/// Greedy serving-cluster construction. Phase 1 gives every user its
/// strongest candidate BS; phase 2 grows the set toward target_size, adding
/// the candidate with the largest sum-SINR improvement. Ties break to the
/// lowest BS index. The result is sorted ascending and its size is
/// max(phase-1 size, min(target_size, |candidates|)).
std::vector<int> greedy_cluster(const ClusterRequest& req);

/// Phase-1-only selection: one strongest candidate BS per user, deduplicated
/// (the single-cell transmission policy).
std::vector<int> best_bs_per_user(const ClusterRequest& req);

}  // namespace mcsec
