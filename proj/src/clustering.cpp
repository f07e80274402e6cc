#include "mcsec/clustering.hpp"

#include <algorithm>
#include <set>

namespace mcsec {

namespace {

void check_request(const ClusterRequest& req) {
  if (req.gains.cols() < 1)
    throw EmptyGroupError("greedy_cluster: group has no users");
  if (req.candidates.empty())
    throw EmptyGroupError("greedy_cluster: no candidate base stations");
  for (int idx : req.candidates)
    if (idx < 0 || idx >= req.gains.rows())
      throw std::invalid_argument(
          "greedy_cluster: candidate index outside gain table");
  if (!(req.tx_power > 0))
    throw std::invalid_argument("greedy_cluster: tx_power must be positive");
  if (!(req.noise_power > 0))
    throw std::invalid_argument(
        "greedy_cluster: noise_power must be positive");
}

}  // namespace

double sinr_for_cluster(const ClusterRequest& req, const std::vector<int>& s,
                        int u) {
  if (u < 0 || u >= req.gains.cols())
    throw std::invalid_argument("sinr_for_cluster: user index out of range");
  std::vector<char> in_s(req.gains.rows(), 0);
  for (int idx : s) in_s[idx] = 1;
  double signal = 0.0, interference = 0.0;
  for (int t = 0; t < req.gains.rows(); ++t) {
    const double p = req.gains(t, u) * req.tx_power;
    if (in_s[t])
      signal += p;
    else
      interference += p;
  }
  return signal / (interference + req.noise_power);
}

std::vector<int> best_bs_per_user(const ClusterRequest& req) {
  check_request(req);
  std::set<int> chosen;
  for (int u = 0; u < req.gains.cols(); ++u) {
    int best = req.candidates.front();
    for (int idx : req.candidates)
      if (req.gains(idx, u) > req.gains(best, u)) best = idx;
    // Ties keep the earlier (lower) index because of the strict comparison
    // and the ascending candidate order.
    chosen.insert(best);
  }
  return {chosen.begin(), chosen.end()};
}

std::vector<int> greedy_cluster(const ClusterRequest& req) {
  check_request(req);
  std::vector<int> cluster = best_bs_per_user(req);

  const int want = std::min<int>(req.target_size, int(req.candidates.size()));
  while (int(cluster.size()) < want) {
    int best_cand = -1;
    double best_score = -1.0;
    for (int cand : req.candidates) {
      if (std::find(cluster.begin(), cluster.end(), cand) != cluster.end())
        continue;
      std::vector<int> trial = cluster;
      trial.push_back(cand);
      double score = 0.0;
      for (int u = 0; u < req.gains.cols(); ++u)
        score += sinr_for_cluster(req, trial, u);
      // Strict improvement keeps the lowest-index winner on ties; the
      // candidate list is ascending.
      if (score > best_score) {
        best_score = score;
        best_cand = cand;
      }
    }
    if (best_cand < 0) break;
    cluster.push_back(best_cand);
    std::sort(cluster.begin(), cluster.end());
  }
  std::sort(cluster.begin(), cluster.end());
  return cluster;
}

}  // namespace mcsec
