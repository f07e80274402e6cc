#include "mcsec/mse.hpp"

#include <cmath>
#include <string>

namespace mcsec {

namespace {

void check_dims(const TransceiverSolution& sol, const ChannelSet& ch,
                const SystemDims& dims) {
  auto fail = [](const std::string& msg) { throw ShapeMismatchError(msg); };
  if (int(sol.V.size()) != dims.K_T || int(sol.W.size()) != dims.K_T)
    fail("solution has wrong number of per-BS matrices");
  if (int(sol.R.size()) != dims.K_R) fail("solution has wrong number of R");
  if (int(sol.E.size()) != dims.K_E) fail("solution has wrong number of E");
  if (int(ch.C_hat.size()) != dims.K_T || int(ch.G_hat.size()) != dims.K_T)
    fail("channel set has wrong number of BS entries");
  for (int t = 0; t < dims.K_T; ++t) {
    if (sol.V[t].rows() != dims.N_T || sol.V[t].cols() != dims.N_s)
      fail("V[" + std::to_string(t) + "] must be N_T x N_s");
    if (sol.W[t].rows() != dims.N_T || sol.W[t].cols() != dims.N_T)
      fail("W[" + std::to_string(t) + "] must be N_T x N_T");
    if (int(ch.C_hat[t].size()) != dims.K_R)
      fail("C_hat must have one entry per (BS, user)");
    if (int(ch.G_hat[t].size()) != dims.K_E)
      fail("G_hat must have one entry per (BS, eve)");
  }
}

double real_with_residue_check(const Complex& value, const char* where) {
  const double scale = 1.0 + std::abs(value.real());
  if (!(std::abs(value.imag()) <= 1e-9 * scale))
    throw NumericalError(std::string(where) +
                         ": imaginary residue exceeds tolerance");
  return value.real();
}

}  // namespace

UncertaintyInput UncertaintyInput::zero(const SystemDims& dims) {
  UncertaintyInput u;
  u.s_tl = RealMatrix::Zero(dims.K_T, dims.K_R);
  u.s_te = RealMatrix::Zero(dims.K_T, std::max(dims.K_E, 0));
  return u;
}

UncertaintyInput UncertaintyInput::stochastic(const SystemDims& dims,
                                              double sigma_tl_sq,
                                              double sigma_te_sq) {
  UncertaintyInput u;
  u.s_tl = RealMatrix::Constant(dims.K_T, dims.K_R, sigma_tl_sq);
  u.s_te = RealMatrix::Constant(dims.K_T, std::max(dims.K_E, 0), sigma_te_sq);
  return u;
}

UncertaintyInput UncertaintyInput::from_model(const SystemDims& dims,
                                              const ErrorModel& leg,
                                              const ErrorModel& eve) {
  UncertaintyInput u = zero(dims);
  for (int t = 0; t < dims.K_T; ++t) {
    for (int l = 0; l < dims.K_R; ++l) u.s_tl(t, l) = leg.at(t, l);
    for (int e = 0; e < dims.K_E; ++e) u.s_te(t, e) = eve.at(t, e);
  }
  return u;
}

TransceiverSolution TransceiverSolution::zero(const SystemDims& dims) {
  TransceiverSolution sol;
  sol.V.assign(dims.K_T, ComplexMatrix::Zero(dims.N_T, dims.N_s));
  sol.W.assign(dims.K_T, ComplexMatrix::Zero(dims.N_T, dims.N_T));
  sol.R.assign(dims.K_R, ComplexMatrix::Zero(dims.N_s, dims.N_R));
  sol.E.assign(dims.K_E, ComplexMatrix::Zero(dims.N_s, dims.N_E));
  sol.lambda_e = RealVector::Zero(dims.K_E);
  sol.lambda_t = RealVector::Zero(dims.K_T);
  return sol;
}

double transmit_power(const ComplexMatrix& V_t, const ComplexMatrix& W_t,
                      double sigma_z) {
  return V_t.squaredNorm() + sigma_z * sigma_z * W_t.squaredNorm();
}

ComplexMatrix effective_channel_legit(const TransceiverSolution& sol,
                                      const ChannelSet& ch, int l) {
  ComplexMatrix f =
      ComplexMatrix::Zero(ch.C_hat[0][l].rows(), sol.V[0].cols());
  for (size_t t = 0; t < sol.V.size(); ++t)
    f.noalias() += ch.C_hat[t][l] * sol.V[t];
  return f;
}

ComplexMatrix effective_channel_eve(const TransceiverSolution& sol,
                                    const ChannelSet& ch, int e) {
  ComplexMatrix f =
      ComplexMatrix::Zero(ch.G_hat[0][e].rows(), sol.V[0].cols());
  for (size_t t = 0; t < sol.V.size(); ++t)
    f.noalias() += ch.G_hat[t][e] * sol.V[t];
  return f;
}

namespace {

/// Shared closed form for both sides. `H[t]` is the estimated channel from
/// BS t to this receiver, `filter` its receive filter, `s[t]` the per-link
/// uncertainty scalar, `chi` the robustness switch.
double mse_closed_form(const std::vector<ComplexMatrix>& V,
                       const std::vector<ComplexMatrix>& W,
                       const std::vector<const ComplexMatrix*>& H,
                       const ComplexMatrix& filter, double sigma_n,
                       double sigma_z, const std::vector<double>& s, int chi,
                       int n_s, const char* where) {
  const double sz2 = sigma_z * sigma_z;
  // Effective estimated channel after precoding.
  ComplexMatrix f = ComplexMatrix::Zero(H[0]->rows(), V[0].cols());
  for (size_t t = 0; t < V.size(); ++t) f.noalias() += (*H[t]) * V[t];

  const ComplexMatrix rf = filter * f;  // N_s x N_s
  Complex acc(double(n_s), 0.0);
  const Complex cross = rf.trace();
  acc -= cross + std::conj(cross);
  acc += (rf * rf.adjoint()).trace();

  // AN leakage, per BS (AN sequences are independent across BSs).
  for (size_t t = 0; t < V.size(); ++t) {
    const ComplexMatrix rw = filter * (*H[t]) * W[t];
    acc += sz2 * (rw * rw.adjoint()).trace();
  }

  const double filter_energy = filter.squaredNorm();
  acc += sigma_n * sigma_n * filter_energy;

  // CSI-error terms: chi * sum_t s_t (tr(V V^H) + sz2 tr(W W^H)) tr(F F^H).
  double robust = 0.0;
  for (size_t t = 0; t < V.size(); ++t)
    robust += s[t] * (V[t].squaredNorm() + sz2 * W[t].squaredNorm());
  acc += double(chi) * robust * filter_energy;

  return real_with_residue_check(acc, where);
}

}  // namespace

double mse_legitimate(const TransceiverSolution& sol, const ChannelSet& ch,
                      const SystemDims& dims, const RobustFlags& flags,
                      const UncertaintyInput& u, int l) {
  check_dims(sol, ch, dims);
  if (l < 0 || l >= dims.K_R)
    throw ShapeMismatchError("mse_legitimate: user index out of range");
  std::vector<const ComplexMatrix*> h(dims.K_T);
  std::vector<double> s(dims.K_T);
  for (int t = 0; t < dims.K_T; ++t) {
    h[t] = &ch.C_hat[t][l];
    s[t] = u.s_tl(t, l);
  }
  return mse_closed_form(sol.V, sol.W, h, sol.R[l], dims.sigma_nl(l),
                         dims.sigma_z, s, flags.chi_l, dims.N_s,
                         "mse_legitimate");
}

double mse_eavesdropper(const TransceiverSolution& sol, const ChannelSet& ch,
                        const SystemDims& dims, const RobustFlags& flags,
                        const UncertaintyInput& u, int e) {
  check_dims(sol, ch, dims);
  if (e < 0 || e >= dims.K_E)
    throw ShapeMismatchError("mse_eavesdropper: eve index out of range");
  std::vector<const ComplexMatrix*> h(dims.K_T);
  std::vector<double> s(dims.K_T);
  for (int t = 0; t < dims.K_T; ++t) {
    h[t] = &ch.G_hat[t][e];
    s[t] = u.s_te(t, e);
  }
  return mse_closed_form(sol.V, sol.W, h, sol.E[e], dims.sigma_ne(e),
                         dims.sigma_z, s, flags.chi_e, dims.N_s,
                         "mse_eavesdropper");
}

double smse(const TransceiverSolution& sol, const ChannelSet& ch,
            const SystemDims& dims, const RobustFlags& flags,
            const UncertaintyInput& u) {
  double total = 0.0;
  for (int l = 0; l < dims.K_R; ++l)
    total += mse_legitimate(sol, ch, dims, flags, u, l);
  return total;
}

ComplexMatrix eve_mmse_filter(const std::vector<ComplexMatrix>& V,
                              const std::vector<ComplexMatrix>& G_e,
                              double sigma_ne) {
  if (V.empty() || V.size() != G_e.size())
    throw ShapeMismatchError("eve_mmse_filter: V and G must pair up per BS");
  ComplexMatrix f = ComplexMatrix::Zero(G_e[0].rows(), V[0].cols());
  for (size_t t = 0; t < V.size(); ++t) {
    if (G_e[t].cols() != V[t].rows())
      throw ShapeMismatchError("eve_mmse_filter: G[t] cols must match V rows");
    f.noalias() += G_e[t] * V[t];
  }
  const Eigen::Index n_e = f.rows();
  ComplexMatrix gram = f * f.adjoint();
  gram += sigma_ne * sigma_ne * ComplexMatrix::Identity(n_e, n_e);
  // E = F^H (F F^H + sigma^2 I)^{-1}, via gram X = F then E = X^H.
  return hermitian_solve(gram, f).adjoint();
}

std::pair<double, double> trace_property_oracle(const ComplexMatrix& U,
                                                const ComplexMatrix& Vm,
                                                double sigma_sq, int trials,
                                                Rng& rng) {
  if (U.rows() != U.cols() || Vm.rows() != Vm.cols())
    throw ShapeMismatchError("trace_property_oracle: U and Vm must be square");
  if (trials < 2)
    throw std::invalid_argument("trace_property_oracle: need >= 2 trials");
  const Eigen::Index m = U.rows();
  const Eigen::Index n = Vm.rows();
  double sum = 0.0, sum_sq = 0.0;
  for (int k = 0; k < trials; ++k) {
    const ComplexMatrix x = random_cgaussian(n, m, sigma_sq / double(m), rng);
    const double v = ((x * U * x.adjoint() * Vm).trace()).real();
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / trials;
  const double var = std::max(0.0, sum_sq / trials - mean * mean);
  const double sem = std::sqrt(var / double(trials - 1));
  return {mean, sem};
}

}  // namespace mcsec
