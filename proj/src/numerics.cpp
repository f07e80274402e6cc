#include "mcsec/numerics.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace mcsec {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void philox_round(std::array<std::uint32_t, 4>& ctr, std::uint32_t k0,
                         std::uint32_t k1) {
  const std::uint64_t p0 = std::uint64_t(kPhiloxM0) * ctr[0];
  const std::uint64_t p1 = std::uint64_t(kPhiloxM1) * ctr[2];
  const std::uint32_t hi0 = std::uint32_t(p0 >> 32), lo0 = std::uint32_t(p0);
  const std::uint32_t hi1 = std::uint32_t(p1 >> 32), lo1 = std::uint32_t(p1);
  ctr = {hi1 ^ ctr[1] ^ k0, lo1, hi0 ^ ctr[3] ^ k1, lo0};
}

}  // namespace

std::array<std::uint32_t, 4> Rng::block(std::uint64_t counter,
                                        std::uint64_t stream) const {
  std::array<std::uint32_t, 4> ctr = {
      std::uint32_t(counter), std::uint32_t(counter >> 32),
      std::uint32_t(stream), std::uint32_t(stream >> 32)};
  std::uint32_t k0 = std::uint32_t(seed_);
  std::uint32_t k1 = std::uint32_t(seed_ >> 32);
  for (int round = 0; round < 10; ++round) {
    philox_round(ctr, k0, k1);
    k0 += kPhiloxW0;
    k1 += kPhiloxW1;
  }
  return ctr;
}

Rng Rng::substream(std::uint64_t index) const {
  // Child stream ids come from a tagged Philox block so the derivation domain
  // never overlaps the output domain (which uses the raw stream word).
  const auto b = block(index, stream_ ^ 0xA5A5A5A55A5A5A5Aull);
  const std::uint64_t child = (std::uint64_t(b[1]) << 32) | b[0];
  return Rng(seed_, child);
}

void Rng::refill() {
  cache_ = block(counter_++, stream_);
  cache_pos_ = 0;
}

std::uint32_t Rng::next_u32() {
  if (cache_pos_ >= 4) refill();
  return cache_[cache_pos_++];
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t lo = next_u32();
  const std::uint64_t hi = next_u32();
  return (hi << 32) | lo;
}

double Rng::uniform() {
  return double(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::gaussian() {
  if (have_gauss_) {
    have_gauss_ = false;
    return gauss_cache_;
  }
  // Box-Muller; 1-u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  gauss_cache_ = r * std::sin(theta);
  have_gauss_ = true;
  return r * std::cos(theta);
}

Complex Rng::cgaussian(double variance) {
  const double s = std::sqrt(variance / 2.0);
  const double re = gaussian();
  const double im = gaussian();
  return Complex(s * re, s * im);
}

ComplexMatrix random_cgaussian(Eigen::Index rows, Eigen::Index cols,
                               double per_entry_variance, Rng& rng) {
  ComplexMatrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i)
      m(i, j) = rng.cgaussian(per_entry_variance);
  return m;
}

bool all_finite(const ComplexMatrix& a) {
  return a.allFinite();
}

double frobenius_norm(const ComplexMatrix& a) {
  return a.norm();
}

bool matrices_close(const ComplexMatrix& a, const ComplexMatrix& b,
                    double abs_floor, double rel) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  const double scale = std::max(a.norm(), b.norm());
  return (a - b).norm() <= std::max(abs_floor, rel * scale);
}

ComplexMatrix hermitian_solve(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.rows() != a.cols())
    throw ShapeMismatchError("hermitian_solve: A must be square, got " +
                             std::to_string(a.rows()) + "x" +
                             std::to_string(a.cols()));
  if (a.cols() != b.rows())
    throw ShapeMismatchError("hermitian_solve: A is " +
                             std::to_string(a.rows()) + "x" +
                             std::to_string(a.cols()) + " but B has " +
                             std::to_string(b.rows()) + " rows");
  Eigen::PartialPivLU<ComplexMatrix> lu(a);
  const double rc = lu.rcond();
  if (!(rc > 1e-12))
    throw SingularMatrixError(
        "hermitian_solve: matrix is singular to working precision "
        "(reciprocal condition " +
        std::to_string(rc) + ")");
  ComplexMatrix x = lu.solve(b);
  if (!all_finite(x))
    throw SingularMatrixError("hermitian_solve: non-finite solution");
  return x;
}

NullSpaceInfo null_space_projector_info(const ComplexMatrix& a, double tol) {
  const Eigen::Index n = a.cols();
  if (n == 0) throw ShapeMismatchError("null_space_projector: empty matrix");
  Eigen::JacobiSVD<ComplexMatrix> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  // Columns of V beyond min(rows, cols) span exact null directions.
  auto sigma = [&](Eigen::Index i) -> double {
    return i < sv.size() ? sv(i) : 0.0;
  };
  const double sigma_max = sigma(0);

  NullSpaceInfo info;
  info.projector = ComplexMatrix::Zero(n, n);
  info.retained_sigma = 0.0;
  info.retained_dimension = 0;
  info.used_fallback = false;

  const double cut = tol * sigma_max;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (sigma(i) <= cut) {
      info.projector.noalias() +=
          svd.matrixV().col(i) * svd.matrixV().col(i).adjoint();
      info.retained_sigma = std::max(info.retained_sigma, sigma(i));
      ++info.retained_dimension;
    }
  }
  if (info.retained_dimension == 0) {
    // Generically invertible A: keep the single weakest direction so callers
    // always get a usable (rank >= 1) projector. Ties break to lowest index.
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < n; ++i)
      if (sigma(i) < sigma(best)) best = i;
    info.projector.noalias() =
        svd.matrixV().col(best) * svd.matrixV().col(best).adjoint();
    info.retained_sigma = sigma(best);
    info.retained_dimension = 1;
    info.used_fallback = true;
  }
  return info;
}

ComplexMatrix null_space_projector(const ComplexMatrix& a, double tol) {
  return null_space_projector_info(a, tol).projector;
}

ComplexMatrix finite_diff_gradient(
    const std::function<double(const ComplexMatrix&)>& f,
    const ComplexMatrix& x, double h) {
  ComplexMatrix g(x.rows(), x.cols());
  ComplexMatrix probe = x;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const Complex orig = probe(i, j);
      probe(i, j) = orig + Complex(h, 0);
      const double fp_re = f(probe);
      probe(i, j) = orig - Complex(h, 0);
      const double fm_re = f(probe);
      probe(i, j) = orig + Complex(0, h);
      const double fp_im = f(probe);
      probe(i, j) = orig - Complex(0, h);
      const double fm_im = f(probe);
      probe(i, j) = orig;
      g(i, j) = 0.5 * Complex((fp_re - fm_re) / (2 * h),
                              (fp_im - fm_im) / (2 * h));
    }
  }
  return g;
}

}  // namespace mcsec
