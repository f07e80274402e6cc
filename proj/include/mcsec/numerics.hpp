#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace mcsec {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

struct ShapeMismatchError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct SingularMatrixError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Counter-based PRNG (Philox4x32-10). Streams are cheap to split and every
/// draw is a pure function of (seed, stream, counter), so runs are
/// bit-reproducible regardless of call interleaving across substreams.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : seed_(seed), stream_(stream) {}

  /// Derive an independent child stream. Children of distinct indices (and of
  /// distinct parents) never share a counter sequence.
  Rng substream(std::uint64_t index) const;

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  /// Uniform on [0, 1) with 53-bit resolution.
  double uniform();

  /// Standard normal via Box-Muller (pair-cached).
  double gaussian();

  /// Circularly-symmetric complex Gaussian with E|x|^2 = variance.
  Complex cgaussian(double variance);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  std::array<std::uint32_t, 4> block(std::uint64_t counter,
                                     std::uint64_t stream) const;
  void refill();

  std::uint64_t seed_ = 0;
  std::uint64_t stream_ = 0;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> cache_{};
  int cache_pos_ = 4;  // empty
  bool have_gauss_ = false;
  double gauss_cache_ = 0.0;
};

/// Matrix with i.i.d. CN(0, per_entry_variance) entries.
ComplexMatrix random_cgaussian(Eigen::Index rows, Eigen::Index cols,
                               double per_entry_variance, Rng& rng);

bool all_finite(const ComplexMatrix& a);

double frobenius_norm(const ComplexMatrix& a);

/// Entrywise closeness with absolute floor and relative scale, the default
/// comparison used by the test suites.
bool matrices_close(const ComplexMatrix& a, const ComplexMatrix& b,
                    double abs_floor = 1e-12, double rel = 1e-8);

/// Solve A X = B for square A (LU with partial pivoting). Throws
/// SingularMatrixError when the estimated condition number exceeds 1e12.
ComplexMatrix hermitian_solve(const ComplexMatrix& a, const ComplexMatrix& b);

struct NullSpaceInfo {
  ComplexMatrix projector;   // cols(A) x cols(A), Hermitian idempotent
  double retained_sigma;     // largest singular value treated as null
  int retained_dimension;    // rank of the projector
  bool used_fallback;        // true when no sigma passed the tolerance cut
};

/// Orthogonal projector onto the (near-)null space of A: singular directions
/// with sigma_i <= tol * sigma_max are retained. When A has no such direction
/// the projector falls back to the single direction of smallest singular
/// value (ties broken by lowest index) so the result is never zero.
NullSpaceInfo null_space_projector_info(const ComplexMatrix& a,
                                        double tol = 1e-8);
ComplexMatrix null_space_projector(const ComplexMatrix& a, double tol = 1e-8);

/// Wirtinger-style numerical gradient of a real scalar field: entry (i,j) is
/// (d f / d Re X_ij + i * d f / d Im X_ij) / 2, central differences with
/// step h. Matches the convention d f / d conj(X).
ComplexMatrix finite_diff_gradient(
    const std::function<double(const ComplexMatrix&)>& f,
    const ComplexMatrix& x, double h = 1e-6);

}  // namespace mcsec
