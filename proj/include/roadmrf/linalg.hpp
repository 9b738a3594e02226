#ifndef ROADMRF_LINALG_HPP
#define ROADMRF_LINALG_HPP

#include <span>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "roadmrf/common.hpp"
#include "roadmrf/graph.hpp"

namespace roadmrf {

inline Eigen::SparseMatrix<double> to_sparse(const PrecisionPattern& p, double scale = 1.0,
                                             double diag_shift = 0.0) {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(p.diag.size() + 2 * p.offdiag.size());
  for (int i = 0; i < p.dim; ++i) trips.emplace_back(i, i, scale * p.diag[i] + diag_shift);
  for (const auto& [i, j] : p.offdiag) {
    trips.emplace_back(i, j, -scale);
    trips.emplace_back(j, i, -scale);
  }
  Eigen::SparseMatrix<double> m(p.dim, p.dim);
  m.setFromTriplets(trips.begin(), trips.end());
  return m;
}

/// Cholesky factorization of scale*M + diag_shift*I for a precision pattern
/// M. Factorized once, then reused for solves and for exact GMRF sampling.
class SpdFactor {
 public:
  explicit SpdFactor(const PrecisionPattern& p, double scale = 1.0, double diag_shift = 0.0)
      : dim_(p.dim) {
    if (dim_ == 0) return;
    llt_.compute(to_sparse(p, scale, diag_shift));
    if (llt_.info() != Eigen::Success)
      throw Error("sparse Cholesky factorization failed (matrix not SPD?)");
  }

  int dim() const { return dim_; }

  /// Solves (scale*M + shift*I) x = rhs.
  std::vector<double> solve(std::span<const double> rhs) const {
    if (static_cast<int>(rhs.size()) != dim_) throw ValidationError("solve: size mismatch");
    if (dim_ == 0) return {};
    Eigen::Map<const Eigen::VectorXd> b(rhs.data(), dim_);
    Eigen::VectorXd x = llt_.solve(b);
    return {x.data(), x.data() + dim_};
  }

  /// Maps a standard-normal vector w to z with covariance (scale*M+shift*I)⁻¹:
  /// z = Pᵀ L⁻ᵀ w for the factorization P A Pᵀ = L Lᵀ.
  std::vector<double> gaussian_pullback(std::span<const double> w) const {
    if (static_cast<int>(w.size()) != dim_)
      throw ValidationError("gaussian_pullback: size mismatch");
    if (dim_ == 0) return {};
    Eigen::Map<const Eigen::VectorXd> wv(w.data(), dim_);
    Eigen::VectorXd y = llt_.matrixU().solve(wv);
    Eigen::VectorXd z = llt_.permutationPinv() * y;
    return {z.data(), z.data() + dim_};
  }

 private:
  int dim_;
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt_;
};

}  // namespace roadmrf

#endif  // ROADMRF_LINALG_HPP
