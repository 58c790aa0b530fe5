#ifndef SNM_ELLIPSOID_HPP
#define SNM_ELLIPSOID_HPP

#include <cmath>
#include <limits>
#include <random>

#include "snm/linalg.hpp"
#include "snm/types.hpp"

namespace snm {

/// Solid ellipsoid { x : (x - center)ᵀ shape⁻¹ (x - center) <= 1 } with a
/// positive definite shape matrix. The Cholesky factor of the shape is
/// cached at construction.
template <typename Scalar>
class Ellipsoid {
 public:
  using Vec = VecX<Scalar>;

  Ellipsoid(Vec center, SymMatrix<Scalar> shape)
      : center_(std::move(center)),
        shape_(std::move(shape)),
        chol_(cholesky(shape_)) {
    if (center_.size() != shape_.dim()) {
      throw DimensionMismatch("Ellipsoid: center/shape dimension mismatch");
    }
  }

  Index dim() const { return shape_.dim(); }
  const Vec& center() const { return center_; }
  const SymMatrix<Scalar>& shape() const { return shape_; }
  const CholFactor<Scalar>& shape_factor() const { return chol_; }

  bool contains_point(const Vec& x, Scalar tol = Scalar(0)) const {
    if (x.size() != dim()) {
      throw DimensionMismatch("contains_point: dimension mismatch");
    }
    return quad_form_inv(chol_, VecX<Scalar>(x - center_)) <=
           Scalar(1) + tol;
  }

 private:
  Vec center_;
  SymMatrix<Scalar> shape_;
  CholFactor<Scalar> chol_;
};

using Ellipsoidd = Ellipsoid<double>;

/// Uniform sample from the solid ellipsoid: a Gaussian direction on the unit
/// sphere, a U^(1/d) radius, mapped through the shape factor.
template <typename Scalar, typename Rng>
VecX<Scalar> sample_uniform_ellipsoid(const Ellipsoid<Scalar>& e, Rng& rng) {
  const Index d = e.dim();
  std::normal_distribution<Scalar> gauss(Scalar(0), Scalar(1));
  VecX<Scalar> z(d);
  Scalar norm = Scalar(0);
  do {
    for (Index i = 0; i < d; ++i) z[i] = gauss(rng);
    norm = z.norm();
  } while (!(norm > Scalar(0)));
  std::uniform_real_distribution<Scalar> unif(Scalar(0), Scalar(1));
  Scalar r = std::pow(unif(rng), Scalar(1) / static_cast<Scalar>(d));
  return e.center() + e.shape_factor().lower() * ((r / norm) * z);
}

/// Maximum of the outer ellipsoid's quadratic form
///   q(x) = (x - c_out)ᵀ shape_out⁻¹ (x - c_out)
/// over the inner ellipsoid. Containment of `inner` in `outer` is
/// equivalent to this maximum being <= 1.
///
/// Substituting x = c_in + L_in u (‖u‖ <= 1) turns the problem into
/// maximizing uᵀA u + 2 gᵀu + c₀ over the unit ball with A ≻ 0, whose
/// maximizer lies on the sphere and satisfies (μI - A) u = g for a
/// multiplier μ >= λ_max(A). μ solves the monotone secular equation
/// Σ ĝᵢ²/(μ - λᵢ)² = 1 in the eigenbasis of A; the degenerate branch
/// (ĝ orthogonal to the top eigenspace and interior norm deficit) pins
/// μ = λ_max with the slack absorbed by a top-eigenvector component.
/// The maximum value μ + Σ ĝᵢ²/(μ - λᵢ) + c₀ is first-order insensitive
/// to the multiplier at the root, so bisection to 1e-12 on μ is ample.
template <typename Scalar>
Scalar ellipsoid_max_quadratic(const Ellipsoid<Scalar>& outer,
                               const Ellipsoid<Scalar>& inner) {
  if (outer.dim() != inner.dim()) {
    throw DimensionMismatch("ellipsoid_max_quadratic: dimension mismatch");
  }
  const Index d = outer.dim();
  const auto& lo_tri =
      outer.shape_factor().lower().template triangularView<Eigen::Lower>();
  MatX<Scalar> w_mat = lo_tri.solve(inner.shape_factor().lower());
  VecX<Scalar> h = lo_tri.solve(VecX<Scalar>(inner.center() - outer.center()));
  MatX<Scalar> a_mat = w_mat.transpose() * w_mat;
  VecX<Scalar> g = w_mat.transpose() * h;
  const Scalar c0 = h.squaredNorm();

  Eigen::SelfAdjointEigenSolver<MatX<Scalar>> es(a_mat);
  const VecX<Scalar>& lam = es.eigenvalues();  // ascending
  VecX<Scalar> ghat = es.eigenvectors().transpose() * g;
  const Scalar lam_max = lam[d - 1];

  // Secular function Σ ĝᵢ²/(μ - λᵢ)² with zero-coefficient terms skipped so
  // μ = λ_max stays evaluable when ĝ has no top-eigenspace component.
  auto norm_sq_at = [&](Scalar mu) {
    Scalar acc = Scalar(0);
    for (Index i = 0; i < d; ++i) {
      if (ghat[i] == Scalar(0)) continue;
      Scalar t = ghat[i] / (mu - lam[i]);
      acc += t * t;
    }
    return acc;
  };
  auto value_at = [&](Scalar mu) {
    Scalar acc = mu + c0;
    for (Index i = 0; i < d; ++i) {
      if (ghat[i] == Scalar(0)) continue;
      acc += ghat[i] * ghat[i] / (mu - lam[i]);
    }
    return acc;
  };

  // Treat eigenvalues within a relative sliver of λ_max as the top cluster.
  const Scalar cluster_tol =
      Scalar(1e-12) * std::max(Scalar(1), std::abs(lam_max));
  Scalar g_top_sq = Scalar(0);
  Scalar g_sq = Scalar(0);
  Scalar interior_sq = Scalar(0);  // ‖u(λ_max)‖² over the non-top part
  for (Index i = 0; i < d; ++i) {
    const Scalar gi_sq = ghat[i] * ghat[i];
    g_sq += gi_sq;
    if (lam[i] >= lam_max - cluster_tol) {
      g_top_sq += gi_sq;
    } else if (ghat[i] != Scalar(0)) {
      Scalar t = ghat[i] / (lam_max - lam[i]);
      interior_sq += t * t;
    }
  }

  const bool top_component_negligible =
      g_top_sq <= Scalar(1e-28) * g_sq || g_sq == Scalar(0);
  if (top_component_negligible && interior_sq <= Scalar(1)) {
    // Degenerate branch: maximizer keeps μ = λ_max, the norm deficit goes
    // into the top eigenvector (which contributes λ_max per unit norm and
    // nothing to the linear term).
    Scalar acc = lam_max + c0;
    for (Index i = 0; i < d; ++i) {
      if (lam[i] >= lam_max - cluster_tol || ghat[i] == Scalar(0)) continue;
      acc += ghat[i] * ghat[i] / (lam_max - lam[i]);
    }
    return acc;
  }

  // Bracket the multiplier: ‖u(μ*)‖ = 1 forces μ* >= λⱼ + |ĝⱼ| for every j,
  // and ‖u(λ_max + ‖ĝ‖)‖ <= 1 caps it above.
  Scalar lo = lam_max;
  for (Index i = 0; i < d; ++i) {
    lo = std::max(lo, lam[i] + std::abs(ghat[i]));
  }
  Scalar hi = lam_max + std::sqrt(g_sq);
  if (hi <= lo) hi = lo + std::abs(lo) * Scalar(1e-15) +
                     std::numeric_limits<Scalar>::min();
  const Scalar mu_tol = Scalar(1e-12) * std::max(Scalar(1), std::abs(hi));
  for (int it = 0; it < 200 && hi - lo > mu_tol; ++it) {
    Scalar mid = Scalar(0.5) * (lo + hi);
    if (norm_sq_at(mid) > Scalar(1)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return value_at(Scalar(0.5) * (lo + hi));
}

/// True iff `inner` is contained in `outer`, up to a boundary tolerance on
/// the outer quadratic form.
template <typename Scalar>
bool ellipsoid_contains(const Ellipsoid<Scalar>& outer,
                        const Ellipsoid<Scalar>& inner,
                        Scalar tol = Scalar(1e-9)) {
  return ellipsoid_max_quadratic(outer, inner) <= Scalar(1) + tol;
}

}  // namespace snm

#endif  // SNM_ELLIPSOID_HPP
