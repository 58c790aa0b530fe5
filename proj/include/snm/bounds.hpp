#ifndef SNM_BOUNDS_HPP
#define SNM_BOUNDS_HPP

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <utility>

#include "snm/ellipsoid.hpp"
#include "snm/linalg.hpp"
#include "snm/martingale.hpp"
#include "snm/types.hpp"

namespace snm {

namespace detail {

template <typename Scalar>
bool exact_equal(const MatX<Scalar>& a, const MatX<Scalar>& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         (a.array() == b.array()).all();
}

template <typename Scalar>
MatX<Scalar> inverse_from_factor(const CholFactor<Scalar>& f) {
  const Index d = f.dim();
  MatX<Scalar> inv = MatX<Scalar>::Identity(d, d);
  f.lower().template triangularView<Eigen::Lower>().solveInPlace(inv);
  f.lower().transpose().template triangularView<Eigen::Upper>().solveInPlace(
      inv);
  return inv;
}

}  // namespace detail

/// Parameters of the sub-Gaussian (log-determinant) confidence radius.
/// sigma_sq is the conditional sub-Gaussian proxy of the weights; gamma is
/// the positive definite regularizer the state was built with.
template <typename Scalar>
struct SubGaussianParams {
  Scalar sigma_sq;
  Scalar delta;
  SymMatrix<Scalar> gamma;

  void validate() const {
    if (!(sigma_sq > Scalar(0))) {
      throw std::invalid_argument("SubGaussianParams: sigma_sq must be > 0");
    }
    if (!(delta > Scalar(0)) || !(delta < Scalar(1))) {
      throw std::invalid_argument("SubGaussianParams: delta must be in (0,1)");
    }
    if (gamma.dim() <= 0) {
      throw std::invalid_argument("SubGaussianParams: empty regularizer");
    }
  }
};

using SubGaussianParamsd = SubGaussianParams<double>;

/// Parameters of the variance-sensitive (Bernstein) confidence radius.
///  - sigma_var_sq: a.s. bound on the conditional second moment of W_k;
///  - b_w: a.s. bound on |W_k|;
///  - b_x_sq: PSD matrix with X_k X_kᵀ ⪯ b_x_sq almost surely;
///  - v: the positive definite reference matrix of the burn-in condition;
///  - eps in (0,1), nu > 0: slack parameters;
///  - delta_inflated: set when the radius rides on a second bound evaluated
///    on the same path, so the true failure probability is 2*delta.
template <typename Scalar>
struct BernsteinParams {
  Scalar sigma_var_sq;
  Scalar b_w;
  SymMatrix<Scalar> b_x_sq;
  SymMatrix<Scalar> gamma;
  SymMatrix<Scalar> v;
  Scalar eps;
  Scalar nu;
  Scalar delta;
  bool delta_inflated = false;

  /// Ridge recipe: reference matrix equal to the regularizer, flagged as
  /// delta-inflated because deployments that can't watch the noise process
  /// must spend a second bound on controlling alpha.
  static BernsteinParams ridge(SymMatrix<Scalar> gamma, Scalar sigma_var_sq,
                               Scalar b_w, SymMatrix<Scalar> b_x_sq,
                               Scalar eps, Scalar nu, Scalar delta) {
    BernsteinParams p;
    p.sigma_var_sq = sigma_var_sq;
    p.b_w = b_w;
    p.b_x_sq = std::move(b_x_sq);
    p.v = gamma;
    p.gamma = std::move(gamma);
    p.eps = eps;
    p.nu = nu;
    p.delta = delta;
    p.delta_inflated = true;
    return p;
  }

  Scalar sigma_var_eps_sq() const { return sigma_var_sq / (Scalar(1) - eps); }

  void validate() const {
    if (!(sigma_var_sq > Scalar(0))) {
      throw std::invalid_argument("BernsteinParams: sigma_var_sq must be > 0");
    }
    if (!(b_w > Scalar(0))) {
      throw std::invalid_argument("BernsteinParams: b_w must be > 0");
    }
    if (sigma_var_sq > b_w * b_w * (Scalar(1) + Scalar(1e-12))) {
      throw std::invalid_argument(
          "BernsteinParams: sigma_var_sq cannot exceed b_w^2");
    }
    if (!(eps > Scalar(0)) || !(eps < Scalar(1))) {
      throw std::invalid_argument("BernsteinParams: eps must be in (0,1)");
    }
    if (!(nu > Scalar(0))) {
      throw std::invalid_argument("BernsteinParams: nu must be > 0");
    }
    if (!(delta > Scalar(0)) || !(delta < Scalar(1))) {
      throw std::invalid_argument("BernsteinParams: delta must be in (0,1)");
    }
    Index d = v.dim();
    if (b_x_sq.dim() != d || gamma.dim() != d) {
      throw DimensionMismatch("BernsteinParams: matrix dimension mismatch");
    }
  }
};

using BernsteinParamsd = BernsteinParams<double>;

template <typename Scalar>
struct BurninStatus {
  bool data_ok;
  bool static_ok;
  /// Smallest eigenvalues of the respective PSD differences (negative =
  /// violated by that much).
  Scalar data_margin;
  Scalar static_margin;

  bool ok() const { return data_ok && static_ok; }
};

using BurninStatusd = BurninStatus<double>;

/// Outcome of a radius evaluation. radius_sq is absent exactly when the
/// burn-in condition failed (burnin_ok == false); it is never silently
/// substituted.
template <typename Scalar>
struct BoundReport {
  std::optional<Scalar> radius_sq;
  Scalar alpha = Scalar(0);
  Scalar leading_factor = Scalar(1);
  Scalar logdet_ratio = Scalar(0);
  bool burnin_ok = true;
  bool data_ok = true;
  bool static_ok = true;
  Scalar self_norm_sq = Scalar(0);
  Scalar data_margin = std::numeric_limits<Scalar>::quiet_NaN();
  Scalar static_margin = std::numeric_limits<Scalar>::quiet_NaN();
  bool delta_inflated = false;
};

using BoundReportd = BoundReport<double>;

namespace detail {

template <typename Scalar>
Scalar log_inv(Scalar delta) {
  return std::log(Scalar(1) / delta);
}

template <typename Scalar>
void require_matching_gamma(const MartingaleState<Scalar>& state,
                            const SymMatrix<Scalar>& gamma) {
  if (!exact_equal(state.gamma().mat(), gamma.mat())) {
    throw std::invalid_argument(
        "bound evaluation: state regularizer differs from params.gamma");
  }
}

template <typename Scalar>
CholFactor<Scalar> gamma_factor_or_throw(const SymMatrix<Scalar>& gamma) {
  try {
    return cholesky(gamma);
  } catch (const NotPositiveDefinite&) {
    throw GammaSingular(
        "sub-Gaussian radius needs a positive definite regularizer");
  }
}

}  // namespace detail

/// Sub-Gaussian self-normalized confidence radius:
///   radius² = sigma² · [ log det(V_t+Γ) - log det Γ + 2 log(1/δ) ].
/// Requires Γ ≻ 0 (GammaSingular otherwise) and the state to have been
/// built with the same Γ.
template <typename Scalar>
BoundReport<Scalar> subgaussian_radius_sq(const MartingaleState<Scalar>& state,
                                          const SubGaussianParams<Scalar>& p) {
  p.validate();
  detail::require_matching_gamma(state, p.gamma);
  CholFactor<Scalar> gamma_chol = detail::gamma_factor_or_throw(p.gamma);
  BoundReport<Scalar> rep;
  rep.logdet_ratio = state.gram_logdet() - gamma_chol.logdet();
  rep.radius_sq =
      p.sigma_sq * (rep.logdet_ratio + Scalar(2) * detail::log_inv(p.delta));
  rep.self_norm_sq = state.self_norm_sq();
  return rep;
}

/// Left side of the unregularized deviation inequality:
///   ‖s_t‖²_{V_t⁻¹} - ‖s_t‖²_{V_t⁻¹ Γ V_t⁻¹}.
/// Requires V_t (without the regularizer) to be positive definite.
template <typename Scalar>
Scalar unregularized_deviation_lhs(const MartingaleState<Scalar>& state) {
  CholFactor<Scalar> v_chol = cholesky(state.v_sym());
  VecX<Scalar> y = solve(v_chol, state.s());
  return state.s().dot(y) - y.dot(state.gamma().mat() * y);
}

/// Deviation bound for the unregularized normalized norm: with probability
/// at least 1-δ the LHS above is at most
///   sigma² · [ log det V_t - log det Γ + 2 log(1/δ) ].
template <typename Scalar>
BoundReport<Scalar> unregularized_deviation_bound(
    const MartingaleState<Scalar>& state, const SubGaussianParams<Scalar>& p) {
  p.validate();
  detail::require_matching_gamma(state, p.gamma);
  CholFactor<Scalar> gamma_chol = detail::gamma_factor_or_throw(p.gamma);
  CholFactor<Scalar> v_chol = cholesky(state.v_sym());
  BoundReport<Scalar> rep;
  rep.logdet_ratio = v_chol.logdet() - gamma_chol.logdet();
  rep.radius_sq =
      p.sigma_sq * (rep.logdet_ratio + Scalar(2) * detail::log_inv(p.delta));
  rep.self_norm_sq = unregularized_deviation_lhs(state);
  return rep;
}

/// Data-dependent weight factor of the variance-sensitive bound:
///   alpha = max( √e (1+ν) ‖s‖_{(V_t+Γ)⁻¹ V (V_t+Γ)⁻¹} /
///                (σ_{var,ε} · ν √(d+2)) - 1, 0 ).
/// The default sigma_var_eps_sq = 1 is the unit-variance convention; the
/// radius evaluation passes σ²_var/(1-ε) so that the general case agrees
/// exactly with rescaling the stream to unit variance.
template <typename Scalar>
Scalar bernstein_alpha(const MartingaleState<Scalar>& state,
                       const SymMatrix<Scalar>& v, Scalar nu,
                       Scalar sigma_var_eps_sq = Scalar(1)) {
  if (!(nu > Scalar(0))) {
    throw std::invalid_argument("bernstein_alpha: nu must be > 0");
  }
  const Scalar sqrt_e = std::sqrt(Scalar(std::numbers::e));
  const Scalar d_plus_2 = static_cast<Scalar>(state.dim() + 2);
  Scalar cross = state.cross_norm_sq(v) / sigma_var_eps_sq;
  Scalar alpha = sqrt_e * (Scalar(1) + nu) * std::sqrt(cross) /
                     (nu * std::sqrt(d_plus_2)) -
                 Scalar(1);
  return std::max(alpha, Scalar(0));
}

/// Burn-in condition of the variance-sensitive bound, split into its two
/// halves with PSD margins:
///   data:   V_t + Γ ⪰ e (1+ν)² V
///   static: e (1+ν)² V ⪰ (1+ν)² ε⁻¹ (d+2) B_W² B_X²
template <typename Scalar>
BurninStatus<Scalar> burnin_check(const MartingaleState<Scalar>& state,
                                  const BernsteinParams<Scalar>& p) {
  p.validate();
  if (p.v.dim() != state.dim()) {
    throw DimensionMismatch("burnin_check: dimension mismatch");
  }
  const Scalar e = Scalar(std::numbers::e);
  const Scalar one_plus_nu_sq = (Scalar(1) + p.nu) * (Scalar(1) + p.nu);
  const Scalar d_plus_2 = static_cast<Scalar>(state.dim() + 2);

  SymMatrix<Scalar> scaled_v = (e * one_plus_nu_sq) * p.v;
  SymMatrix<Scalar> gram(state.gram_matrix());
  SymMatrix<Scalar> static_lhs =
      (one_plus_nu_sq * d_plus_2 * p.b_w * p.b_w / p.eps) * p.b_x_sq;

  BurninStatus<Scalar> st;
  st.data_margin = psd_margin(scaled_v, gram);
  st.data_ok = st.data_margin >= -default_psd_tol<Scalar>(gram.mat());
  st.static_margin = psd_margin(static_lhs, scaled_v);
  st.static_ok =
      st.static_margin >= -default_psd_tol<Scalar>(scaled_v.mat());
  return st;
}

enum class LeadingFactorMode { Exact, QuadraticRelax, LinearRelax };

/// Multiplier in front of σ²_var in the variance-sensitive radius:
///   exact     (1+α)² / ((1+2α)(1-ε))
///   quadratic (1+α²) / (1-ε)
///   linear    (1+α/2) / (1-ε)
/// The relaxations dominate the exact value for every α > 0.
template <typename Scalar>
Scalar leading_factor(Scalar alpha, Scalar eps,
                      LeadingFactorMode mode = LeadingFactorMode::Exact) {
  if (!(alpha >= Scalar(0))) {
    throw std::invalid_argument("leading_factor: alpha must be >= 0");
  }
  if (!(eps >= Scalar(0)) || !(eps < Scalar(1))) {
    throw std::invalid_argument("leading_factor: eps must be in [0,1)");
  }
  Scalar core;
  switch (mode) {
    case LeadingFactorMode::Exact:
      core = (Scalar(1) + alpha) * (Scalar(1) + alpha) /
             (Scalar(1) + Scalar(2) * alpha);
      break;
    case LeadingFactorMode::QuadraticRelax:
      core = Scalar(1) + alpha * alpha;
      break;
    case LeadingFactorMode::LinearRelax:
      core = Scalar(1) + alpha / Scalar(2);
      break;
    default:
      throw std::invalid_argument("leading_factor: unknown mode");
  }
  return core / (Scalar(1) - eps);
}

/// Variance-sensitive (Bernstein) self-normalized confidence radius:
///   radius² = leading_factor(α, ε) · σ²_var ·
///             [ log det(V_t+Γ) - log det V + 2 log(1/δ) ],
/// valid once the burn-in condition holds; throws BurninViolated otherwise.
/// α is evaluated on the variance-normalized stream s / σ_{var,ε}, which is
/// the scale the guarantee is proven at.
template <typename Scalar>
BoundReport<Scalar> bernstein_radius_sq(const MartingaleState<Scalar>& state,
                                        const BernsteinParams<Scalar>& p) {
  detail::require_matching_gamma(state, p.gamma);
  BurninStatus<Scalar> bs = burnin_check(state, p);
  if (!bs.ok()) {
    throw BurninViolated(bs.data_ok, bs.static_ok,
                         static_cast<double>(bs.data_margin),
                         static_cast<double>(bs.static_margin));
  }
  CholFactor<Scalar> v_chol = cholesky(p.v);
  BoundReport<Scalar> rep;
  rep.alpha = bernstein_alpha(state, p.v, p.nu, p.sigma_var_eps_sq());
  rep.leading_factor = leading_factor(rep.alpha, p.eps);
  rep.logdet_ratio = state.gram_logdet() - v_chol.logdet();
  rep.radius_sq = rep.leading_factor * p.sigma_var_sq *
                  (rep.logdet_ratio + Scalar(2) * detail::log_inv(p.delta));
  rep.self_norm_sq = state.self_norm_sq();
  rep.data_margin = bs.data_margin;
  rep.static_margin = bs.static_margin;
  rep.delta_inflated = p.delta_inflated;
  rep.data_ok = bs.data_ok;
  rep.static_ok = bs.static_ok;
  return rep;
}

/// Non-throwing variant: a burn-in failure comes back as a report with
/// burnin_ok = false, absent radius and the margins filled in, so harnesses
/// can count it instead of aborting.
template <typename Scalar>
BoundReport<Scalar> try_bernstein_radius_sq(
    const MartingaleState<Scalar>& state, const BernsteinParams<Scalar>& p) {
  detail::require_matching_gamma(state, p.gamma);
  BurninStatus<Scalar> bs = burnin_check(state, p);
  if (bs.ok()) return bernstein_radius_sq(state, p);
  BoundReport<Scalar> rep;
  rep.radius_sq.reset();
  rep.alpha = std::numeric_limits<Scalar>::quiet_NaN();
  rep.leading_factor = std::numeric_limits<Scalar>::quiet_NaN();
  rep.logdet_ratio = std::numeric_limits<Scalar>::quiet_NaN();
  rep.burnin_ok = false;
  rep.data_ok = bs.data_ok;
  rep.static_ok = bs.static_ok;
  rep.self_norm_sq = state.gram_pd()
                         ? state.self_norm_sq()
                         : std::numeric_limits<Scalar>::quiet_NaN();
  rep.data_margin = bs.data_margin;
  rep.static_margin = bs.static_margin;
  rep.delta_inflated = p.delta_inflated;
  return rep;
}

/// Exponent of the exponential-martingale statistic at weight vector λ,
/// evaluated directly: ⟨λ, s_t⟩ - ½ ‖λ‖²_{V_t}.
template <typename Scalar>
Scalar martingale_exponent_direct(const VecX<Scalar>& lambda,
                                  const MartingaleState<Scalar>& state) {
  if (lambda.size() != state.dim()) {
    throw DimensionMismatch("martingale_exponent_direct: lambda dimension");
  }
  return lambda.dot(state.s()) -
         Scalar(0.5) * lambda.dot(state.v_sum() * lambda);
}

/// Same quantity through the completed-square form in the regularized
/// geometry:
///   ½‖s‖²_{(V+Γ)⁻¹} - ½‖λ - (V+Γ)⁻¹ s‖²_{V+Γ} + ½‖λ‖²_Γ.
/// Agrees with the direct form identically (up to roundoff) for any Γ.
template <typename Scalar>
Scalar martingale_exponent_completed(const VecX<Scalar>& lambda,
                                     const MartingaleState<Scalar>& state) {
  if (lambda.size() != state.dim()) {
    throw DimensionMismatch("martingale_exponent_completed: lambda dimension");
  }
  VecX<Scalar> y = solve(state.gram_factor(), state.s());
  VecX<Scalar> diff = lambda - y;
  MatX<Scalar> gram = state.gram_matrix();
  return Scalar(0.5) * state.s().dot(y) -
         Scalar(0.5) * diff.dot(gram * diff) +
         Scalar(0.5) * lambda.dot(state.gamma().mat() * lambda);
}

/// KL divergence between Gaussians N(mean, sigma_rho) and N(0, sigma_pi):
///   ½ [ tr(Σ_π⁻¹ Σ_ρ) - d + meanᵀ Σ_π⁻¹ mean + log det Σ_π - log det Σ_ρ ].
template <typename Scalar>
Scalar kl_gaussian(const VecX<Scalar>& mean, const SymMatrix<Scalar>& sigma_rho,
                   const SymMatrix<Scalar>& sigma_pi) {
  const Index d = mean.size();
  if (sigma_rho.dim() != d || sigma_pi.dim() != d) {
    throw DimensionMismatch("kl_gaussian: dimension mismatch");
  }
  CholFactor<Scalar> pi_chol = cholesky(sigma_pi);
  CholFactor<Scalar> rho_chol = cholesky(sigma_rho);
  // tr(Σ_π⁻¹ Σ_ρ) = ‖L_π⁻¹ L_ρ‖_F².
  MatX<Scalar> w = pi_chol.lower()
                       .template triangularView<Eigen::Lower>()
                       .solve(rho_chol.lower());
  Scalar trace_term = w.squaredNorm();
  Scalar mean_term = quad_form_inv(pi_chol, mean);
  return Scalar(0.5) * (trace_term - static_cast<Scalar>(d) + mean_term +
                        pi_chol.logdet() - rho_chol.logdet());
}

/// KL divergence between uniform distributions on nested ellipsoids:
///   ½ log( det Σ_π / det Σ_ρ ),  defined only when supp ρ ⊆ supp π.
template <typename Scalar>
Scalar kl_uniform_ellipsoids(const Ellipsoid<Scalar>& rho,
                             const Ellipsoid<Scalar>& pi,
                             Scalar tol = Scalar(1e-9)) {
  if (!ellipsoid_contains(pi, rho, tol)) {
    throw NotContained(
        "kl_uniform_ellipsoids: rho support is not inside pi support");
  }
  return Scalar(0.5) *
         (pi.shape_factor().logdet() - rho.shape_factor().logdet());
}

/// Second moment of the uniform distribution on a centered ellipsoid with
/// the given shape: shape / (d + 2).
template <typename Scalar>
SymMatrix<Scalar> uniform_ellipsoid_second_moment(
    const SymMatrix<Scalar>& shape) {
  return (Scalar(1) / static_cast<Scalar>(shape.dim() + 2)) * shape;
}

template <typename Scalar>
struct BernsteinEllipsoids {
  Ellipsoid<Scalar> rho;  ///< data ellipsoid, centered at the scaled estimate
  Ellipsoid<Scalar> pi;   ///< reference ellipsoid, centered at the origin
};

/// The two ellipsoids whose containment certifies the variance-sensitive
/// radius:
///   rho: shape (d+2)(V_t+Γ)⁻¹, center (1+α)⁻¹ (V_t+Γ)⁻¹ s / σ_{var,ε}
///   pi:  shape e⁻¹(d+2) V⁻¹,   center 0
/// Both live at the variance-normalized scale, where α is defined.
/// Whenever the burn-in condition holds, rho ⊆ pi.
template <typename Scalar>
BernsteinEllipsoids<Scalar> bernstein_ellipsoids(
    const MartingaleState<Scalar>& state, const BernsteinParams<Scalar>& p) {
  p.validate();
  const Index d = state.dim();
  const Scalar d_plus_2 = static_cast<Scalar>(d + 2);
  const Scalar sigma_eps = std::sqrt(p.sigma_var_eps_sq());
  Scalar alpha = bernstein_alpha(state, p.v, p.nu, p.sigma_var_eps_sq());

  MatX<Scalar> gram_inv =
      detail::inverse_from_factor(state.gram_factor());
  VecX<Scalar> center = solve(state.gram_factor(), state.s()) /
                        ((Scalar(1) + alpha) * sigma_eps);
  Ellipsoid<Scalar> rho(std::move(center),
                        SymMatrix<Scalar>(d_plus_2 * gram_inv));

  MatX<Scalar> v_inv = detail::inverse_from_factor(cholesky(p.v));
  Ellipsoid<Scalar> pi(
      VecX<Scalar>::Zero(d),
      SymMatrix<Scalar>(d_plus_2 / Scalar(std::numbers::e) * v_inv));
  return {std::move(rho), std::move(pi)};
}

/// Scalar sufficient condition for the containment above:
///   ( √(d+2)/(1+ν) + (1+α)⁻¹ ‖s‖_{(V+Γ)⁻¹V(V+Γ)⁻¹} / σ_{var,ε} )²
///     <= e⁻¹ (d+2).
/// Conservative: when it holds (and the burn-in does), containment holds.
template <typename Scalar>
bool alpha_sufficient_condition(const MartingaleState<Scalar>& state,
                                const BernsteinParams<Scalar>& p) {
  const Scalar d_plus_2 = static_cast<Scalar>(state.dim() + 2);
  Scalar alpha = bernstein_alpha(state, p.v, p.nu, p.sigma_var_eps_sq());
  Scalar cross_norm =
      std::sqrt(state.cross_norm_sq(p.v) / p.sigma_var_eps_sq());
  Scalar lhs = std::sqrt(d_plus_2) / (Scalar(1) + p.nu) +
               cross_norm / (Scalar(1) + alpha);
  return lhs * lhs <= d_plus_2 / Scalar(std::numbers::e);
}

/// Variance-sensitive radius computable without observing the noise
/// process: alpha is controlled through the sub-Gaussian radius
/// (proxy b_w², same δ), so the combined failure probability is 2δ and
/// the report is flagged delta_inflated.
///   ‖s‖_{(V+Γ)⁻¹V(V+Γ)⁻¹} <= √λ_max((V+Γ)⁻¹V) · radius₂,
/// with λ_max from the generalized eigenproblem V z = λ (V+Γ) z.
template <typename Scalar>
BoundReport<Scalar> deployable_bernstein_radius_sq(
    const MartingaleState<Scalar>& state, const BernsteinParams<Scalar>& p) {
  detail::require_matching_gamma(state, p.gamma);
  BurninStatus<Scalar> bs = burnin_check(state, p);
  if (!bs.ok()) {
    throw BurninViolated(bs.data_ok, bs.static_ok,
                         static_cast<double>(bs.data_margin),
                         static_cast<double>(bs.static_margin));
  }
  SubGaussianParams<Scalar> sub{p.b_w * p.b_w, p.delta, p.gamma};
  BoundReport<Scalar> sub_rep = subgaussian_radius_sq(state, sub);

  Eigen::GeneralizedSelfAdjointEigenSolver<MatX<Scalar>> ges(
      p.v.mat(), state.gram_matrix(), Eigen::EigenvaluesOnly);
  Scalar lam_max = ges.eigenvalues().maxCoeff();

  const Scalar sqrt_e = std::sqrt(Scalar(std::numbers::e));
  const Scalar d_plus_2 = static_cast<Scalar>(state.dim() + 2);
  Scalar cross_bound =
      std::sqrt(std::max(lam_max, Scalar(0)) * *sub_rep.radius_sq /
                p.sigma_var_eps_sq());
  Scalar alpha = std::max(sqrt_e * (Scalar(1) + p.nu) * cross_bound /
                                  (p.nu * std::sqrt(d_plus_2)) -
                              Scalar(1),
                          Scalar(0));

  CholFactor<Scalar> v_chol = cholesky(p.v);
  BoundReport<Scalar> rep;
  rep.alpha = alpha;
  rep.leading_factor = leading_factor(alpha, p.eps);
  rep.logdet_ratio = state.gram_logdet() - v_chol.logdet();
  rep.radius_sq = rep.leading_factor * p.sigma_var_sq *
                  (rep.logdet_ratio + Scalar(2) * detail::log_inv(p.delta));
  rep.self_norm_sq = state.self_norm_sq();
  rep.data_margin = bs.data_margin;
  rep.static_margin = bs.static_margin;
  rep.data_ok = bs.data_ok;
  rep.static_ok = bs.static_ok;
  rep.delta_inflated = true;
  return rep;
}

}  // namespace snm

#endif  // SNM_BOUNDS_HPP
