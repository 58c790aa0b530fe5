#ifndef SNM_EXPERIMENTS_HPP
#define SNM_EXPERIMENTS_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "snm/bounds.hpp"
#include "snm/io.hpp"
#include "snm/parallel.hpp"
#include "snm/simulate.hpp"
#include "snm/verification.hpp"

namespace snm {

// ---------------------------------------------------------------------------
// Ridge regression.
// ---------------------------------------------------------------------------

template <typename Scalar>
struct LinearModel {
  VecX<Scalar> theta_star;
  NoiseModel<Scalar> noise;  ///< Y_k = ⟨theta_star, X_k⟩ + W_k
};

using LinearModeld = LinearModel<double>;

/// Ridge estimate (V_t+Γ)⁻¹ Σ Y_k X_k from a state whose *weights are the
/// responses*: feed observe(x_k, y_k) rather than the (unobservable) noise.
/// The same accumulator then holds Σ Y_k X_k in s() and the Gram matrix in
/// gram_matrix().
template <typename Scalar>
VecX<Scalar> ridge_estimate(const MartingaleState<Scalar>& ystate) {
  return solve(ystate.gram_factor(), ystate.s());
}

/// Confidence set {θ : ‖θ - θ̂‖²_{V_t+Γ} <= radius²} as an ellipsoid with
/// shape radius²·(V_t+Γ)⁻¹. Throws BurninViolated when the report carries
/// no radius because burn-in failed, and NotPositiveDefinite when the
/// radius is zero (a degenerate point is rejected, not represented).
template <typename Scalar>
Ellipsoid<Scalar> confidence_ellipsoid(const MartingaleState<Scalar>& state,
                                       const BoundReport<Scalar>& report,
                                       const VecX<Scalar>& theta_hat) {
  if (!report.burnin_ok || !report.radius_sq) {
    throw BurninViolated(report.data_ok, report.static_ok,
                         static_cast<double>(report.data_margin),
                         static_cast<double>(report.static_margin));
  }
  if (theta_hat.size() != state.dim()) {
    throw DimensionMismatch("confidence_ellipsoid: center dimension");
  }
  MatX<Scalar> shape =
      *report.radius_sq * detail::inverse_from_factor(state.gram_factor());
  return Ellipsoid<Scalar>(theta_hat, SymMatrix<Scalar>(shape));
}

// ---------------------------------------------------------------------------
// Linear bandit (optimism with a plug-in radius).
// ---------------------------------------------------------------------------

template <typename Scalar>
struct BanditEnv {
  std::vector<VecX<Scalar>> arms;
  VecX<Scalar> theta_star;
  NoiseModel<Scalar> noise;

  void validate() const {
    if (arms.empty()) throw std::invalid_argument("BanditEnv: no arms");
    Index d = theta_star.size();
    for (const auto& a : arms) {
      if (a.size() != d) throw DimensionMismatch("BanditEnv: arm dimension");
    }
    noise.validate();
  }

  Index dim() const { return theta_star.size(); }

  Scalar best_value() const {
    Scalar best = -std::numeric_limits<Scalar>::infinity();
    for (const auto& a : arms) best = std::max(best, theta_star.dot(a));
    return best;
  }

  Scalar b_x_radius_sq() const {
    Scalar r = Scalar(0);
    for (const auto& a : arms) r = std::max(r, a.squaredNorm());
    return r;
  }
};

using BanditEnvd = BanditEnv<double>;

enum class ProviderKind { SubGaussian, Bernstein, Fixed };

/// Which radius the optimism rule used at a given step. The Bernstein
/// provider reports BernsteinFallback while burn-in has not yet passed and
/// it is still riding on the sub-Gaussian radius.
enum class ProviderMode { SubGaussian, Bernstein, BernsteinFallback, Fixed };

inline const char* provider_mode_name(ProviderMode m) {
  switch (m) {
    case ProviderMode::SubGaussian: return "subgaussian";
    case ProviderMode::Bernstein: return "bernstein";
    case ProviderMode::BernsteinFallback: return "bernstein_fallback";
    case ProviderMode::Fixed: return "fixed";
  }
  return "unknown";
}

template <typename Scalar>
struct RadiusProvider {
  ProviderKind kind = ProviderKind::Fixed;
  SymMatrix<Scalar> gamma;  ///< regularizer of the algorithm's Gram state
  Scalar sigma_subg_sq = Scalar(1);
  Scalar delta = Scalar(0.05);
  BernsteinParams<Scalar> bparams;  ///< Bernstein only (gamma == bparams.gamma)
  Scalar fixed_radius = Scalar(1);  ///< Fixed only; may be +infinity

  static RadiusProvider sub_gaussian(SymMatrix<Scalar> gamma, Scalar sigma_sq,
                                     Scalar delta) {
    RadiusProvider p;
    p.kind = ProviderKind::SubGaussian;
    p.gamma = std::move(gamma);
    p.sigma_subg_sq = sigma_sq;
    p.delta = delta;
    return p;
  }

  /// Observable-statistics Bernstein radius (alpha controlled through the
  /// sub-Gaussian bound, total failure probability 2δ — surfaced in the
  /// trace as delta_inflated).
  static RadiusProvider bernstein(BernsteinParams<Scalar> params) {
    RadiusProvider p;
    p.kind = ProviderKind::Bernstein;
    p.gamma = params.gamma;
    p.bparams = std::move(params);
    return p;
  }

  static RadiusProvider fixed(SymMatrix<Scalar> gamma, Scalar radius) {
    RadiusProvider p;
    p.kind = ProviderKind::Fixed;
    p.gamma = std::move(gamma);
    p.fixed_radius = radius;
    return p;
  }
};

using RadiusProviderd = RadiusProvider<double>;

struct RegretStep {
  std::int64_t step = 0;
  Index arm = 0;
  double regret = 0.0;
  double cum_regret = 0.0;
  double radius = 0.0;
  ProviderMode mode = ProviderMode::Fixed;
};

struct RegretTrace {
  std::vector<RegretStep> steps;
  bool delta_inflated = false;
  std::uint64_t seed = 0;

  double final_cum_regret() const {
    return steps.empty() ? 0.0 : steps.back().cum_regret;
  }
};

/// CSV schema: step,arm,regret,cum_regret,radius,provider_mode.
inline void write_regret_csv(std::ostream& os, const RegretTrace& trace) {
  os << "step,arm,regret,cum_regret,radius,provider_mode\n";
  for (const RegretStep& st : trace.steps) {
    os << st.step << ',' << st.arm << ',' << fmt_full(st.regret) << ','
       << fmt_full(st.cum_regret) << ',' << fmt_full(st.radius) << ','
       << provider_mode_name(st.mode) << '\n';
  }
}

/// Optimism loop: at each step pick the arm maximizing
/// ⟨θ̂, a⟩ + radius·‖a‖_{(V_t+Γ)⁻¹} (exact ties go to the lowest index),
/// observe y = ⟨θ⋆, a⟩ + w, update. An infinite fixed radius degenerates
/// to pure max-uncertainty arm selection (the estimate term is dropped
/// rather than multiplying 0·∞). Deterministic per seed.
template <typename Scalar>
RegretTrace oful_run(const BanditEnv<Scalar>& env,
                     const RadiusProvider<Scalar>& provider,
                     std::int64_t horizon, std::uint64_t seed) {
  env.validate();
  const Index d = env.dim();
  if (provider.gamma.dim() != d) {
    throw DimensionMismatch("oful_run: regularizer dimension");
  }
  MartingaleState<Scalar> ystate(d, provider.gamma);
  if (!ystate.gram_pd()) {
    throw std::invalid_argument(
        "oful_run: needs a positive definite regularizer");
  }
  if (provider.kind == ProviderKind::Bernstein) provider.bparams.validate();

  Engine rng = make_engine(seed);
  const Scalar best = env.best_value();
  RegretTrace trace;
  trace.seed = seed;
  trace.delta_inflated = provider.kind == ProviderKind::Bernstein;
  trace.steps.reserve(static_cast<std::size_t>(horizon));

  double cum = 0.0;
  for (std::int64_t t = 1; t <= horizon; ++t) {
    Scalar radius;
    ProviderMode mode;
    switch (provider.kind) {
      case ProviderKind::SubGaussian: {
        SubGaussianParams<Scalar> sp{provider.sigma_subg_sq, provider.delta,
                                     provider.gamma};
        radius = std::sqrt(*subgaussian_radius_sq(ystate, sp).radius_sq);
        mode = ProviderMode::SubGaussian;
        break;
      }
      case ProviderKind::Bernstein: {
        if (burnin_check(ystate, provider.bparams).ok()) {
          radius = std::sqrt(
              *deployable_bernstein_radius_sq(ystate, provider.bparams)
                   .radius_sq);
          mode = ProviderMode::Bernstein;
        } else {
          // Valid at every step: the sub-Gaussian radius with the
          // almost-sure bound as proxy.
          SubGaussianParams<Scalar> sp{provider.bparams.b_w *
                                           provider.bparams.b_w,
                                       provider.bparams.delta, provider.gamma};
          radius = std::sqrt(*subgaussian_radius_sq(ystate, sp).radius_sq);
          mode = ProviderMode::BernsteinFallback;
        }
        break;
      }
      case ProviderKind::Fixed:
      default:
        radius = provider.fixed_radius;
        mode = ProviderMode::Fixed;
        break;
    }

    VecX<Scalar> theta_hat = ridge_estimate(ystate);
    const bool unbounded = std::isinf(static_cast<double>(radius));
    Index pick = 0;
    Scalar pick_score = -std::numeric_limits<Scalar>::infinity();
    for (Index a = 0; a < static_cast<Index>(env.arms.size()); ++a) {
      Scalar unc = std::sqrt(quad_form_inv(ystate.gram_factor(), env.arms[a]));
      Scalar score =
          unbounded ? unc : theta_hat.dot(env.arms[a]) + radius * unc;
      if (score > pick_score) {
        pick_score = score;
        pick = a;
      }
    }

    const VecX<Scalar>& arm = env.arms[static_cast<std::size_t>(pick)];
    Scalar w = env.noise.sample(rng);
    ystate.observe(arm, env.theta_star.dot(arm) + w);

    double inst = static_cast<double>(best - env.theta_star.dot(arm));
    cum += inst;
    trace.steps.push_back({t, pick, inst, cum, static_cast<double>(radius),
                           mode});
  }
  return trace;
}

// ---------------------------------------------------------------------------
// Ridge coverage: does the confidence ellipsoid contain theta_star?
// ---------------------------------------------------------------------------

struct RidgeCoverageResult {
  CoverageReport report;  ///< violations = theta_star outside the ellipsoid
  /// Trials where the ellipsoid test disagreed with the self-normalized
  /// test (only comparable when gamma = 0, where the two are the same
  /// event by the error identity). Must be 0.
  std::int64_t n_agreement_mismatch = 0;
  /// Largest ‖(θ̂-θ⋆) - (V+Γ)⁻¹(S-Γθ⋆)‖ seen across all paths.
  double max_error_identity_residual = 0.0;
};

/// Simulates Y_k = ⟨θ⋆,X_k⟩ + W_k paths, keeping the response accumulator
/// and the noise accumulator side by side; evaluates the spec's bound on
/// the noise state, builds the confidence ellipsoid around the ridge
/// estimate and tallies how often it contains θ⋆. With gamma = 0 the
/// containment event coincides exactly with ‖S‖²_{V⁻¹} <= radius², which
/// is cross-checked per trial.
template <typename Scalar>
RidgeCoverageResult ridge_coverage(const TrialSpec<Scalar>& spec,
                                   const VecX<Scalar>& theta_star,
                                   std::int64_t n_trials, int threads = 1) {
  spec.validate();
  if (theta_star.size() != spec.d) {
    throw DimensionMismatch("ridge_coverage: theta_star dimension");
  }
  const bool zero_gamma = spec.gamma.is_zero();

  struct Slot {
    std::uint8_t evaluable = 0;
    std::uint8_t covered = 0;
    std::uint8_t mismatch = 0;
    double residual = 0.0;
  };
  std::vector<Slot> slot(static_cast<std::size_t>(n_trials));

  parallel_for(n_trials, threads, [&](std::int64_t i) {
    TrialSpec<Scalar> ts = spec;
    ts.seed = derive_seed(spec.seed, static_cast<std::uint64_t>(i));
    Engine rng = make_engine(ts.seed);
    typename CovariateModel<Scalar>::Stream stream = ts.covariates.stream();

    MartingaleState<Scalar> noise_state(ts.d, ts.gamma);
    MartingaleState<Scalar> ystate(ts.d, ts.gamma);
    for (std::int64_t t = 0; t < ts.t_max; ++t) {
      VecX<Scalar> x = stream.next(rng);
      Scalar w = ts.noise.sample(rng);
      noise_state.observe(x, w);
      ystate.observe(x, theta_star.dot(x) + w);
    }

    Slot& sl = slot[static_cast<std::size_t>(i)];
    BoundReport<Scalar> rep;
    switch (ts.bound) {
      case BoundKind::SubGaussian:
        rep = subgaussian_radius_sq(noise_state, ts.subgaussian_params());
        break;
      case BoundKind::Bernstein:
        rep = try_bernstein_radius_sq(noise_state, ts.bernstein_params());
        break;
      default:
        throw std::invalid_argument(
            "ridge_coverage: bound must be subgaussian or bernstein");
    }
    if (!rep.radius_sq) return;  // burn-in failure: slot stays not-evaluable
    sl.evaluable = 1;

    VecX<Scalar> theta_hat = ridge_estimate(ystate);
    VecX<Scalar> predicted =
        solve(noise_state.gram_factor(),
              VecX<Scalar>(noise_state.s() - ts.gamma.mat() * theta_star));
    sl.residual =
        static_cast<double>((theta_hat - theta_star - predicted).norm());

    Ellipsoid<Scalar> ell = confidence_ellipsoid(noise_state, rep, theta_hat);
    bool covered_theta = ell.contains_point(theta_star);
    sl.covered = covered_theta ? 1 : 0;
    if (zero_gamma) {
      bool covered_s = rep.self_norm_sq <= *rep.radius_sq;
      if (covered_s != covered_theta) sl.mismatch = 1;
    }
  });

  RidgeCoverageResult res;
  res.report.n_trials = n_trials;
  for (const Slot& sl : slot) {
    if (!sl.evaluable) {
      ++res.report.n_burnin_failures;
      continue;
    }
    if (!sl.covered) ++res.report.n_violations;
    if (sl.mismatch) ++res.n_agreement_mismatch;
    res.max_error_identity_residual =
        std::max(res.max_error_identity_residual, sl.residual);
  }
  std::int64_t n_eff = res.report.n_effective();
  if (n_eff > 0) {
    res.report.failure_rate = static_cast<double>(res.report.n_violations) /
                              static_cast<double>(n_eff);
    res.report.clopper_pearson_95 =
        clopper_pearson(res.report.n_violations, n_eff, 0.95);
  }
  return res;
}

}  // namespace snm

#endif  // SNM_EXPERIMENTS_HPP
