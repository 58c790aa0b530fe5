#ifndef SNM_SIMULATE_HPP
#define SNM_SIMULATE_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "snm/bounds.hpp"
#include "snm/io.hpp"
#include "snm/martingale.hpp"
#include "snm/rng.hpp"
#include "snm/stats.hpp"
#include "snm/types.hpp"

namespace snm {

// ---------------------------------------------------------------------------
// Noise models: bounded, conditionally symmetric weight distributions with
// exact variance constants.
// ---------------------------------------------------------------------------

enum class NoiseKind { RademacherScaled, TwoPoint, TruncatedGaussian, Uniform };

template <typename Scalar>
struct NoiseModel {
  NoiseKind kind = NoiseKind::RademacherScaled;
  Scalar b = Scalar(1);  ///< almost-sure bound on |W|
  Scalar p = Scalar(1);  ///< two_point: P(W = +b) = P(W = -b) = p/2
  Scalar s = Scalar(1);  ///< truncated_gaussian: scale of the base Gaussian

  /// W = ±b with equal probability.
  static NoiseModel rademacher_scaled(Scalar b) {
    NoiseModel m;
    m.kind = NoiseKind::RademacherScaled;
    m.b = b;
    return m;
  }

  /// W = ±b with probability p/2 each, 0 otherwise. Realizes a conditional
  /// variance p·b² far below the sub-Gaussian proxy b² when p is small.
  static NoiseModel two_point(Scalar p, Scalar b) {
    NoiseModel m;
    m.kind = NoiseKind::TwoPoint;
    m.b = b;
    m.p = p;
    return m;
  }

  /// W = s·Z conditioned on |s·Z| <= b, Z standard normal.
  static NoiseModel truncated_gaussian(Scalar s, Scalar b) {
    NoiseModel m;
    m.kind = NoiseKind::TruncatedGaussian;
    m.b = b;
    m.s = s;
    return m;
  }

  /// W uniform on [-b, b].
  static NoiseModel uniform(Scalar b) {
    NoiseModel m;
    m.kind = NoiseKind::Uniform;
    m.b = b;
    return m;
  }

  void validate() const {
    if (!(b > Scalar(0))) {
      throw std::invalid_argument("NoiseModel: b must be > 0");
    }
    if (kind == NoiseKind::TwoPoint && (!(p > Scalar(0)) || p > Scalar(1))) {
      throw std::invalid_argument("NoiseModel: two_point needs p in (0,1]");
    }
    if (kind == NoiseKind::TruncatedGaussian && !(s > Scalar(0))) {
      throw std::invalid_argument(
          "NoiseModel: truncated_gaussian needs s > 0");
    }
  }

  Scalar b_w() const { return b; }

  /// Exact conditional variance of W.
  Scalar sigma_var_sq() const {
    switch (kind) {
      case NoiseKind::RademacherScaled:
        return b * b;
      case NoiseKind::TwoPoint:
        return p * b * b;
      case NoiseKind::TruncatedGaussian: {
        // Var of N(0, s²) truncated to [-b, b]:
        //   s²(1 - 2βφ(β)/(2Φ(β) - 1)),  β = b/s.
        Scalar beta = b / s;
        Scalar num = Scalar(2) * beta * normal_pdf(beta);
        Scalar den = Scalar(2) * normal_cdf(beta) - Scalar(1);
        return s * s * (Scalar(1) - num / den);
      }
      case NoiseKind::Uniform:
        return b * b / Scalar(3);
    }
    throw std::logic_error("NoiseModel: unknown kind");
  }

  /// Sub-Gaussian proxy: b² is always valid for a mean-zero variable
  /// bounded by b (Hoeffding).
  Scalar sigma_subg_sq() const { return b * b; }

  Scalar sample(Engine& rng) const {
    switch (kind) {
      case NoiseKind::RademacherScaled: {
        std::uniform_real_distribution<Scalar> u(Scalar(0), Scalar(1));
        return u(rng) < Scalar(0.5) ? b : -b;
      }
      case NoiseKind::TwoPoint: {
        std::uniform_real_distribution<Scalar> u(Scalar(0), Scalar(1));
        Scalar x = u(rng);
        if (x < p / Scalar(2)) return b;
        if (x < p) return -b;
        return Scalar(0);
      }
      case NoiseKind::TruncatedGaussian: {
        std::normal_distribution<Scalar> g(Scalar(0), s);
        Scalar w;
        do {
          w = g(rng);
        } while (std::abs(w) > b);
        return w;
      }
      case NoiseKind::Uniform: {
        std::uniform_real_distribution<Scalar> u(-b, b);
        return u(rng);
      }
    }
    throw std::logic_error("NoiseModel: unknown kind");
  }

  std::string str() const {
    std::string out;
    switch (kind) {
      case NoiseKind::RademacherScaled:
        out = "rademacher_scaled(b=" + fmt_shortest(double(b)) + ")";
        break;
      case NoiseKind::TwoPoint:
        out = "two_point(p=" + fmt_shortest(double(p)) +
              ",b=" + fmt_shortest(double(b)) + ")";
        break;
      case NoiseKind::TruncatedGaussian:
        out = "truncated_gaussian(s=" + fmt_shortest(double(s)) +
              ",b=" + fmt_shortest(double(b)) + ")";
        break;
      case NoiseKind::Uniform:
        out = "uniform(b=" + fmt_shortest(double(b)) + ")";
        break;
    }
    return out;
  }
};

using NoiseModeld = NoiseModel<double>;

// ---------------------------------------------------------------------------
// Covariate models. Covariates are generated before the weight at every
// step, so X_k is measurable with respect to the past (predictability is a
// generation-order discipline, not a checkable property of the values).
// ---------------------------------------------------------------------------

enum class CovariateKind { FixedDesign, RandomSphere, Ar1 };

template <typename Scalar>
struct CovariateModel {
  using Vec = VecX<Scalar>;
  using Mat = MatX<Scalar>;

  CovariateKind kind = CovariateKind::RandomSphere;
  Index d = 0;
  std::vector<Vec> design;      ///< fixed_design: cycled in order
  Scalar radius = Scalar(1);    ///< sphere radius / ar1 clip radius
  Mat transition;               ///< ar1 transition matrix A

  static CovariateModel fixed_design(std::vector<Vec> vectors) {
    CovariateModel m;
    m.kind = CovariateKind::FixedDesign;
    if (vectors.empty()) {
      throw std::invalid_argument("fixed_design: needs at least one vector");
    }
    m.d = vectors.front().size();
    m.design = std::move(vectors);
    Scalar r_sq = Scalar(0);
    for (const Vec& v : m.design) {
      if (v.size() != m.d) {
        throw DimensionMismatch("fixed_design: inconsistent dimensions");
      }
      r_sq = std::max(r_sq, v.squaredNorm());
    }
    m.radius = std::sqrt(r_sq);
    return m;
  }

  static CovariateModel random_sphere(Index d, Scalar r) {
    CovariateModel m;
    m.kind = CovariateKind::RandomSphere;
    m.d = d;
    m.radius = r;
    return m;
  }

  /// X_{k+1} = clip_r(A X_k + ξ_k), ξ standard normal, X_0 = 0; clip_r
  /// rescales onto the ball of radius r whenever the norm exceeds r.
  static CovariateModel ar1(Mat a, Scalar clip_radius) {
    CovariateModel m;
    m.kind = CovariateKind::Ar1;
    if (a.rows() != a.cols()) {
      throw DimensionMismatch("ar1: transition matrix must be square");
    }
    m.d = a.rows();
    m.transition = std::move(a);
    m.radius = clip_radius;
    return m;
  }

  void validate() const {
    if (d <= 0) throw std::invalid_argument("CovariateModel: d must be >= 1");
    if (!(radius > Scalar(0))) {
      throw std::invalid_argument("CovariateModel: radius must be > 0");
    }
    if (kind == CovariateKind::FixedDesign && design.empty()) {
      throw std::invalid_argument("CovariateModel: empty design");
    }
    if (kind == CovariateKind::Ar1 &&
        (transition.rows() != d || transition.cols() != d)) {
      throw DimensionMismatch("CovariateModel: ar1 transition dimension");
    }
  }

  /// Largest possible ‖x‖² under this model.
  Scalar b_x_radius_sq() const { return radius * radius; }

  /// Almost-sure matrix bound: x xᵀ ⪯ (max ‖x‖²)·I for every generated x.
  SymMatrix<Scalar> b_x_sq() const {
    return SymMatrix<Scalar>::Scaled(d, b_x_radius_sq());
  }

  std::string str() const {
    switch (kind) {
      case CovariateKind::FixedDesign:
        return "fixed_design(k=" + std::to_string(design.size()) +
               ",d=" + std::to_string(d) + ")";
      case CovariateKind::RandomSphere:
        return "random_sphere(r=" + fmt_shortest(double(radius)) +
               ",d=" + std::to_string(d) + ")";
      case CovariateKind::Ar1:
        return "ar1(d=" + std::to_string(d) +
               ",clip=" + fmt_shortest(double(radius)) + ")";
    }
    return "";
  }

  /// Stateful generator. One Stream per trajectory.
  class Stream {
   public:
    explicit Stream(const CovariateModel& model)
        : model_(&model), prev_(Vec::Zero(model.d)) {}

    Vec next(Engine& rng) {
      switch (model_->kind) {
        case CovariateKind::FixedDesign: {
          const Vec& x = model_->design[pos_ % model_->design.size()];
          ++pos_;
          return x;
        }
        case CovariateKind::RandomSphere: {
          std::normal_distribution<Scalar> g(Scalar(0), Scalar(1));
          Vec z(model_->d);
          Scalar norm;
          do {
            for (Index i = 0; i < model_->d; ++i) z[i] = g(rng);
            norm = z.norm();
          } while (norm == Scalar(0));
          return Vec((model_->radius / norm) * z);
        }
        case CovariateKind::Ar1: {
          std::normal_distribution<Scalar> g(Scalar(0), Scalar(1));
          Vec xi(model_->d);
          for (Index i = 0; i < model_->d; ++i) xi[i] = g(rng);
          Vec x = model_->transition * prev_ + xi;
          Scalar norm = x.norm();
          if (norm > model_->radius) x *= model_->radius / norm;
          prev_ = x;
          return x;
        }
      }
      throw std::logic_error("CovariateModel: unknown kind");
    }

   private:
    const CovariateModel* model_;
    std::size_t pos_ = 0;
    Vec prev_;
  };

  Stream stream() const { return Stream(*this); }
};

using CovariateModeld = CovariateModel<double>;

// ---------------------------------------------------------------------------
// Trial specification and single-trial runner.
// ---------------------------------------------------------------------------

enum class RuleKind { FixedHorizon, LogdetRatioAtLeast, SelfNormAtLeast };

enum class BoundKind { None, SubGaussian, Bernstein, UnregularizedSubGaussian };

template <typename Scalar>
struct TrialSpec {
  Index d = 0;
  SymMatrix<Scalar> gamma;
  NoiseModel<Scalar> noise;
  CovariateModel<Scalar> covariates;

  RuleKind rule = RuleKind::FixedHorizon;
  Scalar rule_threshold = Scalar(0);  ///< unused for FixedHorizon
  std::int64_t t_max = 0;             ///< horizon / hard cap

  BoundKind bound = BoundKind::None;
  Scalar delta = Scalar(0.05);
  SymMatrix<Scalar> v;  ///< Bernstein reference matrix
  Scalar eps = Scalar(0.1);
  Scalar nu = Scalar(0.1);

  /// Debug knob: multiplies the squared radius in the coverage decision.
  /// 1 = faithful bound; 0 forces certain violation; large forces coverage.
  Scalar radius_scale = Scalar(1);

  std::uint64_t seed = 0;
  bool record_log = false;

  void validate() const {
    if (d <= 0) throw std::invalid_argument("TrialSpec: d must be >= 1");
    noise.validate();
    covariates.validate();
    if (covariates.d != d) {
      throw DimensionMismatch("TrialSpec: covariate dimension != d");
    }
    if (gamma.dim() != d) {
      throw DimensionMismatch("TrialSpec: gamma dimension != d");
    }
    if (t_max < 0) throw std::invalid_argument("TrialSpec: t_max must be >= 0");
    if (bound != BoundKind::None &&
        (!(delta > Scalar(0)) || !(delta < Scalar(1)))) {
      throw std::invalid_argument("TrialSpec: delta must be in (0,1)");
    }
    if (!(radius_scale >= Scalar(0))) {
      throw std::invalid_argument("TrialSpec: radius_scale must be >= 0");
    }
    if (bound == BoundKind::Bernstein) {
      bernstein_params().validate();
    }
  }

  SubGaussianParams<Scalar> subgaussian_params() const {
    return {noise.sigma_subg_sq(), delta, gamma};
  }

  BernsteinParams<Scalar> bernstein_params() const {
    BernsteinParams<Scalar> p;
    p.sigma_var_sq = noise.sigma_var_sq();
    p.b_w = noise.b_w();
    p.b_x_sq = covariates.b_x_sq();
    p.gamma = gamma;
    p.v = v;
    p.eps = eps;
    p.nu = nu;
    p.delta = delta;
    p.delta_inflated = false;
    return p;
  }

  StoppingRule<Scalar> stopping_rule() const {
    switch (rule) {
      case RuleKind::FixedHorizon:
        return StoppingRule<Scalar>::fixed_horizon(t_max);
      case RuleKind::LogdetRatioAtLeast:
        // The rule predicate compares absolute log det(V_t+Γ); a ratio
        // threshold relative to det Γ needs the offset log det Γ.
        return StoppingRule<Scalar>::logdet_at_least(
            rule_threshold + cholesky(gamma).logdet(), t_max);
      case RuleKind::SelfNormAtLeast:
        return StoppingRule<Scalar>::self_norm_at_least(rule_threshold, t_max);
    }
    throw std::logic_error("TrialSpec: unknown rule kind");
  }
};

using TrialSpecd = TrialSpec<double>;

template <typename Scalar>
struct TrialOutcome {
  std::int64_t stopped_t = 0;
  /// Realized left-hand side of the chosen bound (NaN when not evaluable).
  Scalar lhs = std::numeric_limits<Scalar>::quiet_NaN();
  BoundReport<Scalar> report;
  /// True when a radius was produced (burn-in passed / matrices invertible).
  bool evaluable = false;
  /// lhs <= radius_scale · radius²; false whenever not evaluable.
  bool covered = false;
  MartingaleState<Scalar> state;
};

using TrialOutcomed = TrialOutcome<double>;

/// Simulates one trajectory to the stopping time and evaluates the chosen
/// bound on the final state. Burn-in failures (Bernstein) and a singular
/// V_t (unregularized bound) are counted outcomes, not aborts.
template <typename Scalar>
TrialOutcome<Scalar> run_trial(const TrialSpec<Scalar>& spec, Engine& rng) {
  spec.validate();
  typename CovariateModel<Scalar>::Stream stream = spec.covariates.stream();
  auto next = [&]() -> std::optional<std::pair<VecX<Scalar>, Scalar>> {
    VecX<Scalar> x = stream.next(rng);  // covariate first: X_k predictable
    Scalar w = spec.noise.sample(rng);
    return std::make_pair(std::move(x), w);
  };

  TrialOutcome<Scalar> out{
      0, std::numeric_limits<Scalar>::quiet_NaN(), {}, false, false,
      run_until<Scalar>(next, spec.stopping_rule(), spec.d, spec.gamma,
                        spec.record_log)};
  out.stopped_t = out.state.t();

  switch (spec.bound) {
    case BoundKind::None:
      return out;
    case BoundKind::SubGaussian:
      out.report = subgaussian_radius_sq(out.state, spec.subgaussian_params());
      break;
    case BoundKind::Bernstein:
      out.report = try_bernstein_radius_sq(out.state, spec.bernstein_params());
      break;
    case BoundKind::UnregularizedSubGaussian:
      try {
        out.report =
            unregularized_deviation_bound(out.state, spec.subgaussian_params());
      } catch (const NotPositiveDefinite&) {
        // V_t not yet invertible: the bound is not evaluable at this
        // stopping time; counted like a burn-in failure by harnesses.
        out.report = BoundReport<Scalar>{};
        out.report.radius_sq.reset();
        out.report.burnin_ok = false;
        out.report.data_ok = false;
      }
      break;
  }

  out.lhs = out.report.self_norm_sq;
  out.evaluable = out.report.radius_sq.has_value();
  out.covered =
      out.evaluable && out.lhs <= spec.radius_scale * *out.report.radius_sq;
  return out;
}

/// Deterministic replay: the spec's own seed drives the trajectory.
template <typename Scalar>
TrialOutcome<Scalar> run_trial(const TrialSpec<Scalar>& spec) {
  Engine rng = make_engine(spec.seed);
  return run_trial(spec, rng);
}

}  // namespace snm

#endif  // SNM_SIMULATE_HPP
