#ifndef SNM_VERIFICATION_HPP
#define SNM_VERIFICATION_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "snm/bounds.hpp"
#include "snm/ellipsoid.hpp"
#include "snm/parallel.hpp"
#include "snm/rng.hpp"
#include "snm/simulate.hpp"
#include "snm/stats.hpp"

namespace snm {

// ---------------------------------------------------------------------------
// Coverage.
// ---------------------------------------------------------------------------

struct CoverageReport {
  std::int64_t n_trials = 0;
  std::int64_t n_violations = 0;        ///< lhs > radius among evaluable
  std::int64_t n_burnin_failures = 0;   ///< excluded from the failure rate
  double failure_rate = 0.0;
  std::pair<double, double> clopper_pearson_95 = {0.0, 1.0};

  std::int64_t n_effective() const { return n_trials - n_burnin_failures; }
};

/// Runs n_trials independent trials of the spec (trial i seeded by
/// derive_seed(spec.seed, i)) and tallies bound violations. Burn-in
/// failures are reported separately, never counted as violations; the
/// failure rate and its exact binomial CI are over the remaining trials.
/// Slot-per-trial aggregation makes the result independent of `threads`.
template <typename Scalar>
CoverageReport coverage_experiment(const TrialSpec<Scalar>& spec,
                                   std::int64_t n_trials, int threads = 1) {
  if (n_trials < 1) {
    throw std::invalid_argument("coverage_experiment: n_trials must be >= 1");
  }
  spec.validate();
  enum : std::uint8_t { kCovered = 0, kViolated = 1, kBurninFailed = 2 };
  std::vector<std::uint8_t> slot(static_cast<std::size_t>(n_trials));
  parallel_for(n_trials, threads, [&](std::int64_t i) {
    TrialSpec<Scalar> ts = spec;
    ts.seed = derive_seed(spec.seed, static_cast<std::uint64_t>(i));
    TrialOutcome<Scalar> out = run_trial(ts);
    slot[static_cast<std::size_t>(i)] =
        !out.evaluable ? kBurninFailed : (out.covered ? kCovered : kViolated);
  });

  CoverageReport rep;
  rep.n_trials = n_trials;
  for (std::uint8_t code : slot) {
    if (code == kViolated) ++rep.n_violations;
    if (code == kBurninFailed) ++rep.n_burnin_failures;
  }
  std::int64_t n_eff = rep.n_effective();
  if (n_eff > 0) {
    rep.failure_rate =
        static_cast<double>(rep.n_violations) / static_cast<double>(n_eff);
    rep.clopper_pearson_95 = clopper_pearson(rep.n_violations, n_eff, 0.95);
  } else {
    rep.failure_rate = 0.0;
    rep.clopper_pearson_95 = {0.0, 1.0};
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Exponential-supermartingale check (restricted lambda domain).
// ---------------------------------------------------------------------------

struct MeanStdErr {
  double mean = 0.0;
  double std_err = 0.0;
  std::int64_t n = 0;
};

namespace detail {

template <typename Scalar>
void require_lambda_admissible(const VecX<Scalar>& lambda,
                               const TrialSpec<Scalar>& spec, Scalar eps) {
  if (lambda.size() != spec.d) {
    throw DimensionMismatch("check_supermartingale: lambda dimension");
  }
  if (!(eps > Scalar(0)) || !(eps < Scalar(1))) {
    throw std::invalid_argument("check_supermartingale: eps must be in (0,1)");
  }
  Scalar b_w = spec.noise.b_w();
  Scalar q = b_w * b_w * lambda.dot(spec.covariates.b_x_sq().mat() * lambda);
  if (q > eps * eps * (Scalar(1) + Scalar(1e-12))) {
    throw LambdaOutOfDomain(
        "lambda outside the admissible set: ||lambda||^2 weighted by "
        "B_W^2 B_X^2 is " +
        std::to_string(static_cast<double>(q)) + " > eps^2 = " +
        std::to_string(static_cast<double>(eps * eps)));
  }
}

template <typename Scalar>
Scalar supermartingale_value(const VecX<Scalar>& lambda,
                             const MartingaleState<Scalar>& state,
                             Scalar sigma_var_eps_sq) {
  Scalar lin = lambda.dot(state.s());
  Scalar quad = lambda.dot(state.v_sum() * lambda);
  return std::exp(lin - Scalar(0.5) * sigma_var_eps_sq * quad);
}

}  // namespace detail

/// Monte Carlo estimate of E exp(⟨λ,S_τ⟩ - σ²_{var,ε}‖λ‖²_{V_τ}/2) over n
/// independent trajectories stopped by the spec's rule. The exponential is
/// a supermartingale only on the restricted set ‖λ‖²_{B_W²B_X²} <= ε²;
/// outside it the call refuses with LambdaOutOfDomain.
template <typename Scalar>
MeanStdErr check_supermartingale(const VecX<Scalar>& lambda,
                                 const TrialSpec<Scalar>& spec, Scalar eps,
                                 std::int64_t n, int threads = 1) {
  detail::require_lambda_admissible(lambda, spec, eps);
  if (n < 1) {
    throw std::invalid_argument("check_supermartingale: n must be >= 1");
  }
  Scalar sigma_eps_sq = spec.noise.sigma_var_sq() / (Scalar(1) - eps);
  TrialSpec<Scalar> base = spec;
  base.bound = BoundKind::None;

  std::vector<Scalar> slot(static_cast<std::size_t>(n));
  parallel_for(n, threads, [&](std::int64_t i) {
    TrialSpec<Scalar> ts = base;
    ts.seed = derive_seed(spec.seed, static_cast<std::uint64_t>(i));
    TrialOutcome<Scalar> out = run_trial(ts);
    slot[static_cast<std::size_t>(i)] =
        detail::supermartingale_value(lambda, out.state, sigma_eps_sq);
  });

  MeanAccumulator acc;
  for (Scalar v : slot) acc.add(static_cast<double>(v));
  return {acc.mean(), acc.std_err(), n};
}

/// Same estimate for a whole grid of admissible lambdas sharing the n
/// simulated paths (each cell's estimate is unbiased; sharing only
/// correlates cells). Used by the acceptance harness to keep the runtime
/// linear in the number of paths rather than cells.
template <typename Scalar>
std::vector<MeanStdErr> check_supermartingale_grid(
    const std::vector<VecX<Scalar>>& lambdas, const TrialSpec<Scalar>& spec,
    Scalar eps, std::int64_t n, int threads = 1) {
  for (const auto& lambda : lambdas) {
    detail::require_lambda_admissible(lambda, spec, eps);
  }
  if (n < 1) {
    throw std::invalid_argument("check_supermartingale_grid: n must be >= 1");
  }
  Scalar sigma_eps_sq = spec.noise.sigma_var_sq() / (Scalar(1) - eps);
  TrialSpec<Scalar> base = spec;
  base.bound = BoundKind::None;

  const std::size_t m = lambdas.size();
  std::vector<Scalar> slot(static_cast<std::size_t>(n) * m);
  parallel_for(n, threads, [&](std::int64_t i) {
    TrialSpec<Scalar> ts = base;
    ts.seed = derive_seed(spec.seed, static_cast<std::uint64_t>(i));
    TrialOutcome<Scalar> out = run_trial(ts);
    for (std::size_t j = 0; j < m; ++j) {
      slot[static_cast<std::size_t>(i) * m + j] =
          detail::supermartingale_value(lambdas[j], out.state, sigma_eps_sq);
    }
  });

  std::vector<MeanAccumulator> acc(m);
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      acc[j].add(static_cast<double>(slot[static_cast<std::size_t>(i) * m + j]));
    }
  }
  std::vector<MeanStdErr> out(m);
  for (std::size_t j = 0; j < m; ++j) {
    out[j] = {acc[j].mean(), acc[j].std_err(), n};
  }
  return out;
}

// ---------------------------------------------------------------------------
// Uniform-ellipsoid second moment.
// ---------------------------------------------------------------------------

/// Draws n uniform samples from the centered ellipsoid with the given shape
/// and returns the relative Frobenius error of the empirical second moment
/// against shape/(d+2). n = 0 returns 1 (empty-sum convention: the
/// empirical moment is the zero matrix). Sampling is done in fixed-size
/// blocks with per-block derived seeds, so the result does not depend on
/// the thread count.
template <typename Scalar>
double check_second_moment(const SymMatrix<Scalar>& shape, std::int64_t n,
                           std::uint64_t master_seed, int threads = 1) {
  const Index d = shape.dim();
  Ellipsoid<Scalar> ell(VecX<Scalar>::Zero(d), shape);
  constexpr std::int64_t kBlock = 4096;
  const std::int64_t n_blocks = (n + kBlock - 1) / kBlock;

  std::vector<MatX<Scalar>> partial(
      static_cast<std::size_t>(std::max<std::int64_t>(n_blocks, 0)));
  parallel_for(n_blocks, threads, [&](std::int64_t b) {
    Engine rng = make_engine(derive_seed(master_seed, b));
    std::int64_t lo = b * kBlock;
    std::int64_t hi = std::min(n, lo + kBlock);
    MatX<Scalar> sum = MatX<Scalar>::Zero(d, d);
    for (std::int64_t i = lo; i < hi; ++i) {
      VecX<Scalar> u = sample_uniform_ellipsoid(ell, rng);
      sum.noalias() += u * u.transpose();
    }
    partial[static_cast<std::size_t>(b)] = std::move(sum);
  });

  MatX<Scalar> total = MatX<Scalar>::Zero(d, d);
  for (const auto& m : partial) total += m;

  MatX<Scalar> target = shape.mat() / static_cast<Scalar>(d + 2);
  MatX<Scalar> empirical =
      n > 0 ? MatX<Scalar>(total / static_cast<Scalar>(n))
            : MatX<Scalar>(MatX<Scalar>::Zero(d, d));
  return static_cast<double>((empirical - target).norm() / target.norm());
}

// ---------------------------------------------------------------------------
// Containment sufficiency of the variance-sensitive ellipsoid pair.
// ---------------------------------------------------------------------------

template <typename Scalar>
struct ContainmentInstance {
  MartingaleState<Scalar> state;
  BernsteinParams<Scalar> params;
  std::string origin;
};

using ContainmentInstanced = ContainmentInstance<double>;

struct ContainmentReport {
  std::int64_t n_instances = 0;
  std::int64_t n_skipped_burnin = 0;   ///< not admitted; skipped and counted
  std::int64_t n_checked = 0;
  std::int64_t n_contained = 0;
  std::int64_t n_containment_failures = 0;  ///< would falsify the proof step
  std::int64_t n_sufficient = 0;            ///< scalar condition held
  std::int64_t n_sufficient_not_contained = 0;  ///< must stay 0
  std::vector<std::int64_t> failure_indices;

  bool ok() const {
    return n_containment_failures == 0 && n_sufficient_not_contained == 0;
  }
};

/// For every instance passing burn-in, builds the two ellipsoids of the
/// variance-sensitive construction and checks rho ⊆ pi with the exact
/// solver; also evaluates the conservative scalar condition and verifies
/// scalar-sufficient ⟹ contained. Any containment failure falsifies the
/// geometric step of the bound's proof and is reported, never masked.
template <typename Scalar>
ContainmentReport check_alpha_sufficiency(
    const std::vector<ContainmentInstance<Scalar>>& instances) {
  ContainmentReport rep;
  rep.n_instances = static_cast<std::int64_t>(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto& inst = instances[i];
    BurninStatus<Scalar> bs = burnin_check(inst.state, inst.params);
    if (!bs.ok()) {
      ++rep.n_skipped_burnin;
      continue;
    }
    ++rep.n_checked;
    BernsteinEllipsoids<Scalar> pair =
        bernstein_ellipsoids(inst.state, inst.params);
    bool contained = ellipsoid_contains(pair.pi, pair.rho);
    bool sufficient = alpha_sufficient_condition(inst.state, inst.params);
    if (contained) {
      ++rep.n_contained;
    } else {
      ++rep.n_containment_failures;
      rep.failure_indices.push_back(static_cast<std::int64_t>(i));
    }
    if (sufficient) {
      ++rep.n_sufficient;
      if (!contained) ++rep.n_sufficient_not_contained;
    }
  }
  return rep;
}

/// Builds realizable instances by running actual simulations past burn-in.
/// Cycles dimensions, slack parameters (including nu > √e - 1, where the
/// scalar sufficient condition stops being vacuous), noise and covariate
/// models, and the regularizer recipe. Trials failing burn-in are skipped.
template <typename Scalar>
std::vector<ContainmentInstance<Scalar>> generate_admitted_instances(
    const std::vector<Index>& dims, std::int64_t per_dim,
    std::uint64_t master_seed) {
  const Scalar e = Scalar(std::numbers::e);
  const std::vector<Scalar> nus = {Scalar(0.1), Scalar(0.3), Scalar(0.7),
                                   Scalar(0.9)};
  const std::vector<Scalar> epss = {Scalar(0.05), Scalar(0.1), Scalar(0.3)};

  std::vector<ContainmentInstance<Scalar>> out;
  std::uint64_t attempt = 0;
  for (Index d : dims) {
    std::int64_t made = 0;
    std::int64_t tries = 0;
    const std::int64_t max_tries = 40 * per_dim;
    while (made < per_dim && tries < max_tries) {
      std::uint64_t k = attempt++;
      ++tries;
      Scalar nu = nus[k % nus.size()];
      Scalar eps = epss[(k / nus.size()) % epss.size()];

      NoiseModel<Scalar> noise;
      switch (k % 4) {
        case 0: noise = NoiseModel<Scalar>::two_point(Scalar(0.05), 1); break;
        case 1: noise = NoiseModel<Scalar>::rademacher_scaled(1); break;
        case 2: noise = NoiseModel<Scalar>::uniform(1); break;
        default:
          noise = NoiseModel<Scalar>::truncated_gaussian(Scalar(0.6), 1);
      }
      CovariateModel<Scalar> cov =
          (k % 5 == 4)
              ? CovariateModel<Scalar>::ar1(
                    MatX<Scalar>(Scalar(0.5) *
                                 MatX<Scalar>::Identity(d, d)),
                    Scalar(1))
              : CovariateModel<Scalar>::random_sphere(d, Scalar(1));

      // Static condition e(1+ν)²V ⪰ (1+ν)²(d+2)B_W²B_X²/ε with V = cI
      // needs c >= (d+2)b²r²/(εe); 5% headroom keeps the margin positive.
      Scalar b = noise.b_w();
      Scalar r_sq = cov.b_x_radius_sq();
      Scalar c = Scalar(1.05) * static_cast<Scalar>(d + 2) * b * b * r_sq /
                 (eps * e);
      SymMatrix<Scalar> v = SymMatrix<Scalar>::Scaled(d, c);

      Scalar blowup = e * (Scalar(1) + nu) * (Scalar(1) + nu);
      Scalar gamma_scale;
      std::int64_t t_target;
      switch (k % 3) {
        case 0:
          // Regularizer covering the data condition outright.
          gamma_scale = blowup;
          t_target = 5 + static_cast<std::int64_t>(k % 46);
          break;
        case 1:
          gamma_scale = Scalar(1);
          t_target = static_cast<std::int64_t>(
              Scalar(2.5) * static_cast<Scalar>(d) * (blowup - Scalar(1)) * c /
              r_sq);
          break;
        default:
          gamma_scale = Scalar(2);
          t_target = static_cast<std::int64_t>(
              Scalar(2.5) * static_cast<Scalar>(d) *
              std::max(blowup - Scalar(2), Scalar(0.5)) * c / r_sq);
      }

      TrialSpec<Scalar> spec;
      spec.d = d;
      spec.gamma = gamma_scale * v;
      spec.noise = noise;
      spec.covariates = cov;
      spec.rule = RuleKind::FixedHorizon;
      spec.t_max = t_target;
      spec.bound = BoundKind::None;
      spec.v = v;
      spec.eps = eps;
      spec.nu = nu;
      spec.seed = derive_seed(master_seed, k);

      TrialOutcome<Scalar> run = run_trial(spec);
      BernsteinParams<Scalar> params = spec.bernstein_params();
      if (!burnin_check(run.state, params).ok()) continue;
      out.push_back({std::move(run.state), std::move(params),
                     "simulated(d=" + std::to_string(d) + ")"});
      ++made;
    }
  }
  return out;
}

/// Hand-placed instances stressing the containment claim where it is
/// tightest: data and static margins near zero, anisotropic reference
/// matrices, and sums swept from 0 to far beyond the ellipsoid scale
/// (alpha grows linearly, the rho center saturates).
template <typename Scalar>
std::vector<ContainmentInstance<Scalar>> synthetic_adversarial_instances(
    const std::vector<Index>& dims, std::uint64_t master_seed) {
  const Scalar e = Scalar(std::numbers::e);
  const std::vector<Scalar> nus = {Scalar(0.1), Scalar(0.7), Scalar(0.9),
                                   Scalar(1.5)};
  const std::vector<Scalar> magnitudes = {Scalar(0), Scalar(1e-3), Scalar(1),
                                          Scalar(1e3), Scalar(1e6)};
  const Scalar eps = Scalar(0.1);
  std::vector<ContainmentInstance<Scalar>> out;
  std::uint64_t counter = 0;

  for (Index d : dims) {
    Engine rng = make_engine(derive_seed(master_seed, 1000 + d));
    std::normal_distribution<Scalar> g(Scalar(0), Scalar(1));
    for (Scalar nu : nus) {
      Scalar blowup = e * (Scalar(1) + nu) * (Scalar(1) + nu);
      for (int aniso = 0; aniso < 2; ++aniso) {
        // Reference matrix: identity or a rotated spectrum with 10x spread.
        MatX<Scalar> v_mat;
        if (aniso == 0) {
          v_mat = MatX<Scalar>::Identity(d, d);
        } else {
          MatX<Scalar> a(d, d);
          for (Index i = 0; i < d; ++i)
            for (Index j = 0; j < d; ++j) a(i, j) = g(rng);
          Eigen::HouseholderQR<MatX<Scalar>> qr(a);
          MatX<Scalar> q = qr.householderQ();
          VecX<Scalar> eig(d);
          for (Index i = 0; i < d; ++i) {
            eig[i] = Scalar(1) +
                     Scalar(9) * static_cast<Scalar>(i) /
                         static_cast<Scalar>(std::max<Index>(d - 1, 1));
          }
          v_mat = q * eig.asDiagonal() * q.transpose();
        }
        SymMatrix<Scalar> v{v_mat};

        // b_x chosen to sit 0.1% inside the static-condition boundary:
        // e·λ_min(V) >= (d+2) b² r² / ε with b = 1.
        Eigen::SelfAdjointEigenSolver<MatX<Scalar>> es(v.mat());
        Scalar lam_min = es.eigenvalues().minCoeff();
        Scalar r_sq =
            Scalar(0.999) * e * lam_min * eps / static_cast<Scalar>(d + 2);

        for (Scalar gamma_scale : {Scalar(0.2), Scalar(1)}) {
          // Data condition exactly at the boundary (tiny positive slack):
          // V_t = (e(1+ν)² - γ_scale) V (1 + 1e-9).
          Scalar vt_scale =
              std::max(blowup - gamma_scale, Scalar(0)) * (1 + Scalar(1e-9));
          SymMatrix<Scalar> gamma = gamma_scale * v;
          SymMatrix<Scalar> vt = vt_scale * v;

          std::vector<VecX<Scalar>> directions;
          directions.push_back(es.eigenvectors().col(0));
          directions.push_back(es.eigenvectors().col(d - 1));
          VecX<Scalar> rand_dir(d);
          for (Index i = 0; i < d; ++i) rand_dir[i] = g(rng);
          if (rand_dir.norm() > Scalar(0)) rand_dir.normalize();
          directions.push_back(rand_dir);

          for (const VecX<Scalar>& u : directions) {
            for (Scalar mag : magnitudes) {
              VecX<Scalar> s_vec = mag * std::sqrt(lam_min) * u;
              auto state = MartingaleState<Scalar>::from_components(
                  s_vec, vt, gamma, /*t=*/1);
              BernsteinParams<Scalar> params;
              params.sigma_var_sq = Scalar(0.25);
              params.b_w = Scalar(1);
              params.b_x_sq = SymMatrix<Scalar>::Scaled(d, r_sq);
              params.gamma = gamma;
              params.v = v;
              params.eps = eps;
              params.nu = nu;
              params.delta = Scalar(0.05);
              out.push_back({std::move(state), std::move(params),
                             "synthetic(" + std::to_string(counter++) + ")"});
            }
          }
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tightness comparison of the two radii on shared paths.
// ---------------------------------------------------------------------------

struct TightnessRow {
  std::string noise;
  std::string covariates;
  Index d = 0;
  std::int64_t t_max = 0;
  double eps = 0.0;
  double nu = 0.0;
  double delta = 0.0;
  std::int64_t n_trials = 0;
  std::int64_t n_burnin_failures = 0;
  double burnin_failure_rate = 0.0;
  double mean_radius_sq_subgaussian = 0.0;
  /// The Bernstein columns are NaN when no trial passed burn-in.
  double mean_radius_sq_bernstein = 0.0;
  double mean_ratio = 0.0;
  double mean_alpha = 0.0;
};

/// Evaluates both radii on the same simulated paths, cell by cell. The
/// interesting regime is σ²_var ≪ σ²_subG (e.g. sparse two-point noise),
/// where the ratio approaches leading_factor·σ²_var/σ²_subG as the
/// log-determinant terms equalize.
template <typename Scalar>
std::vector<TightnessRow> tightness_comparison(
    const std::vector<TrialSpec<Scalar>>& cells, std::int64_t n_trials,
    int threads = 1) {
  std::vector<TightnessRow> rows;
  rows.reserve(cells.size());
  for (const TrialSpec<Scalar>& cell : cells) {
    cell.validate();
    struct Slot {
      double sub = 0.0;
      double bern = 0.0;
      double alpha = 0.0;
      std::uint8_t admitted = 0;
    };
    std::vector<Slot> slot(static_cast<std::size_t>(n_trials));
    SubGaussianParams<Scalar> sub_p = cell.subgaussian_params();
    BernsteinParams<Scalar> bern_p = cell.bernstein_params();
    parallel_for(n_trials, threads, [&](std::int64_t i) {
      TrialSpec<Scalar> ts = cell;
      ts.bound = BoundKind::None;
      ts.seed = derive_seed(cell.seed, static_cast<std::uint64_t>(i));
      TrialOutcome<Scalar> out = run_trial(ts);
      Slot& sl = slot[static_cast<std::size_t>(i)];
      sl.sub = static_cast<double>(
          *subgaussian_radius_sq(out.state, sub_p).radius_sq);
      BoundReport<Scalar> bern = try_bernstein_radius_sq(out.state, bern_p);
      if (bern.radius_sq) {
        sl.admitted = 1;
        sl.bern = static_cast<double>(*bern.radius_sq);
        sl.alpha = static_cast<double>(bern.alpha);
      }
    });

    TightnessRow row;
    row.noise = cell.noise.str();
    row.covariates = cell.covariates.str();
    row.d = cell.d;
    row.t_max = cell.t_max;
    row.eps = static_cast<double>(cell.eps);
    row.nu = static_cast<double>(cell.nu);
    row.delta = static_cast<double>(cell.delta);
    row.n_trials = n_trials;
    MeanAccumulator sub_acc, bern_acc, ratio_acc, alpha_acc;
    for (const Slot& sl : slot) {
      sub_acc.add(sl.sub);
      if (sl.admitted) {
        bern_acc.add(sl.bern);
        ratio_acc.add(sl.bern / sl.sub);
        alpha_acc.add(sl.alpha);
      } else {
        ++row.n_burnin_failures;
      }
    }
    row.burnin_failure_rate = n_trials > 0
                                  ? static_cast<double>(row.n_burnin_failures) /
                                        static_cast<double>(n_trials)
                                  : 0.0;
    row.mean_radius_sq_subgaussian = sub_acc.mean();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    row.mean_radius_sq_bernstein = bern_acc.count() > 0 ? bern_acc.mean() : nan;
    row.mean_ratio = ratio_acc.count() > 0 ? ratio_acc.mean() : nan;
    row.mean_alpha = alpha_acc.count() > 0 ? alpha_acc.mean() : nan;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace snm

#endif  // SNM_VERIFICATION_HPP
