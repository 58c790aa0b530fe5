#ifndef SNM_MARTINGALE_HPP
#define SNM_MARTINGALE_HPP

#include <cstdint>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "snm/io.hpp"
#include "snm/linalg.hpp"
#include "snm/types.hpp"

namespace snm {

template <typename Scalar>
struct Observation {
  std::int64_t t;
  VecX<Scalar> x;
  Scalar w;
};

using Observationd = Observation<double>;

/// Running sums of a weighted vector stream:
///   s_t = Σ w_k x_k,   V_t = Σ x_k x_kᵀ,
/// together with the Cholesky factor of V_t + Γ maintained by O(d²)
/// rank-one updates. The dense V_t is accumulated exactly alongside the
/// factor and the factor is re-computed from it every 10⁴ updates to stop
/// rounding drift. If Γ is singular the factor is deferred until V_t + Γ
/// becomes positive definite; queries that need it raise SingularError
/// until then.
///
/// Mutation model: observe() mutates under a single-writer contract.
/// Copies are cheap value snapshots and replaying the same stream into the
/// same initial state reproduces every field bit-for-bit.
template <typename Scalar>
class MartingaleState {
 public:
  using Vec = VecX<Scalar>;
  using Mat = MatX<Scalar>;

  static constexpr std::int64_t kRefreshInterval = 10000;

  MartingaleState(Index d, SymMatrix<Scalar> gamma,
                  bool record_observations = false)
      : d_(d),
        s_(Vec::Zero(d)),
        v_(Mat::Zero(d, d)),
        gamma_(std::move(gamma)),
        record_(record_observations) {
    if (d <= 0) {
      throw DimensionMismatch("MartingaleState: dimension must be positive");
    }
    if (gamma_.dim() != d) {
      throw DimensionMismatch("MartingaleState: regularizer dimension");
    }
    require_psd(gamma_, "MartingaleState: regularizer");
    try_factor();
  }

  /// Reconstructs a state from persisted sums (no observation log).
  static MartingaleState from_components(Vec s, const SymMatrix<Scalar>& v,
                                         SymMatrix<Scalar> gamma,
                                         std::int64_t t) {
    if (v.dim() != s.size() || gamma.dim() != s.size()) {
      throw DimensionMismatch("from_components: dimension mismatch");
    }
    if (t < 0) {
      throw std::invalid_argument("from_components: negative time");
    }
    require_psd(v, "from_components: second-moment sum");
    MartingaleState st(s.size(), std::move(gamma));
    st.s_ = std::move(s);
    st.v_ = v.mat();
    st.t_ = t;
    st.gram_.reset();
    st.try_factor();
    return st;
  }

  Index dim() const { return d_; }
  std::int64_t t() const { return t_; }
  const Vec& s() const { return s_; }
  const SymMatrix<Scalar>& gamma() const { return gamma_; }

  /// Exact dense Σ x_k x_kᵀ (without the regularizer).
  const Mat& v_sum() const { return v_; }
  SymMatrix<Scalar> v_sym() const { return SymMatrix<Scalar>(v_); }

  Mat gram_matrix() const { return v_ + gamma_.mat(); }

  bool gram_pd() const { return gram_.has_value(); }

  const CholFactor<Scalar>& gram_factor() const {
    if (!gram_) {
      throw SingularError(
          "MartingaleState: V_t + Gamma is not yet positive definite");
    }
    return *gram_;
  }

  Scalar gram_logdet() const { return gram_factor().logdet(); }

  void observe(const Vec& x, Scalar w) {
    if (x.size() != d_) {
      throw DimensionMismatch("observe: vector dimension mismatch");
    }
    ++t_;
    s_ += w * x;
    v_ += x * x.transpose();
    if (record_) log_.push_back({t_, x, w});
    if (gram_) {
      gram_->rank_one_update(x);
      if (++updates_since_refresh_ >= kRefreshInterval) refresh_factor();
    } else {
      try_factor();
    }
  }

  /// ‖s_t‖² in the (V_t + Γ)⁻¹ norm.
  Scalar self_norm_sq() const {
    return quad_form_inv(gram_factor(), s_);
  }

  /// ‖s_t‖² in the (V_t+Γ)⁻¹ M (V_t+Γ)⁻¹ norm for a PSD weight M.
  Scalar cross_norm_sq(const SymMatrix<Scalar>& m) const {
    if (m.dim() != d_) {
      throw DimensionMismatch("cross_norm_sq: weight dimension mismatch");
    }
    Vec y = solve(gram_factor(), s_);
    return y.dot(m.mat() * y);
  }

  bool recording() const { return record_; }

  const std::vector<Observation<Scalar>>& observations() const {
    if (!record_) {
      throw std::logic_error(
          "observations: state was constructed without recording");
    }
    return log_;
  }

  /// Replays the recorded stream into a fresh state with a different
  /// regularizer. Requires recording to have been enabled.
  MartingaleState rebuilt_with(SymMatrix<Scalar> new_gamma) const {
    MartingaleState st(d_, std::move(new_gamma), record_);
    for (const auto& ob : observations()) st.observe(ob.x, ob.w);
    return st;
  }

 private:
  static void require_psd(const SymMatrix<Scalar>& m, const char* what) {
    Eigen::SelfAdjointEigenSolver<Mat> es(m.mat(), Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -default_psd_tol<Scalar>(m.mat())) {
      throw NotPositiveSemidefinite(std::string(what) +
                                    " is not positive semidefinite");
    }
  }

  void try_factor() {
    try {
      gram_ = cholesky(SymMatrix<Scalar>(gram_matrix()));
      updates_since_refresh_ = 0;
    } catch (const NotPositiveDefinite&) {
      gram_.reset();
    }
  }

  void refresh_factor() {
    gram_ = cholesky(SymMatrix<Scalar>(gram_matrix()));
    updates_since_refresh_ = 0;
  }

  Index d_;
  std::int64_t t_ = 0;
  Vec s_;
  Mat v_;
  SymMatrix<Scalar> gamma_;
  std::optional<CholFactor<Scalar>> gram_;
  std::int64_t updates_since_refresh_ = 0;
  bool record_ = false;
  std::vector<Observation<Scalar>> log_;
};

using MartingaleStated = MartingaleState<double>;

/// Stopping rule: stop as soon as the predicate holds (checked before each
/// observation, so a rule true at the initial state stops at t = 0) or when
/// t reaches t_max.
template <typename Scalar>
struct StoppingRule {
  std::function<bool(const MartingaleState<Scalar>&)> predicate;
  std::int64_t t_max;

  static StoppingRule fixed_horizon(std::int64_t horizon) {
    return {[](const MartingaleState<Scalar>&) { return false; }, horizon};
  }

  /// Stop once log det(V_t + Γ) reaches `threshold` (absolute value; callers
  /// working with ratios add log det Γ themselves).
  static StoppingRule logdet_at_least(Scalar threshold, std::int64_t t_max) {
    return {[threshold](const MartingaleState<Scalar>& st) {
              return st.gram_pd() && st.gram_logdet() >= threshold;
            },
            t_max};
  }

  static StoppingRule self_norm_at_least(Scalar threshold,
                                         std::int64_t t_max) {
    return {[threshold](const MartingaleState<Scalar>& st) {
              return st.gram_pd() && st.self_norm_sq() >= threshold;
            },
            t_max};
  }
};

using StoppingRuled = StoppingRule<double>;

/// Feeds observations from `next` (a callable returning
/// optional<pair<x, w>>; nullopt ends the stream) into a fresh state until
/// the stopping rule fires, and returns the stopped state.
template <typename Scalar, typename Source>
MartingaleState<Scalar> run_until(Source&& next,
                                  const StoppingRule<Scalar>& rule, Index d,
                                  SymMatrix<Scalar> gamma,
                                  bool record_observations = false) {
  MartingaleState<Scalar> st(d, std::move(gamma), record_observations);
  while (st.t() < rule.t_max && !rule.predicate(st)) {
    auto ob = next();
    if (!ob) break;
    st.observe(ob->first, ob->second);
  }
  return st;
}

/// Writes rows `t, x[0..d-1], w` with 17-significant-digit floats.
template <typename Scalar>
void write_observation_csv(std::ostream& os,
                           const std::vector<Observation<Scalar>>& log,
                           Index d) {
  os << "t";
  for (Index j = 0; j < d; ++j) os << ",x" << j;
  os << ",w\n";
  for (const auto& ob : log) {
    os << ob.t;
    for (Index j = 0; j < d; ++j) {
      os << ',' << fmt_full(static_cast<double>(ob.x[j]));
    }
    os << ',' << fmt_full(static_cast<double>(ob.w)) << '\n';
  }
}

/// Parses an observation log. Validates a consistent column count, numeric
/// fields, and consecutive 1-based t values; errors identify the row.
inline std::vector<Observationd> read_observation_csv(std::istream& is) {
  std::vector<Observationd> log;
  std::string line;
  std::int64_t row = 0;
  Index d = -1;
  bool first_content_line = true;
  while (std::getline(is, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      std::size_t comma = line.find(',', start);
      fields.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (first_content_line && !fields.empty() && fields[0] == "t") {
      first_content_line = false;  // header
      continue;
    }
    first_content_line = false;
    if (fields.size() < 3) {
      throw std::runtime_error("observation log row " + std::to_string(row) +
                               ": expected at least 3 columns");
    }
    if (d < 0) {
      d = static_cast<Index>(fields.size()) - 2;
    } else if (static_cast<Index>(fields.size()) - 2 != d) {
      throw std::runtime_error("observation log row " + std::to_string(row) +
                               ": inconsistent column count");
    }
    Observationd ob;
    std::int64_t t_val = 0;
    if (!parse_int(fields[0], t_val)) {
      throw std::runtime_error("observation log row " + std::to_string(row) +
                               ": bad t value");
    }
    ob.t = t_val;
    if (ob.t != static_cast<std::int64_t>(log.size()) + 1) {
      throw std::runtime_error("observation log row " + std::to_string(row) +
                               ": t values must be consecutive from 1");
    }
    ob.x.resize(d);
    for (Index j = 0; j < d; ++j) {
      if (!parse_double(fields[static_cast<std::size_t>(j) + 1], ob.x[j])) {
        throw std::runtime_error("observation log row " + std::to_string(row) +
                                 ": bad x value");
      }
    }
    if (!parse_double(fields.back(), ob.w)) {
      throw std::runtime_error("observation log row " + std::to_string(row) +
                               ": bad w value");
    }
    log.push_back(std::move(ob));
  }
  return log;
}

}  // namespace snm

#endif  // SNM_MARTINGALE_HPP
