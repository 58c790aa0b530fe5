#ifndef SNM_TYPES_HPP
#define SNM_TYPES_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace snm {

using Index = Eigen::Index;

template <typename Scalar>
using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Vecd = VecX<double>;
using Matd = MatX<double>;

/// Matrix that failed a Cholesky factorization (a pivot was <= 0).
class NotPositiveDefinite : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Matrix with an eigenvalue below -tolerance where PSD was required.
class NotPositiveSemidefinite : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Query that needs an invertible Gram matrix before one exists.
class SingularError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Regularizer-specific singularity (e.g. log det(Gamma) with det = 0).
class GammaSingular : public SingularError {
 public:
  using SingularError::SingularError;
};

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// KL of uniform ellipsoid distributions requires support containment.
class NotContained : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Variance-adaptive bound requested before its burn-in condition holds.
/// Carries which half failed and the PSD margins (smallest eigenvalue of
/// the matrix differences; negative = violated).
class BurninViolated : public std::runtime_error {
 public:
  BurninViolated(bool data_ok, bool static_ok, double data_margin,
                 double static_margin)
      : std::runtime_error(describe(data_ok, static_ok, data_margin,
                                    static_margin)),
        data_ok_(data_ok),
        static_ok_(static_ok),
        data_margin_(data_margin),
        static_margin_(static_margin) {}

  bool data_ok() const { return data_ok_; }
  bool static_ok() const { return static_ok_; }
  double data_margin() const { return data_margin_; }
  double static_margin() const { return static_margin_; }

 private:
  static std::string describe(bool data_ok, bool static_ok, double data_margin,
                              double static_margin) {
    std::string msg = "burn-in violated:";
    if (!data_ok) {
      msg += " data condition (V_t + Gamma vs e(1+nu)^2 V, margin " +
             std::to_string(data_margin) + ")";
    }
    if (!static_ok) {
      msg += std::string(!data_ok ? " and" : "") +
             " static condition (e(1+nu)^2 V vs (1+nu)^2 (d+2) B_W^2 B_X^2 / "
             "eps, margin " +
             std::to_string(static_margin) + ")";
    }
    return msg;
  }

  bool data_ok_;
  bool static_ok_;
  double data_margin_;
  double static_margin_;
};

/// Supermartingale check called with a lambda outside its admissible set.
class LambdaOutOfDomain : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Default tolerance for PSD-order and symmetry checks, scaled by the
/// Frobenius norm of the dominating matrix.
template <typename Scalar>
Scalar default_psd_tol(const MatX<Scalar>& dominating) {
  return Scalar(1e-9) * (Scalar(1) + dominating.norm());
}

}  // namespace snm

#endif  // SNM_TYPES_HPP
