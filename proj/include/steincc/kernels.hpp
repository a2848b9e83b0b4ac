#pragma once

#include <Eigen/Dense>
#include <string>

namespace steincc {

enum class KernelFamily { kRbf, kImq };

namespace detail {

// Both families are radial in the squared distance r2 = ||x - y||^2:
//   rbf: f(r2) = exp(-r2 / (2 sigma^2))
//   imq: f(r2) = (c^2 + r2)^(-beta)
// so all partials reduce to profile derivatives:
//   d/dx_j   k =  2 d_j f'(r2)          with d_j = x_j - y_j
//   d/dy_j   k = -2 d_j f'(r2)
//   d2/dx_j dy_j k = -2 f'(r2) - 4 d_j^2 f''(r2)
struct RadialProfile {
  KernelFamily family;
  double sigma;  // rbf
  double c;      // imq
  double beta;   // imq

  double f(double r2) const {
    if (family == KernelFamily::kRbf) return std::exp(-r2 / (2.0 * sigma * sigma));
    return std::pow(c * c + r2, -beta);
  }
  double fp(double r2) const {
    if (family == KernelFamily::kRbf) return -f(r2) / (2.0 * sigma * sigma);
    return -beta * std::pow(c * c + r2, -beta - 1.0);
  }
  double fpp(double r2) const {
    if (family == KernelFamily::kRbf) {
      double s2 = sigma * sigma;
      return f(r2) / (4.0 * s2 * s2);
    }
    return beta * (beta + 1.0) * std::pow(c * c + r2, -beta - 2.0);
  }

  double grad_x_from(double diff, double r2) const { return 2.0 * diff * fp(r2); }
  double grad_xy_from(double diff, double r2) const {
    return -2.0 * fp(r2) - 4.0 * diff * diff * fpp(r2);
  }
};

RadialProfile make_rbf_profile(double sigma);
RadialProfile make_imq_profile(double c, double beta);

}  // namespace detail

// Kernel on R x R with analytic first and mixed-second partials.
class Kernel1D {
 public:
  static Kernel1D rbf(double sigma);
  static Kernel1D imq(double c, double beta);

  double eval(double x, double y) const {
    double d = x - y;
    return p_.f(d * d);
  }
  double grad_x(double x, double y) const {
    double d = x - y;
    return p_.grad_x_from(d, d * d);
  }
  double grad_y(double x, double y) const { return -grad_x(x, y); }
  double grad_xy(double x, double y) const {
    double d = x - y;
    return p_.grad_xy_from(d, d * d);
  }

  KernelFamily family() const { return p_.family; }
  const detail::RadialProfile& profile() const { return p_; }

 private:
  explicit Kernel1D(detail::RadialProfile p) : p_(p) {}
  detail::RadialProfile p_;
};

// Same families on R^d x R^d via the squared Euclidean distance.  The
// *_from accessors evaluate from a precomputed distance so pairwise loops
// do not touch the vectors more than once.
class KernelND {
 public:
  static KernelND rbf(int dim, double sigma);
  static KernelND imq(int dim, double c, double beta);

  int dim() const { return dim_; }

  double eval(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
    check(x, y);
    return p_.f((x - y).squaredNorm());
  }
  double grad_x_coord(int j, const Eigen::VectorXd& x,
                      const Eigen::VectorXd& y) const {
    check(x, y);
    return p_.grad_x_from(x(j) - y(j), (x - y).squaredNorm());
  }
  double grad_y_coord(int j, const Eigen::VectorXd& x,
                      const Eigen::VectorXd& y) const {
    return -grad_x_coord(j, x, y);
  }
  double grad_xy_coord(int j, const Eigen::VectorXd& x,
                       const Eigen::VectorXd& y) const {
    check(x, y);
    return p_.grad_xy_from(x(j) - y(j), (x - y).squaredNorm());
  }

  // Hot-path variants taking diff_j = x_j - y_j and r2 = ||x - y||^2.
  double eval_from(double r2) const { return p_.f(r2); }
  double grad_x_from(double diff, double r2) const { return p_.grad_x_from(diff, r2); }
  double grad_xy_from(double diff, double r2) const { return p_.grad_xy_from(diff, r2); }

  KernelFamily family() const { return p_.family; }

 private:
  KernelND(int dim, detail::RadialProfile p);
  void check(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const;

  int dim_;
  detail::RadialProfile p_;
};

// Median of all pairwise Euclidean distances between rows of `samples`
// (even counts average the two middle order statistics).  Throws if fewer
// than two rows or if every distance is zero.
double median_heuristic(const Eigen::MatrixXd& samples);

// Kernel settings as they travel through scenarios and the CLI.  sigma is
// the RBF bandwidth; median_bandwidth replaces it with the median heuristic
// of the dataset at hand (the KSD default).
struct KernelConfig {
  KernelFamily family = KernelFamily::kRbf;
  double sigma = 1.0;
  bool median_bandwidth = false;
  double imq_c = 1.0;
  double imq_beta = 0.5;

  Kernel1D make_1d() const;
  KernelND make_nd(int dim) const;
  KernelND make_nd_for_data(const Eigen::MatrixXd& data) const;
  std::string name() const;
};

}  // namespace steincc
