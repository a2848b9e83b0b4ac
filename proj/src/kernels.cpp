#include "steincc/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace steincc {
namespace detail {

RadialProfile make_rbf_profile(double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("rbf: sigma must be positive");
  return RadialProfile{KernelFamily::kRbf, sigma, 0.0, 0.0};
}

RadialProfile make_imq_profile(double c, double beta) {
  if (!(c > 0.0)) throw std::invalid_argument("imq: c must be positive");
  if (!(beta > 0.0 && beta < 1.0))
    throw std::invalid_argument("imq: beta must lie in (0, 1)");
  return RadialProfile{KernelFamily::kImq, 0.0, c, beta};
}

}  // namespace detail

Kernel1D Kernel1D::rbf(double sigma) {
  return Kernel1D(detail::make_rbf_profile(sigma));
}

Kernel1D Kernel1D::imq(double c, double beta) {
  return Kernel1D(detail::make_imq_profile(c, beta));
}

KernelND::KernelND(int dim, detail::RadialProfile p) : dim_(dim), p_(p) {
  if (dim <= 0) throw std::invalid_argument("KernelND: dim must be positive");
}

KernelND KernelND::rbf(int dim, double sigma) {
  return KernelND(dim, detail::make_rbf_profile(sigma));
}

KernelND KernelND::imq(int dim, double c, double beta) {
  return KernelND(dim, detail::make_imq_profile(c, beta));
}

void KernelND::check(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
  if (x.size() != dim_ || y.size() != dim_)
    throw std::invalid_argument("KernelND: argument dimension mismatch");
}

double median_heuristic(const Eigen::MatrixXd& samples) {
  const auto n = samples.rows();
  if (n < 2)
    throw std::invalid_argument("median_heuristic: need at least two samples");

  std::vector<double> dists;
  dists.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      dists.push_back((samples.row(i) - samples.row(j)).norm());

  if (*std::max_element(dists.begin(), dists.end()) == 0.0)
    throw std::invalid_argument("median_heuristic: all samples identical");

  const std::size_t m = dists.size();
  auto mid = dists.begin() + m / 2;
  std::nth_element(dists.begin(), mid, dists.end());
  if (m % 2 == 1) return *mid;
  double upper = *mid;
  double lower = *std::max_element(dists.begin(), mid);
  return 0.5 * (lower + upper);
}

Kernel1D KernelConfig::make_1d() const {
  if (family == KernelFamily::kRbf) return Kernel1D::rbf(sigma);
  return Kernel1D::imq(imq_c, imq_beta);
}

KernelND KernelConfig::make_nd(int dim) const {
  if (family == KernelFamily::kRbf) return KernelND::rbf(dim, sigma);
  return KernelND::imq(dim, imq_c, imq_beta);
}

KernelND KernelConfig::make_nd_for_data(const Eigen::MatrixXd& data) const {
  const int dim = static_cast<int>(data.cols());
  if (family == KernelFamily::kRbf && median_bandwidth)
    return KernelND::rbf(dim, median_heuristic(data));
  return make_nd(dim);
}

std::string KernelConfig::name() const {
  return family == KernelFamily::kRbf ? "rbf" : "imq";
}

}  // namespace steincc
