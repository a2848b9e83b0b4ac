#include "steincc/targets.hpp"

#include <cmath>
#include <stdexcept>

namespace steincc {

namespace {

double laplace_draw(double scale, Rng& rng) {
  // inverse CDF: u in (-1/2, 1/2), x = -b sgn(u) log(1 - 2|u|)
  std::uniform_real_distribution<double> unif(-0.5, 0.5);
  double u = unif(rng);
  double sgn = u < 0.0 ? -1.0 : 1.0;
  return -scale * sgn * std::log1p(-2.0 * std::fabs(u));
}

}  // namespace

Target::Target(int dim) : dim_(dim) {
  if (dim < 1) throw std::invalid_argument("Target: dim must be >= 1");
}

void Target::check_input(const Eigen::VectorXd& x) const {
  if (x.size() != dim_)
    throw std::invalid_argument("Target: input dimension mismatch");
  if (!x.allFinite())
    throw std::invalid_argument("Target: non-finite input");
}

CorrelatedGaussian::CorrelatedGaussian(Eigen::VectorXd mean,
                                       Eigen::MatrixXd cov)
    : Target(static_cast<int>(mean.size())),
      mean_(std::move(mean)),
      cov_(std::move(cov)) {
  if (cov_.rows() != dim() || cov_.cols() != dim())
    throw std::invalid_argument("CorrelatedGaussian: covariance shape");
  if (!cov_.isApprox(cov_.transpose(), 1e-12))
    throw std::invalid_argument("CorrelatedGaussian: covariance not symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(cov_);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument(
        "CorrelatedGaussian: covariance not positive definite");
  chol_ = llt.matrixL();
  precision_ = llt.solve(Eigen::MatrixXd::Identity(dim(), dim()));
}

CorrelatedGaussian CorrelatedGaussian::standard(int dim) {
  return CorrelatedGaussian(Eigen::VectorXd::Zero(dim),
                            Eigen::MatrixXd::Identity(dim, dim));
}

CorrelatedGaussian CorrelatedGaussian::equicorrelated(int dim, double rho,
                                                      double v) {
  Eigen::MatrixXd cov = Eigen::MatrixXd::Constant(dim, dim, rho);
  cov.diagonal().setConstant(v);
  return CorrelatedGaussian(Eigen::VectorXd::Zero(dim), cov);
}

double CorrelatedGaussian::log_density(const Eigen::VectorXd& x) const {
  check_input(x);
  Eigen::VectorXd centered = x - mean_;
  return -0.5 * centered.dot(precision_ * centered);
}

Eigen::VectorXd CorrelatedGaussian::score(const Eigen::VectorXd& x) const {
  check_input(x);
  return -(precision_ * (x - mean_));
}

double CorrelatedGaussian::score_coord(int j, const Eigen::VectorXd& x) const {
  check_input(x);
  return -precision_.row(j).dot(x - mean_);
}

Eigen::MatrixXd CorrelatedGaussian::sample(int n, Rng& rng) const {
  if (n < 0) throw std::invalid_argument("sample: n must be >= 0");
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd out(n, dim());
  Eigen::VectorXd z(dim());
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < dim(); ++j) z(j) = gauss(rng);
    out.row(i) = (mean_ + chol_ * z).transpose();
  }
  return out;
}

std::pair<double, double> CorrelatedGaussian::conditional_params(
    int j, const Eigen::VectorXd& x_minus_j) const {
  if (j < 0 || j >= dim())
    throw std::invalid_argument("conditional_params: coordinate out of range");
  if (x_minus_j.size() != dim() - 1)
    throw std::invalid_argument("conditional_params: context size mismatch");
  Eigen::VectorXd full(dim());
  int pos = 0;
  for (int l = 0; l < dim(); ++l) full(l) = (l == j) ? mean_(j) : x_minus_j(pos++);
  return conditional_params_full(j, full);
}

std::pair<double, double> CorrelatedGaussian::conditional_params_full(
    int j, const Eigen::VectorXd& x) const {
  check_input(x);
  const double pjj = precision_(j, j);
  double cross = 0.0;
  for (int l = 0; l < dim(); ++l)
    if (l != j) cross += precision_(j, l) * (x(l) - mean_(l));
  return {mean_(j) - cross / pjj, 1.0 / pjj};
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd>
CorrelatedGaussian::block_conditional_params(const std::vector<int>& block,
                                             const Eigen::VectorXd& x) const {
  check_input(x);
  if (block.empty())
    throw std::invalid_argument("block_conditional_params: empty block");
  std::vector<bool> seen(dim(), false);
  for (int l : block) {
    if (l < 0 || l >= dim() || seen[l])
      throw std::invalid_argument(
          "block_conditional_params: invalid or repeated index");
    seen[l] = true;
  }

  const int b = static_cast<int>(block.size());
  Eigen::MatrixXd p_ii(b, b);
  Eigen::VectorXd cross = Eigen::VectorXd::Zero(b);
  for (int a = 0; a < b; ++a) {
    for (int c = 0; c < b; ++c) p_ii(a, c) = precision_(block[a], block[c]);
    for (int l = 0; l < dim(); ++l)
      if (!seen[l]) cross(a) += precision_(block[a], l) * (x(l) - mean_(l));
  }
  Eigen::LLT<Eigen::MatrixXd> llt(p_ii);
  Eigen::MatrixXd cond_cov =
      llt.solve(Eigen::MatrixXd::Identity(b, b));
  Eigen::VectorXd cond_mean(b);
  Eigen::VectorXd shift = llt.solve(cross);
  for (int a = 0; a < b; ++a) cond_mean(a) = mean_(block[a]) - shift(a);
  return {cond_mean, cond_cov};
}

LaplaceProduct::LaplaceProduct(int dim, double scale)
    : Target(dim), scales_(Eigen::VectorXd::Constant(dim, scale)) {
  if (!(scale > 0.0))
    throw std::invalid_argument("LaplaceProduct: scale must be positive");
}

LaplaceProduct::LaplaceProduct(Eigen::VectorXd scales)
    : Target(static_cast<int>(scales.size())), scales_(std::move(scales)) {
  if ((scales_.array() <= 0.0).any())
    throw std::invalid_argument("LaplaceProduct: scales must be positive");
}

double LaplaceProduct::log_density(const Eigen::VectorXd& x) const {
  check_input(x);
  return -(x.cwiseAbs().cwiseQuotient(scales_)).sum();
}

Eigen::VectorXd LaplaceProduct::score(const Eigen::VectorXd& x) const {
  check_input(x);
  Eigen::VectorXd s(dim());
  for (int j = 0; j < dim(); ++j)
    s(j) = (x(j) < 0.0 ? 1.0 : -1.0) / scales_(j);
  return s;
}

double LaplaceProduct::score_coord(int j, const Eigen::VectorXd& x) const {
  check_input(x);
  return (x(j) < 0.0 ? 1.0 : -1.0) / scales_(j);
}

Eigen::MatrixXd LaplaceProduct::sample(int n, Rng& rng) const {
  Eigen::MatrixXd out(n, dim());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < dim(); ++j) out(i, j) = laplace_draw(scales_(j), rng);
  return out;
}

GmmPosterior::GmmPosterior(Eigen::VectorXd observations,
                           double component_variance)
    : Target(2), obs_(std::move(observations)), var_(component_variance) {
  if (!(var_ > 0.0))
    throw std::invalid_argument("GmmPosterior: variance must be positive");
}

double GmmPosterior::log_density(const Eigen::VectorXd& theta) const {
  check_input(theta);
  // standard normal priors plus the mixture likelihood; constants shared by
  // the two components are dropped.
  double lp = -0.5 * theta.squaredNorm();
  for (int i = 0; i < obs_.size(); ++i) {
    double l1 = -0.5 * (obs_(i) - theta(0)) * (obs_(i) - theta(0)) / var_;
    double l2 = -0.5 * (obs_(i) - theta(1)) * (obs_(i) - theta(1)) / var_;
    double hi = std::max(l1, l2);
    lp += hi + std::log(0.5 * std::exp(l1 - hi) + 0.5 * std::exp(l2 - hi));
  }
  return lp;
}

Eigen::VectorXd GmmPosterior::score(const Eigen::VectorXd& theta) const {
  check_input(theta);
  Eigen::VectorXd s = -theta;
  for (int i = 0; i < obs_.size(); ++i) {
    double l1 = -0.5 * (obs_(i) - theta(0)) * (obs_(i) - theta(0)) / var_;
    double l2 = -0.5 * (obs_(i) - theta(1)) * (obs_(i) - theta(1)) / var_;
    // responsibility of component 1 = sigmoid(l1 - l2)
    double w1 = 1.0 / (1.0 + std::exp(l2 - l1));
    s(0) += w1 * (obs_(i) - theta(0)) / var_;
    s(1) += (1.0 - w1) * (obs_(i) - theta(1)) / var_;
  }
  return s;
}

Eigen::VectorXd GmmPosterior::simulate_observations(int n, double theta1,
                                                    double theta2,
                                                    double variance, Rng& rng) {
  if (!(variance > 0.0))
    throw std::invalid_argument("simulate_observations: variance");
  std::normal_distribution<double> gauss(0.0, std::sqrt(variance));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::VectorXd out(n);
  for (int i = 0; i < n; ++i)
    out(i) = (unif(rng) < 0.5 ? theta1 : theta2) + gauss(rng);
  return out;
}

GaussianConditionalSampler::GaussianConditionalSampler(
    std::shared_ptr<const CorrelatedGaussian> g)
    : g_(std::move(g)) {
  if (!g_) throw std::invalid_argument("GaussianConditionalSampler: null target");
}

double GaussianConditionalSampler::draw(int j, const Eigen::VectorXd& x,
                                        Rng& rng) const {
  auto [m, v] = g_->conditional_params_full(j, x);
  std::normal_distribution<double> gauss(0.0, 1.0);
  return m + std::sqrt(v) * gauss(rng);
}

Eigen::VectorXd GaussianConditionalSampler::draw_block(
    const std::vector<int>& block, const Eigen::VectorXd& x, Rng& rng) const {
  if (block.size() == 1) {
    Eigen::VectorXd out(1);
    out(0) = draw(block[0], x, rng);
    return out;
  }
  auto [mean, cov] = g_->block_conditional_params(block, x);
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd z(mean.size());
  for (int a = 0; a < z.size(); ++a) z(a) = gauss(rng);
  return mean + Eigen::MatrixXd(llt.matrixL()) * z;
}

LaplaceConditionalSampler::LaplaceConditionalSampler(int dim, double scale)
    : product_(dim, scale) {}

double LaplaceConditionalSampler::draw(int j, const Eigen::VectorXd& x,
                                       Rng& rng) const {
  if (j < 0 || j >= product_.dim())
    throw std::invalid_argument("LaplaceConditionalSampler: coordinate");
  (void)x;  // product distribution: the conditional is the marginal
  return laplace_draw(product_.scale(j), rng);
}

Eigen::MatrixXd laplace_noise_gaussian_sample(int d, int n, Rng& rng) {
  auto g = CorrelatedGaussian::equicorrelated(d, 0.5, 1.0);
  LaplaceProduct noise(d);
  return g.sample(n, rng) + noise.sample(n, rng);
}

}  // namespace steincc
