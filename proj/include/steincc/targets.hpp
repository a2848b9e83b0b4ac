#pragma once

#include <Eigen/Dense>
#include <memory>
#include <utility>
#include <vector>

#include "steincc/rng.hpp"

namespace steincc {

// Unnormalized target density on R^d: everything downstream needs only the
// log density (up to a constant) and its gradient, the score b(x).
class Target {
 public:
  virtual ~Target() = default;

  int dim() const { return dim_; }
  virtual double log_density(const Eigen::VectorXd& x) const = 0;
  virtual Eigen::VectorXd score(const Eigen::VectorXd& x) const = 0;

  // Coordinate j of the score.  Override when a cheaper path than the full
  // gradient exists; estimators call this in their inner loops.
  virtual double score_coord(int j, const Eigen::VectorXd& x) const {
    return score(x)(j);
  }

 protected:
  explicit Target(int dim);

  void check_input(const Eigen::VectorXd& x) const;

 private:
  int dim_;
};

// Zero-mean-agnostic multivariate gaussian N(mean, cov) with cached
// precision and Cholesky factor.  score(x) = -precision (x - mean).
class CorrelatedGaussian : public Target {
 public:
  CorrelatedGaussian(Eigen::VectorXd mean, Eigen::MatrixXd cov);

  static CorrelatedGaussian standard(int dim);
  // diag v, off-diagonal rho
  static CorrelatedGaussian equicorrelated(int dim, double rho, double v);

  double log_density(const Eigen::VectorXd& x) const override;
  Eigen::VectorXd score(const Eigen::VectorXd& x) const override;
  double score_coord(int j, const Eigen::VectorXd& x) const override;

  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::MatrixXd& covariance() const { return cov_; }
  const Eigen::MatrixXd& precision() const { return precision_; }

  // n i.i.d. rows via the Cholesky factor.
  Eigen::MatrixXd sample(int n, Rng& rng) const;

  // Law of x_j given the remaining coordinates (x_minus_j keeps the
  // original order with entry j removed):
  //   var  = 1 / P_jj
  //   mean = mu_j - (1 / P_jj) sum_{l != j} P_jl (x_l - mu_l)
  std::pair<double, double> conditional_params(
      int j, const Eigen::VectorXd& x_minus_j) const;

  // Same quantities with the full vector as context (entry j unused).
  std::pair<double, double> conditional_params_full(
      int j, const Eigen::VectorXd& x) const;

  // Law of the block x_I given the rest: mean mu_I - P_II^{-1} P_I,rest
  // (x_rest - mu_rest), covariance P_II^{-1}.
  std::pair<Eigen::VectorXd, Eigen::MatrixXd> block_conditional_params(
      const std::vector<int>& block, const Eigen::VectorXd& x) const;

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd cov_;
  Eigen::MatrixXd precision_;
  Eigen::MatrixXd chol_;  // lower factor of cov
};

// Product of independent Laplace(0, b_j) coordinates; variance 2 b_j^2.
// The score is -sign(x_j)/b_j away from the kink at zero.
class LaplaceProduct : public Target {
 public:
  explicit LaplaceProduct(int dim, double scale = 0.7071067811865475);
  explicit LaplaceProduct(Eigen::VectorXd scales);

  double log_density(const Eigen::VectorXd& x) const override;
  Eigen::VectorXd score(const Eigen::VectorXd& x) const override;
  double score_coord(int j, const Eigen::VectorXd& x) const override;

  double scale(int j) const { return scales_(j); }

  Eigen::MatrixXd sample(int n, Rng& rng) const;

 private:
  Eigen::VectorXd scales_;
};

// Posterior over the two location parameters of an equal-weight gaussian
// mixture 0.5 N(theta_1, v) + 0.5 N(theta_2, v) with standard normal
// priors; v is the component variance.
class GmmPosterior : public Target {
 public:
  GmmPosterior(Eigen::VectorXd observations, double component_variance);

  double log_density(const Eigen::VectorXd& theta) const override;
  Eigen::VectorXd score(const Eigen::VectorXd& theta) const override;

  const Eigen::VectorXd& observations() const { return obs_; }
  double component_variance() const { return var_; }

  static Eigen::VectorXd simulate_observations(int n, double theta1,
                                               double theta2, double variance,
                                               Rng& rng);

 private:
  Eigen::VectorXd obs_;
  double var_;
};

// Draws a value for coordinate j given the rest of x (entry j of x carries
// no information unless the sampler is a Markov kernel that moves from it).
class ConditionalSampler {
 public:
  virtual ~ConditionalSampler() = default;
  virtual double draw(int j, const Eigen::VectorXd& x, Rng& rng) const = 0;
};

// Block analogue: a joint draw for the coordinates in `block`.
class BlockConditionalSampler {
 public:
  virtual ~BlockConditionalSampler() = default;
  virtual Eigen::VectorXd draw_block(const std::vector<int>& block,
                                     const Eigen::VectorXd& x,
                                     Rng& rng) const = 0;
};

// Exact gaussian complete conditionals (scalar and block).
class GaussianConditionalSampler : public ConditionalSampler,
                                   public BlockConditionalSampler {
 public:
  explicit GaussianConditionalSampler(
      std::shared_ptr<const CorrelatedGaussian> g);

  double draw(int j, const Eigen::VectorXd& x, Rng& rng) const override;
  Eigen::VectorXd draw_block(const std::vector<int>& block,
                             const Eigen::VectorXd& x,
                             Rng& rng) const override;

 private:
  std::shared_ptr<const CorrelatedGaussian> g_;
};

// Conditionals of a product distribution are its marginals.
class LaplaceConditionalSampler : public ConditionalSampler {
 public:
  explicit LaplaceConditionalSampler(int dim,
                                     double scale = 0.7071067811865475);

  double draw(int j, const Eigen::VectorXd& x, Rng& rng) const override;

 private:
  LaplaceProduct product_;
};

// Correlated gaussian corrupted by additive independent Laplace noise:
// z ~ N(0, equicorrelated(0.5, 1)) plus eps ~ Laplace(0, 1/sqrt(2))^d,
// so the sum has diagonal covariance 2 and off-diagonal 0.5.
Eigen::MatrixXd laplace_noise_gaussian_sample(int d, int n, Rng& rng);

}  // namespace steincc
