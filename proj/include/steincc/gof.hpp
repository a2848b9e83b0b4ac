#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "steincc/cond_model.hpp"
#include "steincc/kernels.hpp"
#include "steincc/rng.hpp"
#include "steincc/stein.hpp"
#include "steincc/targets.hpp"

namespace steincc {

struct GofResult {
  double t_n = 0.0;     // test statistic
  double quantile = 0.0;  // bootstrap decision threshold at level alpha
  double p_value = 1.0;
  bool reject = false;
  double alpha = 0.05;
  Eigen::VectorXd replicates;
};

// Per-row test function h_i = sum_j mean_k k_cc^j(x_j^i, y_j^{i,k}; x_{-j}^i);
// the statistic T_n is the mean of h.
Eigen::VectorXd compute_h(const Eigen::MatrixXd& data, const Target& p,
                          const ConditionalSampler& cond, const Kernel1D& k,
                          int n_y, std::uint64_t seed, int n_threads);

// T_n = (1/n) sum_i h_i, accumulated left to right; the same order the
// bootstrap replicates use, so sign identities below are bit-exact.
double gof_statistic(const Eigen::VectorXd& h);

// R = (1/n) sum_i eps_i h_i for a fixed Rademacher sign vector; with all
// signs +1 this reproduces gof_statistic bit for bit, with all signs -1 its
// exact negation.
double wild_bootstrap_replicate(const Eigen::VectorXd& h,
                                const Eigen::VectorXd& signs);

// L wild-bootstrap replicates with signs drawn sequentially from `rng`.
Eigen::VectorXd wild_bootstrap(const Eigen::VectorXd& h, int L, Rng& rng);

// Decision rule: quantile = sorted[min(ceil((1 - alpha) L), L - 1)] (0-based),
// reject iff T_n > quantile; p = #{R_l > T_n} / L.
GofResult gof_result_from(double t_n, Eigen::VectorXd replicates, double alpha);

// Exact-conditional test: aux stream derive_seed(seed, kStreamAux), bootstrap
// stream derive_seed(seed, kStreamBootstrap).
GofResult gof_test(const Eigen::MatrixXd& data, const Target& p,
                   const ConditionalSampler& cond, const Kernel1D& k, int n_y,
                   int L, double alpha, std::uint64_t seed, int n_threads);

// Approximate-conditional test on the held-out split; cfg.seed drives
// training, `seed` drives auxiliary draws and the bootstrap.
GofResult approx_gof_test(const Eigen::MatrixXd& data, const Target& p,
                          const TrainConfig& cfg, const Kernel1D& k, int n_y,
                          int L, double alpha, std::uint64_t seed,
                          int n_threads);

// n V_n = (1/n) sum_{a,b} H_ab for the Stein gram matrix.
double ksd_statistic(const Eigen::MatrixXd& gram);

// eps^T H eps / n; with all-ones signs this equals ksd_statistic bit for bit.
double ksd_bootstrap_replicate(const Eigen::MatrixXd& gram,
                               const Eigen::VectorXd& signs);

// Baseline KSD test with the V-statistic wild bootstrap (diagonal included).
GofResult ksd_gof_test(const Eigen::MatrixXd& data, const Target& p,
                       const KernelND& k, int L, double alpha,
                       std::uint64_t seed, int n_threads);

enum class Method { kKccsdExact, kKccsdApprox, kKsd };

const char* method_name(Method m);

// A testing scenario: the model p, a sampler for the data distribution q,
// and (for the exact method) the true conditionals of q.
struct Scenario {
  std::shared_ptr<const Target> target;
  std::function<Eigen::MatrixXd(int n, Rng& rng)> sample_data;
  std::shared_ptr<const ConditionalSampler> conditionals;  // may be null
  Method method = Method::kKccsdExact;
  KernelConfig kernel;
  TrainConfig train;
  int n_y = 5;
};

// p = q = N(0, Sigma) with Sigma_ij = 0.5 + 0.5 * 1{i=j}.
Scenario null_calibration_scenario(int d, Method method,
                                   const KernelConfig& kernel);

// p = N(0, I_d), q = product of standard-variance Laplace marginals.
Scenario gaussian_vs_laplace_scenario(int d, Method method,
                                      const KernelConfig& kernel);

// p = N(0, Sigma) with unit off-diagonal structure scaled to diag 2 /
// off-diag 0.5; q adds independent Laplace noise to the Gaussian part, so
// only learned conditionals are available.
Scenario laplace_noise_scenario(int d, Method method,
                                const KernelConfig& kernel);

struct GofRep {
  double p_value = 1.0;
  double t_n = 0.0;
  bool reject = false;
  double seconds = 0.0;
};

// n_reps independent draws of n rows each; repetition r uses
// derive_seed(seed, r) for everything downstream (data via kStreamData).
std::vector<GofRep> run_gof_reps(const Scenario& scenario, int n, int n_reps,
                                 int L, double alpha, std::uint64_t seed,
                                 int n_threads);

double power_from_pvalues(const std::vector<double>& pvalues, double alpha);

// Fraction of repetitions with p < alpha.
double estimate_power(const Scenario& scenario, int n, int n_reps, double alpha,
                      int L, std::uint64_t seed, int n_threads);

}  // namespace steincc
