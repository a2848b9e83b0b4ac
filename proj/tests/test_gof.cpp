#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <vector>

#include "steincc/gof.hpp"
#include "steincc/rng.hpp"
#include "steincc/stein.hpp"
#include "steincc/targets.hpp"
#include "support/stats.hpp"

using namespace steincc;

TEST_CASE("compute_h mean equals the kccsd estimate under a shared seed") {
  auto p = std::make_shared<CorrelatedGaussian>(
      CorrelatedGaussian::equicorrelated(4, 0.5, 1.0));
  GaussianConditionalSampler cond(p);
  Rng rng(301);
  Eigen::MatrixXd data = p->sample(150, rng);
  Kernel1D k = Kernel1D::rbf(1.0);

  Eigen::VectorXd h = compute_h(data, *p, cond, k, 5, 77, 1);
  auto est = estimate_kccsd(data, *p, cond, k, 5, 77, 1);
  CHECK(h.size() == 150);
  CHECK(h.mean() == doctest::Approx(est.total).epsilon(1e-12));
}

TEST_CASE("wild bootstrap sign identities are exact") {
  Rng rng(302);
  std::normal_distribution<double> gauss(1.0, 2.0);
  Eigen::VectorXd h(257);
  for (int i = 0; i < h.size(); ++i) h(i) = gauss(rng);
  const double t_n = gof_statistic(h);
  CHECK(t_n == doctest::Approx(h.mean()).epsilon(1e-12));

  Eigen::VectorXd ones = Eigen::VectorXd::Ones(h.size());
  CHECK(wild_bootstrap_replicate(h, ones) == t_n);    // bit-exact
  CHECK(wild_bootstrap_replicate(h, -ones) == -t_n);  // bit-exact

  Eigen::VectorXd bad = ones;
  bad(3) = 0.5;
  CHECK_THROWS_AS(wild_bootstrap_replicate(h, bad), std::invalid_argument);
}

TEST_CASE("bootstrap replicates stay centered when h is shifted") {
  Rng rng(303);
  std::normal_distribution<double> gauss(5.0, 1.0);  // mean far from zero
  Eigen::VectorXd h(200);
  for (int i = 0; i < h.size(); ++i) h(i) = gauss(rng);

  Rng boot(304);
  Eigen::VectorXd reps = wild_bootstrap(h, 2000, boot);
  double m = reps.mean();
  double sd = std::sqrt((reps.array() - m).square().sum() / (reps.size() - 1.0));
  CHECK(std::fabs(m) <= 3.0 * sd / std::sqrt(double(reps.size())));
  // the shift lives in the statistic instead, so a level-alpha test rejects
  auto res = gof_result_from(h.sum() / h.size(), reps, 0.05);
  CHECK(res.reject);
  CHECK(res.p_value == 0.0);
}

TEST_CASE("quantile rule frozen example") {
  Eigen::VectorXd reps(4);
  reps << -1.0, 0.0, 1.0, 2.0;
  auto res = gof_result_from(1.5, reps, 0.25);
  CHECK(res.quantile == doctest::Approx(2.0));
  CHECK(res.p_value == doctest::Approx(0.25));  // one replicate above 1.5
  CHECK_FALSE(res.reject);

  // below every replicate: p = 1, keep
  auto low = gof_result_from(-3.0, reps, 0.25);
  CHECK(low.p_value == doctest::Approx(1.0));
  CHECK_FALSE(low.reject);

  // above every replicate: p = 0, reject
  auto high = gof_result_from(4.0, reps, 0.25);
  CHECK(high.p_value == doctest::Approx(0.0));
  CHECK(high.reject);
}

TEST_CASE("rejection implies a small p-value") {
  Rng rng(305);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> ua(0.01, 0.3);
  for (int trial = 0; trial < 200; ++trial) {
    int L = 3 + static_cast<int>(rng() % 40);
    Eigen::VectorXd reps(L);
    for (int l = 0; l < L; ++l) reps(l) = gauss(rng);
    double alpha = ua(rng);
    double t = gauss(rng);
    auto res = gof_result_from(t, reps, alpha);
    if (res.reject) CHECK(res.p_value <= alpha + 1.0 / L + 1e-12);
  }
}

TEST_CASE("exact gof test is calibrated under the null") {
  KernelConfig kc;  // rbf, sigma 1
  Scenario sc = null_calibration_scenario(2, Method::kKccsdExact, kc);
  auto reps = run_gof_reps(sc, 200, 100, 200, 0.05, 42, 1);
  std::vector<double> pvals;
  int rejects = 0;
  for (const auto& r : reps) {
    pvals.push_back(r.p_value);
    rejects += r.reject ? 1 : 0;
  }
  CHECK(teststat::ks_uniform_pvalue(pvals) > 0.001);
  CHECK(rejects <= 12);  // ~alpha of 100 with slack
}

TEST_CASE("exact gof test rejects laplace data immediately") {
  const int d = 10;
  auto target = std::make_shared<CorrelatedGaussian>(
      CorrelatedGaussian::standard(d));
  LaplaceProduct q(d);
  LaplaceConditionalSampler cond(d);
  Rng rng(306);
  Eigen::MatrixXd data = q.sample(400, rng);
  auto res = gof_test(data, *target, cond, Kernel1D::rbf(1.0), 5, 300, 0.05,
                      307, 1);
  CHECK(res.reject);
  CHECK(res.p_value < 0.05);
}

TEST_CASE("ksd bootstrap identity and test behaviour") {
  auto p = CorrelatedGaussian::standard(3);
  Rng rng(308);
  Eigen::MatrixXd data = p.sample(60, rng);
  KernelND k = KernelND::rbf(3, 1.0);
  Eigen::MatrixXd gram = ksd_gram(data, p, k, 1);

  Eigen::VectorXd ones = Eigen::VectorXd::Ones(60);
  CHECK(ksd_bootstrap_replicate(gram, ones) == ksd_statistic(gram));

  // under a laplace alternative the test rejects
  LaplaceProduct q(5);
  Rng rng2(309);
  Eigen::MatrixXd alt = q.sample(500, rng2);
  auto palt = CorrelatedGaussian::standard(5);
  auto res = ksd_gof_test(alt, palt, KernelND::rbf(5, median_heuristic(alt)),
                          300, 0.05, 310, 1);
  CHECK(res.reject);
  CHECK(res.p_value < 0.05);
}

TEST_CASE("ksd test is roughly calibrated under the null") {
  KernelConfig kc;
  kc.median_bandwidth = true;
  Scenario sc = null_calibration_scenario(2, Method::kKsd, kc);
  auto reps = run_gof_reps(sc, 150, 80, 200, 0.05, 311, 1);
  std::vector<double> pvals;
  int rejects = 0;
  for (const auto& r : reps) {
    pvals.push_back(r.p_value);
    rejects += r.reject ? 1 : 0;
  }
  CHECK(teststat::ks_uniform_pvalue(pvals) > 0.001);
  CHECK(rejects <= 12);
}

TEST_CASE("approximate gof test runs and is roughly calibrated") {
  KernelConfig kc;
  Scenario sc = null_calibration_scenario(2, Method::kKccsdApprox, kc);
  sc.train.epochs = 100;
  auto reps = run_gof_reps(sc, 300, 40, 150, 0.05, 312, 1);
  std::vector<double> pvals;
  for (const auto& r : reps) pvals.push_back(r.p_value);
  CHECK(teststat::ks_uniform_pvalue(pvals) > 0.001);
}

TEST_CASE("power helpers aggregate p-values") {
  CHECK(power_from_pvalues({0.01, 0.2, 0.04, 0.06}, 0.05) == doctest::Approx(0.5));
  CHECK(power_from_pvalues({0.0, 0.0}, 0.05) == doctest::Approx(1.0));
  CHECK(power_from_pvalues({0.5}, 0.05) == doctest::Approx(0.0));
}

TEST_CASE("estimate_power sits near alpha under the null") {
  KernelConfig kc;
  Scenario sc = null_calibration_scenario(2, Method::kKccsdExact, kc);
  const int n_reps = 80;
  double power = estimate_power(sc, 150, n_reps, 0.05, 150, 313, 1);
  double se = std::sqrt(0.05 * 0.95 / n_reps);
  CHECK(power <= 0.05 + 3.0 * se + 1.0 / 150 + 1e-12);
}

TEST_CASE("estimate_power has full power against a gross alternative") {
  KernelConfig kc;
  Scenario sc = gaussian_vs_laplace_scenario(8, Method::kKccsdExact, kc);
  double power = estimate_power(sc, 400, 20, 0.05, 200, 314, 1);
  CHECK(power >= 0.95);
}

TEST_CASE("gof repetitions are deterministic and thread-count independent") {
  KernelConfig kc;
  Scenario sc = null_calibration_scenario(3, Method::kKccsdExact, kc);
  auto a = run_gof_reps(sc, 100, 12, 100, 0.05, 315, 1);
  auto b = run_gof_reps(sc, 100, 12, 100, 0.05, 315, 1);
  auto c = run_gof_reps(sc, 100, 12, 100, 0.05, 315, 3);
  for (int r = 0; r < 12; ++r) {
    CHECK(a[r].p_value == b[r].p_value);
    CHECK(a[r].t_n == b[r].t_n);
    CHECK(a[r].p_value == c[r].p_value);
    CHECK(a[r].t_n == c[r].t_n);
  }
}

TEST_CASE("scenario preconditions are enforced") {
  KernelConfig kc;
  Scenario sc = laplace_noise_scenario(3, Method::kKccsdExact, kc);
  // no exact conditionals exist for the convolved law
  CHECK_THROWS_AS(run_gof_reps(sc, 100, 2, 50, 0.05, 1, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(gof_result_from(0.0, Eigen::VectorXd(), 0.05),
                  std::invalid_argument);
}
