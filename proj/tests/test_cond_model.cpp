#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "steincc/cond_model.hpp"
#include "steincc/rng.hpp"
#include "steincc/stein.hpp"
#include "steincc/targets.hpp"

using namespace steincc;

namespace {

HistogramConditionalModel zero_model(int coord, int in, int hidden, int bins,
                                     double lo, double hi) {
  HistogramConditionalModel m;
  m.coord = coord;
  m.lo = lo;
  m.hi = hi;
  m.w1 = Eigen::MatrixXd::Zero(hidden, in);
  m.b1 = Eigen::VectorXd::Zero(hidden);
  m.w2 = Eigen::MatrixXd::Zero(bins, hidden);
  m.b2 = Eigen::VectorXd::Zero(bins);
  return m;
}

double fd_loss_slope(HistogramConditionalModel& model, double* param,
                     const Eigen::MatrixXd& inputs,
                     const Eigen::VectorXi& labels, double h = 1e-6) {
  double orig = *param;
  *param = orig + h;
  double up = cross_entropy_loss(model, inputs, labels);
  *param = orig - h;
  double down = cross_entropy_loss(model, inputs, labels);
  *param = orig;
  return (up - down) / (2.0 * h);
}

}  // namespace

TEST_CASE("forward gives uniform probabilities for an all-zero network") {
  auto m = zero_model(0, 3, 4, 5, 0.0, 1.0);
  Eigen::VectorXd x(3);
  x << 0.2, -1.0, 3.0;
  Eigen::VectorXd p = m.forward(x);
  CHECK(p.size() == 5);
  for (int i = 0; i < 5; ++i) CHECK(p(i) == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("forward probabilities sum to one") {
  TrainConfig cfg;
  cfg.hidden = 6;
  cfg.n_bins = 7;
  auto m = init_conditional_model(1, 4, -2.0, 2.0, cfg, 42);
  Rng rng(43);
  std::normal_distribution<double> gauss(0.0, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd x(4);
    for (int i = 0; i < 4; ++i) x(i) = gauss(rng);
    Eigen::VectorXd p = m.forward(x);
    CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p.minCoeff() >= 0.0);
  }
}

TEST_CASE("two-bin logits reduce to a logistic") {
  auto m = zero_model(0, 2, 3, 2, 0.0, 1.0);
  const double t = 0.8;
  m.b2 << t, -t;
  Eigen::VectorXd x(2);
  x << 5.0, -1.0;  // ignored: w1 is zero
  Eigen::VectorXd p = m.forward(x);
  CHECK(p(0) == doctest::Approx(1.0 / (1.0 + std::exp(-2.0 * t))).epsilon(1e-12));
}

TEST_CASE("cross entropy gradient matches finite differences") {
  TrainConfig cfg;
  cfg.hidden = 4;
  cfg.n_bins = 3;
  auto m = init_conditional_model(0, 3, -1.0, 1.0, cfg, 44);
  Rng rng(45);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd inputs(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) inputs(i, j) = gauss(rng);
  Eigen::VectorXi labels(3);
  labels << 0, 2, 1;

  auto g = cross_entropy_gradient(m, inputs, labels);
  CHECK(g.loss == doctest::Approx(cross_entropy_loss(m, inputs, labels)));

  auto check_block = [&](Eigen::MatrixXd& params, const Eigen::MatrixXd& grad) {
    for (int r = 0; r < params.rows(); ++r)
      for (int c = 0; c < params.cols(); ++c) {
        double fd = fd_loss_slope(m, &params(r, c), inputs, labels);
        double scale = std::max({std::fabs(fd), std::fabs(grad(r, c)), 1e-6});
        CHECK(std::fabs(fd - grad(r, c)) / scale <= 1e-4);
      }
  };
  auto check_vec = [&](Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
    for (int r = 0; r < params.size(); ++r) {
      double fd = fd_loss_slope(m, &params(r), inputs, labels);
      double scale = std::max({std::fabs(fd), std::fabs(grad(r)), 1e-6});
      CHECK(std::fabs(fd - grad(r)) / scale <= 1e-4);
    }
  };
  check_block(m.w1, g.w1);
  check_block(m.w2, g.w2);
  check_vec(m.b1, g.b1);
  check_vec(m.b2, g.b2);
}

TEST_CASE("confident correct predictions give a vanishing gradient") {
  auto m = zero_model(0, 2, 3, 4, 0.0, 1.0);
  m.b2 << 50.0, 0.0, 0.0, 0.0;  // probability ~1 on bin 0
  Eigen::MatrixXd inputs(2, 2);
  inputs << 0.1, 0.2, -0.3, 0.4;
  Eigen::VectorXi labels(2);
  labels << 0, 0;
  auto g = cross_entropy_gradient(m, inputs, labels);
  CHECK(g.loss <= 1e-10);
  double norm = std::max({g.w1.cwiseAbs().maxCoeff(), g.w2.cwiseAbs().maxCoeff(),
                          g.b1.cwiseAbs().maxCoeff(), g.b2.cwiseAbs().maxCoeff()});
  CHECK(norm <= 1e-6);
}

TEST_CASE("duplicating the batch leaves the mean gradient unchanged") {
  TrainConfig cfg;
  cfg.hidden = 3;
  cfg.n_bins = 3;
  auto m = init_conditional_model(0, 2, -1.0, 1.0, cfg, 46);
  Eigen::MatrixXd one(1, 2);
  one << 0.7, -0.4;
  Eigen::VectorXi lone(1);
  lone << 2;
  Eigen::MatrixXd two(2, 2);
  two << 0.7, -0.4, 0.7, -0.4;
  Eigen::VectorXi ltwo(2);
  ltwo << 2, 2;
  auto ga = cross_entropy_gradient(m, one, lone);
  auto gb = cross_entropy_gradient(m, two, ltwo);
  CHECK((ga.w1 - gb.w1).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK((ga.w2 - gb.w2).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK(ga.loss == doctest::Approx(gb.loss).epsilon(1e-14));
}

TEST_CASE("bins are half-open with a closed last bin and clamping") {
  auto m = zero_model(0, 1, 2, 4, 0.0, 1.0);
  CHECK(m.bin_of(0.0) == 0);
  CHECK(m.bin_of(0.25) == 1);
  CHECK(m.bin_of(0.9999) == 3);
  CHECK(m.bin_of(1.0) == 3);   // closed upper edge
  CHECK(m.bin_of(-5.0) == 0);  // clamped below
  CHECK(m.bin_of(7.0) == 3);   // clamped above
  CHECK(m.midpoint(0) == doctest::Approx(0.125));
  CHECK(m.midpoint(3) == doctest::Approx(0.875));
}

TEST_CASE("fit keeps the snapshot with the best validation loss") {
  Rng rng(47);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int n = 400, d = 2;
  Eigen::MatrixXd data(n, d);
  for (int i = 0; i < n; ++i) {
    data(i, 1) = gauss(rng);
    data(i, 0) = 0.8 * data(i, 1) + 0.3 * gauss(rng);
  }
  TrainConfig cfg;
  cfg.epochs = 60;
  cfg.n_bins = 8;
  Eigen::MatrixXd train = data.topRows(300), val = data.bottomRows(100);

  auto fitted = fit_conditional(train, val, 0, cfg, 48);
  auto initial = init_conditional_model(0, d - 1, fitted.lo, fitted.hi, cfg, 48);

  auto val_loss = [&](const HistogramConditionalModel& m) {
    Eigen::MatrixXd inputs(val.rows(), d - 1);
    Eigen::VectorXi labels(val.rows());
    for (int i = 0; i < val.rows(); ++i) {
      inputs(i, 0) = val(i, 1);
      labels(i) = m.bin_of(val(i, 0));
    }
    return cross_entropy_loss(m, inputs, labels);
  };
  CHECK(val_loss(fitted) <= val_loss(initial) + 1e-12);

  // deterministic retrain
  auto again = fit_conditional(train, val, 0, cfg, 48);
  CHECK((fitted.w1 - again.w1).cwiseAbs().maxCoeff() == 0.0);
  CHECK((fitted.w2 - again.w2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("a deterministic sign relation is learnable") {
  Rng rng(49);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int n = 3000;
  Eigen::MatrixXd data(n, 2);
  for (int i = 0; i < n; ++i) {
    data(i, 1) = gauss(rng);
    data(i, 0) = data(i, 1) >= 0.0 ? 1.0 : -1.0;
  }
  TrainConfig cfg;
  cfg.n_bins = 2;
  cfg.epochs = 300;
  Eigen::MatrixXd train = data.topRows(2000), val = data.bottomRows(1000);
  auto m = fit_conditional(train, val, 0, cfg, 50);

  int correct = 0;
  for (int i = 0; i < val.rows(); ++i) {
    Eigen::VectorXd in(1);
    in << val(i, 1);
    Eigen::VectorXd p = m.forward(in);
    int argmax = 0;
    p.maxCoeff(&argmax);
    if (argmax == m.bin_of(val(i, 0))) ++correct;
  }
  CHECK(static_cast<double>(correct) / val.rows() >= 0.95);
}

TEST_CASE("sampling follows the forward probabilities") {
  auto m = zero_model(0, 1, 2, 1, -1.0, 1.0);
  Eigen::VectorXd x(1);
  x << 0.0;
  Rng rng(51);
  // single bin: always the midpoint
  CHECK(sample_conditional(m, x, rng) == doctest::Approx(0.0));

  auto m2 = zero_model(0, 1, 2, 3, 0.0, 3.0);
  m2.b2 << 40.0, 0.0, 0.0;  // essentially degenerate on bin 0
  for (int i = 0; i < 50; ++i)
    CHECK(sample_conditional(m2, x, rng) == doctest::Approx(0.5));

  // frequencies track probabilities within 3 binomial standard errors
  TrainConfig cfg;
  cfg.hidden = 4;
  cfg.n_bins = 3;
  auto m3 = init_conditional_model(0, 1, 0.0, 3.0, cfg, 52);
  Eigen::VectorXd probs = m3.forward(x);
  const int draws = 100000;
  Eigen::VectorXd count = Eigen::VectorXd::Zero(3);
  Rng rng2(53);
  for (int i = 0; i < draws; ++i) {
    double v = sample_conditional(m3, x, rng2);
    count(m3.bin_of(v)) += 1.0;
  }
  for (int b = 0; b < 3; ++b) {
    double se = std::sqrt(probs(b) * (1.0 - probs(b)) / draws);
    CHECK(std::fabs(count(b) / draws - probs(b)) <= 3.0 * se + 1e-9);
  }
}

TEST_CASE("split sizes follow the configured fractions") {
  TrainConfig cfg;
  auto s = split_sizes(1000, cfg);
  CHECK(s.n_train == 200);
  CHECK(s.n_val == 100);
  CHECK(s.n_test == 700);
  CHECK_THROWS_AS(split_sizes(9, cfg), std::invalid_argument);  // empty val
  TrainConfig bad;
  bad.train_fraction = 0.5;
  bad.val_fraction = 0.6;
  bad.test_fraction = -0.1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("approximate kccsd is near zero under the null") {
  auto p = CorrelatedGaussian::standard(5);
  Rng rng(54);
  Eigen::MatrixXd data = p.sample(2000, rng);
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.seed = 55;
  auto detail = estimate_approx_kccsd_detail(data, p, cfg, Kernel1D::rbf(1.0),
                                             5, 56, 1);
  CHECK(detail.estimate.n == 1400);  // the test split
  double se = std::sqrt((detail.h.array() - detail.h.mean()).square().sum() /
                        (detail.h.size() - 1.0) / detail.h.size());
  CHECK(std::fabs(detail.estimate.total) <= 3.0 * se);
  CHECK(detail.estimate.total ==
        doctest::Approx(detail.h.mean()).epsilon(1e-12));
}

TEST_CASE("untrained models still satisfy the stein identity under the null") {
  // the identity kills the mean regardless of how poor the sampler is
  const int d = 3, n = 400;
  auto p = CorrelatedGaussian::standard(d);
  TrainConfig cfg;
  cfg.n_bins = 10;
  Kernel1D k = Kernel1D::rbf(1.0);

  double mean_total = 0.0, se2 = 0.0;
  const int n_seeds = 20;
  for (int s = 0; s < n_seeds; ++s) {
    Rng rng(derive_seed(600 + s, kStreamData));
    Eigen::MatrixXd data = p.sample(n, rng);
    std::vector<HistogramConditionalModel> models;
    for (int j = 0; j < d; ++j)
      models.push_back(init_conditional_model(j, d - 1, -3.0, 3.0, cfg,
                                              derive_seed(600 + s, kStreamTrain, j)));
    FittedConditionals cond(std::move(models));
    AuxDraws aux = draw_aux(data, cond, 5, derive_seed(600 + s, kStreamAux), 1);
    Eigen::MatrixXd cells = kccsd_cell_means(data, p, aux, k, 1);
    Eigen::VectorXd h = cells.rowwise().sum();
    mean_total += h.mean();
    se2 += (h.array() - h.mean()).square().sum() / (h.size() - 1.0) / h.size();
  }
  mean_total /= n_seeds;
  double combined_se = std::sqrt(se2) / n_seeds;
  CHECK(std::fabs(mean_total) <= 3.0 * combined_se);
}

TEST_CASE("approximate kccsd needs enough rows to split") {
  auto p = CorrelatedGaussian::standard(2);
  Eigen::MatrixXd data = Eigen::MatrixXd::Random(9, 2);
  TrainConfig cfg;
  CHECK_THROWS_AS(
      estimate_approx_kccsd(data, p, cfg, Kernel1D::rbf(1.0), 2, 1, 1),
      std::invalid_argument);
}

TEST_CASE("fitted conditionals persist through save and load") {
  Rng rng(57);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int n = 300, d = 3;
  auto p = CorrelatedGaussian::equicorrelated(d, 0.5, 1.0);
  Eigen::MatrixXd data = p.sample(n, rng);
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.seed = 58;
  auto fitted = fit_all_conditionals(data.topRows(200), data.bottomRows(100),
                                     cfg, 1);

  std::stringstream buffer;
  save_conditionals(fitted, buffer);
  auto loaded = load_conditionals(buffer);

  CHECK(loaded.dim() == fitted.dim());
  for (int j = 0; j < d; ++j) {
    const auto& a = fitted.model(j);
    const auto& b = loaded.model(j);
    CHECK(a.lo == b.lo);
    CHECK(a.hi == b.hi);
    CHECK((a.w1 - b.w1).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.w2 - b.w2).cwiseAbs().maxCoeff() == 0.0);
    Eigen::VectorXd x(d - 1);
    for (int i = 0; i < d - 1; ++i) x(i) = gauss(rng);
    CHECK((a.forward(x) - b.forward(x)).cwiseAbs().maxCoeff() == 0.0);
  }

  std::stringstream bad("not-a-model 1\n");
  CHECK_THROWS_AS(load_conditionals(bad), std::runtime_error);
}

TEST_CASE("training jobs are deterministic across thread counts") {
  Rng rng(59);
  auto p = CorrelatedGaussian::equicorrelated(4, 0.5, 1.0);
  Eigen::MatrixXd data = p.sample(300, rng);
  TrainConfig cfg;
  cfg.epochs = 25;
  cfg.seed = 60;
  auto a = fit_all_conditionals(data.topRows(200), data.bottomRows(100), cfg, 1);
  auto b = fit_all_conditionals(data.topRows(200), data.bottomRows(100), cfg, 3);
  for (int j = 0; j < 4; ++j) {
    CHECK((a.model(j).w1 - b.model(j).w1).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.model(j).w2 - b.model(j).w2).cwiseAbs().maxCoeff() == 0.0);
  }
}
