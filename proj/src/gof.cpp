#include "steincc/gof.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "steincc/threading.hpp"

namespace steincc {

namespace {

// Sequential accumulation so that sign patterns of +/-1 map to bit-exact
// identities (products by +/-1.0 and symmetric negation are exact).
double signed_mean(const Eigen::VectorXd& values, const double* signs) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    acc += (signs ? signs[i] * values(i) : values(i));
  }
  return acc / static_cast<double>(values.size());
}

void check_signs(const Eigen::VectorXd& signs, Eigen::Index n) {
  if (signs.size() != n) {
    throw std::invalid_argument("sign vector length mismatch");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (signs(i) != 1.0 && signs(i) != -1.0) {
      throw std::invalid_argument("signs must be +/-1");
    }
  }
}

}  // namespace

double gof_statistic(const Eigen::VectorXd& h) {
  if (h.size() == 0) throw std::invalid_argument("empty h");
  return signed_mean(h, nullptr);
}

Eigen::VectorXd compute_h(const Eigen::MatrixXd& data, const Target& p,
                          const ConditionalSampler& cond, const Kernel1D& k,
                          int n_y, std::uint64_t seed, int n_threads) {
  AuxDraws aux = draw_aux(data, cond, n_y, derive_seed(seed, kStreamAux),
                          n_threads);
  Eigen::MatrixXd cells = kccsd_cell_means(data, p, aux, k, n_threads);
  return cells.rowwise().sum();
}

double wild_bootstrap_replicate(const Eigen::VectorXd& h,
                                const Eigen::VectorXd& signs) {
  if (h.size() == 0) throw std::invalid_argument("empty h");
  check_signs(signs, h.size());
  return signed_mean(h, signs.data());
}

Eigen::VectorXd wild_bootstrap(const Eigen::VectorXd& h, int L, Rng& rng) {
  if (L < 1) throw std::invalid_argument("need at least one replicate");
  if (h.size() == 0) throw std::invalid_argument("empty h");
  Eigen::VectorXd out(L);
  Eigen::VectorXd signs(h.size());
  for (int l = 0; l < L; ++l) {
    for (Eigen::Index i = 0; i < h.size(); ++i) signs(i) = rademacher(rng);
    out(l) = signed_mean(h, signs.data());
  }
  return out;
}

GofResult gof_result_from(double t_n, Eigen::VectorXd replicates,
                          double alpha) {
  const Eigen::Index L = replicates.size();
  if (L < 1) throw std::invalid_argument("need at least one replicate");
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("alpha must lie in (0, 1)");
  }
  if (!std::isfinite(t_n)) throw std::invalid_argument("non-finite statistic");

  GofResult res;
  res.t_n = t_n;
  res.alpha = alpha;
  res.p_value =
      static_cast<double>((replicates.array() > t_n).count()) /
      static_cast<double>(L);

  std::vector<double> sorted(replicates.data(), replicates.data() + L);
  std::sort(sorted.begin(), sorted.end());
  // 0-based order statistic; the small nudge keeps exact integers from
  // drifting up a slot through floating-point error.
  auto idx = static_cast<Eigen::Index>(
      std::ceil((1.0 - alpha) * static_cast<double>(L) - 1e-9));
  idx = std::clamp<Eigen::Index>(idx, 0, L - 1);
  res.quantile = sorted[static_cast<std::size_t>(idx)];
  res.reject = t_n > res.quantile;
  res.replicates = std::move(replicates);
  return res;
}

GofResult gof_test(const Eigen::MatrixXd& data, const Target& p,
                   const ConditionalSampler& cond, const Kernel1D& k, int n_y,
                   int L, double alpha, std::uint64_t seed, int n_threads) {
  Eigen::VectorXd h = compute_h(data, p, cond, k, n_y, seed, n_threads);
  Rng boot = make_rng(derive_seed(seed, kStreamBootstrap));
  Eigen::VectorXd reps = wild_bootstrap(h, L, boot);
  return gof_result_from(gof_statistic(h), std::move(reps), alpha);
}

GofResult approx_gof_test(const Eigen::MatrixXd& data, const Target& p,
                          const TrainConfig& cfg, const Kernel1D& k, int n_y,
                          int L, double alpha, std::uint64_t seed,
                          int n_threads) {
  ApproxKccsd detail =
      estimate_approx_kccsd_detail(data, p, cfg, k, n_y, seed, n_threads);
  Rng boot = make_rng(derive_seed(seed, kStreamBootstrap));
  Eigen::VectorXd reps = wild_bootstrap(detail.h, L, boot);
  return gof_result_from(gof_statistic(detail.h), std::move(reps),
                         alpha);
}

double ksd_statistic(const Eigen::MatrixXd& gram) {
  return ksd_bootstrap_replicate(gram,
                                 Eigen::VectorXd::Ones(gram.rows()));
}

double ksd_bootstrap_replicate(const Eigen::MatrixXd& gram,
                               const Eigen::VectorXd& signs) {
  const Eigen::Index n = gram.rows();
  if (n < 1 || gram.cols() != n) {
    throw std::invalid_argument("gram matrix must be square and non-empty");
  }
  check_signs(signs, n);
  Eigen::VectorXd v = gram * signs;
  return signed_mean(v, signs.data());
}

GofResult ksd_gof_test(const Eigen::MatrixXd& data, const Target& p,
                       const KernelND& k, int L, double alpha,
                       std::uint64_t seed, int n_threads) {
  if (L < 1) throw std::invalid_argument("need at least one replicate");
  Eigen::MatrixXd gram = ksd_gram(data, p, k, n_threads);
  const Eigen::Index n = gram.rows();
  Rng boot = make_rng(derive_seed(seed, kStreamBootstrap));
  Eigen::VectorXd reps(L);
  Eigen::VectorXd signs(n);
  for (int l = 0; l < L; ++l) {
    for (Eigen::Index i = 0; i < n; ++i) signs(i) = rademacher(boot);
    reps(l) = ksd_bootstrap_replicate(gram, signs);
  }
  return gof_result_from(ksd_statistic(gram), std::move(reps), alpha);
}

const char* method_name(Method m) {
  switch (m) {
    case Method::kKccsdExact:
      return "kccsd-exact";
    case Method::kKccsdApprox:
      return "kccsd-approx";
    case Method::kKsd:
      return "ksd";
  }
  throw std::invalid_argument("unknown method");
}

Scenario null_calibration_scenario(int d, Method method,
                                   const KernelConfig& kernel) {
  auto target = std::make_shared<CorrelatedGaussian>(
      CorrelatedGaussian::equicorrelated(d, 0.5, 1.0));
  Scenario s;
  s.target = target;
  s.sample_data = [target](int n, Rng& rng) { return target->sample(n, rng); };
  s.conditionals = std::make_shared<GaussianConditionalSampler>(target);
  s.method = method;
  s.kernel = kernel;
  return s;
}

Scenario gaussian_vs_laplace_scenario(int d, Method method,
                                      const KernelConfig& kernel) {
  auto target = std::make_shared<CorrelatedGaussian>(
      CorrelatedGaussian::standard(d));
  Scenario s;
  s.target = target;
  s.sample_data = [d](int n, Rng& rng) {
    return LaplaceProduct(d).sample(n, rng);
  };
  s.conditionals = std::make_shared<LaplaceConditionalSampler>(d);
  s.method = method;
  s.kernel = kernel;
  return s;
}

Scenario laplace_noise_scenario(int d, Method method,
                                const KernelConfig& kernel) {
  auto target = std::make_shared<CorrelatedGaussian>(
      CorrelatedGaussian::equicorrelated(d, 0.5, 2.0));
  Scenario s;
  s.target = target;
  s.sample_data = [d](int n, Rng& rng) {
    return laplace_noise_gaussian_sample(d, n, rng);
  };
  s.conditionals = nullptr;  // the convolved law has no closed conditionals
  s.method = method;
  s.kernel = kernel;
  return s;
}

std::vector<GofRep> run_gof_reps(const Scenario& scenario, int n, int n_reps,
                                 int L, double alpha, std::uint64_t seed,
                                 int n_threads) {
  if (!scenario.target || !scenario.sample_data) {
    throw std::invalid_argument("scenario needs a target and a data sampler");
  }
  if (scenario.method == Method::kKccsdExact && !scenario.conditionals) {
    throw std::invalid_argument(
        "exact method needs the data distribution's conditionals");
  }
  if (n < 1 || n_reps < 1) throw std::invalid_argument("n and n_reps >= 1");

  std::vector<GofRep> out(static_cast<std::size_t>(n_reps));
  parallel_for(n_reps, n_threads, [&](std::int64_t rep) {
    const std::uint64_t rep_seed = derive_seed(seed, static_cast<std::uint64_t>(rep));
    Rng data_rng = make_rng(derive_seed(rep_seed, kStreamData));
    Eigen::MatrixXd data = scenario.sample_data(n, data_rng);
    const auto t0 = std::chrono::steady_clock::now();
    GofResult res;
    switch (scenario.method) {
      case Method::kKccsdExact:
        res = gof_test(data, *scenario.target, *scenario.conditionals,
                       scenario.kernel.make_1d(), scenario.n_y, L, alpha,
                       rep_seed, 1);
        break;
      case Method::kKccsdApprox: {
        TrainConfig cfg = scenario.train;
        cfg.seed = derive_seed(rep_seed, kStreamTrain);
        res = approx_gof_test(data, *scenario.target, cfg,
                              scenario.kernel.make_1d(), scenario.n_y, L,
                              alpha, rep_seed, 1);
        break;
      }
      case Method::kKsd:
        res = ksd_gof_test(data, *scenario.target,
                           scenario.kernel.make_nd_for_data(data), L, alpha,
                           rep_seed, 1);
        break;
    }
    const std::chrono::duration<double> dt =
        std::chrono::steady_clock::now() - t0;
    out[static_cast<std::size_t>(rep)] =
        GofRep{res.p_value, res.t_n, res.reject, dt.count()};
  });
  return out;
}

double power_from_pvalues(const std::vector<double>& pvalues, double alpha) {
  if (pvalues.empty()) throw std::invalid_argument("no p-values");
  std::size_t hits = 0;
  for (double p : pvalues) hits += (p < alpha) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(pvalues.size());
}

double estimate_power(const Scenario& scenario, int n, int n_reps, double alpha,
                      int L, std::uint64_t seed, int n_threads) {
  auto reps = run_gof_reps(scenario, n, n_reps, L, alpha, seed, n_threads);
  std::vector<double> pvals;
  pvals.reserve(reps.size());
  for (const auto& r : reps) pvals.push_back(r.p_value);
  return power_from_pvalues(pvals, alpha);
}

}  // namespace steincc
