// Experiment runner: maps a named experiment to the library scenarios and
// writes one CSV table.  Exit codes: 0 success, 1 usage error, 2 runtime
// error.
#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "steincc/experiments.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Complete-conditional Stein discrepancy experiments"};
  app.allow_config_extras(false);

  steincc::ExperimentSpec spec;
  std::string method;
  std::string kernel = "rbf";
  std::string out_path = "results.csv";
  double sigma = 1.0;
  bool median_bandwidth = false;
  bool no_timing = false;

  app.add_option("--experiment", spec.experiment,
                 "power-vs-dim | power-vs-n | null-calibration | "
                 "discrepancy-vs-n | laplace-noise-power | mwg-bias")
      ->envname("STEINCC_EXPERIMENT");
  app.add_option("--method", method, "kccsd-exact | kccsd-approx | ksd")
      ->envname("STEINCC_METHOD");
  app.add_option("--kernel", kernel, "rbf | imq")
      ->envname("STEINCC_KERNEL");
  app.add_option("--dims", spec.dims, "dimensions to sweep")
      ->delimiter(',')
      ->envname("STEINCC_DIMS");
  app.add_option("--ns", spec.ns, "sample sizes to sweep")
      ->delimiter(',')
      ->envname("STEINCC_NS");
  app.add_option("--biases", spec.biases, "acceptance biases (mwg-bias)")
      ->delimiter(',')
      ->envname("STEINCC_BIASES");
  app.add_option("--n-reps", spec.n_reps, "repetitions per cell")
      ->envname("STEINCC_N_REPS");
  app.add_option("--alpha", spec.alpha, "test level")
      ->envname("STEINCC_ALPHA");
  app.add_option("--bootstrap-l", spec.bootstrap_l,
                 "wild-bootstrap replicates")
      ->envname("STEINCC_BOOTSTRAP_L");
  app.add_option("--n-y", spec.n_y, "auxiliary draws per (row, coordinate)")
      ->envname("STEINCC_N_Y");
  app.add_option("--seed", spec.seed, "master seed")
      ->envname("STEINCC_SEED");
  app.add_option("--threads", spec.threads, "worker threads (0 = cores)")
      ->envname("STEINCC_THREADS");
  app.add_option("--out", out_path, "output CSV path")
      ->envname("STEINCC_OUT");

  auto* sigma_opt = app.add_option("--sigma", sigma, "fixed kernel bandwidth")
                        ->envname("STEINCC_SIGMA");
  auto* median_opt =
      app.add_flag("--median-bandwidth", median_bandwidth,
                   "use the median heuristic for the bandwidth")
          ->envname("STEINCC_MEDIAN_BANDWIDTH");
  app.add_option("--imq-c", spec.kernel.imq_c, "imq offset c")
      ->envname("STEINCC_IMQ_C");
  app.add_option("--imq-beta", spec.kernel.imq_beta, "imq exponent beta")
      ->envname("STEINCC_IMQ_BETA");

  app.add_option("--epochs", spec.train.epochs,
                 "conditional-model training epochs")
      ->envname("STEINCC_EPOCHS");
  app.add_option("--learning-rate", spec.train.learning_rate,
                 "conditional-model learning rate")
      ->envname("STEINCC_LEARNING_RATE");
  app.add_option("--bins", spec.train.n_bins,
                 "conditional-model histogram bins")
      ->envname("STEINCC_BINS");
  app.add_option("--hidden", spec.train.hidden,
                 "conditional-model hidden units")
      ->envname("STEINCC_HIDDEN");

  app.add_option("--mwg-iters", spec.mwg_iters, "chain length (mwg-bias)")
      ->envname("STEINCC_MWG_ITERS");
  app.add_option("--mwg-burnin", spec.mwg_burnin, "burn-in (mwg-bias)")
      ->envname("STEINCC_MWG_BURNIN");
  app.add_option("--mwg-thin", spec.mwg_thin, "thinning stride (mwg-bias)")
      ->envname("STEINCC_MWG_THIN");
  app.add_option("--mwg-proposal-std", spec.mwg_proposal_std,
                 "random-walk proposal std (mwg-bias)")
      ->envname("STEINCC_MWG_PROPOSAL_STD");
  app.add_flag("--no-timing", no_timing,
               "zero the seconds column for byte-identical reruns")
      ->envname("STEINCC_NO_TIMING");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (!method.empty()) {
      if (method == "kccsd-exact") {
        spec.method = steincc::Method::kKccsdExact;
      } else if (method == "kccsd-approx") {
        spec.method = steincc::Method::kKccsdApprox;
      } else if (method == "ksd") {
        spec.method = steincc::Method::kKsd;
      } else {
        throw std::invalid_argument("unknown method: " + method);
      }
    }
    if (kernel == "rbf") {
      spec.kernel.family = steincc::KernelFamily::kRbf;
    } else if (kernel == "imq") {
      spec.kernel.family = steincc::KernelFamily::kImq;
    } else {
      throw std::invalid_argument("unknown kernel: " + kernel);
    }
    spec.sigma_set = sigma_opt->count() > 0;
    spec.median_set = median_opt->count() > 0;
    if (spec.sigma_set) spec.kernel.sigma = sigma;
    if (spec.median_set) spec.kernel.median_bandwidth = true;
    if (spec.sigma_set && spec.median_set) {
      throw std::invalid_argument(
          "--sigma and --median-bandwidth are mutually exclusive");
    }
    spec.timing = !no_timing;

    std::vector<steincc::ResultRow> rows = steincc::run_experiment(spec);
    steincc::emit_csv(rows, out_path);
    std::cerr << "wrote " << rows.size() << " rows to " << out_path << "\n";
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
