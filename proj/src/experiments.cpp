#include "steincc/experiments.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "steincc/threading.hpp"

namespace steincc {

const char* const kCsvHeader =
    "experiment,method,kernel,dim,n,param,metric,value,seed,seconds";

namespace {

enum class ExperimentId {
  kPowerVsDim,
  kPowerVsN,
  kNullCalibration,
  kDiscrepancyVsN,
  kLaplaceNoisePower,
  kMwgBias,
};

ExperimentId parse_experiment(const std::string& id) {
  if (id == "power-vs-dim") return ExperimentId::kPowerVsDim;
  if (id == "power-vs-n") return ExperimentId::kPowerVsN;
  if (id == "null-calibration") return ExperimentId::kNullCalibration;
  if (id == "discrepancy-vs-n") return ExperimentId::kDiscrepancyVsN;
  if (id == "laplace-noise-power") return ExperimentId::kLaplaceNoisePower;
  if (id == "mwg-bias") return ExperimentId::kMwgBias;
  throw std::invalid_argument("unknown experiment: " + id);
}

double now_seconds(const std::chrono::steady_clock::time_point& t0) {
  const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
  return dt.count();
}

std::string format_sig10(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%#.10g", v);
  return buf;
}

Scenario scenario_for(ExperimentId id, int d, const ExperimentSpec& spec) {
  Scenario sc;
  switch (id) {
    case ExperimentId::kNullCalibration:
      sc = null_calibration_scenario(d, *spec.method, spec.kernel);
      break;
    case ExperimentId::kPowerVsDim:
    case ExperimentId::kPowerVsN:
      sc = gaussian_vs_laplace_scenario(d, *spec.method, spec.kernel);
      break;
    case ExperimentId::kLaplaceNoisePower:
      sc = laplace_noise_scenario(d, *spec.method, spec.kernel);
      break;
    default:
      throw std::invalid_argument("experiment has no gof scenario");
  }
  sc.train = spec.train;
  sc.n_y = spec.n_y;
  return sc;
}

void validate_spec(const ExperimentSpec& spec, ExperimentId id) {
  if (!(spec.alpha > 0.0 && spec.alpha < 1.0)) {
    throw std::invalid_argument("alpha must lie in (0, 1)");
  }
  if (spec.bootstrap_l < 1) throw std::invalid_argument("bootstrap_l >= 1");
  if (spec.n_y < 1) throw std::invalid_argument("n_y >= 1");
  if (spec.n_reps < 1) throw std::invalid_argument("n_reps >= 1");
  if (id == ExperimentId::kMwgBias) {
    if (spec.biases.empty()) throw std::invalid_argument("empty bias grid");
    MwgConfig base;
    base.n_iters = spec.mwg_iters;
    base.burn_in = spec.mwg_burnin;
    base.proposal_std = spec.mwg_proposal_std;
    base.validate();
    if (spec.mwg_thin < 1) throw std::invalid_argument("mwg_thin >= 1");
  } else {
    if (spec.dims.empty() || spec.ns.empty()) {
      throw std::invalid_argument("empty dimension or sample-size list");
    }
    for (int d : spec.dims) {
      if (d < 1) throw std::invalid_argument("dims must be >= 1");
    }
    for (int n : spec.ns) {
      if (n < 2) throw std::invalid_argument("ns must be >= 2");
    }
  }
}

std::vector<ResultRow> run_power_family(ExperimentId id,
                                        const ExperimentSpec& spec,
                                        int threads) {
  std::vector<ResultRow> rows;
  for (int d : spec.dims) {
    Scenario sc = scenario_for(id, d, spec);
    for (int n : spec.ns) {
      const std::uint64_t cell_seed =
          derive_seed(spec.seed, static_cast<std::uint64_t>(d),
                      static_cast<std::uint64_t>(n));
      const auto t0 = std::chrono::steady_clock::now();
      auto reps = run_gof_reps(sc, n, spec.n_reps, spec.bootstrap_l,
                               spec.alpha, cell_seed, threads);
      const double secs = spec.timing ? now_seconds(t0) : 0.0;

      ResultRow base;
      base.experiment = spec.experiment;
      base.method = method_name(*spec.method);
      base.kernel = spec.kernel.name();
      base.dim = d;
      base.n = n;
      base.seed = spec.seed;

      if (id == ExperimentId::kNullCalibration) {
        double cell_secs = 0.0;
        int rejects = 0;
        for (std::size_t r = 0; r < reps.size(); ++r) {
          ResultRow row = base;
          row.param = static_cast<double>(r);
          row.metric = "p-value";
          row.value = reps[r].p_value;
          row.seconds = spec.timing ? reps[r].seconds : 0.0;
          rows.push_back(row);
          cell_secs += reps[r].seconds;
          rejects += reps[r].reject ? 1 : 0;
        }
        ResultRow rate = base;
        rate.metric = "rejection-rate";
        rate.value = static_cast<double>(rejects) /
                     static_cast<double>(reps.size());
        rate.seconds = spec.timing ? secs : 0.0;
        rows.push_back(rate);
        (void)cell_secs;
      } else {
        std::vector<double> pvals;
        pvals.reserve(reps.size());
        for (const auto& r : reps) pvals.push_back(r.p_value);
        ResultRow row = base;
        row.metric = "power";
        row.value = power_from_pvalues(pvals, spec.alpha);
        row.seconds = spec.timing ? secs : 0.0;
        rows.push_back(row);
      }
    }
  }
  return rows;
}

std::vector<ResultRow> run_discrepancy_vs_n(const ExperimentSpec& spec,
                                            int threads) {
  std::vector<ResultRow> rows;
  for (int d : spec.dims) {
    CorrelatedGaussian p_model = CorrelatedGaussian::standard(d);
    auto q = std::make_shared<CorrelatedGaussian>(
        CorrelatedGaussian::equicorrelated(d, 0.5, 1.0));
    GaussianConditionalSampler cond(q);
    for (int n : spec.ns) {
      for (int rep = 0; rep < spec.n_reps; ++rep) {
        const std::uint64_t rep_seed =
            derive_seed(spec.seed, static_cast<std::uint64_t>(d),
                        static_cast<std::uint64_t>(n),
                        static_cast<std::uint64_t>(rep));
        Rng data_rng = make_rng(derive_seed(rep_seed, kStreamData));
        Eigen::MatrixXd data = q->sample(n, data_rng);

        const auto t0 = std::chrono::steady_clock::now();
        double value = 0.0;
        switch (*spec.method) {
          case Method::kKccsdExact:
            value = estimate_kccsd(data, p_model, cond, spec.kernel.make_1d(),
                                   spec.n_y, rep_seed, threads)
                        .total;
            break;
          case Method::kKccsdApprox: {
            TrainConfig cfg = spec.train;
            cfg.seed = derive_seed(rep_seed, kStreamTrain);
            value = estimate_approx_kccsd(data, p_model, cfg,
                                          spec.kernel.make_1d(), spec.n_y,
                                          rep_seed, threads)
                        .total;
            break;
          }
          case Method::kKsd:
            value = estimate_ksd(data, p_model,
                                 spec.kernel.make_nd_for_data(data), threads);
            break;
        }

        ResultRow row;
        row.experiment = spec.experiment;
        row.method = method_name(*spec.method);
        row.kernel = spec.kernel.name();
        row.dim = d;
        row.n = n;
        row.param = static_cast<double>(rep);
        row.metric = "discrepancy";
        row.value = value;
        row.seed = spec.seed;
        row.seconds = spec.timing ? now_seconds(t0) : 0.0;
        rows.push_back(row);
      }
    }
  }
  return rows;
}

std::vector<ResultRow> run_mwg_bias(const ExperimentSpec& spec, int threads) {
  Rng obs_rng = make_rng(derive_seed(spec.seed, kStreamData));
  Eigen::VectorXd obs =
      GmmPosterior::simulate_observations(100, 1.0, -1.0, 2.0, obs_rng);
  GmmPosterior target(std::move(obs), 2.0);

  MwgConfig base;
  base.n_iters = spec.mwg_iters;
  base.burn_in = spec.mwg_burnin;
  base.proposal_std = spec.mwg_proposal_std;

  std::vector<std::uint64_t> seeds;
  seeds.reserve(static_cast<std::size_t>(spec.n_reps));
  for (int r = 0; r < spec.n_reps; ++r) {
    seeds.push_back(derive_seed(spec.seed, static_cast<std::uint64_t>(r)));
  }

  const auto t0 = std::chrono::steady_clock::now();
  BiasSweep sweep =
      bias_sweep(target, Eigen::VectorXd::Zero(2), spec.biases, base,
                 spec.n_y, spec.kernel.make_1d(), seeds, spec.mwg_thin,
                 threads);
  const double secs = spec.timing ? now_seconds(t0) : 0.0;

  const int retained = spec.mwg_iters - spec.mwg_burnin;
  const int kept = (retained + spec.mwg_thin - 1) / spec.mwg_thin;

  std::vector<ResultRow> rows;
  ResultRow base_row;
  base_row.experiment = spec.experiment;
  base_row.method = method_name(Method::kKccsdExact);
  base_row.kernel = spec.kernel.name();
  base_row.dim = 2;
  base_row.n = kept;
  base_row.seed = spec.seed;

  for (int s = 0; s < sweep.estimates.rows(); ++s) {
    for (int b = 0; b < sweep.estimates.cols(); ++b) {
      ResultRow row = base_row;
      row.param = sweep.biases[static_cast<std::size_t>(b)];
      row.metric = "discrepancy";
      row.value = sweep.estimates(s, b);
      rows.push_back(row);
    }
  }
  for (int b = 0; b < sweep.means.size(); ++b) {
    ResultRow row = base_row;
    row.param = sweep.biases[static_cast<std::size_t>(b)];
    row.metric = "mean-discrepancy";
    row.value = sweep.means(b);
    row.seconds = secs;  // wall time of the whole sweep
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

void apply_defaults(ExperimentSpec& spec) {
  const ExperimentId id = parse_experiment(spec.experiment);
  if (!spec.method) {
    switch (id) {
      case ExperimentId::kPowerVsDim:
      case ExperimentId::kPowerVsN:
      case ExperimentId::kLaplaceNoisePower:
        spec.method = Method::kKccsdApprox;
        break;
      default:
        spec.method = Method::kKccsdExact;
        break;
    }
  }
  if (!spec.sigma_set && !spec.median_set) {
    spec.kernel.median_bandwidth =
        (*spec.method == Method::kKsd &&
         spec.kernel.family == KernelFamily::kRbf);
  }

  switch (id) {
    case ExperimentId::kPowerVsDim:
      if (spec.dims.empty()) spec.dims = {5, 15, 30};
      if (spec.ns.empty()) spec.ns = {1000};
      if (spec.n_reps == 0) spec.n_reps = 100;
      break;
    case ExperimentId::kPowerVsN:
      if (spec.dims.empty()) spec.dims = {5};
      if (spec.ns.empty()) spec.ns = {250, 500, 1000};
      if (spec.n_reps == 0) spec.n_reps = 100;
      break;
    case ExperimentId::kNullCalibration:
      if (spec.dims.empty()) spec.dims = {10};
      if (spec.ns.empty()) spec.ns = {500};
      if (spec.n_reps == 0) spec.n_reps = 200;
      break;
    case ExperimentId::kDiscrepancyVsN:
      if (spec.dims.empty()) spec.dims = {30};
      if (spec.ns.empty()) spec.ns = {500, 1000, 2000};
      if (spec.n_reps == 0) spec.n_reps = 5;
      break;
    case ExperimentId::kLaplaceNoisePower:
      if (spec.dims.empty()) spec.dims = {5, 15};
      if (spec.ns.empty()) spec.ns = {500};
      if (spec.n_reps == 0) spec.n_reps = 100;
      break;
    case ExperimentId::kMwgBias:
      if (spec.biases.empty()) spec.biases = {0.0, 0.05, 0.1, 0.2};
      if (spec.n_reps == 0) spec.n_reps = 10;
      break;
  }
}

std::vector<ResultRow> run_experiment(ExperimentSpec spec) {
  apply_defaults(spec);
  const ExperimentId id = parse_experiment(spec.experiment);
  validate_spec(spec, id);
  const int threads =
      spec.threads > 0 ? spec.threads : default_thread_count();

  switch (id) {
    case ExperimentId::kPowerVsDim:
    case ExperimentId::kPowerVsN:
    case ExperimentId::kNullCalibration:
    case ExperimentId::kLaplaceNoisePower:
      return run_power_family(id, spec, threads);
    case ExperimentId::kDiscrepancyVsN:
      return run_discrepancy_vs_n(spec, threads);
    case ExperimentId::kMwgBias:
      return run_mwg_bias(spec, threads);
  }
  throw std::invalid_argument("unknown experiment: " + spec.experiment);
}

std::string csv_line(const ResultRow& row) {
  std::ostringstream ss;
  ss << row.experiment << ',' << row.method << ',' << row.kernel << ','
     << row.dim << ',' << row.n << ',' << format_sig10(row.param) << ','
     << row.metric << ',' << format_sig10(row.value) << ',' << row.seed << ','
     << format_sig10(row.seconds);
  return ss.str();
}

void emit_csv(const std::vector<ResultRow>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << kCsvHeader << '\n';
  for (const auto& row : rows) out << csv_line(row) << '\n';
  out.flush();
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<ResultRow> parse_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) {
    throw std::runtime_error("unexpected csv header in " + path);
  }
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (fields.size() != 10) {
      throw std::runtime_error("malformed csv row: " + line);
    }
    ResultRow row;
    row.experiment = fields[0];
    row.method = fields[1];
    row.kernel = fields[2];
    row.dim = std::stoi(fields[3]);
    row.n = std::stoi(fields[4]);
    row.param = std::stod(fields[5]);
    row.metric = fields[6];
    row.value = std::stod(fields[7]);
    row.seed = std::stoull(fields[8]);
    row.seconds = std::stod(fields[9]);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace steincc
