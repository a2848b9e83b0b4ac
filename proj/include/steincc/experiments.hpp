#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "steincc/cond_model.hpp"
#include "steincc/gof.hpp"
#include "steincc/kernels.hpp"
#include "steincc/mwg.hpp"

namespace steincc {

// Experiment ids: power-vs-dim, power-vs-n, null-calibration,
// discrepancy-vs-n, laplace-noise-power, mwg-bias.  Empty lists, n_reps = 0,
// and a disengaged method are placeholders that apply_defaults fills with
// the per-experiment desk-scale values.
struct ExperimentSpec {
  std::string experiment = "null-calibration";
  std::optional<Method> method;
  KernelConfig kernel;
  bool sigma_set = false;   // a bandwidth was requested explicitly
  bool median_set = false;  // the median heuristic was requested explicitly
  std::vector<int> dims;
  std::vector<int> ns;
  std::vector<double> biases;
  int n_reps = 0;
  double alpha = 0.05;
  int bootstrap_l = 500;
  int n_y = 5;
  std::uint64_t seed = 0;
  int threads = 0;  // 0 -> default_thread_count()
  TrainConfig train;
  int mwg_iters = 6000;
  int mwg_burnin = 5000;
  int mwg_thin = 10;
  double mwg_proposal_std = 0.5;
  bool timing = true;  // false zeroes the seconds column for byte-stable reruns
};

struct ResultRow {
  std::string experiment;
  std::string method;
  std::string kernel;
  int dim = 0;
  int n = 0;
  double param = 0.0;  // bias for mwg-bias, repetition index for per-rep rows
  std::string metric;
  double value = 0.0;
  std::uint64_t seed = 0;
  double seconds = 0.0;
};

extern const char* const kCsvHeader;

// Fills empty lists / zero counts with the experiment's desk-scale defaults
// and applies the bandwidth policy (sigma = 1 for the conditional methods,
// median heuristic for ksd) unless a flag pinned one explicitly.
void apply_defaults(ExperimentSpec& spec);

std::vector<ResultRow> run_experiment(ExperimentSpec spec);

// One CSV line (no trailing newline); floating-point fields carry ten
// significant digits.
std::string csv_line(const ResultRow& row);

void emit_csv(const std::vector<ResultRow>& rows, const std::string& path);

std::vector<ResultRow> parse_csv(const std::string& path);

}  // namespace steincc
