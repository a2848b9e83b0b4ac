#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "steincc/kernels.hpp"
#include "steincc/rng.hpp"
#include "steincc/stein.hpp"
#include "steincc/targets.hpp"

namespace steincc {

// Training settings for the histogram conditional classifiers.  The split
// fractions are applied in order (train, validation, test) over the rows of
// the dataset; `seed` drives weight initialization.
struct TrainConfig {
  int epochs = 500;
  double learning_rate = 0.1;
  int n_bins = 20;
  int hidden = 15;
  double train_fraction = 0.2;
  double val_fraction = 0.1;
  double test_fraction = 0.7;
  std::uint64_t seed = 0;

  void validate() const;
};

// One-hidden-layer classifier over a binned coordinate:
//   probs = softmax(w2 sigmoid(w1 u + b1) + b2),  u = x_{-coord}.
// Bins partition [lo, hi] uniformly, half-open with the last bin closed;
// values outside the interval fall into the nearest edge bin.
struct HistogramConditionalModel {
  int coord = 0;
  double lo = 0.0;
  double hi = 1.0;
  Eigen::MatrixXd w1;  // hidden x input
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;  // bins x hidden
  Eigen::VectorXd b2;

  int n_bins() const { return static_cast<int>(w2.rows()); }
  int input_dim() const { return static_cast<int>(w1.cols()); }
  double bin_width() const { return (hi - lo) / n_bins(); }

  Eigen::VectorXd forward(const Eigen::VectorXd& x_minus_j) const;
  int bin_of(double v) const;
  double midpoint(int bin) const;
};

struct CrossEntropyGrad {
  Eigen::MatrixXd w1;
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;
  Eigen::VectorXd b2;
  double loss = 0.0;
};

// Mean cross-entropy over the batch (rows of `inputs`, one label each).
double cross_entropy_loss(const HistogramConditionalModel& model,
                          const Eigen::MatrixXd& inputs,
                          const Eigen::VectorXi& labels);

// Loss plus its gradient with respect to every parameter block.
CrossEntropyGrad cross_entropy_gradient(const HistogramConditionalModel& model,
                                        const Eigen::MatrixXd& inputs,
                                        const Eigen::VectorXi& labels);

// Fresh model with weights uniform on [-1/sqrt(fan_in), 1/sqrt(fan_in)] and
// zero biases.
HistogramConditionalModel init_conditional_model(int coord, int input_dim,
                                                 double lo, double hi,
                                                 const TrainConfig& cfg,
                                                 std::uint64_t seed);

// Full-batch gradient descent on the train rows; returns the parameter
// snapshot with the lowest validation loss (the initial model counts).
// `train` and `val` are full (n x d) data matrices; the coordinate column
// supplies labels and the rest the inputs.  Bin edges come from the train
// column range widened by 5% on each side.
HistogramConditionalModel fit_conditional(const Eigen::MatrixXd& train,
                                          const Eigen::MatrixXd& val, int coord,
                                          const TrainConfig& cfg,
                                          std::uint64_t seed);

// Categorical draw over bins, returned as the bin midpoint.
double sample_conditional(const HistogramConditionalModel& model,
                          const Eigen::VectorXd& x_minus_j, Rng& rng);

// One fitted model per coordinate, exposed as a ConditionalSampler so the
// estimators can consume learned conditionals like exact ones.
class FittedConditionals : public ConditionalSampler {
 public:
  explicit FittedConditionals(std::vector<HistogramConditionalModel> models);

  int dim() const { return static_cast<int>(models_.size()); }
  const HistogramConditionalModel& model(int j) const;

  double draw(int j, const Eigen::VectorXd& x, Rng& rng) const override;

 private:
  std::vector<HistogramConditionalModel> models_;
};

// Trains every coordinate (concurrently when n_threads > 1) with one RNG
// substream per coordinate derived from cfg.seed.
FittedConditionals fit_all_conditionals(const Eigen::MatrixXd& train,
                                        const Eigen::MatrixXd& val,
                                        const TrainConfig& cfg, int n_threads);

struct SplitSizes {
  int n_train = 0;
  int n_val = 0;
  int n_test = 0;
};

// floor(frac * n) rows for train and validation, remainder for test;
// throws if any subset would be empty.
SplitSizes split_sizes(int n, const TrainConfig& cfg);

struct ApproxKccsd {
  DiscrepancyEstimate estimate;  // computed on the test split only
  Eigen::VectorXd h;             // per-test-row contributions
  FittedConditionals conditionals;
};

// Approximate pipeline: split, fit the conditionals on train/validation,
// then estimate the discrepancy on the held-out test rows with auxiliary
// draws from the learned models.  cfg.seed drives training; `seed` drives
// the auxiliary draws.
ApproxKccsd estimate_approx_kccsd_detail(const Eigen::MatrixXd& data,
                                         const Target& p,
                                         const TrainConfig& cfg,
                                         const Kernel1D& kernel, int n_y,
                                         std::uint64_t seed, int n_threads);

DiscrepancyEstimate estimate_approx_kccsd(const Eigen::MatrixXd& data,
                                          const Target& p,
                                          const TrainConfig& cfg,
                                          const Kernel1D& kernel, int n_y,
                                          std::uint64_t seed, int n_threads);

// Versioned plain-text dump of every model (shape plus parameters at full
// precision).
void save_conditionals(const FittedConditionals& models, std::ostream& out);
FittedConditionals load_conditionals(std::istream& in);

}  // namespace steincc
