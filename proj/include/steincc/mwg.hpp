#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <vector>

#include "steincc/kernels.hpp"
#include "steincc/rng.hpp"
#include "steincc/stein.hpp"
#include "steincc/targets.hpp"

namespace steincc {

struct MwgConfig {
  int n_iters = 60000;
  int burn_in = 50000;
  double proposal_std = 0.5;
  double bias = 0.0;  // added to the acceptance probability before clamping
  std::uint64_t seed = 0;

  void validate() const;
};

// min(1, exp(log_ratio) + bias)
double acceptance_probability(double log_ratio, double bias);

// One random-walk Metropolis update of coordinate j in place.  `log_p`
// caches log p(x) and is updated on acceptance; returns acceptance.
bool mwg_coordinate_step(int j, Eigen::VectorXd& x, double& log_p,
                         const Target& p, const MwgConfig& cfg, Rng& rng);

// Conditional draws realised as single (possibly biased) Metropolis moves
// of one coordinate, the transition kernel the chain itself uses.
class MetropolisConditionalSampler : public ConditionalSampler {
 public:
  MetropolisConditionalSampler(std::shared_ptr<const Target> p,
                               double proposal_std, double bias);

  double draw(int j, const Eigen::VectorXd& x, Rng& rng) const override;

 private:
  std::shared_ptr<const Target> p_;
  MwgConfig cfg_;
};

struct ChainOutput {
  Eigen::MatrixXd samples;  // (n_iters - burn_in) x d, every post-burn-in state
  AuxDraws aux;             // n_y one-step Metropolis moves per (row, coord)
  double acceptance_rate = 0.0;
};

// Coordinate sweeps in index order from `init`; the chain stream is
// derive_seed(cfg.seed, kStreamChain) and each auxiliary cell (i, j) uses
// its own substream of derive_seed(cfg.seed, kStreamAux), so the retained
// states do not depend on n_y.
ChainOutput run_chain(const Target& p, const Eigen::VectorXd& init,
                      const MwgConfig& cfg, int n_y);

// Keeps rows 0, thin, 2 thin, ... together with their auxiliaries.
ChainOutput thin_chain(const ChainOutput& chain, int thin);

struct BiasSweep {
  std::vector<double> biases;
  Eigen::MatrixXd estimates;  // one row per seed, one column per bias
  Eigen::VectorXd means;      // column means
};

// For every (seed, bias) cell: run the chain, thin it, and estimate the
// complete-conditional discrepancy with the recorded Metropolis auxiliaries.
BiasSweep bias_sweep(const Target& p, const Eigen::VectorXd& init,
                     const std::vector<double>& biases, const MwgConfig& base,
                     int n_y, const Kernel1D& k,
                     const std::vector<std::uint64_t>& seeds, int thin,
                     int n_threads);

}  // namespace steincc
