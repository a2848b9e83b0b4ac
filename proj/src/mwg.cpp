#include "steincc/mwg.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "steincc/threading.hpp"

namespace steincc {

void MwgConfig::validate() const {
  if (!(proposal_std > 0.0)) {
    throw std::invalid_argument("proposal_std must be positive");
  }
  if (!(bias >= 0.0)) throw std::invalid_argument("bias must be >= 0");
  if (n_iters < 1) throw std::invalid_argument("n_iters must be >= 1");
  if (burn_in < 0 || burn_in >= n_iters) {
    throw std::invalid_argument("burn_in must lie in [0, n_iters)");
  }
}

double acceptance_probability(double log_ratio, double bias) {
  if (!(bias >= 0.0)) throw std::invalid_argument("bias must be >= 0");
  return std::min(1.0, std::exp(log_ratio) + bias);
}

bool mwg_coordinate_step(int j, Eigen::VectorXd& x, double& log_p,
                         const Target& p, const MwgConfig& cfg, Rng& rng) {
  if (j < 0 || j >= x.size()) throw std::invalid_argument("coordinate index");
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double old = x(j);
  x(j) = old + cfg.proposal_std * gauss(rng);
  const double log_p_new = p.log_density(x);
  const double a = acceptance_probability(log_p_new - log_p, cfg.bias);
  // the uniform is consumed on every step so the stream does not depend on
  // the acceptance path
  if (unif(rng) < a) {
    log_p = log_p_new;
    return true;
  }
  x(j) = old;
  return false;
}

MetropolisConditionalSampler::MetropolisConditionalSampler(
    std::shared_ptr<const Target> p, double proposal_std, double bias)
    : p_(std::move(p)) {
  if (!p_) throw std::invalid_argument("null target");
  cfg_.proposal_std = proposal_std;
  cfg_.bias = bias;
  cfg_.validate();
}

double MetropolisConditionalSampler::draw(int j, const Eigen::VectorXd& x,
                                          Rng& rng) const {
  Eigen::VectorXd state = x;
  double log_p = p_->log_density(state);
  mwg_coordinate_step(j, state, log_p, *p_, cfg_, rng);
  return state(j);
}

ChainOutput run_chain(const Target& p, const Eigen::VectorXd& init,
                      const MwgConfig& cfg, int n_y) {
  cfg.validate();
  const int d = p.dim();
  if (init.size() != d) throw std::invalid_argument("init dimension mismatch");
  if (n_y < 1) throw std::invalid_argument("n_y must be >= 1");

  ChainOutput out;
  const int retained = cfg.n_iters - cfg.burn_in;
  out.samples.resize(retained, d);

  Rng chain_rng = make_rng(derive_seed(cfg.seed, kStreamChain));
  Eigen::VectorXd x = init;
  double log_p = p.log_density(x);
  std::int64_t accepted = 0;
  for (int iter = 0; iter < cfg.n_iters; ++iter) {
    for (int j = 0; j < d; ++j) {
      accepted += mwg_coordinate_step(j, x, log_p, p, cfg, chain_rng) ? 1 : 0;
    }
    if (iter >= cfg.burn_in) out.samples.row(iter - cfg.burn_in) = x;
  }
  out.acceptance_rate = static_cast<double>(accepted) /
                        (static_cast<double>(cfg.n_iters) * d);

  // n_y independent one-step moves per (row, coordinate), each starting at
  // the retained state
  out.aux = AuxDraws(retained, d, n_y);
  const std::uint64_t aux_seed = derive_seed(cfg.seed, kStreamAux);
  for (int i = 0; i < retained; ++i) {
    const Eigen::VectorXd state = out.samples.row(i);
    const double lp0 = p.log_density(state);
    for (int j = 0; j < d; ++j) {
      Rng rng = make_rng(derive_seed(aux_seed, static_cast<std::uint64_t>(i),
                                     static_cast<std::uint64_t>(j)));
      for (int k = 0; k < n_y; ++k) {
        Eigen::VectorXd move = state;
        double lp = lp0;
        mwg_coordinate_step(j, move, lp, p, cfg, rng);
        out.aux.at(i, j, k) = move(j);
      }
    }
  }
  return out;
}

ChainOutput thin_chain(const ChainOutput& chain, int thin) {
  if (thin < 1) throw std::invalid_argument("thin must be >= 1");
  const int n = static_cast<int>(chain.samples.rows());
  const int d = static_cast<int>(chain.samples.cols());
  const int kept = (n + thin - 1) / thin;
  ChainOutput out;
  out.samples.resize(kept, d);
  out.aux = AuxDraws(kept, d, chain.aux.n_y);
  out.acceptance_rate = chain.acceptance_rate;
  for (int r = 0; r < kept; ++r) {
    const int src = r * thin;
    out.samples.row(r) = chain.samples.row(src);
    for (int j = 0; j < d; ++j) {
      for (int k = 0; k < chain.aux.n_y; ++k) {
        out.aux.at(r, j, k) = chain.aux.at(src, j, k);
      }
    }
  }
  return out;
}

BiasSweep bias_sweep(const Target& p, const Eigen::VectorXd& init,
                     const std::vector<double>& biases, const MwgConfig& base,
                     int n_y, const Kernel1D& k,
                     const std::vector<std::uint64_t>& seeds, int thin,
                     int n_threads) {
  if (biases.empty()) throw std::invalid_argument("empty bias grid");
  if (seeds.empty()) throw std::invalid_argument("empty seed list");
  if (thin < 1) throw std::invalid_argument("thin must be >= 1");

  const auto n_b = static_cast<std::int64_t>(biases.size());
  const auto n_s = static_cast<std::int64_t>(seeds.size());
  BiasSweep sweep;
  sweep.biases = biases;
  sweep.estimates.resize(n_s, n_b);

  parallel_for(n_s * n_b, n_threads, [&](std::int64_t cell) {
    const std::int64_t s = cell / n_b;
    const std::int64_t b = cell % n_b;
    MwgConfig cfg = base;
    cfg.bias = biases[static_cast<std::size_t>(b)];
    cfg.seed = seeds[static_cast<std::size_t>(s)];
    ChainOutput chain = thin_chain(run_chain(p, init, cfg, n_y), thin);
    sweep.estimates(s, b) =
        estimate_kccsd_with_aux(chain.samples, p, chain.aux, k, 1).total;
  });
  sweep.means = sweep.estimates.colwise().mean();
  return sweep;
}

}  // namespace steincc
