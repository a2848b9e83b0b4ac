#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "steincc/kernels.hpp"
#include "steincc/targets.hpp"

namespace steincc {

// Complete-conditional Stein kernel for coordinate j, evaluated at the
// scalar pair (x_j, y_j) with shared context x_{-j}:
//   k_cc = b(x_j) b(y_j) k(x_j, y_j) + b(x_j) d_y k + b(y_j) d_x k + d_x d_y k
// where b(u) = d_u log p(u | x_{-j}), which equals coordinate j of the joint
// score at (u, x_{-j}).  Throws if the result is not finite.
double cc_stein_kernel(int j, const Eigen::VectorXd& x, double y_j,
                       const Target& p, const Kernel1D& k);

// Coordinate j term of the classical KSD Stein kernel on full vectors:
//   k_0^j = b_j(x) b_j(y) k(x, y) + d_{x_j} d_{y_j} k
//         + b_j(x) d_{y_j} k + b_j(y) d_{x_j} k
double ksd_stein_kernel_coord(int j, const Eigen::VectorXd& x,
                              const Eigen::VectorXd& y, const Target& p,
                              const KernelND& k);

// Block variant: y_block replaces the coordinates in `block` (in order) and
// the kernel acts on the block subvectors.  With a single full block this
// reduces to the sum of ksd_stein_kernel_coord over all coordinates.
double block_stein_kernel(const std::vector<int>& block,
                          const Eigen::VectorXd& x,
                          const Eigen::VectorXd& y_block, const Target& p,
                          const KernelND& k);

struct DiscrepancyEstimate {
  Eigen::VectorXd w_squared;  // per coordinate (or per block)
  double total = 0.0;         // sum of w_squared
  int n = 0;
  int n_y = 0;
};

// Auxiliary draw tensor: at(i, j, k) is the k-th conditional draw for
// coordinate j at data row i.
struct AuxDraws {
  int n = 0, d = 0, n_y = 0;
  std::vector<double> values;

  AuxDraws() = default;
  AuxDraws(int n_, int d_, int n_y_)
      : n(n_), d(d_), n_y(n_y_),
        values(static_cast<std::size_t>(n_) * d_ * n_y_) {}

  double at(int i, int j, int k) const {
    return values[(static_cast<std::size_t>(i) * d + j) * n_y + k];
  }
  double& at(int i, int j, int k) {
    return values[(static_cast<std::size_t>(i) * d + j) * n_y + k];
  }
};

// n_y draws per (row, coordinate); cell (i, j) consumes the substream
// derived from (seed, i, j), so the tensor is identical for every thread
// count.
AuxDraws draw_aux(const Eigen::MatrixXd& data, const ConditionalSampler& cond,
                  int n_y, std::uint64_t seed, int n_threads);

// Mean over auxiliary draws of the cc Stein kernel, one entry per
// (row, coordinate).  Row sums give the test function h; column means give
// the per-coordinate w_j^2 estimates.
Eigen::MatrixXd kccsd_cell_means(const Eigen::MatrixXd& data, const Target& p,
                                 const AuxDraws& aux,
                                 const std::vector<Kernel1D>& kernels,
                                 int n_threads);
Eigen::MatrixXd kccsd_cell_means(const Eigen::MatrixXd& data, const Target& p,
                                 const AuxDraws& aux, const Kernel1D& kernel,
                                 int n_threads);

// Complete-conditional discrepancy estimate with conditional draws from
// `cond`:  w_j^2 = (1 / (n n_y)) sum_{i,k} k_cc^j(x_j^i, y_j^{i,k}; x_{-j}^i).
DiscrepancyEstimate estimate_kccsd(const Eigen::MatrixXd& data, const Target& p,
                                   const ConditionalSampler& cond,
                                   const std::vector<Kernel1D>& kernels,
                                   int n_y, std::uint64_t seed, int n_threads);
DiscrepancyEstimate estimate_kccsd(const Eigen::MatrixXd& data, const Target& p,
                                   const ConditionalSampler& cond,
                                   const Kernel1D& kernel, int n_y,
                                   std::uint64_t seed, int n_threads);

// Same estimate from precomputed auxiliary draws (e.g. Metropolis moves
// recorded alongside a chain).
DiscrepancyEstimate estimate_kccsd_with_aux(const Eigen::MatrixXd& data,
                                            const Target& p,
                                            const AuxDraws& aux,
                                            const std::vector<Kernel1D>& kernels,
                                            int n_threads);
DiscrepancyEstimate estimate_kccsd_with_aux(const Eigen::MatrixXd& data,
                                            const Target& p,
                                            const AuxDraws& aux,
                                            const Kernel1D& kernel,
                                            int n_threads);

// Per-coordinate V-statistic means w_j^2 = (1/n^2) sum_{a,b} k_0^j(x_a, x_b)
// (the diagonal is included, so each entry is nonnegative up to roundoff).
Eigen::VectorXd ksd_w_squared(const Eigen::MatrixXd& data, const Target& p,
                              const KernelND& k, int n_threads);

// Classical KSD estimate; note the convention: this returns ||w||_2, not
// the squared total that estimate_kccsd reports.
double estimate_ksd(const Eigen::MatrixXd& data, const Target& p,
                    const KernelND& k, int n_threads);

// Stein-kernel gram matrix H_ab = sum_j k_0^j(x_a, x_b), used by the
// V-statistic bootstrap.
Eigen::MatrixXd ksd_gram(const Eigen::MatrixXd& data, const Target& p,
                         const KernelND& k, int n_threads);

// Block discrepancy: one kernel (on R^{|block|}) and one w^2 entry per
// block; blocks must partition {0, ..., d-1}.
DiscrepancyEstimate estimate_block_kccsd(
    const Eigen::MatrixXd& data, const std::vector<std::vector<int>>& partition,
    const Target& p, const BlockConditionalSampler& cond,
    const std::vector<KernelND>& kernels, int n_y, std::uint64_t seed,
    int n_threads);

// Monte-Carlo estimate of the witness that attains the per-coordinate
// supremum, evaluated on a grid of x_j values at a fixed context:
//   f*_j(u) = E_{y ~ q(.|x_{-j})}[ k(u, y) b_j(y) + d_y k(u, y) ]
// The n_mc draws come from make_rng(seed) sequentially and are shared
// across grid points.
Eigen::VectorXd optimal_test_function(int j, const Eigen::VectorXd& context,
                                      const Eigen::VectorXd& grid,
                                      const ConditionalSampler& cond,
                                      const Target& p, const Kernel1D& k,
                                      int n_mc, std::uint64_t seed);

}  // namespace steincc
