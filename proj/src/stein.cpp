#include "steincc/stein.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "steincc/rng.hpp"
#include "steincc/threading.hpp"

namespace steincc {

namespace {

// The four operator terms in a fixed order: score-score, score in x, score
// in y, mixed partial.  Shared by the scalar, ksd and block variants so the
// reduction identities hold to roundoff.
inline double stein_terms(double bx, double by, double k, double gx, double gy,
                          double gxy) {
  return bx * by * k + bx * gy + by * gx + gxy;
}

[[noreturn]] void throw_nonfinite(const char* what, int j) {
  std::ostringstream msg;
  msg << what << ": non-finite value at coordinate " << j
      << " (score blow-up or invalid kernel input)";
  throw std::runtime_error(msg.str());
}

void check_kernel_count(std::size_t kernels, std::size_t want,
                        const char* what) {
  if (kernels != want) {
    std::ostringstream msg;
    msg << what << ": expected " << want << " kernels, got " << kernels;
    throw std::invalid_argument(msg.str());
  }
}

std::vector<int> block_membership(const std::vector<std::vector<int>>& partition,
                                  int d, const char* what) {
  std::vector<int> owner(d, -1);
  for (std::size_t b = 0; b < partition.size(); ++b) {
    if (partition[b].empty())
      throw std::invalid_argument(std::string(what) + ": empty block");
    for (int l : partition[b]) {
      if (l < 0 || l >= d || owner[l] != -1)
        throw std::invalid_argument(std::string(what) +
                                    ": blocks must partition the coordinates");
      owner[l] = static_cast<int>(b);
    }
  }
  for (int l = 0; l < d; ++l)
    if (owner[l] == -1)
      throw std::invalid_argument(std::string(what) +
                                  ": blocks must cover every coordinate");
  return owner;
}

}  // namespace

double cc_stein_kernel(int j, const Eigen::VectorXd& x, double y_j,
                       const Target& p, const Kernel1D& k) {
  if (j < 0 || j >= p.dim())
    throw std::invalid_argument("cc_stein_kernel: coordinate out of range");
  const double xj = x(j);
  const double bx = p.score_coord(j, x);
  Eigen::VectorXd with_y = x;
  with_y(j) = y_j;
  const double by = p.score_coord(j, with_y);
  double val = stein_terms(bx, by, k.eval(xj, y_j), k.grad_x(xj, y_j),
                           k.grad_y(xj, y_j), k.grad_xy(xj, y_j));
  if (!std::isfinite(val)) throw_nonfinite("cc_stein_kernel", j);
  return val;
}

double ksd_stein_kernel_coord(int j, const Eigen::VectorXd& x,
                              const Eigen::VectorXd& y, const Target& p,
                              const KernelND& k) {
  if (j < 0 || j >= p.dim())
    throw std::invalid_argument("ksd_stein_kernel_coord: coordinate");
  const double bx = p.score_coord(j, x);
  const double by = p.score_coord(j, y);
  const double r2 = (x - y).squaredNorm();
  const double diff = x(j) - y(j);
  double val = stein_terms(bx, by, k.eval_from(r2), k.grad_x_from(diff, r2),
                           -k.grad_x_from(diff, r2), k.grad_xy_from(diff, r2));
  if (!std::isfinite(val)) throw_nonfinite("ksd_stein_kernel_coord", j);
  return val;
}

double block_stein_kernel(const std::vector<int>& block,
                          const Eigen::VectorXd& x,
                          const Eigen::VectorXd& y_block, const Target& p,
                          const KernelND& k) {
  const int b = static_cast<int>(block.size());
  if (b == 0) throw std::invalid_argument("block_stein_kernel: empty block");
  if (y_block.size() != b || k.dim() != b)
    throw std::invalid_argument("block_stein_kernel: block size mismatch");

  Eigen::VectorXd with_y = x;
  Eigen::VectorXd x_block(b);
  for (int a = 0; a < b; ++a) {
    const int l = block[a];
    if (l < 0 || l >= p.dim())
      throw std::invalid_argument("block_stein_kernel: coordinate");
    x_block(a) = x(l);
    with_y(l) = y_block(a);
  }
  const double r2 = (x_block - y_block).squaredNorm();

  double sum = 0.0;
  for (int a = 0; a < b; ++a) {
    const int l = block[a];
    const double bx = p.score_coord(l, x);
    const double by = p.score_coord(l, with_y);
    const double diff = x_block(a) - y_block(a);
    sum += stein_terms(bx, by, k.eval_from(r2), k.grad_x_from(diff, r2),
                       -k.grad_x_from(diff, r2), k.grad_xy_from(diff, r2));
  }
  if (!std::isfinite(sum)) throw_nonfinite("block_stein_kernel", block[0]);
  return sum;
}

AuxDraws draw_aux(const Eigen::MatrixXd& data, const ConditionalSampler& cond,
                  int n_y, std::uint64_t seed, int n_threads) {
  const int n = static_cast<int>(data.rows());
  const int d = static_cast<int>(data.cols());
  if (n_y < 1) throw std::invalid_argument("draw_aux: n_y must be >= 1");
  AuxDraws aux(n, d, n_y);
  parallel_for(n, n_threads, [&](std::int64_t i) {
    Eigen::VectorXd x = data.row(i).transpose();
    for (int j = 0; j < d; ++j) {
      Rng rng = make_rng(derive_seed(seed, static_cast<std::uint64_t>(i), j));
      for (int k = 0; k < n_y; ++k)
        aux.at(static_cast<int>(i), j, k) = cond.draw(j, x, rng);
    }
  });
  return aux;
}

Eigen::MatrixXd kccsd_cell_means(const Eigen::MatrixXd& data, const Target& p,
                                 const AuxDraws& aux,
                                 const std::vector<Kernel1D>& kernels,
                                 int n_threads) {
  const int n = static_cast<int>(data.rows());
  const int d = static_cast<int>(data.cols());
  if (p.dim() != d)
    throw std::invalid_argument("kccsd_cell_means: target dimension mismatch");
  if (aux.n != n || aux.d != d)
    throw std::invalid_argument("kccsd_cell_means: aux shape mismatch");
  check_kernel_count(kernels.size(), d, "kccsd_cell_means");

  Eigen::MatrixXd cells(n, d);
  parallel_for(n, n_threads, [&](std::int64_t i) {
    Eigen::VectorXd x = data.row(i).transpose();
    for (int j = 0; j < d; ++j) {
      const Kernel1D& k = kernels[j];
      const double xj = x(j);
      const double bx = p.score_coord(j, x);
      double acc = 0.0;
      for (int kk = 0; kk < aux.n_y; ++kk) {
        const double y = aux.at(static_cast<int>(i), j, kk);
        x(j) = y;
        const double by = p.score_coord(j, x);
        x(j) = xj;
        acc += stein_terms(bx, by, k.eval(xj, y), k.grad_x(xj, y),
                           k.grad_y(xj, y), k.grad_xy(xj, y));
      }
      if (!std::isfinite(acc)) {
        std::ostringstream msg;
        msg << "kccsd_cell_means: non-finite contribution at row " << i
            << ", coordinate " << j;
        throw std::runtime_error(msg.str());
      }
      cells(i, j) = acc / aux.n_y;
    }
  });
  return cells;
}

Eigen::MatrixXd kccsd_cell_means(const Eigen::MatrixXd& data, const Target& p,
                                 const AuxDraws& aux, const Kernel1D& kernel,
                                 int n_threads) {
  return kccsd_cell_means(data, p, aux,
                          std::vector<Kernel1D>(data.cols(), kernel),
                          n_threads);
}

namespace {

DiscrepancyEstimate estimate_from_cells(const Eigen::MatrixXd& cells, int n_y) {
  DiscrepancyEstimate est;
  est.n = static_cast<int>(cells.rows());
  est.n_y = n_y;
  est.w_squared = cells.colwise().mean().transpose();
  est.total = est.w_squared.sum();
  return est;
}

}  // namespace

DiscrepancyEstimate estimate_kccsd(const Eigen::MatrixXd& data, const Target& p,
                                   const ConditionalSampler& cond,
                                   const std::vector<Kernel1D>& kernels,
                                   int n_y, std::uint64_t seed, int n_threads) {
  if (data.rows() < 1)
    throw std::invalid_argument("estimate_kccsd: need at least one row");
  AuxDraws aux =
      draw_aux(data, cond, n_y, derive_seed(seed, kStreamAux), n_threads);
  return estimate_from_cells(kccsd_cell_means(data, p, aux, kernels, n_threads),
                             n_y);
}

DiscrepancyEstimate estimate_kccsd(const Eigen::MatrixXd& data, const Target& p,
                                   const ConditionalSampler& cond,
                                   const Kernel1D& kernel, int n_y,
                                   std::uint64_t seed, int n_threads) {
  return estimate_kccsd(data, p, cond,
                        std::vector<Kernel1D>(data.cols(), kernel), n_y, seed,
                        n_threads);
}

DiscrepancyEstimate estimate_kccsd_with_aux(const Eigen::MatrixXd& data,
                                            const Target& p,
                                            const AuxDraws& aux,
                                            const std::vector<Kernel1D>& kernels,
                                            int n_threads) {
  return estimate_from_cells(kccsd_cell_means(data, p, aux, kernels, n_threads),
                             aux.n_y);
}

DiscrepancyEstimate estimate_kccsd_with_aux(const Eigen::MatrixXd& data,
                                            const Target& p,
                                            const AuxDraws& aux,
                                            const Kernel1D& kernel,
                                            int n_threads) {
  return estimate_kccsd_with_aux(
      data, p, aux, std::vector<Kernel1D>(data.cols(), kernel), n_threads);
}

namespace {

// Shared pairwise sweep for the KSD quantities.  Scores are evaluated once
// per row; each row then accumulates its pair terms into disjoint slots.
struct KsdSweep {
  Eigen::MatrixXd per_row_coord;  // (n x d) sums over b of k_0^j(x_a, x_b)
  Eigen::MatrixXd gram;           // (n x n) sums over j
};

KsdSweep ksd_sweep(const Eigen::MatrixXd& data, const Target& p,
                   const KernelND& k, int n_threads, bool want_gram) {
  const int n = static_cast<int>(data.rows());
  const int d = static_cast<int>(data.cols());
  if (p.dim() != d)
    throw std::invalid_argument("ksd: target dimension mismatch");
  if (k.dim() != d) throw std::invalid_argument("ksd: kernel dimension");
  if (n < 2) throw std::invalid_argument("ksd: need at least two rows");

  Eigen::MatrixXd scores(n, d);
  parallel_for(n, n_threads, [&](std::int64_t i) {
    scores.row(i) = p.score(data.row(i).transpose()).transpose();
  });

  KsdSweep out;
  out.per_row_coord = Eigen::MatrixXd::Zero(n, d);
  if (want_gram) out.gram = Eigen::MatrixXd::Zero(n, n);

  parallel_for(n, n_threads, [&](std::int64_t a) {
    Eigen::VectorXd xa = data.row(a).transpose();
    Eigen::VectorXd sa = scores.row(a).transpose();
    for (int b = 0; b < n; ++b) {
      const double r2 = (xa - data.row(b).transpose()).squaredNorm();
      const double kv = k.eval_from(r2);
      double pair_total = 0.0;
      for (int j = 0; j < d; ++j) {
        const double diff = xa(j) - data(b, j);
        const double gx = k.grad_x_from(diff, r2);
        const double term = stein_terms(sa(j), scores(b, j), kv, gx, -gx,
                                        k.grad_xy_from(diff, r2));
        out.per_row_coord(a, j) += term;
        pair_total += term;
      }
      if (want_gram) out.gram(a, b) = pair_total;
    }
    if (!out.per_row_coord.row(a).allFinite()) {
      std::ostringstream msg;
      msg << "ksd: non-finite Stein kernel value at row " << a;
      throw std::runtime_error(msg.str());
    }
  });
  return out;
}

}  // namespace

Eigen::VectorXd ksd_w_squared(const Eigen::MatrixXd& data, const Target& p,
                              const KernelND& k, int n_threads) {
  KsdSweep sweep = ksd_sweep(data, p, k, n_threads, /*want_gram=*/false);
  const double n = static_cast<double>(data.rows());
  return sweep.per_row_coord.colwise().sum().transpose() / (n * n);
}

double estimate_ksd(const Eigen::MatrixXd& data, const Target& p,
                    const KernelND& k, int n_threads) {
  double total = ksd_w_squared(data, p, k, n_threads).sum();
  return std::sqrt(std::max(0.0, total));
}

Eigen::MatrixXd ksd_gram(const Eigen::MatrixXd& data, const Target& p,
                         const KernelND& k, int n_threads) {
  return ksd_sweep(data, p, k, n_threads, /*want_gram=*/true).gram;
}

DiscrepancyEstimate estimate_block_kccsd(
    const Eigen::MatrixXd& data, const std::vector<std::vector<int>>& partition,
    const Target& p, const BlockConditionalSampler& cond,
    const std::vector<KernelND>& kernels, int n_y, std::uint64_t seed,
    int n_threads) {
  const int n = static_cast<int>(data.rows());
  const int d = static_cast<int>(data.cols());
  if (p.dim() != d)
    throw std::invalid_argument("estimate_block_kccsd: target dimension");
  if (n < 1) throw std::invalid_argument("estimate_block_kccsd: empty data");
  if (n_y < 1) throw std::invalid_argument("estimate_block_kccsd: n_y");
  block_membership(partition, d, "estimate_block_kccsd");
  check_kernel_count(kernels.size(), partition.size(), "estimate_block_kccsd");
  for (std::size_t b = 0; b < partition.size(); ++b)
    if (kernels[b].dim() != static_cast<int>(partition[b].size()))
      throw std::invalid_argument(
          "estimate_block_kccsd: kernel dimension must match its block");

  const int nb = static_cast<int>(partition.size());
  const std::uint64_t aux_seed = derive_seed(seed, kStreamAux);
  Eigen::MatrixXd cells(n, nb);
  parallel_for(n, n_threads, [&](std::int64_t i) {
    Eigen::VectorXd x = data.row(i).transpose();
    for (int b = 0; b < nb; ++b) {
      Rng rng = make_rng(derive_seed(aux_seed, static_cast<std::uint64_t>(i), b));
      double acc = 0.0;
      for (int kk = 0; kk < n_y; ++kk) {
        Eigen::VectorXd y = cond.draw_block(partition[b], x, rng);
        acc += block_stein_kernel(partition[b], x, y, p, kernels[b]);
      }
      cells(i, b) = acc / n_y;
    }
  });
  return estimate_from_cells(cells, n_y);
}

Eigen::VectorXd optimal_test_function(int j, const Eigen::VectorXd& context,
                                      const Eigen::VectorXd& grid,
                                      const ConditionalSampler& cond,
                                      const Target& p, const Kernel1D& k,
                                      int n_mc, std::uint64_t seed) {
  if (n_mc < 1) throw std::invalid_argument("optimal_test_function: n_mc");
  if (j < 0 || j >= p.dim())
    throw std::invalid_argument("optimal_test_function: coordinate");

  Rng rng = make_rng(seed);
  Eigen::VectorXd f = Eigen::VectorXd::Zero(grid.size());
  Eigen::VectorXd at_y = context;
  for (int m = 0; m < n_mc; ++m) {
    const double y = cond.draw(j, context, rng);
    at_y(j) = y;
    const double by = p.score_coord(j, at_y);
    for (int g = 0; g < grid.size(); ++g)
      f(g) += k.eval(grid(g), y) * by + k.grad_y(grid(g), y);
  }
  f /= static_cast<double>(n_mc);
  if (!f.allFinite())
    throw std::runtime_error("optimal_test_function: non-finite value");
  return f;
}

}  // namespace steincc
