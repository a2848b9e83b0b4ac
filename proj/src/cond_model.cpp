#include "steincc/cond_model.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "steincc/threading.hpp"

namespace steincc {

namespace {

// Batched forward pass; returns softmax probabilities row per input.
Eigen::MatrixXd forward_batch(const HistogramConditionalModel& m,
                              const Eigen::MatrixXd& inputs,
                              Eigen::MatrixXd* hidden_out = nullptr) {
  Eigen::MatrixXd a = (inputs * m.w1.transpose()).rowwise() + m.b1.transpose();
  Eigen::MatrixXd s = (1.0 + (-a.array()).exp()).inverse();
  Eigen::MatrixXd z = (s * m.w2.transpose()).rowwise() + m.b2.transpose();
  // stable softmax
  Eigen::VectorXd rowmax = z.rowwise().maxCoeff();
  Eigen::MatrixXd e = (z.colwise() - rowmax).array().exp();
  Eigen::VectorXd norm = e.rowwise().sum();
  if (hidden_out) *hidden_out = s;
  return e.array().colwise() / norm.array();
}

void check_batch(const HistogramConditionalModel& m,
                 const Eigen::MatrixXd& inputs, const Eigen::VectorXi& labels) {
  if (inputs.cols() != m.input_dim())
    throw std::invalid_argument("cond_model: input dimension mismatch");
  if (labels.size() != inputs.rows())
    throw std::invalid_argument("cond_model: labels/batch size mismatch");
  for (int i = 0; i < labels.size(); ++i)
    if (labels(i) < 0 || labels(i) >= m.n_bins())
      throw std::invalid_argument("cond_model: label out of range");
}

Eigen::MatrixXd strip_column(const Eigen::MatrixXd& data, int coord) {
  Eigen::MatrixXd out(data.rows(), data.cols() - 1);
  int pos = 0;
  for (int c = 0; c < data.cols(); ++c) {
    if (c == coord) continue;
    out.col(pos++) = data.col(c);
  }
  return out;
}

Eigen::VectorXi bin_labels(const HistogramConditionalModel& m,
                           const Eigen::MatrixXd& data, int coord) {
  Eigen::VectorXi labels(data.rows());
  for (int i = 0; i < data.rows(); ++i) labels(i) = m.bin_of(data(i, coord));
  return labels;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("TrainConfig: epochs");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("TrainConfig: lr");
  if (n_bins < 1) throw std::invalid_argument("TrainConfig: n_bins");
  if (hidden < 1) throw std::invalid_argument("TrainConfig: hidden");
  if (!(train_fraction > 0.0) || !(val_fraction > 0.0) ||
      !(test_fraction > 0.0) ||
      std::fabs(train_fraction + val_fraction + test_fraction - 1.0) > 1e-9)
    throw std::invalid_argument(
        "TrainConfig: split fractions must be positive and sum to one");
}

Eigen::VectorXd HistogramConditionalModel::forward(
    const Eigen::VectorXd& x_minus_j) const {
  if (x_minus_j.size() != input_dim())
    throw std::invalid_argument("forward: input dimension mismatch");
  return forward_batch(*this, x_minus_j.transpose()).row(0).transpose();
}

int HistogramConditionalModel::bin_of(double v) const {
  int idx = static_cast<int>(std::floor((v - lo) / bin_width()));
  return std::min(std::max(idx, 0), n_bins() - 1);
}

double HistogramConditionalModel::midpoint(int bin) const {
  if (bin < 0 || bin >= n_bins())
    throw std::invalid_argument("midpoint: bin out of range");
  return lo + (bin + 0.5) * bin_width();
}

double cross_entropy_loss(const HistogramConditionalModel& model,
                          const Eigen::MatrixXd& inputs,
                          const Eigen::VectorXi& labels) {
  check_batch(model, inputs, labels);
  Eigen::MatrixXd probs = forward_batch(model, inputs);
  double loss = 0.0;
  for (int i = 0; i < labels.size(); ++i)
    loss -= std::log(std::max(probs(i, labels(i)),
                              std::numeric_limits<double>::min()));
  return loss / static_cast<double>(labels.size());
}

CrossEntropyGrad cross_entropy_gradient(const HistogramConditionalModel& model,
                                        const Eigen::MatrixXd& inputs,
                                        const Eigen::VectorXi& labels) {
  check_batch(model, inputs, labels);
  const auto n = inputs.rows();
  Eigen::MatrixXd hidden;
  Eigen::MatrixXd probs = forward_batch(model, inputs, &hidden);

  CrossEntropyGrad g;
  g.loss = 0.0;
  for (int i = 0; i < n; ++i)
    g.loss -= std::log(std::max(probs(i, labels(i)),
                                std::numeric_limits<double>::min()));
  g.loss /= static_cast<double>(n);

  // dz = (probs - onehot) / n, then standard backprop through the sigmoid
  Eigen::MatrixXd dz = probs;
  for (int i = 0; i < n; ++i) dz(i, labels(i)) -= 1.0;
  dz /= static_cast<double>(n);

  g.w2 = dz.transpose() * hidden;
  g.b2 = dz.colwise().sum().transpose();
  Eigen::MatrixXd ds = dz * model.w2;
  Eigen::MatrixXd da =
      ds.array() * hidden.array() * (1.0 - hidden.array());
  g.w1 = da.transpose() * inputs;
  g.b1 = da.colwise().sum().transpose();
  return g;
}

HistogramConditionalModel init_conditional_model(int coord, int input_dim,
                                                 double lo, double hi,
                                                 const TrainConfig& cfg,
                                                 std::uint64_t seed) {
  cfg.validate();
  if (input_dim < 1)
    throw std::invalid_argument("init_conditional_model: input_dim");
  if (!(hi > lo)) throw std::invalid_argument("init_conditional_model: interval");

  HistogramConditionalModel m;
  m.coord = coord;
  m.lo = lo;
  m.hi = hi;
  m.w1.resize(cfg.hidden, input_dim);
  m.b1 = Eigen::VectorXd::Zero(cfg.hidden);
  m.w2.resize(cfg.n_bins, cfg.hidden);
  m.b2 = Eigen::VectorXd::Zero(cfg.n_bins);

  Rng rng = make_rng(seed);
  const double bound1 = 1.0 / std::sqrt(static_cast<double>(input_dim));
  const double bound2 = 1.0 / std::sqrt(static_cast<double>(cfg.hidden));
  std::uniform_real_distribution<double> u1(-bound1, bound1);
  std::uniform_real_distribution<double> u2(-bound2, bound2);
  for (int r = 0; r < m.w1.rows(); ++r)
    for (int c = 0; c < m.w1.cols(); ++c) m.w1(r, c) = u1(rng);
  for (int r = 0; r < m.w2.rows(); ++r)
    for (int c = 0; c < m.w2.cols(); ++c) m.w2(r, c) = u2(rng);
  return m;
}

HistogramConditionalModel fit_conditional(const Eigen::MatrixXd& train,
                                          const Eigen::MatrixXd& val, int coord,
                                          const TrainConfig& cfg,
                                          std::uint64_t seed) {
  cfg.validate();
  const int d = static_cast<int>(train.cols());
  if (coord < 0 || coord >= d)
    throw std::invalid_argument("fit_conditional: coordinate out of range");
  if (train.rows() < 1 || val.rows() < 1)
    throw std::invalid_argument("fit_conditional: empty split");
  if (val.cols() != d)
    throw std::invalid_argument("fit_conditional: split width mismatch");

  // bin interval from the train column, widened by 5% of the range
  double cmin = train.col(coord).minCoeff();
  double cmax = train.col(coord).maxCoeff();
  double range = cmax - cmin;
  double lo, hi;
  if (range > 0.0) {
    lo = cmin - 0.05 * range;
    hi = cmax + 0.05 * range;
  } else {  // constant column: any nonzero width works
    lo = cmin - 0.5;
    hi = cmax + 0.5;
  }

  HistogramConditionalModel model =
      init_conditional_model(coord, d - 1, lo, hi, cfg, seed);

  Eigen::MatrixXd train_in = strip_column(train, coord);
  Eigen::VectorXi train_lab = bin_labels(model, train, coord);
  Eigen::MatrixXd val_in = strip_column(val, coord);
  Eigen::VectorXi val_lab = bin_labels(model, val, coord);

  HistogramConditionalModel best = model;
  double best_val = cross_entropy_loss(model, val_in, val_lab);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    CrossEntropyGrad g = cross_entropy_gradient(model, train_in, train_lab);
    if (!std::isfinite(g.loss)) {
      std::ostringstream msg;
      msg << "fit_conditional: training diverged at coordinate " << coord
          << ", epoch " << epoch;
      throw std::runtime_error(msg.str());
    }
    model.w1 -= cfg.learning_rate * g.w1;
    model.b1 -= cfg.learning_rate * g.b1;
    model.w2 -= cfg.learning_rate * g.w2;
    model.b2 -= cfg.learning_rate * g.b2;

    double vl = cross_entropy_loss(model, val_in, val_lab);
    if (vl < best_val) {
      best_val = vl;
      best = model;
    }
  }
  return best;
}

double sample_conditional(const HistogramConditionalModel& model,
                          const Eigen::VectorXd& x_minus_j, Rng& rng) {
  Eigen::VectorXd probs = model.forward(x_minus_j);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = unif(rng);
  double acc = 0.0;
  for (int b = 0; b < probs.size(); ++b) {
    acc += probs(b);
    if (u < acc) return model.midpoint(b);
  }
  return model.midpoint(model.n_bins() - 1);  // roundoff fallthrough
}

FittedConditionals::FittedConditionals(
    std::vector<HistogramConditionalModel> models)
    : models_(std::move(models)) {
  if (models_.empty())
    throw std::invalid_argument("FittedConditionals: no models");
  for (int j = 0; j < dim(); ++j) {
    if (models_[j].coord != j)
      throw std::invalid_argument(
          "FittedConditionals: models must be ordered by coordinate");
    if (models_[j].input_dim() != dim() - 1)
      throw std::invalid_argument(
          "FittedConditionals: model input width mismatch");
  }
}

const HistogramConditionalModel& FittedConditionals::model(int j) const {
  if (j < 0 || j >= dim())
    throw std::invalid_argument("FittedConditionals: coordinate");
  return models_[j];
}

double FittedConditionals::draw(int j, const Eigen::VectorXd& x,
                                Rng& rng) const {
  if (j < 0 || j >= dim())
    throw std::invalid_argument("FittedConditionals: coordinate");
  if (x.size() != dim())
    throw std::invalid_argument("FittedConditionals: context size");
  Eigen::VectorXd rest(dim() - 1);
  int pos = 0;
  for (int c = 0; c < dim(); ++c)
    if (c != j) rest(pos++) = x(c);
  return sample_conditional(models_[j], rest, rng);
}

FittedConditionals fit_all_conditionals(const Eigen::MatrixXd& train,
                                        const Eigen::MatrixXd& val,
                                        const TrainConfig& cfg, int n_threads) {
  const int d = static_cast<int>(train.cols());
  std::vector<HistogramConditionalModel> models(d);
  parallel_for(d, n_threads, [&](std::int64_t j) {
    models[j] = fit_conditional(train, val, static_cast<int>(j), cfg,
                                derive_seed(cfg.seed, kStreamTrain, j));
  });
  return FittedConditionals(std::move(models));
}

SplitSizes split_sizes(int n, const TrainConfig& cfg) {
  cfg.validate();
  SplitSizes s;
  s.n_train = static_cast<int>(std::floor(cfg.train_fraction * n));
  s.n_val = static_cast<int>(std::floor(cfg.val_fraction * n));
  s.n_test = n - s.n_train - s.n_val;
  if (s.n_train < 1 || s.n_val < 1 || s.n_test < 1)
    throw std::invalid_argument(
        "split_sizes: dataset too small, a split would be empty");
  return s;
}

ApproxKccsd estimate_approx_kccsd_detail(const Eigen::MatrixXd& data,
                                         const Target& p,
                                         const TrainConfig& cfg,
                                         const Kernel1D& kernel, int n_y,
                                         std::uint64_t seed, int n_threads) {
  SplitSizes s = split_sizes(static_cast<int>(data.rows()), cfg);
  Eigen::MatrixXd train = data.topRows(s.n_train);
  Eigen::MatrixXd val = data.middleRows(s.n_train, s.n_val);
  Eigen::MatrixXd test = data.bottomRows(s.n_test);

  FittedConditionals cond = fit_all_conditionals(train, val, cfg, n_threads);
  AuxDraws aux =
      draw_aux(test, cond, n_y, derive_seed(seed, kStreamAux), n_threads);
  Eigen::MatrixXd cells = kccsd_cell_means(test, p, aux, kernel, n_threads);

  ApproxKccsd out{DiscrepancyEstimate{}, cells.rowwise().sum(), std::move(cond)};
  out.estimate.n = s.n_test;
  out.estimate.n_y = n_y;
  out.estimate.w_squared = cells.colwise().mean().transpose();
  out.estimate.total = out.estimate.w_squared.sum();
  return out;
}

DiscrepancyEstimate estimate_approx_kccsd(const Eigen::MatrixXd& data,
                                          const Target& p,
                                          const TrainConfig& cfg,
                                          const Kernel1D& kernel, int n_y,
                                          std::uint64_t seed, int n_threads) {
  return estimate_approx_kccsd_detail(data, p, cfg, kernel, n_y, seed,
                                      n_threads)
      .estimate;
}

void save_conditionals(const FittedConditionals& models, std::ostream& out) {
  out.precision(17);
  out << "steincc-condmodel 1\n" << models.dim() << "\n";
  for (int j = 0; j < models.dim(); ++j) {
    const auto& m = models.model(j);
    out << "model " << m.coord << " " << m.lo << " " << m.hi << " "
        << m.n_bins() << " " << m.w1.rows() << " " << m.input_dim() << "\n";
    auto dump = [&out](const Eigen::MatrixXd& mat) {
      for (int r = 0; r < mat.rows(); ++r)
        for (int c = 0; c < mat.cols(); ++c)
          out << mat(r, c) << ((c + 1 == mat.cols()) ? "\n" : " ");
    };
    dump(m.w1);
    dump(m.b1.transpose());
    dump(m.w2);
    dump(m.b2.transpose());
  }
  if (!out) throw std::runtime_error("save_conditionals: write failed");
}

FittedConditionals load_conditionals(std::istream& in) {
  std::string tag;
  int version = 0;
  if (!(in >> tag >> version) || tag != "steincc-condmodel" || version != 1)
    throw std::runtime_error("load_conditionals: unrecognized format");
  int count = 0;
  if (!(in >> count) || count < 1)
    throw std::runtime_error("load_conditionals: bad model count");

  std::vector<HistogramConditionalModel> models;
  models.reserve(count);
  for (int jm = 0; jm < count; ++jm) {
    std::string word;
    int coord = 0, bins = 0, hidden = 0, input = 0;
    HistogramConditionalModel m;
    if (!(in >> word >> coord >> m.lo >> m.hi >> bins >> hidden >> input) ||
        word != "model" || bins < 1 || hidden < 1 || input < 1)
      throw std::runtime_error("load_conditionals: bad model header");
    m.coord = coord;
    m.w1.resize(hidden, input);
    m.b1.resize(hidden);
    m.w2.resize(bins, hidden);
    m.b2.resize(bins);
    auto slurp = [&in](auto& mat) {
      for (int r = 0; r < mat.rows(); ++r)
        for (int c = 0; c < mat.cols(); ++c)
          if (!(in >> mat(r, c)))
            throw std::runtime_error("load_conditionals: truncated parameters");
    };
    slurp(m.w1);
    slurp(m.b1);
    slurp(m.w2);
    slurp(m.b2);
    models.push_back(std::move(m));
  }
  return FittedConditionals(std::move(models));
}

}  // namespace steincc
