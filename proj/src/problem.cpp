#include "dpbm/problem.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace dpbm {

void Dataset::validate() const {
  if (features.rows() != labels.size()) throw std::invalid_argument("dataset: feature/label count mismatch");
  for (Index j = 0; j < labels.size(); ++j) {
    if (labels[j] != 1.0 && labels[j] != -1.0)
      throw std::invalid_argument("dataset: label at row " + std::to_string(j) + " is not +-1");
  }
  if (!features.allFinite()) throw std::invalid_argument("dataset: non-finite feature value");
}

double softplus(double z) {
  if (z > 0.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

namespace {

// 1 / (1 + exp(-z)) without overflow.
double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_dims(const Vector& x, const Dataset& data) {
  if (data.size() == 0) throw std::invalid_argument("logistic loss: empty dataset");
  if (x.size() != data.dim())
    throw std::invalid_argument("logistic loss: x has dimension " + std::to_string(x.size()) +
                                ", data has " + std::to_string(data.dim()));
}

// Every logistic evaluation goes through these two loops so that a full batch
// in natural order reproduces the full-data result bit for bit.
template <typename RowAt>
double logistic_value_rows(const Vector& x, const Dataset& data, Index count, RowAt row_at) {
  double sum = 0.0;
  for (Index k = 0; k < count; ++k) {
    const Index j = row_at(k);
    const double margin = data.labels[j] * data.features.row(j).dot(x);
    sum += softplus(-margin);
  }
  return sum / static_cast<double>(count);
}

template <typename RowAt>
std::pair<Extended, Vector> logistic_value_grad_rows(const Vector& x, const Dataset& data, Index count,
                                                     RowAt row_at) {
  Extended sum = 0.0L;
  Vector grad = Vector::Zero(x.size());
  for (Index k = 0; k < count; ++k) {
    const Index j = row_at(k);
    const double margin = data.labels[j] * data.features.row(j).dot(x);
    sum += softplus(-margin);
    grad.noalias() -= (data.labels[j] * sigmoid(-margin)) * data.features.row(j).transpose();
  }
  return {sum / static_cast<Extended>(count), grad * (1.0 / static_cast<double>(count))};
}

void check_batch(const Dataset& data, std::span<const Index> batch) {
  if (batch.empty()) throw std::invalid_argument("logistic loss: empty batch");
  for (Index j : batch) {
    if (j < 0 || j >= data.size()) throw std::out_of_range("batch index out of range");
  }
}

}  // namespace

double logistic_value(const Vector& x, const Dataset& data) {
  check_dims(x, data);
  return logistic_value_rows(x, data, data.size(), [](Index k) { return k; });
}

double logistic_value(const Vector& x, const Dataset& data, std::span<const Index> batch) {
  check_dims(x, data);
  check_batch(data, batch);
  return logistic_value_rows(x, data, static_cast<Index>(batch.size()), [&](Index k) { return batch[k]; });
}

Vector logistic_grad(const Vector& x, const Dataset& data) {
  check_dims(x, data);
  return logistic_value_grad_rows(x, data, data.size(), [](Index k) { return k; }).second;
}

Vector logistic_grad(const Vector& x, const Dataset& data, std::span<const Index> batch) {
  check_dims(x, data);
  check_batch(data, batch);
  return logistic_value_grad_rows(x, data, static_cast<Index>(batch.size()), [&](Index k) { return batch[k]; })
      .second;
}

Dataset select_rows(const Dataset& data, std::span<const Index> rows) {
  Dataset out;
  out.features.resize(static_cast<Index>(rows.size()), data.dim());
  out.labels.resize(static_cast<Index>(rows.size()));
  for (Index k = 0; k < static_cast<Index>(rows.size()); ++k) {
    out.features.row(k) = data.features.row(rows[k]);
    out.labels[k] = data.labels[rows[k]];
  }
  return out;
}

std::vector<Dataset> partition_dataset(const Dataset& data, Index n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("partition_dataset: need at least one shard");
  if (n > data.size()) throw std::invalid_argument("partition_dataset: more shards than samples");
  std::vector<Index> order(static_cast<std::size_t>(data.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<Dataset> shards;
  shards.reserve(static_cast<std::size_t>(n));
  const Index base = data.size() / n;
  const Index extra = data.size() % n;
  Index offset = 0;
  for (Index i = 0; i < n; ++i) {
    const Index len = base + (i < extra ? 1 : 0);
    shards.push_back(select_rows(data, std::span<const Index>(order.data() + offset, static_cast<std::size_t>(len))));
    offset += len;
  }
  return shards;
}

Batch sample_batch(Index data_size, Index size, std::mt19937_64& rng) {
  if (size < 1 || size > data_size)
    throw std::invalid_argument("sample_batch: size " + std::to_string(size) + " not in [1, " +
                                std::to_string(data_size) + "]");
  Batch all(static_cast<std::size_t>(data_size));
  std::iota(all.begin(), all.end(), Index{0});
  if (size == data_size) return all;
  // Partial Fisher-Yates.
  for (Index k = 0; k < size; ++k) {
    std::uniform_int_distribution<Index> pick(k, data_size - 1);
    std::swap(all[static_cast<std::size_t>(k)], all[static_cast<std::size_t>(pick(rng))]);
  }
  all.resize(static_cast<std::size_t>(size));
  std::sort(all.begin(), all.end());
  return all;
}

Dataset subsample(const Dataset& data, Index max_samples, std::uint64_t seed) {
  if (max_samples <= 0 || max_samples >= data.size()) return data;
  std::vector<Index> order(static_cast<std::size_t>(data.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(static_cast<std::size_t>(max_samples));
  return select_rows(data, order);
}

void normalize_features(Dataset& data) {
  for (Index c = 0; c < data.dim(); ++c) {
    auto col = data.features.col(c);
    const double lo = col.minCoeff();
    const double hi = col.maxCoeff();
    if (hi > lo) {
      col = (col.array() - lo) / (hi - lo);
    } else {
      col.setZero();
    }
  }
}

// -- synthetic data ---------------------------------------------------------

Dataset make_synthetic_logistic(Index samples, Index dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif;
  Vector planted(dim);
  for (Index c = 0; c < dim; ++c) planted[c] = 2.0 * normal(rng);
  Dataset data;
  data.features.resize(samples, dim);
  data.labels.resize(samples);
  for (Index j = 0; j < samples; ++j) {
    for (Index c = 0; c < dim; ++c) data.features(j, c) = normal(rng) / std::sqrt(static_cast<double>(dim));
    const double p = sigmoid(data.features.row(j).dot(planted));
    data.labels[j] = unif(rng) < p ? 1.0 : -1.0;
  }
  return data;
}

Dataset make_synthetic_covertype(Index samples, std::uint64_t seed) {
  constexpr Index kContinuous = 10;
  constexpr Index kWilderness = 4;
  constexpr Index kSoil = 40;
  constexpr Index kDim = kContinuous + kWilderness + kSoil;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif;

  Vector planted(kDim);
  for (Index c = 0; c < kContinuous; ++c) planted[c] = 3.0 * normal(rng);
  for (Index c = kContinuous; c < kDim; ++c) planted[c] = 1.5 * normal(rng);

  // Skewed category frequencies, as in the real soil/wilderness columns.
  std::vector<double> wild_w(kWilderness), soil_w(kSoil);
  for (auto& w : wild_w) w = 0.2 + unif(rng);
  for (auto& w : soil_w) w = std::pow(unif(rng), 3.0) + 0.01;
  std::discrete_distribution<Index> wild(wild_w.begin(), wild_w.end());
  std::discrete_distribution<Index> soil(soil_w.begin(), soil_w.end());

  Dataset data;
  data.features = RowMatrix::Zero(samples, kDim);
  data.labels.resize(samples);
  Vector score(samples);
  for (Index j = 0; j < samples; ++j) {
    // Correlated continuous block: a shared latent factor plus noise, squashed to [0, 1].
    const double latent = normal(rng);
    for (Index c = 0; c < kContinuous; ++c) {
      const double raw = 0.6 * latent * (c % 2 == 0 ? 1.0 : -1.0) + 0.8 * normal(rng);
      data.features(j, c) = sigmoid(raw);
    }
    data.features(j, kContinuous + wild(rng)) = 1.0;
    data.features(j, kContinuous + kWilderness + soil(rng)) = 1.0;
    score[j] = data.features.row(j).dot(planted);
  }
  // Centre the planted scores so the two classes are roughly balanced.
  std::vector<double> sorted(score.data(), score.data() + samples);
  std::nth_element(sorted.begin(), sorted.begin() + samples / 2, sorted.end());
  const double median = sorted[static_cast<std::size_t>(samples / 2)];
  for (Index j = 0; j < samples; ++j) {
    const double p = sigmoid(2.0 * (score[j] - median));
    data.labels[j] = unif(rng) < p ? 1.0 : -1.0;
  }
  return data;
}

// -- LocalObjective ---------------------------------------------------------

LocalObjective LocalObjective::quadratic(Matrix Q, Vector q, double theta) {
  if (Q.rows() != Q.cols() || Q.rows() != q.size()) throw std::invalid_argument("quadratic: dimension mismatch");
  if (!(theta >= 0.0)) throw std::invalid_argument("quadratic: theta must be >= 0");
  if (!Q.isApprox(Q.transpose(), 1e-12)) throw std::invalid_argument("quadratic: Q must be symmetric");
  LocalObjective f;
  f.kind_ = LossKind::quadratic;
  f.dim_ = q.size();
  f.theta_ = theta;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(Q);
  const Vector& ev = eig.eigenvalues();
  if (ev.minCoeff() < -1e-10 * std::max(1.0, ev.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("quadratic: Q must be positive semidefinite");
  f.smoothness_ = std::max(0.0, ev.maxCoeff()) + theta;
  f.sample_smoothness_ = f.smoothness_;

  // min of 0.5 x^T (Q + theta I) x - q^T x, or -inf when unbounded below.
  const Vector curv = ev.array() + theta;
  const Vector qe = eig.eigenvectors().transpose() * q;
  double minimum = 0.0;
  const double scale = std::max(1.0, curv.cwiseAbs().maxCoeff());
  for (Index k = 0; k < curv.size(); ++k) {
    if (curv[k] > 1e-12 * scale) {
      minimum -= 0.5 * qe[k] * qe[k] / curv[k];
    } else if (std::abs(qe[k]) > 1e-12) {
      minimum = -std::numeric_limits<double>::infinity();
      break;
    }
  }
  f.lower_bound_ = minimum;
  f.Q_ = std::move(Q);
  f.q_ = std::move(q);
  return f;
}

LocalObjective LocalObjective::logistic(Dataset shard, double theta) {
  shard.validate();
  if (shard.size() == 0) throw std::invalid_argument("logistic: empty shard");
  if (!(theta >= 0.0)) throw std::invalid_argument("logistic: theta must be >= 0");
  LocalObjective f;
  f.kind_ = LossKind::logistic;
  f.dim_ = shard.dim();
  f.theta_ = theta;
  const Matrix gram = shard.features.transpose() * shard.features;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  f.smoothness_ = eig.eigenvalues().maxCoeff() / (4.0 * static_cast<double>(shard.size())) + theta;
  f.sample_smoothness_ = shard.features.rowwise().squaredNorm().maxCoeff() / 4.0 + theta;
  f.lower_bound_ = 0.0;  // log(1 + e^z) > 0 and the theta term is >= 0
  f.data_ = std::move(shard);
  return f;
}

double LocalObjective::value(const Vector& x) const {
  if (x.size() != dim_) throw std::invalid_argument("objective: dimension mismatch");
  if (kind_ == LossKind::quadratic) return static_cast<double>(quadratic_value(x));
  return logistic_value(x, data_) + 0.5 * theta_ * x.squaredNorm();
}

Extended LocalObjective::quadratic_value(const Vector& x) const {
  Extended v = 0.0L;
  for (Index i = 0; i < dim_; ++i) {
    Extended qx = 0.0L;
    for (Index j = 0; j < dim_; ++j) qx += static_cast<Extended>(Q_(i, j)) * x[j];
    v += (0.5L * qx - q_[i] + 0.5L * theta_ * x[i]) * x[i];
  }
  return v;
}

Vector LocalObjective::gradient(const Vector& x) const { return value_grad(x).second; }

std::pair<Extended, Vector> LocalObjective::value_grad(const Vector& x) const {
  if (x.size() != dim_) throw std::invalid_argument("objective: dimension mismatch");
  if (kind_ == LossKind::quadratic) return {quadratic_value(x), Q_ * x - q_ + theta_ * x};
  auto [v, g] = logistic_value_grad_rows(x, data_, data_.size(), [](Index k) { return k; });
  return {v + 0.5L * theta_ * dot_extended(x, x), g + theta_ * x};
}

std::pair<Extended, Vector> LocalObjective::value_grad(const Vector& x, std::span<const Index> batch) const {
  if (kind_ != LossKind::logistic) throw std::logic_error("batch evaluation needs a data-driven loss");
  if (x.size() != dim_) throw std::invalid_argument("objective: dimension mismatch");
  check_batch(data_, batch);
  auto [v, g] = logistic_value_grad_rows(x, data_, static_cast<Index>(batch.size()),
                                         [&](Index k) { return batch[k]; });
  return {v + 0.5L * theta_ * dot_extended(x, x), g + theta_ * x};
}

// -- Problem ----------------------------------------------------------------

void Problem::validate() const {
  if (locals.empty()) throw std::invalid_argument("problem: no nodes");
  const Index d = dim();
  for (const auto& f : locals) {
    if (f.dim() != d) throw std::invalid_argument("problem: local objectives disagree on dimension");
  }
  reg.validate(d);
}

double Problem::global_value(const Vector& x) const {
  double total = 0.0;
  for (const auto& f : locals) total += f.value(x);
  return total + static_cast<double>(nodes()) * reg.value(x);
}

Vector Problem::global_gradient(const Vector& x) const {
  Vector g = Vector::Zero(dim());
  for (const auto& f : locals) g += f.gradient(x);
  return g;
}

double Problem::total_smoothness() const {
  double L = 0.0;
  for (const auto& f : locals) L += f.smoothness();
  return L;
}

Problem make_quadratic_problem(Index nodes, Index dim, double theta, Regularizer reg, std::uint64_t seed,
                               double curvature) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.5, 1.0);
  Problem p;
  p.reg = std::move(reg);
  for (Index i = 0; i < nodes; ++i) {
    Matrix B(dim, dim);
    for (Index r = 0; r < dim; ++r)
      for (Index c = 0; c < dim; ++c) B(r, c) = normal(rng);
    Matrix Q = B.transpose() * B;
    Q = 0.5 * (Q + Q.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(Q, Eigen::EigenvaluesOnly);
    Q *= curvature * unif(rng) / eig.eigenvalues().maxCoeff();
    Vector q(dim);
    for (Index c = 0; c < dim; ++c) q[c] = normal(rng);
    p.locals.push_back(LocalObjective::quadratic(std::move(Q), std::move(q), theta));
  }
  p.validate();
  return p;
}

Problem make_logistic_problem(const Dataset& data, Index nodes, double theta, Regularizer reg,
                              std::uint64_t seed) {
  Problem p;
  p.reg = std::move(reg);
  for (auto& shard : partition_dataset(data, nodes, seed))
    p.locals.push_back(LocalObjective::logistic(std::move(shard), theta));
  p.validate();
  return p;
}

}  // namespace dpbm
