#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dpbm/regularizer.hpp"
#include "dpbm/types.hpp"

namespace dpbm {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Labelled samples (a_j, b_j) with b_j in {-1, +1}. Rows of `features` are samples.
struct Dataset {
  RowMatrix features;
  Vector labels;

  Index size() const { return features.rows(); }
  Index dim() const { return features.cols(); }
  void validate() const;
};

/// Index subset of a Dataset.
using Batch = std::vector<Index>;

/// (1/|S|) sum_{j in S} log(1 + exp(-b_j a_j^T x)), S = all rows or `batch`.
double logistic_value(const Vector& x, const Dataset& data);
double logistic_value(const Vector& x, const Dataset& data, std::span<const Index> batch);
Vector logistic_grad(const Vector& x, const Dataset& data);
Vector logistic_grad(const Vector& x, const Dataset& data, std::span<const Index> batch);

/// Stable log(1 + exp(z)).
double softplus(double z);

/// Splits `data` into n shards of sizes differing by at most one, after a seeded shuffle.
std::vector<Dataset> partition_dataset(const Dataset& data, Index n, std::uint64_t seed);

/// Uniform batch without replacement. size == data size returns 0..N-1 in order
/// without touching the generator.
Batch sample_batch(Index data_size, Index size, std::mt19937_64& rng);

/// Seeded shuffle-and-truncate to at most `max_samples` rows.
Dataset subsample(const Dataset& data, Index max_samples, std::uint64_t seed);

/// Min-max scales every feature column to [0, 1]; constant columns become 0.
void normalize_features(Dataset& data);

Dataset select_rows(const Dataset& data, std::span<const Index> rows);

// -- ingestion --------------------------------------------------------------

/// Maps raw file labels to {-1, +1}.
struct LabelMap {
  std::map<double, double> mapping;
  std::optional<double> otherwise;

  /// Accepts +-1 as-is and maps 0 to -1.
  static LabelMap signed_labels();
  /// `positive` -> +1, anything else -> -1.
  static LabelMap one_vs_rest(double positive);

  double operator()(double raw, long line) const;
};

/// Parses `label idx:val ...` with 1-based indices. `dim` = 0 infers the
/// dimension from the largest index seen.
Dataset load_libsvm(const std::string& path, const LabelMap& labels = LabelMap::signed_labels(),
                    Index dim = 0);

/// CSV with header `label,f1,...,fd`.
Dataset load_csv(const std::string& path, const LabelMap& labels = LabelMap::signed_labels());

/// Loads by extension: .csv goes through load_csv, everything else is LIBSVM.
Dataset load_dataset(const std::string& path, const LabelMap& labels, Index dim = 0);

// -- synthetic data ---------------------------------------------------------

/// Gaussian features, labels drawn from a planted logistic model.
Dataset make_synthetic_logistic(Index samples, Index dim, std::uint64_t seed);

/// Covertype-shaped stand-in: 10 continuous features in [0, 1], a 4-way and a
/// 40-way one-hot block (d = 54), labels from a planted noisy logistic model.
Dataset make_synthetic_covertype(Index samples, std::uint64_t seed);

// -- local objectives --------------------------------------------------------

enum class LossKind { quadratic, logistic };

/// Smooth local loss f_i, optionally with a (theta/2)||x||^2 add-on that
/// certifies theta-strong convexity.
class LocalObjective {
 public:
  /// f(x) = 0.5 x^T Q x - q^T x + (theta/2)||x||^2 with Q symmetric PSD.
  static LocalObjective quadratic(Matrix Q, Vector q, double theta = 0.0);
  /// f(x) = mean logistic loss over `shard` + (theta/2)||x||^2.
  static LocalObjective logistic(Dataset shard, double theta = 0.0);

  LossKind kind() const { return kind_; }
  Index dim() const { return dim_; }
  double theta() const { return theta_; }
  const Dataset& data() const { return data_; }
  const Matrix& hessian() const { return Q_; }
  const Vector& linear() const { return q_; }
  Index sample_count() const { return kind_ == LossKind::logistic ? data_.size() : 0; }

  double value(const Vector& x) const;
  Vector gradient(const Vector& x) const;
  std::pair<Extended, Vector> value_grad(const Vector& x) const;
  /// Batch estimate F(x; D'); only for data-driven losses.
  std::pair<Extended, Vector> value_grad(const Vector& x, std::span<const Index> batch) const;

  /// Smoothness constant of f.
  double smoothness() const { return smoothness_; }
  /// Smoothness constant valid for every single-sample loss F(.; xi).
  double sample_smoothness() const { return sample_smoothness_; }
  /// Lower bound valid for f and, for data-driven losses, every F(.; xi).
  double lower_bound() const { return lower_bound_; }

 private:
  Extended quadratic_value(const Vector& x) const;

  LossKind kind_ = LossKind::quadratic;
  Index dim_ = 0;
  double theta_ = 0.0;
  Matrix Q_;
  Vector q_;
  Dataset data_;
  double smoothness_ = 0.0;
  double sample_smoothness_ = 0.0;
  double lower_bound_ = 0.0;
};

/// Composite consensus problem: minimize sum_i f_i(x) + h(x) over a common x.
struct Problem {
  std::vector<LocalObjective> locals;
  Regularizer reg;

  Index nodes() const { return static_cast<Index>(locals.size()); }
  Index dim() const { return locals.empty() ? 0 : locals.front().dim(); }
  void validate() const;

  /// sum_i (f_i(x) + h(x)).
  double global_value(const Vector& x) const;
  Vector global_gradient(const Vector& x) const;
  double total_smoothness() const;
};

/// Random quadratic consensus problem: Q_i = B_i^T B_i / d scaled to
/// lambda_max <= `curvature`, linear terms N(0, 1).
Problem make_quadratic_problem(Index nodes, Index dim, double theta, Regularizer reg, std::uint64_t seed,
                               double curvature = 1.0);

/// Logistic problem over shards of `data`.
Problem make_logistic_problem(const Dataset& data, Index nodes, double theta, Regularizer reg,
                              std::uint64_t seed);

}  // namespace dpbm
