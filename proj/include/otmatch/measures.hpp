#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "otmatch/error.hpp"

namespace otmatch {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Weighted point cloud: one treatment arm's empirical covariate distribution.
class DiscreteMeasure {
public:
  DiscreteMeasure(Matrix points, std::vector<double> weights)
      : points_(std::move(points)), weights_(std::move(weights)) {
    if (points_.rows() < 1 || points_.cols() < 1) {
      throw usage_error("measure needs at least one point and one dimension");
    }
    if (static_cast<std::size_t>(points_.rows()) != weights_.size()) {
      throw usage_error("measure has " + std::to_string(points_.rows()) + " points but " +
                        std::to_string(weights_.size()) + " weights");
    }
    if (!points_.allFinite()) throw numeric_error("measure has non-finite coordinates");
    for (double w : weights_) {
      if (!std::isfinite(w) || w < 0.0) throw numeric_error("measure weights must be finite and >= 0");
    }
  }

  // Empirical measure: uniform weights 1/n.
  static DiscreteMeasure empirical(Matrix points) {
    const auto n = static_cast<std::size_t>(points.rows());
    return DiscreteMeasure(std::move(points), std::vector<double>(n, n ? 1.0 / static_cast<double>(n) : 0.0));
  }

  std::size_t size() const noexcept { return weights_.size(); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(points_.cols()); }
  const Matrix& points() const noexcept { return points_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  double total_mass() const noexcept { return std::accumulate(weights_.begin(), weights_.end(), 0.0); }

  std::vector<double> log_weights() const {
    std::vector<double> out(weights_.size());
    std::transform(weights_.begin(), weights_.end(), out.begin(), [](double w) { return std::log(w); });
    return out;
  }

private:
  Matrix points_;
  std::vector<double> weights_;
};

/// Covariates, treatment labels in {0, ..., J-1}, and outcomes for N units.
struct Dataset {
  Matrix covariates;
  std::vector<int> treatment;
  std::vector<double> outcome;
  std::vector<std::string> columns;

  std::size_t size() const noexcept { return treatment.size(); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(covariates.cols()); }

  int arms() const {
    int top = -1;
    for (int t : treatment) top = std::max(top, t);
    return top + 1;
  }

  std::size_t column_index(const std::string& name) const {
    const auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw usage_error("unknown column '" + name + "'");
    return static_cast<std::size_t>(it - columns.begin());
  }

  std::vector<double> column(std::size_t c) const {
    std::vector<double> out(size());
    for (std::size_t i = 0; i < size(); ++i) out[i] = covariates(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
    return out;
  }

  // Rows in the given order; used by resampling.
  Dataset subset(const std::vector<std::size_t>& rows) const {
    Dataset out;
    out.columns = columns;
    out.covariates.resize(static_cast<Eigen::Index>(rows.size()), covariates.cols());
    out.treatment.reserve(rows.size());
    out.outcome.reserve(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      out.covariates.row(static_cast<Eigen::Index>(r)) = covariates.row(static_cast<Eigen::Index>(rows[r]));
      out.treatment.push_back(treatment[rows[r]]);
      out.outcome.push_back(outcome[rows[r]]);
    }
    return out;
  }

  void validate() const {
    const auto n = size();
    if (n == 0) throw usage_error("dataset is empty");
    if (static_cast<std::size_t>(covariates.rows()) != n || outcome.size() != n) {
      throw usage_error("dataset columns have inconsistent lengths");
    }
    if (!columns.empty() && columns.size() != dim()) throw usage_error("column names do not match covariate count");
    if (!covariates.allFinite()) throw numeric_error("dataset has missing or non-finite covariates");
    for (double y : outcome) {
      if (!std::isfinite(y)) throw numeric_error("dataset has missing or non-finite outcomes");
    }
    for (int t : treatment) {
      if (t < 0) throw usage_error("treatment labels must be non-negative integers");
    }
  }
};

struct ColumnTransform {
  std::string column;
  double mean = 0.0;
  double sd = 1.0;

  double apply(double x) const noexcept { return (x - mean) / sd; }
  double invert(double z) const noexcept { return z * sd + mean; }
};

struct Standardized {
  Dataset dataset;
  std::vector<ColumnTransform> transforms;
};

// Sample mean and standard deviation (divisor n-1).
inline std::pair<double, double> mean_sd(const std::vector<double>& xs) {
  const auto n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, xs.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0};
}

/// z-scores the named columns with full-sample mean and sd (divisor N-1).
inline Standardized standardize(const Dataset& dataset, const std::vector<std::string>& columns) {
  Standardized out{dataset, {}};
  for (const auto& name : columns) {
    const auto c = dataset.column_index(name);
    const auto [mean, sd] = mean_sd(dataset.column(c));
    if (!(sd > 0.0)) throw numeric_error("column '" + name + "' has zero variance");
    ColumnTransform t{name, mean, sd};
    auto col = out.dataset.covariates.col(static_cast<Eigen::Index>(c));
    for (Eigen::Index i = 0; i < col.size(); ++i) col(i) = t.apply(col(i));
    out.transforms.push_back(t);
  }
  return out;
}

/// One treatment arm: its empirical measure, outcomes, and source row indices.
struct Arm {
  DiscreteMeasure measure;
  std::vector<double> outcome;
  std::vector<std::size_t> rows;
};

/// Splits by treatment label (ascending) into uniform-weight empirical measures.
/// `declared_arms` fixes J; otherwise J = max label + 1.
inline std::vector<Arm> split_by_treatment(const Dataset& dataset, std::optional<int> declared_arms = std::nullopt) {
  dataset.validate();
  const int arms = declared_arms.value_or(dataset.arms());
  std::vector<std::vector<std::size_t>> rows(static_cast<std::size_t>(arms));
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const int t = dataset.treatment[i];
    if (t >= arms) throw usage_error("treatment label " + std::to_string(t) + " outside 0.." + std::to_string(arms - 1));
    rows[static_cast<std::size_t>(t)].push_back(i);
  }
  std::vector<Arm> out;
  out.reserve(rows.size());
  for (std::size_t a = 0; a < rows.size(); ++a) {
    if (rows[a].empty()) throw usage_error("empty arm " + std::to_string(a));
    Matrix pts(static_cast<Eigen::Index>(rows[a].size()), dataset.covariates.cols());
    std::vector<double> y;
    y.reserve(rows[a].size());
    for (std::size_t r = 0; r < rows[a].size(); ++r) {
      pts.row(static_cast<Eigen::Index>(r)) = dataset.covariates.row(static_cast<Eigen::Index>(rows[a][r]));
      y.push_back(dataset.outcome[rows[a][r]]);
    }
    out.push_back(Arm{DiscreteMeasure::empirical(std::move(pts)), std::move(y), rows[a]});
  }
  return out;
}

// --- cost construction -------------------------------------------------------

enum class CostKind { squared_euclidean, weighted_squared_euclidean, barycentric, custom };

struct CostSpec {
  CostKind kind = CostKind::squared_euclidean;
  // Diagonal metric weights for weighted_squared_euclidean (length d).
  std::vector<double> metric_weights;
  // Barycentric arm weights lambda_j (length J, default uniform).
  std::vector<double> arm_weights;
  // Custom cost on one point per arm.
  std::function<double(const std::vector<Vector>&)> callback;
  // Largest tensor that build_cost will materialize.
  std::size_t max_entries = 100'000'000;

  static CostSpec squared_euclidean() { return {}; }
  static CostSpec weighted(std::vector<double> w) {
    CostSpec s;
    s.kind = CostKind::weighted_squared_euclidean;
    s.metric_weights = std::move(w);
    return s;
  }
  static CostSpec barycentric(std::vector<double> lambdas = {}) {
    CostSpec s;
    s.kind = CostKind::barycentric;
    s.arm_weights = std::move(lambdas);
    return s;
  }
  static CostSpec custom(std::function<double(const std::vector<Vector>&)> f) {
    CostSpec s;
    s.kind = CostKind::custom;
    s.callback = std::move(f);
    return s;
  }
};

/// Dense J-way tensor in row-major (last axis fastest) layout.
class Tensor {
public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0) : shape_(std::move(shape)) {
    strides_.assign(shape_.size(), 1);
    for (std::size_t a = shape_.size(); a-- > 1;) strides_[a - 1] = strides_[a] * shape_[a];
    values_.assign(shape_.empty() ? 0 : strides_[0] * shape_[0], fill);
  }

  std::size_t order() const noexcept { return shape_.size(); }
  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  const std::vector<std::size_t>& strides() const noexcept { return strides_; }
  std::size_t size() const noexcept { return values_.size(); }
  std::vector<double>& values() noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }

  double operator()(std::size_t i, std::size_t j) const noexcept { return values_[i * strides_[0] + j]; }
  double& operator()(std::size_t i, std::size_t j) noexcept { return values_[i * strides_[0] + j]; }

  double at(const std::vector<std::size_t>& idx) const noexcept { return values_[offset(idx)]; }

  std::size_t offset(const std::vector<std::size_t>& idx) const noexcept {
    std::size_t off = 0;
    for (std::size_t a = 0; a < idx.size(); ++a) off += idx[a] * strides_[a];
    return off;
  }

  // Multi-index of a flat offset.
  void unravel(std::size_t flat, std::vector<std::size_t>& idx) const {
    idx.resize(shape_.size());
    for (std::size_t a = 0; a < shape_.size(); ++a) {
      idx[a] = flat / strides_[a];
      flat %= strides_[a];
    }
  }

  // Sum over every axis except `axis`.
  std::vector<double> axis_sums(std::size_t axis) const {
    std::vector<double> out(shape_[axis], 0.0);
    const std::size_t stride = strides_[axis];
    const std::size_t extent = shape_[axis];
    for (std::size_t flat = 0; flat < values_.size(); ++flat) out[(flat / stride) % extent] += values_[flat];
    return out;
  }

private:
  std::vector<std::size_t> shape_;
  std::vector<std::size_t> strides_;
  std::vector<double> values_;
};

using CostTensor = Tensor;

inline std::size_t product_size(const std::vector<DiscreteMeasure>& measures) {
  std::size_t total = 1;
  for (const auto& m : measures) total *= m.size();
  return total;
}

/// Materializes c(x_1, ..., x_J) over all multi-indices of the measures' supports.
/// Default multimarginal cost is the sum of pairwise squared distances.
inline CostTensor build_cost(const std::vector<DiscreteMeasure>& measures, const CostSpec& spec = {}) {
  if (measures.size() < 2) throw usage_error("need at least two measures to build a cost");
  const std::size_t d = measures.front().dim();
  std::vector<std::size_t> shape;
  long double entries = 1.0L;
  for (const auto& m : measures) {
    if (m.dim() != d) throw usage_error("dimension mismatch between measures");
    shape.push_back(m.size());
    entries *= static_cast<long double>(m.size());
  }
  if (entries > static_cast<long double>(spec.max_entries)) {
    throw usage_error("cost tensor would hold " + std::to_string(static_cast<double>(entries)) +
                      " entries, above the cap of " + std::to_string(spec.max_entries) +
                      "; use pairwise mode instead of a joint multimarginal solve");
  }
  const std::size_t J = measures.size();
  Vector metric = Vector::Ones(static_cast<Eigen::Index>(d));
  if (spec.kind == CostKind::weighted_squared_euclidean) {
    if (spec.metric_weights.size() != d) throw usage_error("metric weights must have one entry per covariate");
    for (std::size_t k = 0; k < d; ++k) {
      if (!(spec.metric_weights[k] >= 0.0)) throw usage_error("metric weights must be >= 0");
      metric(static_cast<Eigen::Index>(k)) = spec.metric_weights[k];
    }
  }
  std::vector<double> lambdas = spec.arm_weights;
  if (spec.kind == CostKind::barycentric) {
    if (lambdas.empty()) lambdas.assign(J, 1.0 / static_cast<double>(J));
    if (lambdas.size() != J) throw usage_error("barycentric cost needs one weight per arm");
  }
  if (spec.kind == CostKind::custom && !spec.callback) throw usage_error("custom cost without a callback");

  CostTensor cost(shape);
  auto& values = cost.values();

  if (J == 2 && spec.kind != CostKind::custom && spec.kind != CostKind::barycentric) {
    const auto& x = measures[0].points();
    const auto& y = measures[1].points();
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (Eigen::Index j = 0; j < y.rows(); ++j) {
        double s = 0.0;
        for (Eigen::Index k = 0; k < x.cols(); ++k) {
          const double diff = x(i, k) - y(j, k);
          s += metric(k) * diff * diff;
        }
        values[static_cast<std::size_t>(i) * shape[1] + static_cast<std::size_t>(j)] = s;
      }
    }
    return cost;
  }

  std::vector<std::size_t> idx;
  std::vector<Vector> pts(J);
  for (std::size_t flat = 0; flat < values.size(); ++flat) {
    cost.unravel(flat, idx);
    for (std::size_t a = 0; a < J; ++a) {
      pts[a] = measures[a].points().row(static_cast<Eigen::Index>(idx[a])).transpose();
    }
    double c = 0.0;
    switch (spec.kind) {
      case CostKind::squared_euclidean:
      case CostKind::weighted_squared_euclidean:
        for (std::size_t a = 0; a < J; ++a) {
          for (std::size_t b = a + 1; b < J; ++b) c += (pts[a] - pts[b]).cwiseAbs2().dot(metric);
        }
        break;
      case CostKind::barycentric: {
        Vector bar = Vector::Zero(static_cast<Eigen::Index>(d));
        for (std::size_t a = 0; a < J; ++a) bar += lambdas[a] * pts[a];
        for (std::size_t a = 0; a < J; ++a) c += lambdas[a] * (pts[a] - bar).squaredNorm();
        break;
      }
      case CostKind::custom:
        c = spec.callback(pts);
        if (!std::isfinite(c)) throw numeric_error("custom cost returned a non-finite value");
        break;
    }
    values[flat] = c;
  }
  return cost;
}

}  // namespace otmatch
