/*
 * Copyright 2026 The adstage Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <list>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "adstage/error.hpp"

namespace adstage {

/// Row-major matrix of binary32 values. Training rows and support vectors are
/// stored at this precision; all arithmetic on them is done in double.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0f) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::span<const float> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
  std::span<float> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const float> data() const { return data_; }

  template <typename T>
  void append_row(std::span<const T> values) {
    if (rows_ == 0 && cols_ == 0) cols_ = values.size();
    if (values.size() != cols_) throw DataError("matrix row length mismatch");
    for (auto v : values) data_.push_back(static_cast<float>(v));
    ++rows_;
  }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
};

struct KernelParams {
  double gamma = 1.0;
};

template <typename A, typename B>
double squared_distance(std::span<const A> x, std::span<const B> y) {
  if (x.size() != y.size())
    throw DataError("vector length mismatch: " + std::to_string(x.size()) + " vs " + std::to_string(y.size()));
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double d = static_cast<double>(x[k]) - static_cast<double>(y[k]);
    s += d * d;
  }
  return s;
}

/// exp(-gamma * |x - y|^2)
template <typename A, typename B>
double rbf_kernel(std::span<const A> x, std::span<const B> y, double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw DataError("RBF gamma must be positive and finite");
  return std::exp(-gamma * squared_distance(x, y));
}

inline double rbf_kernel(const std::vector<double>& x, const std::vector<double>& y, double gamma) {
  return rbf_kernel(std::span<const double>(x), std::span<const double>(y), gamma);
}

struct TrainConfig {
  double kkt_tolerance = 1e-3;
  // 0 selects min(1000 * n, 10^7) pair updates.
  std::size_t max_iterations = 0;
  std::size_t kernel_cache_bytes = std::size_t{64} << 20;
  // The solver is deterministic; the seed is recorded for provenance.
  std::uint64_t seed = 0;
};

struct BinarySvmModel {
  KernelParams kernel;
  Matrix support_vectors;
  std::vector<double> coefficients;  // alpha_i * y_i per support vector
  double bias = 0.0;
  bool converged = true;
  std::size_t iterations = 0;

  // Training-time diagnostics (not serialized): one entry per training row.
  std::vector<double> alphas;
  std::vector<double> costs;
  std::vector<std::size_t> support_indices;
  // f(x_i) on each training row, recovered from the final gradient.
  std::vector<double> training_decisions;

  std::size_t dim() const { return support_vectors.cols(); }
};

/// Kernel rows K(i, .) over a fixed training matrix, kept in a
/// least-recently-used cache bounded by a byte budget. A cached row holds
/// exactly the values a fresh computation would produce.
class KernelCache {
 public:
  KernelCache(const Matrix& rows, double gamma, std::size_t budget_bytes)
      : rows_(rows), gamma_(gamma) {
    const std::size_t row_bytes = std::max<std::size_t>(1, rows.rows() * sizeof(double));
    capacity_ = budget_bytes / row_bytes;
    if (capacity_ < 2) {
      capacity_ = 0;
      scratch_[0].resize(rows.rows());
      scratch_[1].resize(rows.rows());
    }
  }

  // `slot` selects a scratch buffer when caching is off, so two rows can be
  // held at once.
  std::span<const double> row(std::size_t i, int slot) {
    if (capacity_ == 0) {
      fill(i, scratch_[slot]);
      return scratch_[slot];
    }
    if (auto it = index_.find(i); it != index_.end()) {
      lru_.splice(lru_.begin(), lru_, it->second);
      return it->second->values;
    }
    if (lru_.size() >= capacity_) {
      index_.erase(lru_.back().index);
      lru_.pop_back();
    }
    lru_.push_front({i, std::vector<double>(rows_.rows())});
    fill(i, lru_.front().values);
    index_[i] = lru_.begin();
    return lru_.front().values;
  }

 private:
  struct Entry {
    std::size_t index;
    std::vector<double> values;
  };

  void fill(std::size_t i, std::vector<double>& out) const {
    const auto xi = rows_.row(i);
    for (std::size_t k = 0; k < rows_.rows(); ++k) out[k] = rbf_kernel(xi, rows_.row(k), gamma_);
  }

  const Matrix& rows_;
  double gamma_;
  std::size_t capacity_ = 0;
  std::list<Entry> lru_;
  std::unordered_map<std::size_t, std::list<Entry>::iterator> index_;
  std::vector<double> scratch_[2];
};

/// W(alpha) = sum_i alpha_i - 1/2 sum_ij alpha_i alpha_j y_i y_j K(x_i, x_j)
inline double dual_objective(std::span<const double> alphas, const Matrix& rows, std::span<const int> y,
                             const KernelParams& kernel) {
  const std::size_t n = rows.rows();
  if (alphas.size() != n || y.size() != n) throw DataError("dual_objective: shape mismatch");
  double linear = 0.0, quad = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    linear += alphas[i];
    if (alphas[i] == 0.0) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (alphas[j] == 0.0) continue;
      quad += alphas[i] * alphas[j] * y[i] * y[j] * rbf_kernel(rows.row(i), rows.row(j), kernel.gamma);
    }
  }
  return linear - 0.5 * quad;
}

/// Soft-margin RBF SVM trained by sequential minimal optimization.
///
/// Solves  min 1/2 a'Qa - e'a  s.t.  y'a = 0,  0 <= a_i <= C_i,
/// Q_ij = y_i y_j K_ij, picking the maximal violating pair each step
///   i = argmax { -y_t G_t : t in I_up },  j = argmin { -y_t G_t : t in I_low }
/// and stopping once the violation m(a) - M(a) is at most kkt_tolerance.
inline BinarySvmModel smo_train(const Matrix& rows, std::span<const int> y, std::span<const double> cost,
                                const KernelParams& kernel, const TrainConfig& cfg = {}) {
  const std::size_t n = rows.rows();
  if (n < 2) throw DataError("SVM training needs at least 2 samples");
  if (y.size() != n || cost.size() != n) throw DataError("SVM training: label/cost length mismatch");
  if (!(kernel.gamma > 0.0) || !std::isfinite(kernel.gamma)) throw DataError("RBF gamma must be positive");
  if (!(cfg.kkt_tolerance > 0.0)) throw DataError("kkt_tolerance must be positive");
  bool has_pos = false, has_neg = false;
  for (std::size_t i = 0; i < n; ++i) {
    if (y[i] == 1) has_pos = true;
    else if (y[i] == -1) has_neg = true;
    else throw DataError("SVM labels must be -1 or +1");
    if (!(cost[i] > 0.0) || !std::isfinite(cost[i])) throw DataError("SVM per-sample costs must be positive");
  }
  if (!has_pos || !has_neg) throw DataError("SVM training needs both classes present");

  const std::size_t max_iter =
      cfg.max_iterations > 0 ? cfg.max_iterations : std::min<std::size_t>(1000 * n, 10'000'000);
  constexpr double kTau = 1e-12;

  std::vector<double> alpha(n, 0.0);
  std::vector<double> grad(n, -1.0);
  KernelCache cache(rows, kernel.gamma, cfg.kernel_cache_bytes);

  auto in_up = [&](std::size_t t) { return y[t] == 1 ? alpha[t] < cost[t] : alpha[t] > 0.0; };
  auto in_low = [&](std::size_t t) { return y[t] == 1 ? alpha[t] > 0.0 : alpha[t] < cost[t]; };

  BinarySvmModel model;
  model.kernel = kernel;
  model.converged = false;
  std::size_t iter = 0;
  for (; iter < max_iter; ++iter) {
    std::size_t i = n, j = n;
    double gmax = -std::numeric_limits<double>::infinity();
    double gmin = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < n; ++t) {
      const double v = -y[t] * grad[t];
      if (in_up(t) && v > gmax) gmax = v, i = t;
      if (in_low(t) && v < gmin) gmin = v, j = t;
    }
    if (i == n || j == n || gmax - gmin <= cfg.kkt_tolerance) {
      model.converged = true;
      break;
    }

    const auto ki = cache.row(i, 0);
    const auto kj = cache.row(j, 1);
    const double ci = cost[i], cj = cost[j];
    const double old_ai = alpha[i], old_aj = alpha[j];
    double ai = old_ai, aj = old_aj;
    // Q_ii = Q_jj = 1 for the RBF kernel.
    if (y[i] != y[j]) {
      double quad = 2.0 + 2.0 * ki[j];
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = ai - aj;
      ai += delta;
      aj += delta;
      if (diff > 0.0) {
        if (aj < 0.0) aj = 0.0, ai = diff;
      } else {
        if (ai < 0.0) ai = 0.0, aj = -diff;
      }
      if (diff > ci - cj) {
        if (ai > ci) ai = ci, aj = ci - diff;
      } else {
        if (aj > cj) aj = cj, ai = cj + diff;
      }
    } else {
      double quad = 2.0 - 2.0 * ki[j];
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = ai + aj;
      ai -= delta;
      aj += delta;
      if (sum > ci) {
        if (ai > ci) ai = ci, aj = sum - ci;
      } else {
        if (aj < 0.0) aj = 0.0, ai = sum;
      }
      if (sum > cj) {
        if (aj > cj) aj = cj, ai = sum - cj;
      } else {
        if (ai < 0.0) ai = 0.0, aj = sum;
      }
    }
    alpha[i] = std::clamp(ai, 0.0, ci);
    alpha[j] = std::clamp(aj, 0.0, cj);

    const double dai = alpha[i] - old_ai, daj = alpha[j] - old_aj;
    for (std::size_t t = 0; t < n; ++t)
      grad[t] += y[t] * (y[i] * ki[t] * dai + y[j] * kj[t] * daj);
  }
  model.iterations = iter;

  // Bias: mean residual over free vectors, else midpoint of the feasible range.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double free_sum = 0.0;
  std::size_t free_count = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (alpha[t] >= cost[t]) {
      if (y[t] == -1) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (alpha[t] <= 0.0) {
      if (y[t] == 1) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++free_count;
      free_sum += yg;
    }
  }
  const double rho = free_count > 0 ? free_sum / static_cast<double>(free_count) : 0.5 * (ub + lb);
  model.bias = -rho;

  // sum_j alpha_j y_j K_ij = y_i (G_i + 1)
  model.training_decisions.resize(n);
  for (std::size_t t = 0; t < n; ++t) model.training_decisions[t] = y[t] * (grad[t] + 1.0) + model.bias;

  model.alphas = alpha;
  model.costs.assign(cost.begin(), cost.end());
  model.support_vectors = Matrix(0, rows.cols());
  for (std::size_t t = 0; t < n; ++t) {
    if (alpha[t] > 0.0) {
      model.support_indices.push_back(t);
      model.support_vectors.append_row(rows.row(t));
      model.coefficients.push_back(alpha[t] * y[t]);
    }
  }
  return model;
}

/// f(x) = sum_k coef_k K(sv_k, x) + b
template <typename T>
double decision_value(const BinarySvmModel& model, std::span<const T> x) {
  if (x.size() != model.dim())
    throw DataError("decision_value: expected dimension " + std::to_string(model.dim()) + ", got " +
                    std::to_string(x.size()));
  double f = model.bias;
  for (std::size_t k = 0; k < model.coefficients.size(); ++k)
    f += model.coefficients[k] * rbf_kernel(model.support_vectors.row(k), x, model.kernel.gamma);
  return f;
}

inline double decision_value(const BinarySvmModel& model, const std::vector<double>& x) {
  return decision_value(model, std::span<const double>(x));
}

// sign(0) is +1.
inline int predict_sign(double decision) { return decision >= 0.0 ? 1 : -1; }

}  // namespace adstage
