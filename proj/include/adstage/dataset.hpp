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
#include <map>
#include <memory>
#include <numeric>
#include <ranges>
#include <set>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "adstage/error.hpp"
#include "adstage/rng.hpp"

namespace adstage {

enum class Sex { F, M };

inline const char* to_string(Sex s) { return s == Sex::F ? "F" : "M"; }

inline Sex parse_sex(const std::string& s) {
  if (s == "F") return Sex::F;
  if (s == "M") return Sex::M;
  throw DataError("invalid sex '" + s + "' (expected F or M)");
}

// F -> 0, M -> 1.
inline double sex_code(Sex s) { return s == Sex::F ? 0.0 : 1.0; }

/// One subject: backbone activations plus demographics and stage label.
/// Activations are held at binary32, the precision of the feature payload.
struct FeatureRecord {
  std::string id;
  std::vector<float> features;
  Sex sex = Sex::F;
  double age = 0.0;
  std::string label;

  bool operator==(const FeatureRecord&) const = default;
};

/// An ordered, validated collection of records sharing one dimension and one
/// class schema.
///
/// Records live in shared immutable storage; splits, folds and subsets are
/// index views over it, so carving a 100k-wide table into folds does not copy
/// feature vectors.
class Dataset {
 public:
  Dataset(std::vector<FeatureRecord> records, std::size_t dim,
          std::vector<std::string> schema, std::string provenance = {})
      : store_(std::make_shared<const std::vector<FeatureRecord>>(std::move(records))),
        dim_(dim),
        schema_(std::move(schema)),
        provenance_(std::move(provenance)) {
    rows_.resize(store_->size());
    std::iota(rows_.begin(), rows_.end(), std::size_t{0});
    validate();
  }

  std::size_t size() const { return rows_.size(); }
  bool empty() const { return rows_.empty(); }
  std::size_t dim() const { return dim_; }
  const std::vector<std::string>& schema() const { return schema_; }
  std::size_t num_classes() const { return schema_.size(); }
  const std::string& provenance() const { return provenance_; }

  const FeatureRecord& operator[](std::size_t i) const { return (*store_)[rows_[i]]; }

  // Schema index of record i's label.
  std::size_t class_of(std::size_t i) const { return classes_[i]; }

  auto records() const {
    return rows_ | std::views::transform(
                       [s = store_.get()](std::size_t r) -> const FeatureRecord& { return (*s)[r]; });
  }

  std::size_t class_index(const std::string& label) const {
    auto it = std::find(schema_.begin(), schema_.end(), label);
    if (it == schema_.end()) throw DataError("label '" + label + "' is not in the class schema");
    return static_cast<std::size_t>(it - schema_.begin());
  }

  std::vector<std::size_t> class_counts() const {
    std::vector<std::size_t> counts(schema_.size(), 0);
    for (auto c : classes_) ++counts[c];
    return counts;
  }

  std::vector<std::string> labels() const {
    std::vector<std::string> out;
    out.reserve(size());
    for (const auto& r : records()) out.push_back(r.label);
    return out;
  }

  std::vector<std::string> ids() const {
    std::vector<std::string> out;
    out.reserve(size());
    for (const auto& r : records()) out.push_back(r.id);
    return out;
  }

  /// View over the given positions of this dataset, in the given order.
  Dataset subset(std::span<const std::size_t> positions) const {
    Dataset out(*this, NoValidate{});
    out.rows_.clear();
    out.classes_.clear();
    out.rows_.reserve(positions.size());
    out.classes_.reserve(positions.size());
    for (auto p : positions) {
      if (p >= size()) throw DataError("subset position out of range");
      out.rows_.push_back(rows_[p]);
      out.classes_.push_back(classes_[p]);
    }
    return out;
  }

  /// Same records under a different class schema (e.g. a reordered one).
  Dataset with_schema(std::vector<std::string> schema) const {
    Dataset out(*this, NoValidate{});
    out.schema_ = std::move(schema);
    out.validate();
    return out;
  }

  /// Element-wise equality of the visible records, dimension and schema.
  friend bool operator==(const Dataset& a, const Dataset& b) {
    if (a.dim_ != b.dim_ || a.schema_ != b.schema_ || a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (!(a[i] == b[i])) return false;
    return true;
  }

 private:
  struct NoValidate {};
  Dataset(const Dataset& other, NoValidate) : Dataset(other) {}

  void validate() {
    if (dim_ < 1) throw DataError("dataset dimension must be at least 1");
    if (schema_.size() < 2) throw DataError("class schema needs at least 2 classes");
    {
      std::set<std::string> seen;
      for (const auto& c : schema_)
        if (!seen.insert(c).second) throw DataError("duplicate class '" + c + "' in schema");
    }
    std::unordered_set<std::string> ids;
    classes_.clear();
    classes_.reserve(rows_.size());
    for (const auto& r : records()) {
      if (!ids.insert(r.id).second) throw DataError("duplicate record id '" + r.id + "'");
      if (r.features.size() != dim_)
        throw DataError("record '" + r.id + "' has " + std::to_string(r.features.size()) +
                        " features, expected " + std::to_string(dim_));
      for (float v : r.features)
        if (!std::isfinite(v)) throw DataError("record '" + r.id + "' has a non-finite feature value");
      if (!std::isfinite(r.age) || r.age < 0.0 || r.age > 130.0)
        throw DataError("record '" + r.id + "' has age outside [0, 130]");
      auto it = std::find(schema_.begin(), schema_.end(), r.label);
      if (it == schema_.end())
        throw DataError("record '" + r.id + "' has label '" + r.label + "' not in the class schema");
      classes_.push_back(static_cast<std::size_t>(it - schema_.begin()));
    }
  }

  std::shared_ptr<const std::vector<FeatureRecord>> store_;
  std::vector<std::size_t> rows_;
  std::vector<std::size_t> classes_;
  std::size_t dim_;
  std::vector<std::string> schema_;
  std::string provenance_;
};

/// features ++ [sex_code, age]; the model input row before standardization.
inline std::vector<double> concat_demographics(const FeatureRecord& record) {
  std::vector<double> out;
  out.reserve(record.features.size() + 2);
  out.assign(record.features.begin(), record.features.end());
  out.push_back(sex_code(record.sex));
  out.push_back(record.age);
  return out;
}

/// Per-class balancing weights: weight(c) = N / (K * count(c)).
/// weight(c) * count(c) is then N / K for every class.
struct ClassWeights {
  std::vector<std::string> classes;
  std::vector<double> weights;

  double operator[](std::size_t class_index) const { return weights.at(class_index); }

  double at(const std::string& name) const {
    auto it = std::find(classes.begin(), classes.end(), name);
    if (it == classes.end()) throw DataError("no weight for class '" + name + "'");
    return weights[static_cast<std::size_t>(it - classes.begin())];
  }

  static ClassWeights uniform(std::vector<std::string> schema) {
    ClassWeights w;
    w.weights.assign(schema.size(), 1.0);
    w.classes = std::move(schema);
    return w;
  }
};

inline ClassWeights class_weights_from_counts(std::span<const std::size_t> counts,
                                              std::span<const std::string> schema) {
  const std::size_t n = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  if (n == 0) throw DataError("cannot compute class weights from an empty label list");
  ClassWeights w;
  w.classes.assign(schema.begin(), schema.end());
  const auto k = static_cast<double>(schema.size());
  for (std::size_t c = 0; c < schema.size(); ++c) {
    if (counts[c] == 0) throw DataError("class '" + schema[c] + "' is absent from the training labels");
    w.weights.push_back(static_cast<double>(n) / (k * static_cast<double>(counts[c])));
  }
  return w;
}

inline ClassWeights class_weights(std::span<const std::string> labels,
                                  std::span<const std::string> schema) {
  std::vector<std::size_t> counts(schema.size(), 0);
  for (const auto& l : labels) {
    auto it = std::find(schema.begin(), schema.end(), l);
    if (it == schema.end()) throw DataError("label '" + l + "' is not in the class schema");
    ++counts[static_cast<std::size_t>(it - schema.begin())];
  }
  return class_weights_from_counts(counts, schema);
}

/// Column-wise z-score transform over the d+2 model input columns.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  std::size_t size() const { return mean.size(); }

  template <typename T>
  std::vector<double> apply(std::span<const T> row) const {
    if (row.size() != mean.size())
      throw DataError("standardizer expects rows of length " + std::to_string(mean.size()) +
                      ", got " + std::to_string(row.size()));
    std::vector<double> out(row.size());
    for (std::size_t j = 0; j < row.size(); ++j)
      out[j] = (static_cast<double>(row[j]) - mean[j]) / scale[j];
    return out;
  }

  std::vector<double> apply(const std::vector<double>& row) const {
    return apply(std::span<const double>(row));
  }
};

inline constexpr double kMinColumnScale = 1e-12;

/// Population mean and standard deviation per column (two passes).
/// Columns whose deviation falls below 1e-12 keep scale 1.
template <std::ranges::forward_range Rows>
Standardizer fit_standardizer(const Rows& rows) {
  Standardizer s;
  std::size_t n = 0;
  for (const auto& row : rows) {
    if (n == 0) s.mean.assign(std::ranges::size(row), 0.0);
    if (std::ranges::size(row) != s.mean.size()) throw DataError("standardizer rows differ in length");
    std::size_t j = 0;
    for (auto v : row) s.mean[j++] += static_cast<double>(v);
    ++n;
  }
  if (n == 0) throw DataError("cannot fit a standardizer on zero rows");
  for (auto& m : s.mean) m /= static_cast<double>(n);
  std::vector<double> sq(s.mean.size(), 0.0);
  for (const auto& row : rows) {
    std::size_t j = 0;
    for (auto v : row) {
      const double d = static_cast<double>(v) - s.mean[j];
      sq[j++] += d * d;
    }
  }
  s.scale.resize(s.mean.size());
  for (std::size_t j = 0; j < sq.size(); ++j) {
    const double sd = std::sqrt(sq[j] / static_cast<double>(n));
    s.scale[j] = sd < kMinColumnScale ? 1.0 : sd;
  }
  return s;
}

inline std::vector<double> apply_standardizer(const Standardizer& s, std::span<const double> row) {
  return s.apply(row);
}

/// Fits on the demographics-extended rows of a dataset without materializing
/// them all at once.
inline Standardizer fit_standardizer(const Dataset& ds) {
  auto rows = std::views::iota(std::size_t{0}, ds.size()) |
              std::views::transform([&ds](std::size_t i) { return concat_demographics(ds[i]); });
  return fit_standardizer(rows);
}

// Round-half-up of a non-negative real to an integer count.
inline std::size_t round_count(double x) { return static_cast<std::size_t>(std::floor(x + 0.5)); }

/// Largest-remainder apportionment of `total` seats in proportion to
/// `counts`. Remainders are compared exactly in integer arithmetic; ties go
/// to the lower class index.
inline std::vector<std::size_t> apportion(std::span<const std::size_t> counts, std::size_t total) {
  const std::size_t n = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  std::vector<std::size_t> seats(counts.size(), 0);
  if (n == 0) return seats;
  std::vector<std::size_t> rem(counts.size());
  std::size_t given = 0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    const auto q = static_cast<unsigned __int128>(counts[c]) * total;
    seats[c] = static_cast<std::size_t>(q / n);
    rem[c] = static_cast<std::size_t>(q % n);
    given += seats[c];
  }
  std::vector<std::size_t> order(counts.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return rem[a] > rem[b]; });
  for (std::size_t k = 0; given < total && k < order.size(); ++k, ++given) ++seats[order[k]];
  return seats;
}

namespace detail {

// Positions of each class in dataset order, each list shuffled by one
// seeded stream (classes visited in schema order).
inline std::vector<std::vector<std::size_t>> shuffled_class_members(const Dataset& ds,
                                                                    std::uint64_t seed) {
  std::vector<std::vector<std::size_t>> groups(ds.num_classes());
  for (std::size_t i = 0; i < ds.size(); ++i) groups[ds.class_of(i)].push_back(i);
  Rng rng(seed);
  for (auto& g : groups) rng.shuffle(std::span<std::size_t>(g));
  return groups;
}

}  // namespace detail

struct Split {
  Dataset train;
  Dataset test;
};

/// Stratified train/test partition. The test side holds round(N * fraction)
/// records, apportioned across classes by largest remainder. Both sides keep
/// the source record order.
inline Split stratified_split(const Dataset& ds, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw DataError("test fraction must lie in (0, 1)");
  const std::size_t n = ds.size();
  const std::size_t n_test = round_count(static_cast<double>(n) * test_fraction);
  if (n_test == 0 || n_test >= n)
    throw DataError("test fraction " + std::to_string(test_fraction) + " leaves an empty side for N=" +
                    std::to_string(n));
  const auto counts = ds.class_counts();
  const auto quota = apportion(counts, n_test);
  const auto groups = detail::shuffled_class_members(ds, seed);
  std::vector<char> in_test(n, 0);
  for (std::size_t c = 0; c < groups.size(); ++c)
    for (std::size_t k = 0; k < quota[c]; ++k) in_test[groups[c][k]] = 1;
  std::vector<std::size_t> train, test;
  for (std::size_t i = 0; i < n; ++i) (in_test[i] ? test : train).push_back(i);
  return {ds.subset(train), ds.subset(test)};
}

struct LooFold {
  Dataset train;
  Dataset test;  // exactly one record
};

/// One fold per record; fold i holds out record i.
inline std::vector<LooFold> loo_folds(const Dataset& ds) {
  const std::size_t n = ds.size();
  if (n < 2) throw DataError("leave-one-out needs at least 2 records");
  std::vector<LooFold> folds;
  folds.reserve(n);
  std::vector<std::size_t> train(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t k = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) train[k++] = j;
    const std::size_t held[] = {i};
    folds.push_back({ds.subset(train), ds.subset(held)});
  }
  return folds;
}

/// Stratified subsets of increasing size, each containing the previous one.
///
/// Per-class allocations use the same largest-remainder apportionment as
/// stratified_split. Should that allocation shrink a class relative to the
/// previous subset (the apportionment is not house-monotone), the extra
/// seats are instead handed out one at a time to the class furthest below
/// its proportional share, which keeps the nesting intact.
inline std::vector<Dataset> nested_subsets(const Dataset& ds, std::span<const double> fractions,
                                           std::uint64_t seed) {
  for (std::size_t k = 0; k < fractions.size(); ++k) {
    if (!(fractions[k] > 0.0 && fractions[k] <= 1.0))
      throw DataError("subset fractions must lie in (0, 1]");
    if (k > 0 && !(fractions[k] > fractions[k - 1]))
      throw DataError("subset fractions must be strictly increasing");
  }
  const std::size_t n = ds.size();
  const auto counts = ds.class_counts();
  const auto groups = detail::shuffled_class_members(ds, seed);
  std::vector<std::size_t> prev(counts.size(), 0);
  std::vector<Dataset> out;
  for (double f : fractions) {
    const std::size_t size = std::min(n, round_count(static_cast<double>(n) * f));
    if (size == 0)
      throw DataError("subset fraction " + std::to_string(f) + " yields an empty subset");
    auto alloc = apportion(counts, size);
    bool monotone = true;
    for (std::size_t c = 0; c < alloc.size(); ++c) monotone = monotone && alloc[c] >= prev[c];
    if (!monotone) {
      alloc = prev;
      std::size_t given = std::accumulate(alloc.begin(), alloc.end(), std::size_t{0});
      for (; given < size; ++given) {
        std::size_t best = counts.size();
        double best_gap = 0.0;
        for (std::size_t c = 0; c < counts.size(); ++c) {
          if (alloc[c] >= counts[c]) continue;
          const double gap = static_cast<double>(counts[c]) * static_cast<double>(size) /
                                 static_cast<double>(n) -
                             static_cast<double>(alloc[c]);
          if (best == counts.size() || gap > best_gap) best = c, best_gap = gap;
        }
        ++alloc[best];
      }
    }
    std::vector<char> chosen(n, 0);
    for (std::size_t c = 0; c < groups.size(); ++c)
      for (std::size_t k = 0; k < alloc[c]; ++k) chosen[groups[c][k]] = 1;
    std::vector<std::size_t> positions;
    for (std::size_t i = 0; i < n; ++i)
      if (chosen[i]) positions.push_back(i);
    out.push_back(ds.subset(positions));
    prev = std::move(alloc);
  }
  return out;
}

}  // namespace adstage
