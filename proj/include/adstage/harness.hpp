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

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "adstage/dataset.hpp"
#include "adstage/io_util.hpp"
#include "adstage/metrics.hpp"
#include "adstage/multiclass.hpp"
#include "adstage/parallel.hpp"
#include "adstage/rng.hpp"
#include "adstage/version.hpp"
#include "json.hpp"

namespace adstage {

/// Log-uniform ranges for C and gamma plus the search stopping rule.
/// A range with low == high pins that hyperparameter.
struct SearchSpace {
  double c_min = 1e-2;
  double c_max = 1e3;
  double gamma_min = 1e-6;
  double gamma_max = 1e1;
  std::size_t budget = 30;
  std::size_t patience = 10;

  void validate() const {
    auto ok = [](double lo, double hi) { return lo > 0.0 && std::isfinite(hi) && lo <= hi; };
    if (!ok(c_min, c_max)) throw DataError("search space: C range must be positive with low <= high");
    if (!ok(gamma_min, gamma_max)) throw DataError("search space: gamma range must be positive with low <= high");
    if (budget < 1) throw DataError("search space: budget must be at least 1");
    if (patience < 1) throw DataError("search space: patience must be at least 1");
  }
};

struct HarnessOptions {
  MulticlassOptions model;
  // Threads across evaluation units (folds, repetitions, curve points).
  unsigned jobs = 1;
};

struct SearchResult {
  HyperParams best;
  double validation_score = 0.0;
  // Macro recall of the chosen configuration on its own training rows;
  // breaks ties between equal validation scores.
  double fit_score = 0.0;
  std::size_t evaluated = 0;
  std::size_t validation_size = 0;
};

namespace detail {

inline double log_uniform(Rng& rng, double lo, double hi) {
  if (lo == hi) return lo;
  return std::exp(std::log(lo) + rng.uniform01() * (std::log(hi) - std::log(lo)));
}

// Mean recall over the classes that occur in `truth`.
inline double present_class_recall(std::span<const std::size_t> truth, std::span<const std::size_t> pred,
                                   std::size_t num_classes) {
  std::vector<std::size_t> hit(num_classes, 0), total(num_classes, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++total[truth[i]];
    if (pred[i] == truth[i]) ++hit[truth[i]];
  }
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (total[c] == 0) continue;
    sum += static_cast<double>(hit[c]) / static_cast<double>(total[c]);
    ++present;
  }
  return present == 0 ? 0.0 : sum / static_cast<double>(present);
}

// Validation carve-out of max(1, ceil(|train| / 100)) records. Stratified by
// largest remainder while every class keeps at least one training record;
// otherwise an unstratified draw.
inline Split carve_validation(const Dataset& train, std::uint64_t seed) {
  const std::size_t n = train.size();
  if (n < 2) throw DataError("random search needs at least 2 training records");
  const std::size_t v = std::max<std::size_t>(1, (n + 99) / 100);
  const auto counts = train.class_counts();
  auto quota = apportion(counts, v);
  std::size_t deficit = 0;
  for (std::size_t c = 0; c < quota.size(); ++c) {
    const std::size_t cap = counts[c] > 0 ? counts[c] - 1 : 0;
    if (quota[c] > cap) deficit += quota[c] - cap, quota[c] = cap;
  }
  for (std::size_t c = 0; deficit > 0 && c < quota.size(); ++c) {
    const std::size_t cap = counts[c] > 0 ? counts[c] - 1 : 0;
    const std::size_t take = std::min(deficit, cap - quota[c]);
    quota[c] += take, deficit -= take;
  }
  std::vector<char> held(n, 0);
  if (deficit == 0) {
    const auto groups = shuffled_class_members(train, seed);
    for (std::size_t c = 0; c < groups.size(); ++c)
      for (std::size_t k = 0; k < quota[c]; ++k) held[groups[c][k]] = 1;
  } else {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(all));
    for (std::size_t k = 0; k < v; ++k) held[all[k]] = 1;
  }
  std::vector<std::size_t> fit, val;
  for (std::size_t i = 0; i < n; ++i) (held[i] ? val : fit).push_back(i);
  return {train.subset(fit), train.subset(val)};
}

inline std::vector<std::size_t> predicted_classes(const MulticlassModel& model, const Dataset& ds) {
  std::vector<std::size_t> out;
  out.reserve(ds.size());
  for (const auto& r : ds.records()) out.push_back(argmax_class(decision_values(model, r)));
  return out;
}

// Argmax over the solver's own training-row decision values.
inline std::vector<std::size_t> training_classes(const MulticlassModel& model, std::size_t n) {
  std::vector<std::size_t> out(n);
  std::vector<double> v(model.models.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < v.size(); ++c) v[c] = model.models[c].training_decisions[i];
    out[i] = argmax_class(v);
  }
  return out;
}

inline std::vector<std::size_t> true_classes(const Dataset& ds) {
  std::vector<std::size_t> out(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) out[i] = ds.class_of(i);
  return out;
}

}  // namespace detail

/// Random hyperparameter search with patience-based early stopping.
///
/// A small stratified validation set is held out of `train`; each sampled
/// configuration is trained on the rest and scored by mean per-class recall
/// on the validation set (classes absent from it are skipped). A candidate
/// replaces the incumbent only if it improves the pair (validation score,
/// fit score) lexicographically; after `patience` consecutive non-improving
/// candidates, or `budget` candidates in total, the search stops.
inline SearchResult random_search(const Dataset& train, const SearchSpace& space, std::uint64_t seed,
                                  const MulticlassOptions& opts = {}) {
  space.validate();
  const Split carve = detail::carve_validation(train, mix_seed(seed, 0));
  const auto val_truth = detail::true_classes(carve.test);
  const auto fit_truth = detail::true_classes(carve.train);
  Rng rng(mix_seed(seed, 1));

  SearchResult best;
  best.validation_size = carve.test.size();
  std::size_t stale = 0;
  for (std::size_t k = 0; k < space.budget; ++k) {
    HyperParams hp;
    hp.C = detail::log_uniform(rng, space.c_min, space.c_max);
    hp.gamma = detail::log_uniform(rng, space.gamma_min, space.gamma_max);
    const auto model = train_multiclass(carve.train, hp, seed, opts);
    const double val = detail::present_class_recall(val_truth, detail::predicted_classes(model, carve.test),
                                                    train.num_classes());
    const double fit = detail::present_class_recall(
        fit_truth, detail::training_classes(model, carve.train.size()), train.num_classes());
    ++best.evaluated;
    if (k == 0 || val > best.validation_score || (val == best.validation_score && fit > best.fit_score)) {
      best.best = hp;
      best.validation_score = val;
      best.fit_score = fit;
      stale = 0;
    } else if (++stale >= space.patience) {
      break;
    }
  }
  return best;
}

struct PredictionRecord {
  std::string id;
  std::string truth;
  std::string predicted;
  std::vector<double> decisions;
};

/// One fold (leave-one-out) or one repetition (hold-out).
struct UnitRecord {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  SearchResult search;
  bool converged = true;
  std::size_t train_size = 0;
  std::vector<PredictionRecord> predictions;
  MetricsReport metrics;  // hold-out only
  // Every id the unit trained or validated on; kept in memory for leakage
  // checks, not serialized.
  std::vector<std::string> train_ids;
};

struct EvaluationReport {
  std::string protocol;  // "loo" or "holdout"
  std::size_t repetitions = 0;
  double train_fraction = 0.0;
  std::uint64_t master_seed = 0;
  SearchSpace space;
  std::size_t n = 0;
  std::size_t dim = 0;
  std::vector<std::string> schema;
  std::vector<UnitRecord> units;
  MetricsReport aggregate;

  bool all_converged() const {
    for (const auto& u : units)
      if (!u.converged) return false;
    return true;
  }
};

namespace detail {

inline void require_class_count(const Dataset& ds, std::size_t minimum, const std::string& protocol) {
  const auto counts = ds.class_counts();
  for (std::size_t c = 0; c < counts.size(); ++c)
    if (counts[c] < minimum)
      throw DataError(protocol + " needs at least " + std::to_string(minimum) + " records of class '" +
                      ds.schema()[c] + "', found " + std::to_string(counts[c]));
}

inline void require_all_classes(const Dataset& ds, const std::string& what) {
  const auto counts = ds.class_counts();
  for (std::size_t c = 0; c < counts.size(); ++c)
    if (counts[c] == 0) throw DataError(what + " has no records of class '" + ds.schema()[c] + "'");
}

inline UnitRecord run_unit(const Dataset& train, const Dataset& test, std::size_t index, std::uint64_t seed,
                           const SearchSpace& space, const MulticlassOptions& opts) {
  UnitRecord u;
  u.index = index;
  u.seed = seed;
  u.search = random_search(train, space, seed, opts);
  const auto model = train_multiclass(train, u.search.best, seed, opts);
  u.converged = model.converged();
  u.train_size = train.size();
  u.train_ids = train.ids();
  for (std::size_t i = 0; i < test.size(); ++i) {
    auto v = decision_values(model, test[i]);
    u.predictions.push_back({test[i].id, test[i].label, model.classes[argmax_class(v)], std::move(v)});
  }
  return u;
}

}  // namespace detail

/// Leave-one-out: per fold, search on the fold's training part, retrain with
/// the chosen configuration and predict the held-out record. Metrics come
/// from the N pooled predictions.
inline EvaluationReport run_loo(const Dataset& ds, const SearchSpace& space, std::uint64_t seed,
                                const HarnessOptions& opts = {}) {
  space.validate();
  if (ds.size() < 2) throw DataError("leave-one-out needs at least 2 records");
  detail::require_class_count(ds, 2, "leave-one-out");
  const auto folds = loo_folds(ds);

  EvaluationReport rep;
  rep.protocol = "loo";
  rep.master_seed = seed;
  rep.space = space;
  rep.n = ds.size();
  rep.dim = ds.dim();
  rep.schema = ds.schema();
  rep.units.resize(folds.size());
  parallel_for(folds.size(), opts.jobs, [&](std::size_t i) {
    rep.units[i] = detail::run_unit(folds[i].train, folds[i].test, i, seed + i, space, opts.model);
  });

  std::vector<std::string> truth, pred;
  for (const auto& u : rep.units)
    for (const auto& p : u.predictions) truth.push_back(p.truth), pred.push_back(p.predicted);
  rep.aggregate = build_report(truth, pred, ds.schema());
  return rep;
}

/// Repeated stratified hold-out. Repetition r splits with seed + r; the
/// aggregate is the field-wise mean of the per-repetition reports.
inline EvaluationReport run_repeated_holdout(const Dataset& ds, std::size_t repetitions, double train_fraction,
                                             const SearchSpace& space, std::uint64_t seed,
                                             const HarnessOptions& opts = {}) {
  space.validate();
  if (repetitions < 1) throw DataError("hold-out needs at least one repetition");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw DataError("train fraction must lie in (0, 1)");
  detail::require_class_count(ds, 2, "hold-out");

  EvaluationReport rep;
  rep.protocol = "holdout";
  rep.repetitions = repetitions;
  rep.train_fraction = train_fraction;
  rep.master_seed = seed;
  rep.space = space;
  rep.n = ds.size();
  rep.dim = ds.dim();
  rep.schema = ds.schema();
  rep.units.resize(repetitions);
  parallel_for(repetitions, opts.jobs, [&](std::size_t r) {
    const std::uint64_t unit_seed = seed + r;
    const Split split = stratified_split(ds, 1.0 - train_fraction, unit_seed);
    detail::require_all_classes(split.train, "hold-out repetition " + std::to_string(r) + " training split");
    detail::require_all_classes(split.test, "hold-out repetition " + std::to_string(r) + " test split");
    auto u = detail::run_unit(split.train, split.test, r, unit_seed, space, opts.model);
    std::vector<std::string> truth, pred;
    for (const auto& p : u.predictions) truth.push_back(p.truth), pred.push_back(p.predicted);
    u.metrics = build_report(truth, pred, ds.schema());
    rep.units[r] = std::move(u);
  });

  std::vector<MetricsReport> per_unit;
  for (const auto& u : rep.units) per_unit.push_back(u.metrics);
  rep.aggregate = mean_report(per_unit);
  return rep;
}

struct CurvePoint {
  double fraction = 0.0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::size_t train_size = 0;
  SearchResult search;
  bool converged = true;
};

struct LearningCurve {
  std::uint64_t master_seed = 0;
  SearchSpace space;
  std::size_t test_size = 0;
  std::vector<CurvePoint> points;
};

inline std::vector<double> default_curve_fractions() { return {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7}; }

/// Accuracy on growing nested training slices against one fixed stratified
/// 20% test partition, carved first and shared by every point.
inline LearningCurve learning_curve(const Dataset& ds, std::span<const double> fractions, const SearchSpace& space,
                                    std::uint64_t seed, const HarnessOptions& opts = {}) {
  space.validate();
  for (std::size_t k = 0; k < fractions.size(); ++k)
    if (!(fractions[k] > 0.0 && fractions[k] < 1.0) || (k > 0 && !(fractions[k] > fractions[k - 1])))
      throw DataError("curve fractions must be strictly increasing in (0, 1)");
  const Split split = stratified_split(ds, 0.2, seed);
  const auto slices = nested_subsets(split.train, fractions, seed + 1);
  for (std::size_t k = 0; k < slices.size(); ++k) {
    const auto counts = slices[k].class_counts();
    for (std::size_t c = 0; c < counts.size(); ++c)
      if (counts[c] == 0)
        throw DataError("curve slice at fraction " + format_number(fractions[k]) + " has no records of class '" +
                        ds.schema()[c] + "'");
  }

  LearningCurve curve;
  curve.master_seed = seed;
  curve.space = space;
  curve.test_size = split.test.size();
  curve.points.resize(slices.size());
  const auto test_truth = detail::true_classes(split.test);
  parallel_for(slices.size(), opts.jobs, [&](std::size_t k) {
    const Dataset& slice = slices[k];
    const std::uint64_t unit_seed = seed + 2 + k;
    CurvePoint p;
    p.fraction = fractions[k];
    p.train_size = slice.size();
    p.search = random_search(slice, space, unit_seed, opts.model);
    const auto model = train_multiclass(slice, p.search.best, unit_seed, opts.model);
    p.converged = model.converged();
    auto accuracy = [](std::span<const std::size_t> truth, std::span<const std::size_t> pred) {
      std::size_t hit = 0;
      for (std::size_t i = 0; i < truth.size(); ++i) hit += truth[i] == pred[i];
      return truth.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(truth.size());
    };
    p.train_accuracy = accuracy(detail::true_classes(slice), detail::predicted_classes(model, slice));
    p.test_accuracy = accuracy(test_truth, detail::predicted_classes(model, split.test));
    curve.points[k] = std::move(p);
  });
  return curve;
}

inline nlohmann::ordered_json to_json(const SearchSpace& s) {
  return {{"c_min", s.c_min},         {"c_max", s.c_max},   {"gamma_min", s.gamma_min},
          {"gamma_max", s.gamma_max}, {"budget", s.budget}, {"patience", s.patience}};
}

inline nlohmann::ordered_json to_json(const SearchResult& s) {
  return {{"C", s.best.C},
          {"gamma", s.best.gamma},
          {"validation_score", s.validation_score},
          {"fit_score", s.fit_score},
          {"configurations", s.evaluated},
          {"validation_size", s.validation_size}};
}

inline nlohmann::ordered_json to_json(const EvaluationReport& r) {
  using nlohmann::ordered_json;
  ordered_json protocol = {{"name", r.protocol}};
  if (r.protocol == "holdout") {
    protocol["repetitions"] = r.repetitions;
    protocol["train_fraction"] = r.train_fraction;
  }
  ordered_json units = ordered_json::array();
  for (const auto& u : r.units) {
    ordered_json preds = ordered_json::array();
    for (const auto& p : u.predictions)
      preds.push_back({{"id", p.id}, {"true", p.truth}, {"predicted", p.predicted}, {"decisions", p.decisions}});
    ordered_json unit = {{"unit", u.index},        {"seed", u.seed},           {"search", to_json(u.search)},
                         {"converged", u.converged}, {"train_size", u.train_size}, {"predictions", std::move(preds)}};
    if (r.protocol == "holdout") unit["metrics"] = to_json(u.metrics);
    units.push_back(std::move(unit));
  }
  return {{"tool", "adstage"},
          {"version", kVersion},
          {"protocol", std::move(protocol)},
          {"master_seed", r.master_seed},
          {"dataset", {{"n", r.n}, {"d", r.dim}, {"schema", r.schema}}},
          {"search_space", to_json(r.space)},
          {"all_converged", r.all_converged()},
          {"units", std::move(units)},
          {"aggregate", to_json(r.aggregate)}};
}

inline nlohmann::ordered_json to_json(const LearningCurve& c) {
  using nlohmann::ordered_json;
  ordered_json points = ordered_json::array();
  for (const auto& p : c.points)
    points.push_back({{"fraction", p.fraction},
                      {"train_accuracy", p.train_accuracy},
                      {"test_accuracy", p.test_accuracy},
                      {"train_size", p.train_size},
                      {"converged", p.converged},
                      {"search", to_json(p.search)}});
  return {{"tool", "adstage"},          {"version", kVersion},      {"master_seed", c.master_seed},
          {"search_space", to_json(c.space)}, {"test_size", c.test_size}, {"points", std::move(points)}};
}

inline std::string curve_csv(const LearningCurve& c) {
  std::string out = "fraction,train_accuracy,test_accuracy\n";
  for (const auto& p : c.points)
    out += format_number(p.fraction) + "," + format_number(p.train_accuracy) + "," +
           format_number(p.test_accuracy) + "\n";
  return out;
}

}  // namespace adstage
