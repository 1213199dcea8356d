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
#include "adstage/parallel.hpp"
#include "adstage/svm.hpp"

namespace adstage {

struct HyperParams {
  double C = 1.0;
  double gamma = 1.0;

  bool operator==(const HyperParams&) const = default;
};

struct MulticlassOptions {
  // Inverse-frequency class weights; false gives every sample cost C.
  bool balance_classes = true;
  TrainConfig solver;
  // Threads for the per-class binary problems.
  unsigned jobs = 1;
};

/// One-vs-rest ensemble: model k separates class k from all other classes.
struct MulticlassModel {
  std::vector<std::string> classes;
  std::vector<BinarySvmModel> models;
  Standardizer standardizer;
  HyperParams hyper;

  std::size_t input_dim() const { return standardizer.size(); }

  bool converged() const {
    for (const auto& m : models)
      if (!m.converged) return false;
    return true;
  }
};

/// Standardized model input rows for every record, stored as binary32.
inline Matrix standardized_matrix(const Dataset& ds, const Standardizer& s) {
  Matrix x(0, ds.dim() + 2);
  for (const auto& r : ds.records()) {
    const auto row = s.apply(concat_demographics(r));
    x.append_row(std::span<const double>(row));
  }
  return x;
}

inline MulticlassModel train_multiclass(const Dataset& train, const HyperParams& hp, std::uint64_t seed,
                                        const MulticlassOptions& opts = {}) {
  if (!(hp.C > 0.0) || !std::isfinite(hp.C) || !(hp.gamma > 0.0) || !std::isfinite(hp.gamma))
    throw DataError("hyperparameters C and gamma must be positive and finite");
  const auto counts = train.class_counts();
  for (std::size_t c = 0; c < counts.size(); ++c)
    if (counts[c] == 0)
      throw DataError("class '" + train.schema()[c] + "' is absent from the training data");

  MulticlassModel model;
  model.classes = train.schema();
  model.hyper = hp;
  model.standardizer = fit_standardizer(train);
  // Weights come from the original multiclass counts, not the collapsed
  // one-vs-rest counts.
  const ClassWeights weights =
      opts.balance_classes ? class_weights_from_counts(counts, train.schema()) : ClassWeights::uniform(train.schema());

  const Matrix x = standardized_matrix(train, model.standardizer);
  std::vector<double> cost(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) cost[i] = hp.C * weights[train.class_of(i)];

  model.models.resize(counts.size());
  parallel_for(counts.size(), opts.jobs, [&](std::size_t c) {
    std::vector<int> y(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) y[i] = train.class_of(i) == c ? 1 : -1;
    TrainConfig cfg = opts.solver;
    cfg.seed = seed + c;
    model.models[c] = smo_train(x, y, cost, KernelParams{hp.gamma}, cfg);
  });
  return model;
}

/// Per-class decision values for one record, in schema order.
inline std::vector<double> decision_values(const MulticlassModel& model, const FeatureRecord& record) {
  if (record.features.size() + 2 != model.input_dim())
    throw DataError("record '" + record.id + "' has dimension " + std::to_string(record.features.size()) +
                    ", model expects " + std::to_string(model.input_dim() - 2));
  const auto x = model.standardizer.apply(concat_demographics(record));
  std::vector<double> out;
  out.reserve(model.models.size());
  for (const auto& m : model.models) out.push_back(decision_value(m, std::span<const double>(x)));
  return out;
}

// First maximum wins, so ties go to the earliest class in schema order.
inline std::size_t argmax_class(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < values.size(); ++k)
    if (values[k] > values[best]) best = k;
  return best;
}

inline std::string predict(const MulticlassModel& model, const FeatureRecord& record) {
  const auto v = decision_values(model, record);
  return model.classes[argmax_class(v)];
}

struct Prediction {
  std::string id;
  std::string label;
  std::vector<double> decisions;

  bool operator==(const Prediction&) const = default;
};

inline std::vector<Prediction> predict_batch(const MulticlassModel& model, const Dataset& ds) {
  std::vector<Prediction> out;
  out.reserve(ds.size());
  for (const auto& r : ds.records()) {
    try {
      auto v = decision_values(model, r);
      out.push_back({r.id, model.classes[argmax_class(v)], std::move(v)});
    } catch (const DataError& e) {
      throw DataError("prediction failed for record '" + r.id + "': " + e.what());
    }
  }
  return out;
}

}  // namespace adstage
