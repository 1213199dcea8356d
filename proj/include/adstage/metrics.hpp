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
#include <iomanip>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "adstage/error.hpp"
#include "json.hpp"

namespace adstage {

/// One-vs-rest counts for a single class.
struct BinaryConfusion {
  std::size_t tp = 0;
  std::size_t fn = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;

  std::size_t total() const { return tp + fn + fp + tn; }

  BinaryConfusion& operator+=(const BinaryConfusion& o) {
    tp += o.tp, fn += o.fn, fp += o.fp, tn += o.tn;
    return *this;
  }
  bool operator==(const BinaryConfusion&) const = default;
};

struct ClassMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double specificity = 0.0;
  double f1 = 0.0;

  bool operator==(const ClassMetrics&) const = default;
};

/// Confusion per schema class, in schema order.
inline std::vector<BinaryConfusion> per_class_confusions(std::span<const std::string> y_true,
                                                         std::span<const std::string> y_pred,
                                                         std::span<const std::string> schema) {
  if (y_true.size() != y_pred.size())
    throw DataError("label vectors differ in length: " + std::to_string(y_true.size()) + " vs " +
                    std::to_string(y_pred.size()));
  auto index = [&](const std::string& l) {
    auto it = std::find(schema.begin(), schema.end(), l);
    if (it == schema.end()) throw DataError("label '" + l + "' is not in the class schema");
    return static_cast<std::size_t>(it - schema.begin());
  };
  std::vector<BinaryConfusion> out(schema.size());
  for (std::size_t s = 0; s < y_true.size(); ++s) {
    const std::size_t t = index(y_true[s]), p = index(y_pred[s]);
    for (std::size_t c = 0; c < schema.size(); ++c) {
      auto& cm = out[c];
      if (t == c) (p == c ? cm.tp : cm.fn)++;
      else (p == c ? cm.fp : cm.tn)++;
    }
  }
  return out;
}

namespace detail {
// A zero denominator yields 0.
inline double ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }
}  // namespace detail

inline ClassMetrics compute_metrics(const BinaryConfusion& cm) {
  if (cm.total() == 0) throw DataError("cannot compute metrics from an empty confusion matrix");
  const auto tp = static_cast<double>(cm.tp), fn = static_cast<double>(cm.fn);
  const auto fp = static_cast<double>(cm.fp), tn = static_cast<double>(cm.tn);
  ClassMetrics m;
  m.accuracy = (tp + tn) / (tp + tn + fp + fn);
  m.precision = detail::ratio(tp, tp + fp);
  m.recall = detail::ratio(tp, tp + fn);
  m.specificity = detail::ratio(tn, tn + fp);
  m.f1 = detail::ratio(2.0 * m.precision * m.recall, m.precision + m.recall);
  return m;
}

/// Unweighted field-wise mean.
inline ClassMetrics macro_average(std::span<const ClassMetrics> rows) {
  if (rows.empty()) throw DataError("cannot average an empty list of metric rows");
  ClassMetrics m;
  for (const auto& r : rows) {
    m.accuracy += r.accuracy;
    m.precision += r.precision;
    m.recall += r.recall;
    m.specificity += r.specificity;
    m.f1 += r.f1;
  }
  const auto k = static_cast<double>(rows.size());
  m.accuracy /= k;
  m.precision /= k;
  m.recall /= k;
  m.specificity /= k;
  m.f1 /= k;
  return m;
}

struct ClassRow {
  std::string name;
  BinaryConfusion confusion;
  ClassMetrics metrics;
};

struct MetricsReport {
  std::vector<ClassRow> classes;
  ClassMetrics average;
  std::size_t n = 0;
};

inline MetricsReport build_report(std::span<const std::string> y_true, std::span<const std::string> y_pred,
                                  std::span<const std::string> schema) {
  const auto cms = per_class_confusions(y_true, y_pred, schema);
  MetricsReport r;
  r.n = y_true.size();
  std::vector<ClassMetrics> rows;
  for (std::size_t c = 0; c < schema.size(); ++c) {
    r.classes.push_back({schema[c], cms[c], compute_metrics(cms[c])});
    rows.push_back(r.classes.back().metrics);
  }
  r.average = macro_average(rows);
  return r;
}

/// Field-wise mean of reports over the same schema. Confusion counts and n
/// are summed.
inline MetricsReport mean_report(std::span<const MetricsReport> reports) {
  if (reports.empty()) throw DataError("cannot aggregate zero reports");
  MetricsReport out;
  out.classes.resize(reports[0].classes.size());
  for (std::size_t c = 0; c < out.classes.size(); ++c) {
    out.classes[c].name = reports[0].classes[c].name;
    std::vector<ClassMetrics> rows;
    for (const auto& r : reports) {
      if (r.classes.size() != out.classes.size() || r.classes[c].name != out.classes[c].name)
        throw DataError("cannot aggregate reports over different schemas");
      out.classes[c].confusion += r.classes[c].confusion;
      rows.push_back(r.classes[c].metrics);
    }
    out.classes[c].metrics = macro_average(rows);
  }
  std::vector<ClassMetrics> avgs;
  for (const auto& r : reports) {
    avgs.push_back(r.average);
    out.n += r.n;
  }
  out.average = macro_average(avgs);
  return out;
}

/// Fraction as a percentage with two decimals, rounded half up ("86.81%").
/// Ties within floating-point noise (1e-7 of a hundredth) count as ties.
inline std::string percent(double fraction) {
  const auto hundredths = static_cast<std::int64_t>(std::floor(fraction * 10000.0 + 0.5 + 1e-7));
  std::ostringstream os;
  os << hundredths / 100 << '.' << std::setw(2) << std::setfill('0') << hundredths % 100 << '%';
  return os.str();
}

inline nlohmann::ordered_json to_json(const ClassMetrics& m) {
  return {{"accuracy", m.accuracy},
          {"precision", m.precision},
          {"recall", m.recall},
          {"specificity", m.specificity},
          {"f1", m.f1}};
}

inline nlohmann::ordered_json to_json(const MetricsReport& r) {
  nlohmann::ordered_json classes = nlohmann::ordered_json::array();
  for (const auto& row : r.classes) {
    classes.push_back({{"name", row.name},
                       {"confusion",
                        {{"tp", row.confusion.tp},
                         {"fn", row.confusion.fn},
                         {"fp", row.confusion.fp},
                         {"tn", row.confusion.tn}}},
                       {"metrics", to_json(row.metrics)}});
  }
  return {{"classes", std::move(classes)}, {"average", to_json(r.average)}, {"n", r.n}};
}

inline std::string render_table(const MetricsReport& r) {
  const std::vector<std::string> head = {"Class", "Accuracy", "Precision", "Recall", "Specificity", "F1"};
  std::vector<std::vector<std::string>> cells;
  auto add = [&](const std::string& name, const ClassMetrics& m) {
    cells.push_back({name, percent(m.accuracy), percent(m.precision), percent(m.recall),
                     percent(m.specificity), percent(m.f1)});
  };
  for (const auto& row : r.classes) add(row.name, row.metrics);
  add("Average", r.average);

  std::vector<std::size_t> width(head.size());
  for (std::size_t k = 0; k < head.size(); ++k) {
    width[k] = head[k].size();
    for (const auto& line : cells) width[k] = std::max(width[k], line[k].size());
  }
  std::ostringstream os;
  auto emit = [&](const std::vector<std::string>& line) {
    for (std::size_t k = 0; k < line.size(); ++k) {
      if (k > 0) os << " | ";
      if (k == 0) os << std::left << std::setw(static_cast<int>(width[k])) << line[k];
      else os << std::right << std::setw(static_cast<int>(width[k])) << line[k];
    }
    os << '\n';
  };
  emit(head);
  std::string rule;
  for (std::size_t k = 0; k < width.size(); ++k) rule += (k ? "-+-" : "") + std::string(width[k], '-');
  os << rule << '\n';
  for (const auto& line : cells) emit(line);
  return os.str();
}

enum class ReportFormat { Table, Json };

inline std::string render_report(const MetricsReport& r, ReportFormat format) {
  if (format == ReportFormat::Json) return to_json(r).dump(2) + "\n";
  return render_table(r);
}

}  // namespace adstage
