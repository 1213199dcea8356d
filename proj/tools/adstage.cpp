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

// adstage command-line tool.
//
// Exit codes: 0 success, 1 usage error, 2 data/validation error,
// 3 solver non-convergence. Errors are reported as one line on stderr:
//   adstage: error: kind=<usage|data|convergence|runtime> msg=<text>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "adstage/adstage.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kConvergence = 3 };

int fail(ExitCode code, const std::string& kind, std::string msg) {
  for (auto& c : msg)
    if (c == '\n' || c == '\r') c = ' ';
  std::cerr << "adstage: error: kind=" << kind << " msg=" << msg << "\n";
  return code;
}

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flags shared by every subcommand plus the per-command ones. Values given
// on the command line win over the --config file.
struct RunConfig {
  std::string manifest;
  std::string config;
  std::uint64_t seed = 0;
  std::string out = ".";
  unsigned jobs = 1;
  std::vector<std::string> schema;

  std::string protocol;
  std::size_t repetitions = 50;
  double train_fraction = 0.8;
  std::string fractions = "0.1:0.7:0.1";

  std::string csv;
  std::string out_manifest;
  std::string model;

  adstage::SearchSpace space;
  std::string c_range;
  std::string gamma_range;
  double C = 0.0;
  double gamma = 0.0;
};

std::pair<double, double> parse_range(const std::string& text, const std::string& flag) {
  const auto colon = text.find(':');
  double lo = 0, hi = 0;
  if (colon == std::string::npos || !adstage::parse_number(std::string_view(text).substr(0, colon), lo) ||
      !adstage::parse_number(std::string_view(text).substr(colon + 1), hi))
    throw UsageError(flag + " expects LOW:HIGH, got '" + text + "'");
  return {lo, hi};
}

// "start:stop:step", inclusive of stop; values snapped to 1e-9 so that
// 0.1:0.7:0.1 gives exactly 0.1, 0.2, ..., 0.7.
std::vector<double> parse_fractions(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
  double start = 0, stop = 0, step = 0;
  if (parts.size() != 3 || !adstage::parse_number(parts[0], start) || !adstage::parse_number(parts[1], stop) ||
      !adstage::parse_number(parts[2], step) || !(step > 0.0) || stop < start)
    throw UsageError("--fractions expects START:STOP:STEP, got '" + text + "'");
  std::vector<double> out;
  for (std::size_t k = 0;; ++k) {
    const double v = std::round((start + static_cast<double>(k) * step) * 1e9) / 1e9;
    if (v > stop + 1e-9) break;
    out.push_back(v);
  }
  return out;
}

void apply_config_file(CLI::App& cmd, RunConfig& rc) {
  if (rc.config.empty()) return;
  json cfg;
  try {
    cfg = json::parse(adstage::read_file(rc.config));
  } catch (const json::exception& e) {
    throw adstage::DataError("config '" + rc.config + "' is not valid JSON: " + e.what());
  }
  auto given = [&](const char* flag) { return cmd.count(flag) > 0; };
  try {
    if (cfg.contains("manifest") && !given("--manifest")) rc.manifest = cfg["manifest"].get<std::string>();
    if (cfg.contains("seed") && !given("--seed")) rc.seed = cfg["seed"].get<std::uint64_t>();
    if (cfg.contains("out") && !given("--out")) rc.out = cfg["out"].get<std::string>();
    if (cfg.contains("jobs") && !given("--jobs")) rc.jobs = cfg["jobs"].get<unsigned>();
    if (cfg.contains("schema") && !given("--schema")) rc.schema = cfg["schema"].get<std::vector<std::string>>();
    if (cfg.contains("protocol") && !given("--protocol")) rc.protocol = cfg["protocol"].get<std::string>();
    if (cfg.contains("repetitions") && !given("--repetitions"))
      rc.repetitions = cfg["repetitions"].get<std::size_t>();
    if (cfg.contains("train_fraction") && !given("--train-fraction"))
      rc.train_fraction = cfg["train_fraction"].get<double>();
    if (cfg.contains("fractions") && !given("--fractions")) rc.fractions = cfg["fractions"].get<std::string>();
    if (cfg.contains("C") && !given("--C")) rc.C = cfg["C"].get<double>();
    if (cfg.contains("gamma") && !given("--gamma")) rc.gamma = cfg["gamma"].get<double>();
    if (cfg.contains("search")) {
      const auto& s = cfg["search"];
      if (!given("--c-range")) {
        rc.space.c_min = s.value("c_min", rc.space.c_min);
        rc.space.c_max = s.value("c_max", rc.space.c_max);
      }
      if (!given("--gamma-range")) {
        rc.space.gamma_min = s.value("gamma_min", rc.space.gamma_min);
        rc.space.gamma_max = s.value("gamma_max", rc.space.gamma_max);
      }
      if (!given("--budget")) rc.space.budget = s.value("budget", rc.space.budget);
      if (!given("--patience")) rc.space.patience = s.value("patience", rc.space.patience);
    }
  } catch (const json::exception& e) {
    throw adstage::DataError("config '" + rc.config + "' has a bad value: " + e.what());
  }
}

void finalize(RunConfig& rc) {
  if (!rc.c_range.empty()) std::tie(rc.space.c_min, rc.space.c_max) = parse_range(rc.c_range, "--c-range");
  if (!rc.gamma_range.empty())
    std::tie(rc.space.gamma_min, rc.space.gamma_max) = parse_range(rc.gamma_range, "--gamma-range");
  if (rc.jobs < 1) throw UsageError("--jobs must be at least 1");
}

adstage::Dataset load_input(const RunConfig& rc) {
  if (rc.manifest.empty()) throw UsageError("--manifest is required");
  auto ds = adstage::load_dataset(rc.manifest);
  if (!rc.schema.empty()) ds = ds.with_schema(rc.schema);
  return ds;
}

void write_run_log(const fs::path& dir, const std::string& command, const RunConfig& rc) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::ostringstream os;
  os << "time: " << std::put_time(std::gmtime(&now), "%Y-%m-%dT%H:%M:%SZ") << "\n"
     << "command: " << command << "\n"
     << "manifest: " << rc.manifest << "\n"
     << "seed: " << rc.seed << "\n"
     << "jobs: " << rc.jobs << "\n"
     << "version: " << adstage::kVersion << "\n";
  adstage::atomic_write(dir / "run.log", os.str());
}

adstage::HarnessOptions harness_options(const RunConfig& rc) {
  adstage::HarnessOptions opts;
  opts.jobs = rc.jobs;
  return opts;
}

int cmd_ingest(const RunConfig& rc) {
  if (rc.csv.empty() || rc.out_manifest.empty()) throw UsageError("ingest needs --csv and --out-manifest");
  std::optional<std::vector<std::string>> schema;
  if (!rc.schema.empty()) schema = rc.schema;
  const auto ds = adstage::load_csv(rc.csv, schema);
  adstage::write_dataset(ds, rc.out_manifest);
  std::cout << "wrote " << rc.out_manifest << " (n=" << ds.size() << ", d=" << ds.dim() << ")\n";
  return kOk;
}

int cmd_train(const RunConfig& rc) {
  const auto ds = load_input(rc);
  adstage::HyperParams hp{rc.C, rc.gamma};
  nlohmann::ordered_json search = nullptr;
  if (rc.C <= 0.0 || rc.gamma <= 0.0) {
    const auto res = adstage::random_search(ds, rc.space, rc.seed);
    hp = res.best;
    search = adstage::to_json(res);
  }
  const auto model = adstage::train_multiclass(ds, hp, rc.seed);
  const fs::path out(rc.out);
  adstage::save_bundle(model, out);
  nlohmann::ordered_json summary = {{"tool", "adstage"},
                                    {"version", adstage::kVersion},
                                    {"seed", rc.seed},
                                    {"C", hp.C},
                                    {"gamma", hp.gamma},
                                    {"search", search},
                                    {"converged", model.converged()}};
  adstage::atomic_write(out / "train.json", summary.dump(2) + "\n");
  write_run_log(out, "train", rc);
  if (!model.converged()) return fail(kConvergence, "convergence", "a binary model hit the iteration cap");
  return kOk;
}

int cmd_evaluate(const RunConfig& rc) {
  const auto ds = load_input(rc);
  adstage::EvaluationReport report;
  if (rc.protocol == "loo") {
    report = adstage::run_loo(ds, rc.space, rc.seed, harness_options(rc));
  } else if (rc.protocol == "holdout") {
    report = adstage::run_repeated_holdout(ds, rc.repetitions, rc.train_fraction, rc.space, rc.seed,
                                           harness_options(rc));
  } else {
    throw UsageError("--protocol must be loo or holdout");
  }
  const fs::path out(rc.out);
  adstage::atomic_write(out / "report.json", adstage::to_json(report).dump(2) + "\n");
  adstage::atomic_write(out / "report.txt", adstage::render_report(report.aggregate, adstage::ReportFormat::Table));
  write_run_log(out, "evaluate", rc);
  if (!report.all_converged())
    return fail(kConvergence, "convergence", "a final model hit the iteration cap; see report.json");
  return kOk;
}

int cmd_learning_curve(const RunConfig& rc) {
  const auto ds = load_input(rc);
  const auto fractions = parse_fractions(rc.fractions);
  const auto curve = adstage::learning_curve(ds, fractions, rc.space, rc.seed, harness_options(rc));
  const fs::path out(rc.out);
  adstage::atomic_write(out / "curve.csv", adstage::curve_csv(curve));
  adstage::atomic_write(out / "curve.json", adstage::to_json(curve).dump(2) + "\n");
  write_run_log(out, "learning-curve", rc);
  for (const auto& p : curve.points)
    if (!p.converged) return fail(kConvergence, "convergence", "a curve model hit the iteration cap");
  return kOk;
}

int cmd_predict(const RunConfig& rc) {
  if (rc.model.empty()) throw UsageError("predict needs --model");
  const auto model = adstage::load_bundle(rc.model);
  const auto ds = load_input(rc);
  if (ds.dim() + 2 != model.input_dim())
    throw adstage::DataError("manifest dimension " + std::to_string(ds.dim()) + " does not match model dimension " +
                             std::to_string(model.input_dim() - 2));
  const auto preds = adstage::predict_batch(model, ds);
  std::string out = "id,predicted_label";
  for (const auto& c : model.classes) out += "," + adstage::csv_escape(c);
  out += "\n";
  for (const auto& p : preds) {
    out += adstage::csv_escape(p.id) + "," + adstage::csv_escape(p.label);
    for (double v : p.decisions) out += "," + adstage::format_number(v);
    out += "\n";
  }
  std::cout << out;
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adstage: stage classification from backbone features with a class-balanced RBF SVM"};
  app.require_subcommand(1);
  RunConfig rc;

  auto shared = [&rc](CLI::App* cmd) {
    cmd->add_option("--manifest", rc.manifest, "Feature-table manifest (JSON)");
    cmd->add_option("--config", rc.config, "JSON run configuration; flags override it");
    cmd->add_option("--seed", rc.seed, "Master seed (unsigned 64-bit)");
    cmd->add_option("--out", rc.out, "Output directory");
    cmd->add_option("--jobs", rc.jobs, "Worker threads");
    cmd->add_option("--schema", rc.schema, "Class schema override, comma separated")->delimiter(',');
  };
  auto search = [&rc](CLI::App* cmd) {
    cmd->add_option("--c-range", rc.c_range, "Log-uniform C range LOW:HIGH");
    cmd->add_option("--gamma-range", rc.gamma_range, "Log-uniform gamma range LOW:HIGH");
    cmd->add_option("--budget", rc.space.budget, "Maximum sampled configurations");
    cmd->add_option("--patience", rc.space.patience, "Non-improving configurations before stopping");
  };

  auto* ingest = app.add_subcommand("ingest", "Convert a CSV feature table to the binary format");
  ingest->add_option("--csv", rc.csv, "Input CSV")->required();
  ingest->add_option("--out-manifest", rc.out_manifest, "Output manifest path")->required();
  ingest->add_option("--schema", rc.schema, "Class order, comma separated")->delimiter(',');

  auto* train = app.add_subcommand("train", "Train a model bundle on a whole feature table");
  shared(train);
  search(train);
  train->add_option("--C", rc.C, "Fixed C (skips the search together with --gamma)");
  train->add_option("--gamma", rc.gamma, "Fixed gamma");

  auto* evaluate = app.add_subcommand("evaluate", "Run the leave-one-out or repeated hold-out protocol");
  shared(evaluate);
  search(evaluate);
  evaluate->add_option("--protocol", rc.protocol, "loo or holdout");
  evaluate->add_option("--repetitions", rc.repetitions, "Hold-out repetitions");
  evaluate->add_option("--train-fraction", rc.train_fraction, "Hold-out training fraction");

  auto* curve = app.add_subcommand("learning-curve", "Accuracy against training-set fraction");
  shared(curve);
  search(curve);
  curve->add_option("--fractions", rc.fractions, "START:STOP:STEP");

  auto* predict = app.add_subcommand("predict", "Predict stages with a trained bundle (CSV to stdout)");
  shared(predict);
  predict->add_option("--model", rc.model, "Model bundle directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << app.help();
    return fail(kUsage, "usage", e.what());
  }

  try {
    CLI::App* cmd = app.get_subcommands().front();
    apply_config_file(*cmd, rc);
    finalize(rc);
    if (cmd == evaluate && rc.protocol.empty()) throw UsageError("evaluate needs --protocol loo|holdout");
    if (cmd == ingest) return cmd_ingest(rc);
    if (cmd == train) return cmd_train(rc);
    if (cmd == evaluate) return cmd_evaluate(rc);
    if (cmd == curve) return cmd_learning_curve(rc);
    return cmd_predict(rc);
  } catch (const UsageError& e) {
    std::cerr << app.help();
    return fail(kUsage, "usage", e.what());
  } catch (const adstage::DataError& e) {
    return fail(kData, "data", e.what());
  } catch (const adstage::ConvergenceError& e) {
    return fail(kConvergence, "convergence", e.what());
  } catch (const fs::filesystem_error& e) {
    return fail(kData, "data", e.what());
  } catch (const std::exception& e) {
    return fail(kData, "io", e.what());
  }
}
