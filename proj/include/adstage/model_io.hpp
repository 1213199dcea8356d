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

// On-disk models. A binary SVM is a JSON header plus a little-endian binary32
// block: support vectors (row-major) followed by their coefficients. A
// multiclass bundle is a directory holding one such pair per class and an
// index.json with the schema order, hyperparameters and standardizer.

#include <filesystem>
#include <string>

#include "adstage/io_util.hpp"
#include "adstage/multiclass.hpp"
#include "adstage/svm.hpp"
#include "json.hpp"

namespace adstage {

namespace fs = std::filesystem;

inline void save_binary_model(const BinarySvmModel& model, const fs::path& dir, const std::string& stem) {
  using nlohmann::ordered_json;
  std::string block;
  block.reserve(4 * model.support_vectors.data().size() + 4 * model.coefficients.size());
  append_f32_le(block, model.support_vectors.data());
  std::vector<float> coef(model.coefficients.begin(), model.coefficients.end());
  append_f32_le(block, coef);

  ordered_json h;
  h["format"] = "adstage-svm";
  h["version"] = 1;
  h["kernel"] = "rbf";
  h["gamma"] = model.kernel.gamma;
  h["bias"] = model.bias;
  h["n_support"] = model.coefficients.size();
  h["dim"] = model.dim();
  h["converged"] = model.converged;
  h["iterations"] = model.iterations;
  h["dtype"] = "f32";
  h["byte_order"] = "little";
  h["binary_file"] = stem + ".bin";
  atomic_write(dir / (stem + ".bin"), block);
  atomic_write(dir / (stem + ".json"), h.dump(1) + "\n");
}

inline BinarySvmModel load_binary_model(const fs::path& header_path) {
  using nlohmann::json;
  try {
    const json h = json::parse(read_file(header_path));
    if (h.at("format").get<std::string>() != "adstage-svm" || h.at("version").get<int>() != 1)
      throw DataError("'" + header_path.string() + "' is not a version-1 SVM model header");
    BinarySvmModel m;
    m.kernel.gamma = h.at("gamma").get<double>();
    m.bias = h.at("bias").get<double>();
    m.converged = h.at("converged").get<bool>();
    m.iterations = h.at("iterations").get<std::size_t>();
    const auto n_sv = h.at("n_support").get<std::size_t>();
    const auto dim = h.at("dim").get<std::size_t>();
    const std::string block = read_file(header_path.parent_path() / h.at("binary_file").get<std::string>());
    if (block.size() != 4 * (n_sv * dim + n_sv))
      throw DataError("model block '" + h.at("binary_file").get<std::string>() + "' has the wrong size");
    m.support_vectors = Matrix(n_sv, dim);
    const char* p = block.data();
    for (std::size_t i = 0; i < n_sv; ++i) {
      auto row = m.support_vectors.row(i);
      for (std::size_t j = 0; j < dim; ++j, p += 4) row[j] = read_f32_le(p);
    }
    m.coefficients.resize(n_sv);
    for (std::size_t i = 0; i < n_sv; ++i, p += 4) m.coefficients[i] = read_f32_le(p);
    return m;
  } catch (const json::exception& e) {
    throw DataError("model header '" + header_path.string() + "' is malformed: " + e.what());
  }
}

inline void save_bundle(const MulticlassModel& model, const fs::path& dir) {
  using nlohmann::ordered_json;
  fs::create_directories(dir);
  ordered_json index;
  index["format"] = "adstage-bundle";
  index["version"] = 1;
  index["classes"] = model.classes;
  index["hyperparameters"] = {{"C", model.hyper.C}, {"gamma", model.hyper.gamma}};
  index["standardizer"] = {{"mean", model.standardizer.mean}, {"scale", model.standardizer.scale}};
  ordered_json files = ordered_json::array();
  for (std::size_t c = 0; c < model.models.size(); ++c) {
    const std::string stem = "class_" + std::to_string(c);
    save_binary_model(model.models[c], dir, stem);
    files.push_back(stem + ".json");
  }
  index["models"] = std::move(files);
  atomic_write(dir / "index.json", index.dump(1) + "\n");
}

inline MulticlassModel load_bundle(const fs::path& dir) {
  using nlohmann::json;
  try {
    const json index = json::parse(read_file(dir / "index.json"));
    if (index.at("format").get<std::string>() != "adstage-bundle" || index.at("version").get<int>() != 1)
      throw DataError("'" + dir.string() + "' is not a version-1 model bundle");
    MulticlassModel m;
    m.classes = index.at("classes").get<std::vector<std::string>>();
    m.hyper.C = index.at("hyperparameters").at("C").get<double>();
    m.hyper.gamma = index.at("hyperparameters").at("gamma").get<double>();
    m.standardizer.mean = index.at("standardizer").at("mean").get<std::vector<double>>();
    m.standardizer.scale = index.at("standardizer").at("scale").get<std::vector<double>>();
    for (const auto& f : index.at("models")) m.models.push_back(load_binary_model(dir / f.get<std::string>()));
    if (m.models.size() != m.classes.size()) throw DataError("bundle lists " + std::to_string(m.models.size()) + " models for " +
                      std::to_string(m.classes.size()) + " classes");
    if (m.standardizer.mean.size() != m.standardizer.scale.size())
      throw DataError("bundle standardizer arrays differ in length");
    for (const auto& b : m.models)
      if (b.dim() != m.standardizer.size() && b.coefficients.size() > 0)
        throw DataError("bundle model dimension does not match its standardizer");
    return m;
  } catch (const json::exception& e) {
    throw DataError("bundle index in '" + dir.string() + "' is malformed: " + e.what());
  }
}

}  // namespace adstage
