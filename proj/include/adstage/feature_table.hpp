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

// Feature-table storage: a JSON manifest describing n records plus a raw
// n x d row-major little-endian binary32 payload, and a CSV form for small
// fixtures (header id,label,sex,age,f0,...,f{d-1}).

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "adstage/dataset.hpp"
#include "adstage/io_util.hpp"
#include "json.hpp"

namespace adstage {

namespace fs = std::filesystem;

inline Dataset load_dataset(const fs::path& manifest_path) {
  using nlohmann::json;
  json m;
  try {
    m = json::parse(read_file(manifest_path));
  } catch (const json::exception& e) {
    throw DataError("manifest '" + manifest_path.string() + "' is not valid JSON: " + e.what());
  }
  try {
    if (m.at("version").get<int>() != 1) throw DataError("unsupported manifest version");
    if (m.at("dtype").get<std::string>() != "f32") throw DataError("manifest dtype must be f32");
    if (m.at("byte_order").get<std::string>() != "little")
      throw DataError("manifest byte_order must be little");
    if (m.at("layout").get<std::string>() != "row-major")
      throw DataError("manifest layout must be row-major");
    const auto n = m.at("n").get<std::size_t>();
    const auto d = m.at("d").get<std::size_t>();
    auto schema = m.at("schema").get<std::vector<std::string>>();
    const auto& recs = m.at("records");
    if (recs.size() != n)
      throw DataError("manifest declares n=" + std::to_string(n) + " but lists " +
                      std::to_string(recs.size()) + " records");
    const fs::path payload_path =
        manifest_path.parent_path() / m.at("features_file").get<std::string>();
    std::string payload;
    if (n * d > 0 || fs::exists(payload_path)) {
      if (!fs::exists(payload_path))
        throw DataError("feature payload '" + payload_path.string() + "' is missing");
      payload = read_file(payload_path);
    }
    const std::size_t expected = 4 * n * d;
    if (payload.size() < expected)
      throw DataError("feature payload is short: " + std::to_string(payload.size()) + " bytes, expected " +
                      std::to_string(expected));
    if (payload.size() != expected)
      throw DataError("feature payload size " + std::to_string(payload.size()) +
                      " does not match n*d*4 = " + std::to_string(expected));
    std::vector<FeatureRecord> records;
    records.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& r = recs[i];
      FeatureRecord rec;
      rec.id = r.at("id").get<std::string>();
      rec.label = r.at("label").get<std::string>();
      rec.sex = parse_sex(r.at("sex").get<std::string>());
      rec.age = r.at("age").get<double>();
      rec.features.resize(d);
      const char* p = payload.data() + 4 * i * d;
      for (std::size_t j = 0; j < d; ++j) rec.features[j] = read_f32_le(p + 4 * j);
      records.push_back(std::move(rec));
    }
    std::string provenance = m.value("provenance", manifest_path.string());
    return Dataset(std::move(records), d, std::move(schema), std::move(provenance));
  } catch (const json::exception& e) {
    throw DataError("manifest '" + manifest_path.string() + "' is malformed: " + e.what());
  }
}

/// Writes the manifest and, next to it, the binary payload named
/// `features_file` (default: manifest stem + ".f32").
inline void write_dataset(const Dataset& ds, const fs::path& manifest_path,
                          std::optional<std::string> features_file = std::nullopt) {
  using nlohmann::ordered_json;
  const std::string payload_name =
      features_file.value_or(manifest_path.stem().string() + ".f32");
  std::string payload;
  payload.reserve(4 * ds.size() * ds.dim());
  ordered_json recs = ordered_json::array();
  for (const auto& r : ds.records()) {
    append_f32_le(payload, r.features);
    recs.push_back({{"id", r.id}, {"label", r.label}, {"sex", to_string(r.sex)}, {"age", r.age}});
  }
  ordered_json m;
  m["version"] = 1;
  m["n"] = ds.size();
  m["d"] = ds.dim();
  m["dtype"] = "f32";
  m["byte_order"] = "little";
  m["layout"] = "row-major";
  m["features_file"] = payload_name;
  m["schema"] = ds.schema();
  if (!ds.provenance().empty()) m["provenance"] = ds.provenance();
  m["records"] = std::move(recs);
  atomic_write(manifest_path.parent_path() / payload_name, payload);
  atomic_write(manifest_path, m.dump(1) + "\n");
}

/// RFC 4180 CSV: quoted fields may hold commas, doubled quotes and line
/// breaks; records end in LF or CRLF.
inline std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, field_started = false;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    if (!(row.size() == 1 && row[0].empty())) rows.push_back(std::move(row));
    row.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"' && !field_started) {
      quoted = field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
      end_row();
      ++i;
    } else if (c == '\n') {
      end_row();
    } else {
      field += c;
      field_started = true;
    }
  }
  if (quoted) throw DataError("CSV ends inside a quoted field");
  if (field_started || !row.empty()) end_row();
  return rows;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

/// Reads the CSV form. Without an explicit schema the class order is the
/// order of first appearance.
inline Dataset load_csv(const fs::path& path, std::optional<std::vector<std::string>> schema = std::nullopt) {
  const auto rows = parse_csv(read_file(path));
  if (rows.empty()) throw DataError("CSV '" + path.string() + "' has no header");
  const auto& header = rows[0];
  if (header.size() < 5 || header[0] != "id" || header[1] != "label" || header[2] != "sex" ||
      header[3] != "age")
    throw DataError("CSV header must start with id,label,sex,age and have at least one feature column");
  const std::size_t d = header.size() - 4;
  for (std::size_t j = 0; j < d; ++j)
    if (header[4 + j] != "f" + std::to_string(j))
      throw DataError("CSV feature column " + std::to_string(j) + " must be named f" + std::to_string(j));
  std::vector<std::string> order;
  std::vector<FeatureRecord> records;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    const std::string where = "CSV line record " + std::to_string(i);
    if (row.size() != header.size())
      throw DataError(where + " has " + std::to_string(row.size()) + " fields, expected " +
                      std::to_string(header.size()));
    FeatureRecord rec;
    rec.id = row[0];
    rec.label = row[1];
    rec.sex = parse_sex(row[2]);
    if (!parse_number(row[3], rec.age)) throw DataError(where + " ('" + rec.id + "') has a bad age");
    rec.features.resize(d);
    for (std::size_t j = 0; j < d; ++j)
      if (!parse_number(row[4 + j], rec.features[j]))
        throw DataError(where + " ('" + rec.id + "') has a bad value in column f" + std::to_string(j));
    if (std::find(order.begin(), order.end(), rec.label) == order.end()) order.push_back(rec.label);
    records.push_back(std::move(rec));
  }
  return Dataset(std::move(records), d, schema.value_or(order), path.string());
}

inline std::string to_csv(const Dataset& ds) {
  std::string out = "id,label,sex,age";
  for (std::size_t j = 0; j < ds.dim(); ++j) out += ",f" + std::to_string(j);
  out += "\n";
  for (const auto& r : ds.records()) {
    out += csv_escape(r.id) + "," + csv_escape(r.label) + "," + to_string(r.sex) + "," +
           format_number(r.age);
    for (float v : r.features) out += "," + format_number(v);
    out += "\n";
  }
  return out;
}

}  // namespace adstage
