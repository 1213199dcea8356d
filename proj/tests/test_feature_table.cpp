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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "adstage/feature_table.hpp"
#include "json.hpp"

using namespace adstage;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("adstage_ft_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_text(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

std::string manifest_text(int n, int d, const std::string& records, const std::string& schema = R"(["A","B"])") {
  return R"({"version":1,"n":)" + std::to_string(n) + R"(,"d":)" + std::to_string(d) +
         R"(,"dtype":"f32","byte_order":"little","layout":"row-major","features_file":"x.f32","schema":)" + schema +
         R"(,"records":)" + records + "}";
}

const std::string kTwoRecords =
    R"([{"id":"a","label":"A","sex":"F","age":70},{"id":"b","label":"B","sex":"M","age":55.5}])";

}  // namespace

TEST(FeatureTable, LoadsSmallestWellFormedTable) {
  const auto dir = scratch_dir("small");
  write_text(dir / "m.json", manifest_text(2, 3, kTwoRecords));
  std::string payload;
  const float values[] = {1.0f, -2.5f, 3.25f, 0.0f, 1e-3f, 7.0f};
  append_f32_le(payload, values);
  ASSERT_EQ(payload.size(), 24u);
  write_text(dir / "x.f32", payload);
  const auto ds = load_dataset(dir / "m.json");
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds.dim(), 3u);
  EXPECT_EQ(ds[0].features, (std::vector<float>{1.0f, -2.5f, 3.25f}));
  EXPECT_EQ(ds[1].features, (std::vector<float>{0.0f, 1e-3f, 7.0f}));
  EXPECT_EQ(ds[1].sex, Sex::M);
  EXPECT_EQ(ds[1].age, 55.5);
  EXPECT_EQ(ds[0].id, "a");
}

TEST(FeatureTable, PayloadIsLittleEndianBinary32) {
  std::string payload;
  const float one[] = {1.0f};
  append_f32_le(payload, one);
  // 0x3f800000 little-endian
  EXPECT_EQ(payload, std::string("\x00\x00\x80\x3f", 4));
  EXPECT_EQ(read_f32_le(payload.data()), 1.0f);
}

TEST(FeatureTable, ShortAndMismatchedPayloads) {
  const auto dir = scratch_dir("short");
  write_text(dir / "m.json", manifest_text(2, 3, kTwoRecords));
  write_text(dir / "x.f32", std::string(20, '\0'));
  try {
    load_dataset(dir / "m.json");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("short"), std::string::npos);
  }
  write_text(dir / "x.f32", std::string(28, '\0'));
  EXPECT_THROW(load_dataset(dir / "m.json"), DataError);
  fs::remove(dir / "x.f32");
  EXPECT_THROW(load_dataset(dir / "m.json"), DataError);
}

TEST(FeatureTable, ValidationErrors) {
  const auto dir = scratch_dir("invalid");
  write_text(dir / "x.f32", std::string(24, '\0'));
  write_text(dir / "m.json",
             manifest_text(2, 3, R"([{"id":"a","label":"Q","sex":"F","age":70},{"id":"b","label":"B","sex":"M","age":5}])"));
  EXPECT_THROW(load_dataset(dir / "m.json"), DataError);
  write_text(dir / "m.json",
             manifest_text(2, 3, R"([{"id":"a","label":"A","sex":"F","age":70},{"id":"a","label":"B","sex":"M","age":5}])"));
  EXPECT_THROW(load_dataset(dir / "m.json"), DataError);
  write_text(dir / "m.json", manifest_text(3, 2, kTwoRecords));
  EXPECT_THROW(load_dataset(dir / "m.json"), DataError);
  write_text(dir / "m.json", "{not json");
  EXPECT_THROW(load_dataset(dir / "m.json"), DataError);
  EXPECT_THROW(load_dataset(dir / "missing.json"), DataError);

  std::string payload;
  const float bad[] = {1.0f, NAN, 0.0f, 0.0f, 0.0f, 0.0f};
  append_f32_le(payload, bad);
  write_text(dir / "x.f32", payload);
  write_text(dir / "m.json", manifest_text(2, 3, kTwoRecords));
  EXPECT_THROW(load_dataset(dir / "m.json"), DataError);
}

TEST(FeatureTable, WriteThenLoadRoundTrips) {
  Rng rng(8);
  std::vector<FeatureRecord> rs;
  for (int i = 0; i < 25; ++i) {
    FeatureRecord r;
    r.id = "id \"" + std::to_string(i) + "\", x";
    r.label = i % 3 == 0 ? "Mild, early" : "Normal";
    r.sex = i % 2 ? Sex::M : Sex::F;
    r.age = 18.0 + rng.uniform01() * 80.0;
    for (int j = 0; j < 7; ++j) r.features.push_back(static_cast<float>(rng.normal() * std::pow(10.0, j - 3)));
    rs.push_back(r);
  }
  const Dataset ds(rs, 7, {"Normal", "Mild, early"}, "unit test");
  const auto dir = scratch_dir("roundtrip");
  write_dataset(ds, dir / "table.json");
  EXPECT_EQ(fs::file_size(dir / "table.f32"), 4u * 25u * 7u);
  EXPECT_EQ(load_dataset(dir / "table.json"), ds);

  write_text(dir / "table.csv", to_csv(ds));
  EXPECT_EQ(load_csv(dir / "table.csv", ds.schema()), ds);
}

TEST(FeatureTable, EmptyTableLoads) {
  const auto dir = scratch_dir("empty");
  write_text(dir / "m.json", manifest_text(0, 3, "[]"));
  const auto ds = load_dataset(dir / "m.json");
  EXPECT_EQ(ds.size(), 0u);
  EXPECT_EQ(ds.dim(), 3u);
}

TEST(Csv, ParsesQuotingAndLineEndings) {
  const auto rows = parse_csv("a,\"b,c\",\"d\"\"e\"\r\n1,\"multi\nline\",3\n");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"a", "b,c", "d\"e"}));
  EXPECT_EQ(rows[1], (std::vector<std::string>{"1", "multi\nline", "3"}));
  EXPECT_THROW(parse_csv("a,\"open"), DataError);
}

TEST(Csv, SchemaDefaultsToFirstAppearance) {
  const auto dir = scratch_dir("csv");
  write_text(dir / "t.csv", "id,label,sex,age,f0\nx,B,F,60,1.5\ny,A,M,61,2\nz,B,F,62,-3e-2\n");
  const auto ds = load_csv(dir / "t.csv");
  EXPECT_EQ(ds.schema(), (std::vector<std::string>{"B", "A"}));
  EXPECT_EQ(ds[2].features[0], -0.03f);
  write_text(dir / "bad.csv", "id,label,sex,age,f0\nx,B,F,60,abc\n");
  EXPECT_THROW(load_csv(dir / "bad.csv"), DataError);
  write_text(dir / "hdr.csv", "id,label,age,sex,f0\nx,B,F,60,1\n");
  EXPECT_THROW(load_csv(dir / "hdr.csv"), DataError);
}
