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

// Regenerates the committed synthetic feature tables under fixtures/.
// Usage: make_fixtures OUTPUT_DIR

#include <cmath>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "adstage/adstage.hpp"

namespace fs = std::filesystem;
using namespace adstage;

namespace {

struct ClassSpec {
  std::string name;
  std::size_t count;
  std::vector<double> center;
  double spread;
};

struct Demographics {
  double male_probability = 0.5;
  double age_min = 70.0;
  double age_max = 70.0;
};

Dataset gaussian_table(const std::vector<ClassSpec>& classes, const Demographics& demo, std::uint64_t seed,
                       const std::string& prefix, const std::string& provenance) {
  Rng rng(seed);
  std::vector<FeatureRecord> records;
  std::vector<std::string> schema;
  const std::size_t d = classes.front().center.size();
  for (const auto& c : classes) {
    schema.push_back(c.name);
    for (std::size_t k = 0; k < c.count; ++k) {
      FeatureRecord r;
      r.id = prefix + std::to_string(records.size());
      r.label = c.name;
      for (std::size_t j = 0; j < d; ++j) r.features.push_back(static_cast<float>(c.center[j] + c.spread * rng.normal()));
      r.sex = rng.uniform01() < demo.male_probability ? Sex::M : Sex::F;
      r.age = demo.age_min == demo.age_max ? demo.age_min
                                           : std::round(demo.age_min + rng.uniform01() * (demo.age_max - demo.age_min));
      records.push_back(std::move(r));
    }
  }
  // Interleave classes so record order carries no label information.
  std::vector<std::size_t> order(records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<FeatureRecord> shuffled;
  for (auto i : order) shuffled.push_back(records[i]);
  return Dataset(std::move(shuffled), d, schema, provenance);
}

std::vector<double> axis_center(std::size_t d, std::size_t axis, double offset) {
  std::vector<double> c(d, 0.0);
  c[axis % d] = offset;
  return c;
}

void emit(const Dataset& ds, const fs::path& dir, bool with_csv) {
  fs::create_directories(dir);
  write_dataset(ds, dir / "manifest.json", "features.f32");
  if (with_csv) atomic_write(dir / (dir.filename().string() + ".csv"), to_csv(ds));
  std::cout << dir.string() << ": n=" << ds.size() << " d=" << ds.dim() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_fixtures OUTPUT_DIR\n";
    return 1;
  }
  const fs::path out(argv[1]);

  // Three well-separated 2-D clusters; demographics held constant so they
  // carry no signal and standardize away.
  emit(gaussian_table({{"ClassA", 20, {0.0, 0.0}, 0.5}, {"ClassB", 20, {6.0, 0.0}, 0.5}, {"ClassC", 20, {3.0, 5.0}, 0.5}},
                      {0.0, 70.0, 70.0}, 7, "g", "synthetic: three separated Gaussian clusters"),
       out / "gauss3", true);

  // 9:1 binary problem with overlapping classes.
  emit(gaussian_table({{"Majority", 450, {0.0, 0.0}, 1.0}, {"Minority", 50, {1.5, 1.0}, 1.0}}, {0.5, 60.0, 80.0}, 91, "m",
                      "synthetic: 9:1 overlapping binary classes"),
       out / "imbalance91", false);

  // Three overlapping classes, N=200, for hold-out protocol checks.
  emit(gaussian_table({{"ClassA", 80, {0.0, 0.0, 0.0, 0.0}, 1.0},
                       {"ClassB", 70, {2.0, 0.0, 1.0, 0.0}, 1.0},
                       {"ClassC", 50, {0.0, 2.0, 0.0, 1.0}, 1.0}},
                      {0.5, 55.0, 94.0}, 200, "h", "synthetic: 3-class overlapping, N=200"),
       out / "holdout200", false);

  // Class counts and demographic ranges of the cross-sectional OASIS set
  // (316/70/28/2, ages 18-98, 168 of 436 male).
  {
    const std::size_t d = 16;
    emit(gaussian_table({{"CognitivelyNormal", 316, axis_center(d, 0, 0.0), 1.0},
                         {"VeryMildDementia", 70, axis_center(d, 1, 1.5), 1.0},
                         {"MildDementia", 28, axis_center(d, 2, 2.0), 1.0},
                         {"ModerateAD", 2, axis_center(d, 3, 2.5), 1.0}},
                        {168.0 / 436.0, 18.0, 98.0}, 416, "oasis", "synthetic: OASIS-shaped class counts"),
         out / "oasis_shaped", false);
  }

  // Class counts and demographic ranges of the ADNI collection
  // (525/921/297, ages 55-94, 1055 of 1743 male).
  {
    const std::size_t d = 8;
    emit(gaussian_table({{"CognitivelyNormal", 525, axis_center(d, 0, 1.0), 1.0},
                         {"MildCognitiveDementia", 921, axis_center(d, 1, 1.0), 1.0},
                         {"AD", 297, axis_center(d, 2, 1.5), 1.0}},
                        {1055.0 / 1743.0, 55.0, 94.0}, 1743, "adni", "synthetic: ADNI-shaped class counts"),
         out / "adni_shaped", false);
  }
  return 0;
}
