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

#include <cmath>
#include <filesystem>

#include "adstage/model_io.hpp"
#include "adstage/rng.hpp"
#include "adstage/svm.hpp"
#include "oracles.hpp"

using namespace adstage;

namespace {

Matrix to_matrix(const std::vector<std::vector<double>>& x) {
  Matrix m(0, x.front().size());
  for (const auto& r : x) m.append_row(std::span<const double>(r));
  return m;
}

BinarySvmModel train(const oracle::QpInstance& p, double tol = 1e-3, std::size_t cache = std::size_t{1} << 20) {
  TrainConfig cfg;
  cfg.kkt_tolerance = tol;
  cfg.kernel_cache_bytes = cache;
  return smo_train(to_matrix(p.x), p.y, p.cost, KernelParams{p.gamma}, cfg);
}

// Coordinates rounded to binary32 so the oracle sees exactly the stored rows.
oracle::QpInstance random_instance(Rng& rng, std::size_t n, double cost_lo, double cost_hi) {
  oracle::QpInstance p;
  p.gamma = 0.2 + 1.8 * rng.uniform01();
  for (std::size_t i = 0; i < n; ++i) {
    p.x.push_back({static_cast<float>(-2.0 + 4.0 * rng.uniform01()), static_cast<float>(-2.0 + 4.0 * rng.uniform01())});
    p.y.push_back(rng.below(2) ? 1 : -1);
    p.cost.push_back(std::exp(std::log(cost_lo) + rng.uniform01() * (std::log(cost_hi) - std::log(cost_lo))));
  }
  p.y[0] = 1;
  p.y[1] = -1;
  return p;
}

Eigen::VectorXd alphas_of(const BinarySvmModel& m) {
  return Eigen::Map<const Eigen::VectorXd>(m.alphas.data(), static_cast<Eigen::Index>(m.alphas.size()));
}

}  // namespace

TEST(RbfKernel, Examples) {
  const std::vector<double> x = {0.3, -1.2, 5.0};
  EXPECT_EQ(rbf_kernel(x, x, 0.7), 1.0);
  EXPECT_NEAR(rbf_kernel(std::vector<double>{0, 0}, std::vector<double>{2, 0}, 0.5), 0.1353352832366127, 1e-15);
  Rng rng(2);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> a(4), b(4);
    for (auto& v : a) v = rng.normal();
    for (auto& v : b) v = rng.normal();
    const double g = 0.01 + rng.uniform01();
    const double k = rbf_kernel(a, b, g);
    EXPECT_EQ(k, rbf_kernel(b, a, g));
    EXPECT_GT(k, 0.0);
    EXPECT_LE(k, 1.0);
  }
  EXPECT_THROW(rbf_kernel(std::vector<double>{1}, std::vector<double>{1, 2}, 1.0), DataError);
  EXPECT_THROW(rbf_kernel(x, x, 0.0), DataError);
}

TEST(DualObjective, ZeroAndHandExpandedPair) {
  const auto rows = to_matrix({{0.0}, {1.0}});
  const std::vector<int> y = {1, -1};
  const KernelParams kp{0.8};
  EXPECT_EQ(dual_objective(std::vector<double>{0.0, 0.0}, rows, y, kp), 0.0);
  const double k = std::exp(-0.8);
  for (double a : {0.1, 0.5, 2.0})
    EXPECT_NEAR(dual_objective(std::vector<double>{a, a}, rows, y, kp), 2 * a - a * a * (1 - k), 1e-14);
  EXPECT_THROW(dual_objective(std::vector<double>{1.0}, rows, y, kp), DataError);
}

TEST(Smo, SymmetricTwoPointBoundary) {
  oracle::QpInstance p{{{-1.0}, {1.0}}, {-1, 1}, {1.0, 1.0}, 0.5};
  const auto m = train(p);
  EXPECT_TRUE(m.converged);
  EXPECT_NEAR(decision_value(m, std::vector<double>{0.0}), 0.0, 1e-6);
  EXPECT_GT(decision_value(m, std::vector<double>{0.7}), 0.0);
  EXPECT_LT(decision_value(m, std::vector<double>{-0.7}), 0.0);
}

TEST(Smo, MatchesExhaustiveOracleOnSeparableSixPoints) {
  // Two clusters that the RBF machine separates with room to spare.
  Rng rng(31);
  for (int t = 0; t < 10; ++t) {
    oracle::QpInstance p;
    p.gamma = 0.5;
    for (int i = 0; i < 6; ++i) {
      const int label = i < 3 ? 1 : -1;
      p.x.push_back({static_cast<float>(label * 1.5 + 0.4 * rng.normal()), static_cast<float>(0.4 * rng.normal())});
      p.y.push_back(label);
      p.cost.push_back(1e4);
    }
    const auto m = train(p, 1e-9);
    const auto opt = oracle::solve_dual_exhaustive(p);
    const auto rows = to_matrix(p.x);
    EXPECT_NEAR(dual_objective(m.alphas, rows, p.y, m.kernel), opt.objective, 1e-6);
    EXPECT_NEAR(oracle::dual_value(p, alphas_of(m)), opt.objective, 1e-6);
    for (std::size_t i = 0; i < p.x.size(); ++i) EXPECT_EQ(predict_sign(decision_value(m, p.x[i])), p.y[i]);
  }
}

TEST(Smo, DefaultToleranceStaysCloseToOracle) {
  Rng rng(77);
  for (int t = 0; t < 20; ++t) {
    const auto p = random_instance(rng, 3 + rng.below(6), 0.1, 10.0);
    const auto m = train(p);
    const auto opt = oracle::solve_dual_exhaustive(p);
    const double w = oracle::dual_value(p, alphas_of(m));
    EXPECT_LE(w, opt.objective + 1e-9);
    EXPECT_NEAR(w, opt.objective, 1e-3 * (1.0 + std::abs(opt.objective)));
  }
}

TEST(Smo, BeatsEveryFeasibleGridPointOnFourPoints) {
  Rng rng(41);
  for (int t = 0; t < 5; ++t) {
    const auto p = random_instance(rng, 4, 0.5, 2.0);
    const auto m = train(p, 1e-9);
    const double w_smo = oracle::dual_value(p, alphas_of(m));
    const int steps = 24;
    for (int a = 0; a <= steps; ++a)
      for (int b = 0; b <= steps; ++b)
        for (int c = 0; c <= steps; ++c) {
          Eigen::VectorXd alpha(4);
          alpha << p.cost[0] * a / steps, p.cost[1] * b / steps, p.cost[2] * c / steps, 0.0;
          // the equality constraint fixes the last variable
          const double rest = -(p.y[0] * alpha[0] + p.y[1] * alpha[1] + p.y[2] * alpha[2]) * p.y[3];
          if (rest < 0.0 || rest > p.cost[3]) continue;
          alpha[3] = rest;
          EXPECT_GE(w_smo, oracle::dual_value(p, alpha) - 1e-12);
        }
  }
}

TEST(Smo, DoublingInactiveCapsLeavesSolutionUnchanged) {
  Rng rng(5);
  int checked = 0;
  for (int t = 0; t < 30 && checked < 5; ++t) {
    auto p = random_instance(rng, 6, 50.0, 100.0);
    const auto m = train(p, 1e-10);
    bool any_capped = false;
    for (std::size_t i = 0; i < p.cost.size(); ++i) any_capped |= m.alphas[i] >= p.cost[i];
    if (any_capped) continue;
    // Verified against the oracle as well: neither optimum touches a cap.
    const auto opt1 = oracle::solve_dual_exhaustive(p);
    for (auto& c : p.cost) c *= 2.0;
    const auto m2 = train(p, 1e-10);
    const auto opt2 = oracle::solve_dual_exhaustive(p);
    EXPECT_NEAR(opt1.objective, opt2.objective, 1e-9);
    for (std::size_t i = 0; i < p.cost.size(); ++i) EXPECT_NEAR(m.alphas[i], m2.alphas[i], 1e-6);
    EXPECT_NEAR(m.bias, m2.bias, 1e-6);
    ++checked;
  }
  EXPECT_GE(checked, 1);
}

TEST(Smo, KktConditionsAtConvergence) {
  Rng rng(9);
  for (int t = 0; t < 30; ++t) {
    const auto p = random_instance(rng, 2 + rng.below(30), 0.05, 50.0);
    const auto m = train(p);
    ASSERT_TRUE(m.converged);
    double eq = 0.0;
    for (std::size_t i = 0; i < p.x.size(); ++i) {
      EXPECT_GE(m.alphas[i], 0.0);
      EXPECT_LE(m.alphas[i], p.cost[i]);
      eq += m.alphas[i] * p.y[i];
      const double yf = p.y[i] * decision_value(m, p.x[i]);
      if (m.alphas[i] > 0.0 && m.alphas[i] < p.cost[i]) EXPECT_NEAR(yf, 1.0, 1e-3);
      if (m.alphas[i] == 0.0) EXPECT_GE(yf, 1.0 - 1e-3);
      if (m.alphas[i] == p.cost[i]) EXPECT_LE(yf, 1.0 + 1e-3);
      EXPECT_NEAR(m.training_decisions[i], decision_value(m, p.x[i]), 1e-5);
    }
    EXPECT_LE(std::abs(eq), 1e-3);
  }
}

TEST(Smo, CacheIsTransparentAndTrainingDeterministic) {
  Rng rng(13);
  const auto p = random_instance(rng, 40, 0.1, 10.0);
  const auto a = train(p, 1e-3, 0);
  const auto b = train(p, 1e-3, std::size_t{1} << 24);
  const auto c = train(p, 1e-3, 40 * 8 * 3);  // room for three rows: heavy eviction
  for (const auto* other : {&b, &c}) {
    EXPECT_EQ(a.alphas, other->alphas);
    EXPECT_EQ(a.coefficients, other->coefficients);
    EXPECT_EQ(a.bias, other->bias);
    EXPECT_EQ(a.iterations, other->iterations);
  }
  const auto again = train(p, 1e-3, 0);
  EXPECT_EQ(a.alphas, again.alphas);
  EXPECT_EQ(a.bias, again.bias);
}

TEST(Smo, InputErrorsAndIterationCap) {
  const auto rows = to_matrix({{0.0}, {1.0}, {2.0}});
  const std::vector<double> cost = {1, 1, 1};
  EXPECT_THROW(smo_train(rows, std::vector<int>{1, 1, 1}, cost, {1.0}), DataError);
  EXPECT_THROW(smo_train(rows, std::vector<int>{1, -1, 2}, cost, {1.0}), DataError);
  EXPECT_THROW(smo_train(rows, std::vector<int>{1, -1, 1}, std::vector<double>{1, 0, 1}, {1.0}), DataError);
  EXPECT_THROW(smo_train(to_matrix({{0.0}}), std::vector<int>{1}, std::vector<double>{1}, {1.0}), DataError);
  EXPECT_THROW(smo_train(rows, std::vector<int>{1, -1, 1}, cost, {-1.0}), DataError);

  Rng rng(3);
  const auto p = random_instance(rng, 30, 1.0, 10.0);
  TrainConfig cfg;
  cfg.max_iterations = 1;
  const auto m = smo_train(to_matrix(p.x), p.y, p.cost, {p.gamma}, cfg);
  EXPECT_FALSE(m.converged);
  EXPECT_EQ(m.iterations, 1u);
}

TEST(DecisionValue, DimensionMismatch) {
  oracle::QpInstance p{{{-1.0, 0.0}, {1.0, 0.0}}, {-1, 1}, {1.0, 1.0}, 0.5};
  const auto m = train(p);
  EXPECT_THROW(decision_value(m, std::vector<double>{0.0}), DataError);
  EXPECT_EQ(predict_sign(0.0), 1);
}

TEST(ModelIo, BinaryModelRoundTripIsLosslessAtBinary32) {
  Rng rng(21);
  const auto p = random_instance(rng, 12, 0.5, 5.0);
  const auto m = train(p);
  const auto dir = std::filesystem::temp_directory_path() / "adstage_model_io";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  save_binary_model(m, dir, "svm");
  const auto back = load_binary_model(dir / "svm.json");
  EXPECT_EQ(back.support_vectors, m.support_vectors);
  ASSERT_EQ(back.coefficients.size(), m.coefficients.size());
  for (std::size_t k = 0; k < m.coefficients.size(); ++k)
    EXPECT_EQ(back.coefficients[k], static_cast<double>(static_cast<float>(m.coefficients[k])));
  EXPECT_EQ(back.bias, m.bias);
  EXPECT_EQ(back.kernel.gamma, m.kernel.gamma);
  EXPECT_EQ(back.converged, m.converged);
  EXPECT_EQ(back.iterations, m.iterations);
  for (const auto& x : p.x) EXPECT_NEAR(decision_value(back, x), decision_value(m, x), 1e-5);
}
