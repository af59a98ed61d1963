// Copyright 2026 The PulseGuard Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "pulseguard/error.hpp"
#include "pulseguard/eval.hpp"

namespace pulseguard::eval {
namespace {

using detector::AnomalyRegion;

std::vector<synth::GsMinute> Minutes(int n, int pvc = 0) {
  std::vector<synth::GsMinute> gs;
  for (int m = 0; m < n; ++m) gs.push_back({m, pvc});
  return gs;
}

TEST(Align, CoveredMinuteWithoutRegions) {
  const std::vector<Interval> cov{{0, 60}};
  const auto obs = MinuteAlign("r", {}, cov, Minutes(1));
  ASSERT_EQ(obs.size(), 1u);
  EXPECT_FALSE(obs[0].anomaly_flag);
  EXPECT_EQ(obs[0].covered_s, 60.0);
}

TEST(Align, ThinCoverageExcluded) {
  const std::vector<Interval> cov{{0, 20}};
  const std::vector<AnomalyRegion> regions{{1, 15, 0.1, "r"}};
  EXPECT_TRUE(MinuteAlign("r", regions, cov, Minutes(1)).empty());
}

TEST(Align, BoundaryRegionSplits) {
  const std::vector<Interval> cov{{0, 120}};
  const std::vector<AnomalyRegion> regions{{59.8, 60.4, 0.1, "r"}};
  const auto obs = MinuteAlign("r", regions, cov, Minutes(2));
  ASSERT_EQ(obs.size(), 2u);
  EXPECT_NEAR(obs[0].anomalous_s, 0.2, 1e-9);
  EXPECT_NEAR(obs[1].anomalous_s, 0.4, 1e-9);
  EXPECT_FALSE(obs[0].anomaly_flag);
  EXPECT_FALSE(obs[1].anomaly_flag);
}

// Per-sample oracle on a 1/64 s grid; every endpoint below lies on the grid.
TEST(Align, BruteForceEquivalence) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> tick(0, 180 * 4);
  for (int trial = 0; trial < 400; ++trial) {
    const int n_min = 1 + trial % 3;
    std::vector<Interval> cov;
    for (int k = 0; k < 3; ++k) {
      const double a = tick(rng) / 4.0, b = a + tick(rng) / 8.0;
      if (cov.empty() || a > cov.back().end_s) cov.push_back({a, b});
    }
    std::vector<AnomalyRegion> regions;
    double t = 0;
    for (int k = 0; k < 1 + trial % 5; ++k) {
      const double a = t + tick(rng) / 16.0, b = a + 0.25 + tick(rng) / 64.0;
      regions.push_back({a, b, 0.0, "r"});
      t = b + 0.25;
    }
    const auto obs = MinuteAlign("r", regions, cov, Minutes(n_min));
    std::size_t next = 0;
    for (int m = 0; m < n_min; ++m) {
      double covered = 0, anomalous = 0;
      for (int i = 0; i < 60 * 64; ++i) {
        const double s = m * 60 + (i + 0.5) / 64.0;
        bool c = false, a = false;
        for (const auto& v : cov) c |= v.start_s <= s && s < v.end_s;
        for (const auto& r : regions) a |= r.start_s <= s && s < r.end_s;
        covered += c ? 1 / 64.0 : 0;
        anomalous += c && a ? 1 / 64.0 : 0;
      }
      if (covered < 30) continue;
      ASSERT_LT(next, obs.size());
      EXPECT_EQ(obs[next].minute_index, m);
      EXPECT_NEAR(obs[next].covered_s, covered, 1e-9);
      EXPECT_NEAR(obs[next].anomalous_s, anomalous, 1e-9);
      EXPECT_EQ(obs[next].anomaly_flag, anomalous >= 0.5);
      ++next;
    }
    EXPECT_EQ(next, obs.size());
  }
}

TEST(Align, DurationConserved) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0, 600);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> pts;
    for (int k = 0; k < 20; ++k) pts.push_back(u(rng));
    std::sort(pts.begin(), pts.end());
    std::vector<AnomalyRegion> regions;
    for (int k = 0; k + 1 < 20; k += 2) regions.push_back({pts[k], pts[k + 1], 0, "r"});
    const std::vector<Interval> cov{{0, 600}};
    AlignConfig cfg;
    cfg.min_coverage_s = 0;
    double total = 0, split = 0;
    for (const auto& r : regions) total += r.end_s - r.start_s;
    for (const auto& o : MinuteAlign("r", regions, cov, Minutes(10), cfg)) split += o.anomalous_s;
    EXPECT_NEAR(split, total, 1e-9);
  }
}

TEST(Confusion, TableOneCounts) {
  const ConfusionMatrix cm{231, 574, 156, 1891};
  EXPECT_NEAR(*cm.tpr(), 0.597, 0.0005);
  EXPECT_EQ(Percent1(cm.tpr()), "59.7%");
  // 574 / 2465 is 23.29%, which rounds to 23.3%.
  EXPECT_NEAR(*cm.fpr(), 574.0 / 2465.0, 1e-15);
  EXPECT_EQ(Percent1(cm.fpr()), "23.3%");
  EXPECT_EQ(Percent1(cm.tnr()), "76.7%");
  EXPECT_NEAR(*cm.tpr() + *cm.fnr(), 1.0, 1e-12);
  EXPECT_NEAR(*cm.fpr() + *cm.tnr(), 1.0, 1e-12);
  const auto table = ConfusionTable(cm, 1);
  EXPECT_NE(table.find("231 (59.7% true positive)"), std::string::npos);
  EXPECT_NE(table.find("1,891 (76.7% true negative)"), std::string::npos);
}

TEST(Confusion, UndefinedRates) {
  const ConfusionMatrix cm{0, 0, 0, 12};
  EXPECT_FALSE(cm.tpr().has_value());
  EXPECT_EQ(Percent1(cm.tpr()), "n/a");
  EXPECT_EQ(*cm.tnr(), 1.0);
}

std::vector<MinuteObservation> RandomObs(std::uint64_t seed, int n) {
  std::mt19937_64 rng(seed);
  std::vector<MinuteObservation> obs;
  for (int i = 0; i < n; ++i) {
    MinuteObservation o;
    o.record_id = "r";
    o.minute_index = i;
    o.pvc_count = static_cast<int>(rng() % 5);
    o.anomaly_flag = rng() % 2;
    obs.push_back(o);
  }
  return obs;
}

TEST(Confusion, AllNegativeUnflagged) {
  auto obs = RandomObs(1, 30);
  for (auto& o : obs) o.pvc_count = 0, o.anomaly_flag = false;
  const auto cm = Confusion(obs);
  EXPECT_EQ(cm.tp + cm.fp + cm.fn, 0);
  EXPECT_EQ(cm.tn, 30);
}

TEST(Confusion, ConservationAndPermutation) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    auto obs = RandomObs(s, 1 + s * 7);
    for (int k : {1, 2, 3}) {
      const auto cm = Confusion(obs, k);
      EXPECT_EQ(cm.total(), static_cast<std::int64_t>(obs.size()));
      std::shuffle(obs.begin(), obs.end(), std::mt19937_64(s));
      const auto again = Confusion(obs, k);
      EXPECT_EQ(again.tp, cm.tp);
      EXPECT_EQ(again.fp, cm.fp);
      EXPECT_EQ(again.fn, cm.fn);
      EXPECT_EQ(again.tn, cm.tn);
    }
  }
}

TEST(Confusion, Guards) {
  const auto obs = RandomObs(2, 5);
  EXPECT_THROW(Confusion(obs, 0), Error);
  try {
    Confusion({}, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNoEligible);
  }
}

TEST(Sweep, PrevalenceAndDeterminism) {
  const auto obs = RandomObs(4, 200);
  const std::vector<int> ks{1, 2};
  const auto a = ConfusionSweep(obs, ks), b = ConfusionSweep(obs, ks);
  EXPECT_EQ(SweepJson(a).dump(), SweepJson(b).dump());
  ASSERT_EQ(a.per_min_pvc.size(), 2u);
  std::int64_t zero = 0;
  for (const auto& o : obs) zero += o.pvc_count == 0;
  EXPECT_EQ(a.prevalence.n_zero, zero);
  EXPECT_EQ(a.prevalence.n_minutes, 200);
  const std::vector<int> bad{0};
  EXPECT_THROW(ConfusionSweep(obs, bad), Error);
}

TEST(Sweep, PrevalenceLineLayout) {
  Prevalence p{2852, 2465, {{1, 387}}};
  const auto text = PrevalenceLines(p);
  EXPECT_NE(text.find("2,465 (86.4%) are 0 PVCs/min observations"), std::string::npos);
  EXPECT_NE(text.find("387 (13.6%) are >= 1 PVCs/min observations"), std::string::npos);
}

TEST(Population, Examples) {
  const std::vector<std::string> ids{"a", "b"};
  const std::vector<double> zeros{0, 0}, two{0.10, 0.30};
  const auto z = ComputePopulationStats("z", ids, zeros);
  EXPECT_EQ(z.avg, 0.0);
  EXPECT_EQ(z.sd, 0.0);
  EXPECT_EQ(z.max, 0.0);
  const auto s = ComputePopulationStats("HDU", ids, two);
  EXPECT_NEAR(s.avg, 0.20, 1e-12);
  EXPECT_NEAR(s.max, 0.30, 1e-12);
  EXPECT_NEAR(s.sd, 0.10, 1e-12);
  EXPECT_THROW(ComputePopulationStats("empty", {}, {}), Error);
}

TEST(Population, TableLayout) {
  PopulationStats s;
  s.label = "HDU";
  s.avg = 0.051;
  s.sd = 0.05;
  s.max = 0.174;
  const std::vector<PopulationStats> v{s};
  const auto text = PopulationTable(v);
  EXPECT_NE(text.find("5.10% (±5.0%)"), std::string::npos);
  EXPECT_NE(text.find("17.4%"), std::string::npos);
}

TEST(Population, AnomalyFraction) {
  detector::Detection d;
  d.segments = {{5, 8, true, 0.2}, {13, 8, false, 0.9}, {21, 8, false, 0.8}, {29, 8, true, 0.1}};
  EXPECT_DOUBLE_EQ(AnomalyFraction(d), 0.5);
}

TEST(GsCsv, RoundTrip) {
  const std::vector<GsRow> rows{{"a", 0, 0}, {"a", 1, 3}, {"b", 0, 1}};
  const auto text = GsCsv(rows);
  EXPECT_EQ(text.rfind("record_id,minute_index,pvc_count\n", 0), 0u);
  const auto back = ParseGsCsv(text);
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back[1].pvc_count, 3);
  EXPECT_THROW(ParseGsCsv("record_id,minute_index,pvc_count\na,x,1\n"), Error);
}

TEST(Format, Thousands) {
  EXPECT_EQ(GroupThousands(0), "0");
  EXPECT_EQ(GroupThousands(999), "999");
  EXPECT_EQ(GroupThousands(1891), "1,891");
  EXPECT_EQ(GroupThousands(1234567), "1,234,567");
}

}  // namespace
}  // namespace pulseguard::eval
