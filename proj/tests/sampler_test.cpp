#include "nsdf/sampler.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

using namespace nsdf;

namespace {

// Plane x = 0 as a trivial supervision field.
struct PlaneSdf final : SignedDistance {
  double signed_distance(const Vec3& p) const override { return p.x(); }
};

// Dataset whose i-th point is (i, 0, 0) with feature = given values.
SurfaceDataset indexed_dataset(const std::vector<double>& features) {
  SurfaceDataset d;
  const std::size_t n = features.size();
  for (std::size_t i = 0; i < n; ++i) {
    d.points.emplace_back(static_cast<double>(i), 0.0, 0.0);
    d.normals.emplace_back(0, 0, 1);
    d.e1.emplace_back(1, 0, 0);
    d.e2.emplace_back(0, 1, 0);
    d.kappa1.push_back(features[i]);
    d.kappa2.push_back(0.0);
    d.feature.push_back(features[i]);
  }
  d.region_e.assign(n, 0);
  return d;
}

int point_index(const OnSample& s) {
  return static_cast<int>(std::lround(s.point.x()));
}

}  // namespace

TEST(PartitionTest, AscendingSplitWithDeterministicTies) {
  std::vector<double> f = {5, 1, 3, 3, 2, 9, 0, 3};
  const Partition part = partition_by_curvature(f, 3, 3, 2);
  // sorted ascending with index tie-break: 6(0) 1(1) 4(2) 2(3) 3(3) 7(3) 0(5) 5(9)
  const std::vector<int> expected = {6, 1, 4, 2, 3, 7, 0, 5};
  EXPECT_EQ(part.order, expected);
  const auto [lo1, hi1] = part.class_range(0);
  const auto [lo3, hi3] = part.class_range(2);
  EXPECT_EQ(hi1 - lo1, 3);
  EXPECT_EQ(hi3 - lo3, 2);
  // class boundaries are monotone in feature
  for (int c = 0; c < 2; ++c) {
    const auto [alo, ahi] = part.class_range(c);
    const auto [blo, bhi] = part.class_range(c + 1);
    (void)alo;
    (void)bhi;
    EXPECT_LE(f[static_cast<std::size_t>(part.order[static_cast<std::size_t>(ahi - 1)])],
              f[static_cast<std::size_t>(part.order[static_cast<std::size_t>(blo)])]);
  }
}

TEST(PartitionTest, ValidatesSizes) {
  std::vector<double> f(10, 1.0);
  EXPECT_THROW(partition_by_curvature(f, 5, 5, 1), ConfigError);
  EXPECT_THROW(partition_by_curvature(f, 10, 0, 0), ConfigError);
  EXPECT_THROW(partition_by_curvature(f, -1, 10, 1), ConfigError);
  EXPECT_NO_THROW(partition_by_curvature(f, 5, 4, 1));
}

TEST(ClassCountsTest, LargestRemainderRounding) {
  const auto a = class_counts({1.0 / 3, 1.0 / 3, 1.0 / 3}, 7);
  EXPECT_EQ(a, (std::array<int, 3>{3, 2, 2}));
  const auto b = class_counts({0.55, 0.25, 0.2}, 10);
  EXPECT_EQ(b, (std::array<int, 3>{6, 2, 2}));
  const auto c = class_counts({0.0, 0.8, 0.2}, 5);
  EXPECT_EQ(c, (std::array<int, 3>{0, 4, 1}));
  for (int m : {1, 2, 3, 17, 100, 2501}) {
    const auto k = class_counts({0.5, 0.4, 0.1}, m);
    EXPECT_EQ(k[0] + k[1] + k[2], m);
  }
}

TEST(EpochPlanTest, CeilingDivision) {
  EXPECT_EQ(epoch_plan(172974, 10000), 18);
  EXPECT_EQ(epoch_plan(10, 10), 1);
  EXPECT_EQ(epoch_plan(11, 10), 2);
  EXPECT_EQ(epoch_plan(5000, 2500), 2);
  EXPECT_THROW(epoch_plan(0, 10), ConfigError);
}

TEST(SamplerTest, DeterministicUnderSeed) {
  std::vector<double> f(40);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = static_cast<double>(i);
  const SurfaceDataset data = indexed_dataset(f);
  const Partition part = partition_by_curvature(f, 20, 15, 5);
  PlaneSdf oracle;
  BatchSpec spec;
  spec.m = 12;
  spec.m_off = 6;
  spec.seed = 77;

  MinibatchSampler a(data, part, spec, oracle);
  MinibatchSampler b(data, part, spec, oracle);
  spec.seed = 78;
  MinibatchSampler c(data, part, spec, oracle);

  bool any_diff = false;
  for (int t = 0; t < 5; ++t) {
    const Minibatch ba = a.next(), bb = b.next(), bc = c.next();
    ASSERT_EQ(ba.on.size(), bb.on.size());
    for (std::size_t i = 0; i < ba.on.size(); ++i) {
      EXPECT_EQ(ba.on[i].point, bb.on[i].point);
    }
    for (std::size_t i = 0; i < ba.off.size(); ++i) {
      EXPECT_EQ(ba.off[i].point, bb.off[i].point);
      EXPECT_EQ(ba.off[i].sdf, bb.off[i].sdf);
    }
    for (std::size_t i = 0; i < ba.on.size(); ++i) {
      any_diff |= (ba.on[i].point != bc.on[i].point);
    }
  }
  EXPECT_TRUE(any_diff);
}

TEST(SamplerTest, HonorsClassCountsAndBatchOrder) {
  std::vector<double> f(100);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = static_cast<double>(i);
  const SurfaceDataset data = indexed_dataset(f);
  const Partition part = partition_by_curvature(f, 50, 40, 10);
  PlaneSdf oracle;
  BatchSpec spec;
  spec.m = 20;
  spec.p1 = 0.0;
  spec.p2 = 0.8;
  spec.p3 = 0.2;
  spec.seed = 3;
  MinibatchSampler sampler(data, part, spec, oracle);
  EXPECT_EQ(sampler.counts(), (std::array<int, 3>{0, 16, 4}));

  const Minibatch batch = sampler.next();
  ASSERT_EQ(batch.on.size(), 20u);
  // batch lists class draws in order: indices 50..89 then 90..99
  for (int i = 0; i < 16; ++i) {
    EXPECT_GE(point_index(batch.on[static_cast<std::size_t>(i)]), 50);
    EXPECT_LT(point_index(batch.on[static_cast<std::size_t>(i)]), 90);
  }
  for (int i = 16; i < 20; ++i) {
    EXPECT_GE(point_index(batch.on[static_cast<std::size_t>(i)]), 90);
  }
  EXPECT_FALSE(batch.with_replacement);
}

TEST(SamplerTest, NoDuplicatesWithinABatch) {
  std::vector<double> f(60);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = static_cast<double>(i % 7);
  const SurfaceDataset data = indexed_dataset(f);
  const Partition part = partition_by_curvature(f, 30, 20, 10);
  PlaneSdf oracle;
  BatchSpec spec;
  spec.m = 45;  // large draws force mid-batch pool reshuffles
  spec.m_off = 0;
  spec.seed = 5;
  MinibatchSampler sampler(data, part, spec, oracle);
  for (int t = 0; t < 50; ++t) {
    const Minibatch batch = sampler.next();
    std::set<int> seen;
    for (const OnSample& s : batch.on) seen.insert(point_index(s));
    EXPECT_EQ(seen.size(), batch.on.size()) << "batch " << t;
  }
}

TEST(SamplerTest, CyclesThroughEachClassBeforeRepeating) {
  std::vector<double> f(30);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = static_cast<double>(i);
  const SurfaceDataset data = indexed_dataset(f);
  const Partition part = partition_by_curvature(f, 10, 10, 10);
  PlaneSdf oracle;
  BatchSpec spec;
  spec.m = 15;  // 5 per class
  spec.p1 = spec.p2 = spec.p3 = 1.0 / 3.0;
  spec.m_off = 0;
  spec.seed = 11;
  MinibatchSampler sampler(data, part, spec, oracle);

  std::map<int, int> count;
  for (int t = 0; t < 4; ++t) {
    const Minibatch batch = sampler.next();
    for (const OnSample& s : batch.on) ++count[point_index(s)];
  }
  // 4 batches x 5 per class = 2 full passes: every point exactly twice
  ASSERT_EQ(count.size(), 30u);
  for (const auto& [idx, c] : count) {
    EXPECT_EQ(c, 2) << "point " << idx;
  }
}

TEST(SamplerTest, FallsBackToReplacementWhenClassTooSmall) {
  std::vector<double> f = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  const SurfaceDataset data = indexed_dataset(f);
  const Partition part = partition_by_curvature(f, 4, 4, 2);
  PlaneSdf oracle;
  BatchSpec spec;
  spec.m = 9;
  spec.p1 = 0.0;
  spec.p2 = 0.0;
  spec.p3 = 1.0;  // 9 draws from a class of 2
  spec.m_off = 0;
  spec.seed = 13;
  MinibatchSampler sampler(data, part, spec, oracle);
  const Minibatch batch = sampler.next();
  EXPECT_TRUE(batch.with_replacement);
  EXPECT_EQ(batch.on.size(), 9u);
  for (const OnSample& s : batch.on) EXPECT_GE(point_index(s), 8);
}

TEST(SamplerTest, OffSurfacePointsAreInBoxWithOracleLabels) {
  std::vector<double> f(20, 1.0);
  const SurfaceDataset data = indexed_dataset(f);
  const Partition part = partition_by_curvature(f, 10, 5, 5);
  PlaneSdf oracle;
  BatchSpec spec;
  spec.m = 4;
  spec.m_off = 64;
  spec.box_lo = Vec3(-0.5, -0.25, 0.0);
  spec.box_hi = Vec3(0.5, 0.25, 2.0);
  spec.seed = 17;
  MinibatchSampler sampler(data, part, spec, oracle);
  const Minibatch batch = sampler.next();
  ASSERT_EQ(batch.off.size(), 64u);
  for (const OffSample& s : batch.off) {
    EXPECT_GE(s.point.x(), -0.5);
    EXPECT_LE(s.point.x(), 0.5);
    EXPECT_GE(s.point.y(), -0.25);
    EXPECT_LE(s.point.y(), 0.25);
    EXPECT_GE(s.point.z(), 0.0);
    EXPECT_LE(s.point.z(), 2.0);
    EXPECT_DOUBLE_EQ(s.sdf, s.point.x());
  }
}

TEST(SamplerTest, ValidatesConfiguration) {
  std::vector<double> f(10, 1.0);
  const SurfaceDataset data = indexed_dataset(f);
  const Partition part = partition_by_curvature(f, 5, 4, 1);
  PlaneSdf oracle;
  BatchSpec spec;
  spec.m = 0;
  EXPECT_THROW(MinibatchSampler(data, part, spec, oracle), ConfigError);
  spec.m = 4;
  spec.p1 = 0.5;
  spec.p2 = 0.6;
  spec.p3 = 0.1;  // sums to 1.2
  EXPECT_THROW(MinibatchSampler(data, part, spec, oracle), ConfigError);
  spec.p1 = spec.p2 = spec.p3 = -1.0;
  spec.box_lo = Vec3(1, 0, 0);
  spec.box_hi = Vec3(-1, 1, 1);
  EXPECT_THROW(MinibatchSampler(data, part, spec, oracle), ConfigError);
}

TEST(SamplerTest, WithinClassInclusionIsUniform) {
  // 120 points split 60/40/20, 30 per batch drawn proportionally: every
  // point has marginal probability 1/4 per batch. Chi-square over ~1e5
  // draws must not reject uniformity at alpha = 0.01.
  const int n = 120;
  std::vector<double> f(n);
  for (int i = 0; i < n; ++i) f[static_cast<std::size_t>(i)] = i;
  const SurfaceDataset data = indexed_dataset(f);
  const Partition part = partition_by_curvature(f, 60, 40, 20);
  PlaneSdf oracle;
  BatchSpec spec;
  spec.m = 30;
  spec.m_off = 0;
  spec.seed = 23;
  MinibatchSampler sampler(data, part, spec, oracle);
  EXPECT_EQ(sampler.counts(), (std::array<int, 3>{15, 10, 5}));

  const int batches = 3334;  // > 1e5 point draws
  std::vector<long> count(static_cast<std::size_t>(n), 0);
  for (int t = 0; t < batches; ++t) {
    const Minibatch b = sampler.next();
    for (const OnSample& s : b.on) {
      ++count[static_cast<std::size_t>(point_index(s))];
    }
  }
  const double expected = batches * 30.0 / n;
  double chi2 = 0.0;
  for (long c : count) {
    const double d = c - expected;
    chi2 += d * d / expected;
  }
  // Wilson-Hilferty critical value for df = 119 at alpha = 0.01
  const double df = n - 1;
  const double z = 2.3263478740408408;
  const double crit =
      df * std::pow(1.0 - 2.0 / (9.0 * df) + z * std::sqrt(2.0 / (9.0 * df)), 3);
  EXPECT_LT(chi2, crit);
}
