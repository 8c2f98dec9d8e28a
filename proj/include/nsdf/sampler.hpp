#pragma once

// Curvature-biased minibatch assembly. Surface points are partitioned into
// three classes by ascending total curvature |k1| + |k2|; each minibatch
// draws a configurable share from every class (without replacement within a
// batch, cycling through shuffled per-class pools across batches) and pairs
// them with uniform off-surface points labeled by a signed-distance oracle.

#include "nsdf/core.hpp"
#include "nsdf/implicit.hpp"

#include <array>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

namespace nsdf {

// Ground-truth surface samples with their differential geometry.
struct SurfaceDataset {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;
  std::vector<Vec3> e1, e2;          // principal directions, may be zero
  std::vector<double> kappa1, kappa2;
  std::vector<double> feature;        // |kappa1| + |kappa2|
  std::vector<std::uint8_t> region_e; // curvature-gap eligibility flags

  std::size_t size() const { return points.size(); }

  void validate() const {
    const std::size_t n = points.size();
    if (n == 0) throw ConfigError("empty surface dataset");
    if (normals.size() != n || e1.size() != n || e2.size() != n ||
        kappa1.size() != n || kappa2.size() != n || feature.size() != n) {
      throw ConfigError("surface dataset fields have mismatched lengths");
    }
  }
};

// Marks points whose principal-curvature gap reaches the threshold (with a
// floor excluding numerically umbilic points).
inline void set_region_flags(SurfaceDataset& data, double tau) {
  data.region_e.assign(data.size(), 0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double gap = std::abs(data.kappa1[i] - data.kappa2[i]);
    const double floor =
        kUmbilicRelTol * std::max(1.0, std::abs(data.kappa1[i]) +
                                           std::abs(data.kappa2[i]));
    data.region_e[i] = gap >= std::max(tau, floor) ? 1 : 0;
  }
}

// Index partition V1 | V2 | V3 in ascending curvature order (ties broken by
// index, so the split is deterministic).
struct Partition {
  std::vector<int> order;  // dataset indices sorted by ascending feature
  int n1 = 0, n2 = 0, n3 = 0;

  std::pair<int, int> class_range(int c) const {
    if (c == 0) return {0, n1};
    if (c == 1) return {n1, n1 + n2};
    return {n1 + n2, n1 + n2 + n3};
  }
};

inline Partition partition_by_curvature(const std::vector<double>& feature,
                                        int n1, int n2, int n3) {
  const int n = static_cast<int>(feature.size());
  if (n1 <= 0 || n2 <= 0 || n3 <= 0) {
    throw ConfigError("partition class sizes must be positive");
  }
  if (n1 + n2 + n3 != n) {
    throw ConfigError("partition class sizes must sum to the point count");
  }
  Partition part;
  part.n1 = n1;
  part.n2 = n2;
  part.n3 = n3;
  part.order.resize(static_cast<std::size_t>(n));
  std::iota(part.order.begin(), part.order.end(), 0);
  std::sort(part.order.begin(), part.order.end(), [&](int a, int b) {
    const double fa = feature[static_cast<std::size_t>(a)];
    const double fb = feature[static_cast<std::size_t>(b)];
    return fa != fb ? fa < fb : a < b;
  });
  return part;
}

struct BatchSpec {
  int m = 2500;                  // on-surface points per batch
  int m_off = -1;                // off-surface points, -1 mirrors m
  double p1 = -1.0, p2 = -1.0;   // class draw fractions; any negative value
  double p3 = -1.0;              // switches to proportional sampling
  Vec3 box_lo = Vec3(-1, -1, -1);
  Vec3 box_hi = Vec3(1, 1, 1);
  std::uint64_t seed = 0;
};

// Largest-remainder split of m across the three classes.
inline std::array<int, 3> class_counts(const std::array<double, 3>& p, int m) {
  std::array<int, 3> c;
  std::array<double, 3> frac;
  int total = 0;
  for (int i = 0; i < 3; ++i) {
    const double exact = p[static_cast<std::size_t>(i)] * m;
    c[static_cast<std::size_t>(i)] = static_cast<int>(std::floor(exact));
    frac[static_cast<std::size_t>(i)] =
        exact - c[static_cast<std::size_t>(i)];
    total += c[static_cast<std::size_t>(i)];
  }
  std::array<int, 3> by_frac = {0, 1, 2};
  std::sort(by_frac.begin(), by_frac.end(), [&](int a, int b) {
    const double fa = frac[static_cast<std::size_t>(a)];
    const double fb = frac[static_cast<std::size_t>(b)];
    return fa != fb ? fa > fb : a < b;
  });
  for (int i = 0; total < m && i < 3; ++i) {
    ++c[static_cast<std::size_t>(by_frac[static_cast<std::size_t>(i)])];
    ++total;
  }
  return c;
}

struct OnSample {
  Vec3 point, normal, e1, e2;
  double kappa1 = 0.0, kappa2 = 0.0;
  bool region_e = false;
};

struct OffSample {
  Vec3 point;
  double sdf = 0.0;
};

struct Minibatch {
  std::vector<OnSample> on;
  std::vector<OffSample> off;
  std::array<int, 3> class_counts = {0, 0, 0};
  bool with_replacement = false;  // some class was smaller than its request
};

inline long epoch_plan(long n_points, long m) {
  if (n_points <= 0 || m <= 0) throw ConfigError("epoch plan needs n, m > 0");
  return (n_points + m - 1) / m;
}

class MinibatchSampler {
 public:
  MinibatchSampler(const SurfaceDataset& data, Partition part, BatchSpec spec,
                   const SignedDistance& oracle)
      : data_(data),
        part_(std::move(part)),
        spec_(spec),
        oracle_(oracle),
        rng_(spec.seed) {
    data_.validate();
    if (static_cast<std::size_t>(part_.n1 + part_.n2 + part_.n3) !=
        data_.size()) {
      throw ConfigError("partition does not cover the dataset");
    }
    if (spec_.m < 1) throw ConfigError("batch size must be positive");
    if (spec_.m_off < 0) spec_.m_off = spec_.m;
    for (int k = 0; k < 3; ++k) {
      if (spec_.box_lo[k] >= spec_.box_hi[k]) {
        throw ConfigError("off-surface box is empty");
      }
    }

    std::array<double, 3> p = {spec_.p1, spec_.p2, spec_.p3};
    if (p[0] < 0.0 || p[1] < 0.0 || p[2] < 0.0) {
      const double n = static_cast<double>(data_.size());
      p = {part_.n1 / n, part_.n2 / n, part_.n3 / n};
    }
    const double sum = p[0] + p[1] + p[2];
    if (p[0] > 1.0 || p[1] > 1.0 || p[2] > 1.0 ||
        std::abs(sum - 1.0) > 1e-9) {
      throw ConfigError("class fractions must lie in [0,1] and sum to 1");
    }
    counts_ = class_counts(p, spec_.m);

    for (int c = 0; c < 3; ++c) {
      const auto [lo, hi] = part_.class_range(c);
      auto& pool = pool_[static_cast<std::size_t>(c)];
      pool.assign(part_.order.begin() + lo, part_.order.begin() + hi);
      if (counts_[static_cast<std::size_t>(c)] > 0 && pool.empty()) {
        throw ConfigError("positive draw fraction on an empty class");
      }
      shuffle(pool);
      cursor_[static_cast<std::size_t>(c)] = 0;
    }
    last_batch_.assign(data_.size(), -1);
  }

  const std::array<int, 3>& counts() const { return counts_; }

  Minibatch next() {
    ++batch_id_;
    Minibatch batch;
    batch.class_counts = counts_;
    batch.on.reserve(static_cast<std::size_t>(spec_.m));
    for (int c = 0; c < 3; ++c) draw_class(c, batch);

    batch.off.reserve(static_cast<std::size_t>(spec_.m_off));
    std::uniform_real_distribution<double> ux(spec_.box_lo[0], spec_.box_hi[0]);
    std::uniform_real_distribution<double> uy(spec_.box_lo[1], spec_.box_hi[1]);
    std::uniform_real_distribution<double> uz(spec_.box_lo[2], spec_.box_hi[2]);
    for (int i = 0; i < spec_.m_off; ++i) {
      OffSample s;
      const double x = ux(rng_), y = uy(rng_), z = uz(rng_);
      s.point = Vec3(x, y, z);
      s.sdf = oracle_.signed_distance(s.point);
      batch.off.push_back(s);
    }
    return batch;
  }

 private:
  void shuffle(std::vector<int>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::uniform_int_distribution<std::size_t> u(0, i - 1);
      std::swap(v[i - 1], v[u(rng_)]);
    }
  }

  void draw_class(int c, Minibatch& batch) {
    auto& pool = pool_[static_cast<std::size_t>(c)];
    auto& cur = cursor_[static_cast<std::size_t>(c)];
    const int need = counts_[static_cast<std::size_t>(c)];
    if (need == 0) return;
    if (need > static_cast<int>(pool.size())) {
      // request exceeds the class: fall back to sampling with replacement
      batch.with_replacement = true;
      std::uniform_int_distribution<std::size_t> u(0, pool.size() - 1);
      for (int i = 0; i < need; ++i) push_sample(pool[u(rng_)], batch);
      return;
    }
    int got = 0;
    while (got < need) {
      if (cur == pool.size()) {
        shuffle(pool);
        cur = 0;
      }
      const int idx = pool[cur++];
      // a reshuffle mid-batch may resurface an index already drawn here
      if (last_batch_[static_cast<std::size_t>(idx)] == batch_id_) continue;
      last_batch_[static_cast<std::size_t>(idx)] = batch_id_;
      push_sample(idx, batch);
      ++got;
    }
  }

  void push_sample(int idx, Minibatch& batch) {
    const auto i = static_cast<std::size_t>(idx);
    OnSample s;
    s.point = data_.points[i];
    s.normal = data_.normals[i];
    s.e1 = data_.e1[i];
    s.e2 = data_.e2[i];
    s.kappa1 = data_.kappa1[i];
    s.kappa2 = data_.kappa2[i];
    s.region_e = !data_.region_e.empty() && data_.region_e[i] != 0;
    batch.on.push_back(s);
  }

  const SurfaceDataset& data_;
  Partition part_;
  BatchSpec spec_;
  const SignedDistance& oracle_;
  std::array<int, 3> counts_ = {0, 0, 0};
  std::array<std::vector<int>, 3> pool_;
  std::array<std::size_t, 3> cursor_ = {0, 0, 0};
  std::vector<long> last_batch_;
  long batch_id_ = 0;
  std::mt19937_64 rng_;
};

}  // namespace nsdf
