#pragma once

// Signed distance supervision from an oriented point cloud: unsigned distance
// to the nearest sample, sign by majority vote of the k nearest oriented
// points. Ties vote outside.

#include "nsdf/core.hpp"
#include "nsdf/kdtree.hpp"

#include <utility>
#include <vector>

namespace nsdf {

class SdfOracle final : public SignedDistance {
 public:
  SdfOracle(std::vector<Vec3> points, std::vector<Vec3> normals,
            int k_sign = 8)
      : tree_(std::move(points)), normals_(std::move(normals)), k_sign_(k_sign) {
    if (normals_.size() != tree_.size()) {
      throw ConfigError("oracle needs one normal per point");
    }
    if (k_sign_ < 1) throw ConfigError("k_sign must be at least 1");
    for (const Vec3& n : normals_) {
      if (std::abs(n.norm() - 1.0) > 1e-6) {
        throw ConfigError("oracle normals must be unit length");
      }
    }
  }

  double unsigned_distance(const Vec3& p) const {
    return std::sqrt(tree_.nearest(p).dist2);
  }

  // +1 outside, -1 inside; each of the k nearest oriented points votes with
  // the sign of its half-space, equal votes resolve to +1.
  int sign_estimate(const Vec3& p) const {
    const auto hits = tree_.k_nearest(p, k_sign_);
    int vote = 0;
    for (const auto& h : hits) {
      const double side =
          normals_[static_cast<std::size_t>(h.index)].dot(p - tree_.point(h.index));
      vote += (side >= 0.0) ? 1 : -1;
    }
    return vote >= 0 ? 1 : -1;
  }

  double signed_distance(const Vec3& p) const override {
    return sign_estimate(p) * unsigned_distance(p);
  }

  const KdTree3& tree() const { return tree_; }
  int k_sign() const { return k_sign_; }

 private:
  KdTree3 tree_;
  std::vector<Vec3> normals_;
  int k_sign_;
};

}  // namespace nsdf
