#pragma once

// Exact nearest-neighbor queries over a static 3d point set. Median-split
// kd-tree with bounding-box pruning; results are identical to a linear scan.

#include "nsdf/core.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <queue>
#include <vector>

namespace nsdf {

class KdTree3 {
 public:
  struct Hit {
    int index = -1;
    double dist2 = std::numeric_limits<double>::infinity();
  };

  explicit KdTree3(std::vector<Vec3> points) : pts_(std::move(points)) {
    if (pts_.empty()) throw ConfigError("kd-tree needs at least one point");
    order_.resize(pts_.size());
    std::iota(order_.begin(), order_.end(), 0);
    nodes_.reserve(2 * pts_.size() / kLeafSize + 4);
    build(0, static_cast<int>(pts_.size()));
  }

  std::size_t size() const { return pts_.size(); }
  const Vec3& point(int i) const { return pts_[static_cast<std::size_t>(i)]; }

  Hit nearest(const Vec3& q) const {
    Hit best;
    search_one(0, q, best);
    return best;
  }

  // k nearest points sorted by ascending distance (all points if k >= n).
  std::vector<Hit> k_nearest(const Vec3& q, int k) const {
    k = std::min<int>(k, static_cast<int>(pts_.size()));
    if (k <= 0) return {};
    std::priority_queue<std::pair<double, int>> heap;  // max-heap on dist2
    search_k(0, q, k, heap);
    std::vector<Hit> out(static_cast<std::size_t>(heap.size()));
    for (std::size_t i = out.size(); i-- > 0;) {
      out[i] = {heap.top().second, heap.top().first};
      heap.pop();
    }
    return out;
  }

 private:
  static constexpr int kLeafSize = 12;

  struct Node {
    Vec3 lo, hi;          // bounding box of the node's points
    int begin = 0, end = 0;
    int left = -1, right = -1;  // children; leaf when left < 0
  };

  int build(int begin, int end) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    Vec3 lo = pts_[static_cast<std::size_t>(order_[static_cast<std::size_t>(begin)])];
    Vec3 hi = lo;
    for (int i = begin; i < end; ++i) {
      const Vec3& p = pts_[static_cast<std::size_t>(order_[static_cast<std::size_t>(i)])];
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    nodes_[static_cast<std::size_t>(id)].lo = lo;
    nodes_[static_cast<std::size_t>(id)].hi = hi;
    nodes_[static_cast<std::size_t>(id)].begin = begin;
    nodes_[static_cast<std::size_t>(id)].end = end;
    if (end - begin > kLeafSize) {
      int axis = 0;
      const Vec3 extent = hi - lo;
      if (extent[1] > extent[axis]) axis = 1;
      if (extent[2] > extent[axis]) axis = 2;
      const int mid = (begin + end) / 2;
      std::nth_element(order_.begin() + begin, order_.begin() + mid,
                       order_.begin() + end, [&](int a, int b) {
                         return pts_[static_cast<std::size_t>(a)][axis] <
                                pts_[static_cast<std::size_t>(b)][axis];
                       });
      const int l = build(begin, mid);
      const int r = build(mid, end);
      nodes_[static_cast<std::size_t>(id)].left = l;
      nodes_[static_cast<std::size_t>(id)].right = r;
    }
    return id;
  }

  double box_dist2(const Node& n, const Vec3& q) const {
    double d2 = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double d = std::max({n.lo[k] - q[k], q[k] - n.hi[k], 0.0});
      d2 += d * d;
    }
    return d2;
  }

  void search_one(int id, const Vec3& q, Hit& best) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (box_dist2(n, q) >= best.dist2) return;
    if (n.left < 0) {
      for (int i = n.begin; i < n.end; ++i) {
        const int pi = order_[static_cast<std::size_t>(i)];
        const double d2 = (pts_[static_cast<std::size_t>(pi)] - q).squaredNorm();
        if (d2 < best.dist2) best = {pi, d2};
      }
      return;
    }
    const double dl = box_dist2(nodes_[static_cast<std::size_t>(n.left)], q);
    const double dr = box_dist2(nodes_[static_cast<std::size_t>(n.right)], q);
    if (dl <= dr) {
      search_one(n.left, q, best);
      search_one(n.right, q, best);
    } else {
      search_one(n.right, q, best);
      search_one(n.left, q, best);
    }
  }

  void search_k(int id, const Vec3& q, int k,
                std::priority_queue<std::pair<double, int>>& heap) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (static_cast<int>(heap.size()) == k &&
        box_dist2(n, q) >= heap.top().first) {
      return;
    }
    if (n.left < 0) {
      for (int i = n.begin; i < n.end; ++i) {
        const int pi = order_[static_cast<std::size_t>(i)];
        const double d2 = (pts_[static_cast<std::size_t>(pi)] - q).squaredNorm();
        if (static_cast<int>(heap.size()) < k) {
          heap.emplace(d2, pi);
        } else if (d2 < heap.top().first) {
          heap.pop();
          heap.emplace(d2, pi);
        }
      }
      return;
    }
    const double dl = box_dist2(nodes_[static_cast<std::size_t>(n.left)], q);
    const double dr = box_dist2(nodes_[static_cast<std::size_t>(n.right)], q);
    if (dl <= dr) {
      search_k(n.left, q, k, heap);
      search_k(n.right, q, k, heap);
    } else {
      search_k(n.right, q, k, heap);
      search_k(n.left, q, k, heap);
    }
  }

  std::vector<Vec3> pts_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
};

}  // namespace nsdf
