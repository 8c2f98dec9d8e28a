#pragma once

// Finite-difference oracles and small statistics helpers shared by the test
// suites. These are deliberately independent of the library code paths they
// check.

#include "nsdf/core.hpp"
#include "nsdf/net.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace testutil {

using nsdf::Mat3;
using nsdf::Vec3;

using ScalarField = std::function<double(const Vec3&)>;

inline Vec3 fd_gradient(const ScalarField& f, const Vec3& p, double h) {
  Vec3 g;
  for (int k = 0; k < 3; ++k) {
    Vec3 hi = p, lo = p;
    hi[k] += h;
    lo[k] -= h;
    g[k] = (f(hi) - f(lo)) / (2.0 * h);
  }
  return g;
}

inline Mat3 fd_hessian(const ScalarField& f, const Vec3& p, double h) {
  Mat3 m;
  for (int k = 0; k < 3; ++k) {
    Vec3 hi = p, lo = p;
    hi[k] += h;
    lo[k] -= h;
    const Vec3 ghi = fd_gradient(f, hi, h);
    const Vec3 glo = fd_gradient(f, lo, h);
    m.col(k) = (ghi - glo) / (2.0 * h);
  }
  return 0.5 * (m + m.transpose());
}

inline Vec3 random_in_box(std::mt19937_64& rng, double half = 1.0) {
  std::uniform_real_distribution<double> u(-half, half);
  const double x = u(rng), y = u(rng), z = u(rng);
  return Vec3(x, y, z);
}

inline Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vec3 v;
  do {
    v = Vec3(g(rng), g(rng), g(rng));
  } while (v.norm() < 1e-9);
  return v.normalized();
}

inline double rel_err(double got, double want, double floor = 1.0) {
  return std::abs(got - want) / std::max(floor, std::abs(want));
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Flat parameter access in checkpoint order (per layer W row-major, then b),
// for finite differencing through network parameters.
inline std::size_t param_count(const nsdf::SineMlp& net) {
  return net.parameter_count();
}

inline double* param_ptr(nsdf::SineMlp& net, std::size_t idx) {
  for (std::size_t i = 0; i < net.weights.size(); ++i) {
    nsdf::MatX& w = net.weights[i];
    const std::size_t wn = static_cast<std::size_t>(w.size());
    if (idx < wn) {
      const std::size_t r = idx / static_cast<std::size_t>(w.cols());
      const std::size_t c = idx % static_cast<std::size_t>(w.cols());
      return &w(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    }
    idx -= wn;
    const std::size_t bn = static_cast<std::size_t>(net.biases[i].size());
    if (idx < bn) return &net.biases[i][static_cast<Eigen::Index>(idx)];
    idx -= bn;
  }
  return nullptr;
}

// Central-difference gradient of an arbitrary scalar of the parameters.
inline nsdf::VecX fd_param_gradient(
    nsdf::SineMlp net, const std::function<double(const nsdf::SineMlp&)>& loss,
    double h) {
  const std::size_t n = param_count(net);
  nsdf::VecX g(n);
  for (std::size_t i = 0; i < n; ++i) {
    double* p = param_ptr(net, i);
    const double keep = *p;
    *p = keep + h;
    const double hi = loss(net);
    *p = keep - h;
    const double lo = loss(net);
    *p = keep;
    g[static_cast<Eigen::Index>(i)] = (hi - lo) / (2.0 * h);
  }
  return g;
}

}  // namespace testutil
