#pragma once

// Shared aliases, error taxonomy and small numeric helpers used across the
// library. Everything lives in namespace nsdf.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace nsdf {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

// Compact storage for a symmetric 3x3 matrix: [xx, xy, xz, yy, yz, zz].
using Sym6 = Eigen::Matrix<double, 6, 1>;

// Error families. The CLI maps these onto distinct exit codes, the library
// throws them directly.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Thrown where a unit normal is required but the gradient is ~0.
struct SingularGradient : NumericalError {
  using NumericalError::NumericalError;
};

// Gradient magnitudes at or below this are treated as vanishing.
inline constexpr double kGradEps = 1e-8;

inline Mat3 sym_to_mat(const Sym6& s) {
  Mat3 m;
  m << s[0], s[1], s[2],
       s[1], s[3], s[4],
       s[2], s[4], s[5];
  return m;
}

inline Sym6 mat_to_sym(const Mat3& m) {
  Sym6 s;
  s << m(0, 0), m(0, 1), m(0, 2), m(1, 1), m(1, 2), m(2, 2);
  return s;
}

// Converts an adjoint accumulated against a full (possibly non symmetric)
// matrix into the adjoint of the packed representation: off-diagonal slots
// collect both transposed entries.
inline Sym6 sym_adjoint(const Mat3& raw) {
  Sym6 s;
  s << raw(0, 0), raw(0, 1) + raw(1, 0), raw(0, 2) + raw(2, 0),
       raw(1, 1), raw(1, 2) + raw(2, 1), raw(2, 2);
  return s;
}

// Eigendecomposition of a symmetric 3x3, eigenvalues ascending, orthonormal
// eigenvector columns. Guards the reconstruction residual so downstream
// geometry can rely on Q diag(l) Q^T == S.
struct Sym3Eigen {
  Vec3 values;
  Mat3 vectors;
};

inline Sym3Eigen sym3_eigen(const Mat3& s) {
  Eigen::SelfAdjointEigenSolver<Mat3> solver(s);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("symmetric eigensolver failed to converge");
  }
  Sym3Eigen out{solver.eigenvalues(), solver.eigenvectors()};
  const Mat3 recon =
      out.vectors * out.values.asDiagonal() * out.vectors.transpose();
  const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
  if ((recon - s).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw NumericalError("symmetric eigensolver residual out of tolerance");
  }
  return out;
}

// q-th percentile (q in [0,100]) with linear interpolation, as a sorted-copy
// helper for small vectors.
inline double percentile(std::vector<double> v, double q) {
  if (v.empty()) throw ConfigError("percentile of empty vector");
  std::sort(v.begin(), v.end());
  const double pos = std::clamp(q, 0.0, 100.0) / 100.0 *
                     static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double t = pos - static_cast<double>(lo);
  return v[lo] * (1.0 - t) + v[hi] * t;
}

// Splits [begin,end) into contiguous chunks and runs them on up to `threads`
// workers. Chunks write disjoint output ranges, so results do not depend on
// the thread count.
inline void parallel_for(int begin, int end, int threads,
                         const std::function<void(int, int)>& run_range) {
  const int n = end - begin;
  if (n <= 0) return;
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    run_range(begin, end);
    return;
  }
  const int chunk = (n + threads - 1) / threads;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) {
    const int lo = begin + t * chunk;
    const int hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back(run_range, lo, hi);
  }
  for (auto& th : pool) th.join();
}

// Minimal signed-distance supervision interface. Implemented by the exact
// analytic surfaces and by the point-cloud oracle.
struct SignedDistance {
  virtual ~SignedDistance() = default;
  virtual double signed_distance(const Vec3& p) const = 0;
};

}  // namespace nsdf
