#pragma once

// Radial basis function interpolation of scattered signed-distance samples:
// s(p) = sum_i lambda_i phi(|p - p_i|), with the coefficients pinned by
// s(p_i) = f_i. Dense direct solve, so center counts are capped.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "nsdf/core.hpp"
#include "nsdf/implicit.hpp"
#include "nsdf/kdtree.hpp"

namespace nsdf {

enum class RbfKernel { multiquadric, thin_plate, gaussian };

namespace rbfdetail {

constexpr int kMaxCenters = 6000;
constexpr double kDuplicateDist2 = 1e-24;  // squared spacing for "same point"
constexpr double kMinRcond = 1e-14;

inline double phi(RbfKernel k, double r, double c) {
  switch (k) {
    case RbfKernel::multiquadric:
      return std::sqrt(r * r + c * c);
    case RbfKernel::thin_plate:
      return r > 0.0 ? r * r * std::log(r) : 0.0;
    case RbfKernel::gaussian: {
      const double u = r / c;
      return std::exp(-u * u);
    }
  }
  return 0.0;
}

// radial weights for the derivatives: grad phi = w1(r) d and
// hess phi = w2(r) d d^T + w1(r) I, with d = p - p_i
inline void phi_weights(RbfKernel k, double r, double c, double& w1,
                        double& w2) {
  switch (k) {
    case RbfKernel::multiquadric: {
      const double q = std::sqrt(r * r + c * c);
      w1 = 1.0 / q;
      w2 = -1.0 / (q * q * q);
      return;
    }
    case RbfKernel::thin_plate: {
      if (r <= 0.0) {  // gradient limit is zero; curvature is unbounded here
        w1 = 0.0;
        w2 = 0.0;
        return;
      }
      w1 = 2.0 * std::log(r) + 1.0;
      w2 = 2.0 / (r * r);
      return;
    }
    case RbfKernel::gaussian: {
      const double e = std::exp(-(r * r) / (c * c));
      w1 = -2.0 / (c * c) * e;
      w2 = 4.0 / (c * c * c * c) * e;
      return;
    }
  }
  w1 = w2 = 0.0;
}

inline double mean_neighbor_spacing(const std::vector<Vec3>& pts) {
  const KdTree3 tree(pts);
  double total = 0.0;
  for (const Vec3& p : pts) {
    const auto hits = tree.k_nearest(p, 2);
    total += std::sqrt(hits.back().dist2);  // hits[0] is the point itself
  }
  return total / static_cast<double>(pts.size());
}

}  // namespace rbfdetail

struct RbfModel {
  RbfKernel kernel = RbfKernel::multiquadric;
  double shape = 1.0;  // kernel width c; unused by thin plate
  std::vector<Vec3> centers;
  Eigen::VectorXd coefficients;
  double max_residual = 0.0;
  double rcond = 0.0;  // reciprocal condition estimate of the fit system
};

inline double rbf_evaluate(const RbfModel& model, const Vec3& p) {
  double s = 0.0;
  for (std::size_t i = 0; i < model.centers.size(); ++i) {
    const double r = (p - model.centers[i]).norm();
    s += model.coefficients[static_cast<Eigen::Index>(i)] *
         rbfdetail::phi(model.kernel, r, model.shape);
  }
  return s;
}

// shape <= 0 picks the width automatically: mean nearest-neighbor spacing
inline RbfModel rbf_fit(std::vector<Vec3> centers,
                        const Eigen::VectorXd& values,
                        RbfKernel kernel = RbfKernel::multiquadric,
                        double shape = -1.0) {
  const auto n = static_cast<Eigen::Index>(centers.size());
  if (n < 1) throw ConfigError("rbf fit needs at least one center");
  if (n > rbfdetail::kMaxCenters) {
    throw ConfigError("rbf fit supports at most " +
                      std::to_string(rbfdetail::kMaxCenters) + " centers, got " +
                      std::to_string(centers.size()));
  }
  if (values.size() != n) {
    throw ConfigError("rbf fit needs one value per center");
  }

  if (n > 1) {
    const KdTree3 tree(centers);
    for (const Vec3& p : centers) {
      if (tree.k_nearest(p, 2).back().dist2 < rbfdetail::kDuplicateDist2) {
        throw NumericalError("rbf fit: duplicate centers make the system singular");
      }
    }
  }

  RbfModel model;
  model.kernel = kernel;
  model.shape = shape;
  if (kernel != RbfKernel::thin_plate && !(shape > 0.0)) {
    model.shape = n > 1 ? rbfdetail::mean_neighbor_spacing(centers) : 1.0;
  }

  MatX phi_mat(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    phi_mat(i, i) = rbfdetail::phi(kernel, 0.0, model.shape);
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double r = (centers[static_cast<std::size_t>(i)] -
                        centers[static_cast<std::size_t>(j)])
                           .norm();
      const double v = rbfdetail::phi(kernel, r, model.shape);
      phi_mat(i, j) = v;
      phi_mat(j, i) = v;
    }
  }

  const Eigen::PartialPivLU<MatX> lu(phi_mat);
  model.rcond = lu.rcond();
  model.coefficients = lu.solve(values);
  model.centers = std::move(centers);

  model.max_residual =
      (phi_mat * model.coefficients - values).cwiseAbs().maxCoeff();
  const double tol = 1e-8 * values.cwiseAbs().maxCoeff();
  if (!model.coefficients.allFinite() || model.rcond < rbfdetail::kMinRcond ||
      model.max_residual > tol) {
    throw NumericalError(
        "rbf fit: system is ill-conditioned (reciprocal condition " +
        std::to_string(model.rcond) + ", max residual " +
        std::to_string(model.max_residual) + ")");
  }
  return model;
}

// interpolant as an implicit field, with analytic derivatives
class RbfField final : public ImplicitField {
 public:
  explicit RbfField(RbfModel model) : model_(std::move(model)) {}

  const RbfModel& model() const { return model_; }

  double value(const Vec3& p) const override { return rbf_evaluate(model_, p); }

  ImplicitProbe probe(const Vec3& p) const override {
    ImplicitProbe out;
    out.value = 0.0;
    out.gradient = Vec3::Zero();
    out.hessian = Mat3::Zero();
    for (std::size_t i = 0; i < model_.centers.size(); ++i) {
      const Vec3 d = p - model_.centers[i];
      const double r = d.norm();
      const double lam = model_.coefficients[static_cast<Eigen::Index>(i)];
      out.value += lam * rbfdetail::phi(model_.kernel, r, model_.shape);
      double w1 = 0.0, w2 = 0.0;
      rbfdetail::phi_weights(model_.kernel, r, model_.shape, w1, w2);
      out.gradient += lam * w1 * d;
      out.hessian += lam * (w2 * (d * d.transpose()) + w1 * Mat3::Identity());
    }
    return out;
  }

 private:
  RbfModel model_;
};

}  // namespace nsdf
