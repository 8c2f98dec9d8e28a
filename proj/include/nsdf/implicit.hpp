#pragma once

// Differential geometry of implicit surfaces f(p) = 0 from first and second
// derivatives of f. Curvature signs follow the convention that a sphere of
// radius r with outward normals has k1 = k2 = +1/r.

#include "nsdf/core.hpp"

#include <cmath>
#include <memory>
#include <random>

namespace nsdf {

// Value, gradient and Hessian of a scalar field at one point.
struct ImplicitProbe {
  double value = 0.0;
  Vec3 gradient = Vec3::Zero();
  Mat3 hessian = Mat3::Zero();
};

// Anything that can be queried for f and its first two derivatives.
struct ImplicitField {
  virtual ~ImplicitField() = default;
  virtual double value(const Vec3& p) const = 0;
  virtual ImplicitProbe probe(const Vec3& p) const = 0;
};

// Relative gap below which the two principal curvatures are considered equal.
inline constexpr double kUmbilicRelTol = 1e-7;

// Deterministic orthonormal tangent pair for a unit normal: drop the smallest
// normal component, Gram-Schmidt against n, complete right-handed.
inline void tangent_basis(const Vec3& n, Vec3& t1, Vec3& t2) {
  int k = 0;
  if (std::abs(n[1]) < std::abs(n[k])) k = 1;
  if (std::abs(n[2]) < std::abs(n[k])) k = 2;
  Vec3 u = Vec3::Unit(k) - n[k] * n;
  t1 = u / u.norm();
  t2 = n.cross(t1);
}

// Differential of the Gauss map restricted to the tangent plane:
// (I - N N^T) H / |grad|. Not symmetric in general.
inline Mat3 shape_operator(const ImplicitProbe& probe) {
  const double r = probe.gradient.norm();
  if (r <= kGradEps) {
    throw SingularGradient("shape operator at vanishing gradient");
  }
  const Vec3 n = probe.gradient / r;
  return (Mat3::Identity() - n * n.transpose()) * probe.hessian / r;
}

// Full curvature summary at a point with nonvanishing gradient.
struct CurvatureReport {
  Vec3 normal = Vec3::Zero();
  Mat3 shape = Mat3::Zero();  // symmetric two-sided projection of dN
  double kappa1 = 0.0;        // kappa1 >= kappa2
  double kappa2 = 0.0;
  Vec3 e1 = Vec3::Zero();     // direction of kappa1
  Vec3 e2 = Vec3::Zero();     // direction of kappa2, e1 x e2 = normal
  double gaussian = 0.0;
  double mean = 0.0;
  bool umbilic = false;
};

// Principal curvatures and directions via the 2x2 restriction of H/|g| to a
// tangent basis. The two-sided projection keeps the restricted matrix exactly
// symmetric, so eigenpairs come from the closed-form 2x2 rotation.
inline CurvatureReport curvatures(const ImplicitProbe& probe) {
  const double r = probe.gradient.norm();
  if (r <= kGradEps) {
    throw SingularGradient("curvatures at vanishing gradient");
  }
  CurvatureReport rep;
  rep.normal = probe.gradient / r;
  Vec3 t1, t2;
  tangent_basis(rep.normal, t1, t2);
  const Vec3 h1 = probe.hessian * t1 / r;
  const Vec3 h2 = probe.hessian * t2 / r;
  const double m11 = t1.dot(h1);
  const double m22 = t2.dot(h2);
  const double m12 = 0.5 * (t1.dot(h2) + t2.dot(h1));

  const double mu = 0.5 * (m11 + m22);
  const double dh = 0.5 * (m11 - m22);
  const double rad = std::hypot(dh, m12);
  rep.kappa1 = mu + rad;
  rep.kappa2 = mu - rad;
  const double phi = 0.5 * std::atan2(m12, dh);
  const double c = std::cos(phi), s = std::sin(phi);
  rep.e1 = c * t1 + s * t2;
  rep.e2 = -s * t1 + c * t2;

  rep.shape = rep.kappa1 * rep.e1 * rep.e1.transpose() +
              rep.kappa2 * rep.e2 * rep.e2.transpose();
  rep.gaussian = rep.kappa1 * rep.kappa2;
  rep.mean = mu;
  rep.umbilic = (rep.kappa1 - rep.kappa2) <=
                kUmbilicRelTol * std::max(1.0, std::abs(rep.kappa1) +
                                                   std::abs(rep.kappa2));
  return rep;
}

// Gaussian curvature from the bordered determinant, no eigen work:
// K = -det([H g; g^T 0]) / |g|^4.
inline double gaussian_curvature(const ImplicitProbe& probe) {
  const double r = probe.gradient.norm();
  if (r <= kGradEps) {
    throw SingularGradient("gaussian curvature at vanishing gradient");
  }
  Eigen::Matrix4d b = Eigen::Matrix4d::Zero();
  b.topLeftCorner<3, 3>() = probe.hessian;
  b.topRightCorner<3, 1>() = probe.gradient;
  b.bottomLeftCorner<1, 3>() = probe.gradient.transpose();
  return -b.determinant() / (r * r * r * r);
}

// Mean curvature as half the divergence of the unit gradient field:
// H = (|g|^2 tr(H) - g^T H g) / (2 |g|^3).
inline double mean_curvature(const ImplicitProbe& probe) {
  const double r = probe.gradient.norm();
  if (r <= kGradEps) {
    throw SingularGradient("mean curvature at vanishing gradient");
  }
  const double tr = probe.hessian.trace();
  const double q = probe.gradient.dot(probe.hessian * probe.gradient);
  return 0.5 * tr / r - 0.5 * q / (r * r * r);
}

// Normal curvature along a unit tangent direction v (Euler's relation holds:
// v = cos(t) e1 + sin(t) e2 gives k1 cos^2 t + k2 sin^2 t).
inline double normal_curvature(const ImplicitProbe& probe, const Vec3& v) {
  const double r = probe.gradient.norm();
  if (r <= kGradEps) {
    throw SingularGradient("normal curvature at vanishing gradient");
  }
  if (std::abs(v.norm() - 1.0) > 1e-9) {
    throw ConfigError("normal curvature direction must be unit length");
  }
  const Vec3 n = probe.gradient / r;
  if (std::abs(n.dot(v)) > 1e-6) {
    throw ConfigError("normal curvature direction must be tangent");
  }
  return v.dot(probe.hessian * v) / r;
}

// Exact ground-truth sample on an analytic surface.
struct SurfaceSample {
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::Zero();
  double kappa1 = 0.0;
  double kappa2 = 0.0;
  Vec3 e1 = Vec3::Zero();
  Vec3 e2 = Vec3::Zero();
};

// Analytic signed distance field with exact derivatives, exact curvature at
// on-surface points, and area-uniform surface sampling.
struct AnalyticSurface : ImplicitField, SignedDistance {
  double signed_distance(const Vec3& p) const override { return value(p); }
  virtual CurvatureReport curvature_at(const Vec3& p_on) const = 0;
  virtual SurfaceSample sample_surface(std::mt19937_64& rng) const = 0;
};

struct SphereSurface final : AnalyticSurface {
  double radius = 1.0;
  Vec3 center = Vec3::Zero();

  SphereSurface() = default;
  explicit SphereSurface(double r, const Vec3& c = Vec3::Zero())
      : radius(r), center(c) {
    if (r <= 0.0) throw ConfigError("sphere radius must be positive");
  }

  double value(const Vec3& p) const override {
    return (p - center).norm() - radius;
  }

  ImplicitProbe probe(const Vec3& p) const override {
    const Vec3 d = p - center;
    const double len = d.norm();
    ImplicitProbe out;
    out.value = len - radius;
    if (len <= kGradEps) {
      // center of the ball: distance is exact, derivatives are singular here
      out.gradient = Vec3::Zero();
      return out;
    }
    out.gradient = d / len;
    out.hessian =
        (Mat3::Identity() - out.gradient * out.gradient.transpose()) / len;
    return out;
  }

  CurvatureReport curvature_at(const Vec3& p_on) const override {
    CurvatureReport rep;
    rep.normal = (p_on - center).normalized();
    rep.kappa1 = rep.kappa2 = 1.0 / radius;
    tangent_basis(rep.normal, rep.e1, rep.e2);
    rep.shape = rep.kappa1 * (Mat3::Identity() - rep.normal * rep.normal.transpose());
    rep.gaussian = rep.kappa1 * rep.kappa2;
    rep.mean = rep.kappa1;
    rep.umbilic = true;
    return rep;
  }

  SurfaceSample sample_surface(std::mt19937_64& rng) const override {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vec3 dir;
    do {
      dir = Vec3(gauss(rng), gauss(rng), gauss(rng));
    } while (dir.norm() < 1e-12);
    dir.normalize();
    SurfaceSample s;
    s.point = center + radius * dir;
    s.normal = dir;
    s.kappa1 = s.kappa2 = 1.0 / radius;
    tangent_basis(dir, s.e1, s.e2);
    return s;
  }
};

// Torus around the z axis: tube of radius `minor` around a circle of radius
// `major` in the xy plane.
struct TorusSurface final : AnalyticSurface {
  double major = 0.6;
  double minor = 0.3;

  TorusSurface() = default;
  TorusSurface(double big_r, double small_r) : major(big_r), minor(small_r) {
    if (small_r <= 0.0 || big_r <= small_r) {
      throw ConfigError("torus requires major > minor > 0");
    }
  }

  double value(const Vec3& p) const override {
    const double rho = std::hypot(p.x(), p.y());
    return std::hypot(rho - major, p.z()) - minor;
  }

  ImplicitProbe probe(const Vec3& p) const override {
    double rho = std::hypot(p.x(), p.y());
    Vec3 u(1.0, 0.0, 0.0);  // radial direction in the xy plane
    if (rho > 1e-12) {
      u = Vec3(p.x() / rho, p.y() / rho, 0.0);
    } else {
      rho = 0.0;  // on the axis the radial direction is arbitrary
    }
    const double w = rho - major;
    const double d = std::hypot(w, p.z());
    ImplicitProbe out;
    out.value = d - minor;
    if (d <= kGradEps) {
      out.gradient = Vec3::Zero();  // core circle of the tube
      return out;
    }
    const double a = w / d;
    const double b = p.z() / d;
    const Vec3 zhat(0.0, 0.0, 1.0);
    out.gradient = a * u + b * zhat;

    const double d3 = d * d * d;
    const Vec3 grad_a = (p.z() * p.z() / d3) * u - (w * p.z() / d3) * zhat;
    const Vec3 grad_b = -(p.z() * w / d3) * u + (w * w / d3) * zhat;
    Mat3 h = u * grad_a.transpose() + zhat * grad_b.transpose();
    if (rho > 1e-12) {
      // derivative of the radial unit field, zero along z and u
      h += (a / rho) * (Mat3::Identity() - zhat * zhat.transpose() -
                        u * u.transpose());
    }
    out.hessian = h;
    return out;
  }

  CurvatureReport curvature_at(const Vec3& p_on) const override {
    const double rho = std::hypot(p_on.x(), p_on.y());
    if (rho <= 1e-12) throw ConfigError("torus point on the symmetry axis");
    const Vec3 u(p_on.x() / rho, p_on.y() / rho, 0.0);
    const Vec3 zhat(0.0, 0.0, 1.0);
    const double cos_v = (rho - major) / minor;
    const double sin_v = p_on.z() / minor;

    CurvatureReport rep;
    rep.normal = cos_v * u + sin_v * zhat;
    const double k_tube = 1.0 / minor;
    const double k_ring = cos_v / rho;
    const Vec3 e_tube = -sin_v * u + cos_v * zhat;
    const Vec3 e_ring(-u.y(), u.x(), 0.0);
    if (k_tube >= k_ring) {
      rep.kappa1 = k_tube;
      rep.kappa2 = k_ring;
      rep.e1 = e_tube;
      rep.e2 = e_ring;
    } else {
      rep.kappa1 = k_ring;
      rep.kappa2 = k_tube;
      rep.e1 = e_ring;
      rep.e2 = e_tube;
    }
    if (rep.e1.cross(rep.e2).dot(rep.normal) < 0.0) rep.e2 = -rep.e2;
    rep.shape = rep.kappa1 * rep.e1 * rep.e1.transpose() +
                rep.kappa2 * rep.e2 * rep.e2.transpose();
    rep.gaussian = rep.kappa1 * rep.kappa2;
    rep.mean = 0.5 * (rep.kappa1 + rep.kappa2);
    rep.umbilic = std::abs(rep.kappa1 - rep.kappa2) <=
                  kUmbilicRelTol * std::max(1.0, std::abs(rep.kappa1) +
                                                     std::abs(rep.kappa2));
    return rep;
  }

  SurfaceSample sample_surface(std::mt19937_64& rng) const override {
    std::uniform_real_distribution<double> uni(0.0, 2.0 * M_PI);
    std::uniform_real_distribution<double> accept(0.0, 1.0);
    // rejection in the tube angle corrects for the area element R + r cos(v)
    double phi_u, phi_v;
    do {
      phi_u = uni(rng);
      phi_v = uni(rng);
    } while (accept(rng) >
             (major + minor * std::cos(phi_v)) / (major + minor));
    const double rho = major + minor * std::cos(phi_v);
    SurfaceSample s;
    s.point = Vec3(rho * std::cos(phi_u), rho * std::sin(phi_u),
                   minor * std::sin(phi_v));
    const CurvatureReport rep = curvature_at(s.point);
    s.normal = rep.normal;
    s.kappa1 = rep.kappa1;
    s.kappa2 = rep.kappa2;
    s.e1 = rep.e1;
    s.e2 = rep.e2;
    return s;
  }
};

struct PlaneSurface final : AnalyticSurface {
  Vec3 normal = Vec3(0.0, 0.0, 1.0);
  double offset = 0.0;  // plane is n.p = offset
  double patch_extent = 1.0;

  PlaneSurface() = default;
  PlaneSurface(const Vec3& n, double off) : normal(n.normalized()), offset(off) {}

  double value(const Vec3& p) const override { return normal.dot(p) - offset; }

  ImplicitProbe probe(const Vec3& p) const override {
    ImplicitProbe out;
    out.value = value(p);
    out.gradient = normal;
    return out;
  }

  CurvatureReport curvature_at(const Vec3&) const override {
    CurvatureReport rep;
    rep.normal = normal;
    tangent_basis(normal, rep.e1, rep.e2);
    rep.umbilic = true;
    return rep;
  }

  SurfaceSample sample_surface(std::mt19937_64& rng) const override {
    std::uniform_real_distribution<double> uni(-patch_extent, patch_extent);
    Vec3 t1, t2;
    tangent_basis(normal, t1, t2);
    SurfaceSample s;
    s.point = offset * normal + uni(rng) * t1 + uni(rng) * t2;
    s.normal = normal;
    s.e1 = t1;
    s.e2 = t2;
    return s;
  }
};

}  // namespace nsdf
