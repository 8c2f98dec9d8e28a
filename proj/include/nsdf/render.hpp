#pragma once

// Sphere-tracing renderer for implicit surfaces: Phong shading, curvature
// transfer coloring (blue-white-red), and Ward anisotropic speculars driven
// by the principal directions of the level set.

#include "nsdf/core.hpp"
#include "nsdf/implicit.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace nsdf {

using Color = Eigen::Vector3d;  // linear RGB in [0,1]

struct Camera {
  Vec3 position = Vec3(0.0, 0.0, -3.0);
  Vec3 look_at = Vec3::Zero();
  Vec3 up = Vec3::UnitY();
  double fov_deg = 45.0;  // vertical field of view
  int width = 256;
  int height = 256;
};

inline void validate_camera(const Camera& cam) {
  if (cam.width < 1 || cam.height < 1) {
    throw ConfigError("image dimensions must be positive");
  }
  if (!(cam.fov_deg > 0.0) || !(cam.fov_deg < 180.0)) {
    throw ConfigError("field of view must lie in (0, 180) degrees");
  }
  const Vec3 view = cam.look_at - cam.position;
  if (view.norm() <= 1e-12) throw ConfigError("camera looks at itself");
  if (view.cross(cam.up).norm() <= 1e-12 * cam.up.norm() * view.norm()) {
    throw ConfigError("up direction is collinear with the view direction");
  }
}

enum class ShadeMode { phong, gaussian, mean, ward };

struct RenderConfig {
  ShadeMode mode = ShadeMode::phong;
  int max_iterations = 80;
  double eps_hit = 1e-4;
  double t_max = 10.0;
  // march step multiplier: 1.0 for exact SDFs, 0.9 recommended for trained
  // networks whose Lipschitz bound is only approximate
  double step_scale = 1.0;
  // unit direction toward the light; zero means headlight at the camera
  Vec3 light_dir = Vec3::Zero();
  double ward_alpha1 = 0.2;
  double ward_alpha2 = 0.5;
  double transfer_lo = -1.0;  // curvature mapped to blue
  double transfer_hi = 1.0;   // curvature mapped to red
  Color background = Color::Zero();
};

inline void validate_render_config(const RenderConfig& cfg) {
  if (cfg.max_iterations < 1) throw ConfigError("iteration budget must be positive");
  if (!(cfg.eps_hit > 0.0)) throw ConfigError("hit threshold must be positive");
  if (!(cfg.t_max > 0.0)) throw ConfigError("ray budget must be positive");
  if (!(cfg.step_scale > 0.0)) throw ConfigError("step scale must be positive");
  if (!(cfg.ward_alpha1 > 0.0) || !(cfg.ward_alpha2 > 0.0)) {
    throw ConfigError("ward roughness parameters must be positive");
  }
  if (!(cfg.transfer_lo < cfg.transfer_hi)) {
    throw ConfigError("curvature transfer range is empty");
  }
}

struct TraceResult {
  bool hit = false;
  Vec3 point = Vec3::Zero();
  double t = 0.0;
  int iterations = 0;
};

// March p <- p + step_scale * f(p) * d until |f| drops under the threshold
// or the iteration/ray budget runs out. A miss is a value, not an error.
inline TraceResult sphere_trace(const ImplicitField& f, const Vec3& origin,
                                const Vec3& dir, const RenderConfig& cfg) {
  TraceResult res;
  double t = 0.0;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    const Vec3 p = origin + t * dir;
    const double d = f.value(p);
    if (std::abs(d) < cfg.eps_hit) {
      res.hit = true;
      res.point = p;
      res.t = t;
      res.iterations = it;
      return res;
    }
    t += cfg.step_scale * d;
    if (t > cfg.t_max || t < 0.0 || !std::isfinite(t)) break;
  }
  res.t = t;
  res.iterations = cfg.max_iterations;
  return res;
}

// Ward's anisotropic specular coefficient with half vector H = (l+v)/|l+v|
// and tangent frame (v1, v2) of principal directions:
//   1/(4 pi a1 a2 sqrt(<N,l><N,v>)) * exp(-2 ((<H,v1>/a1)^2 + (<H,v2>/a2)^2)
//                                          / (1 + <N,H>))
inline double ward_specular(const Vec3& n, const Vec3& v1, const Vec3& v2,
                            const Vec3& l, const Vec3& v, double alpha1,
                            double alpha2) {
  const double nl = n.dot(l);
  const double nv = n.dot(v);
  if (nl <= 0.0 || nv <= 0.0) return 0.0;
  Vec3 h = l + v;
  const double hn = h.norm();
  if (hn <= 1e-300) return 0.0;
  h /= hn;
  const double h1 = h.dot(v1) / alpha1;
  const double h2 = h.dot(v2) / alpha2;
  const double denom = 1.0 + n.dot(h);
  return std::exp(-2.0 * (h1 * h1 + h2 * h2) / denom) /
         (4.0 * M_PI * alpha1 * alpha2 * std::sqrt(nl * nv));
}

// curvature -> blue-white-red, linear with clamping
inline Color transfer_color(double kappa, double lo, double hi) {
  const double u = std::clamp((kappa - lo) / (hi - lo), 0.0, 1.0);
  if (u < 0.5) {
    const double s = 2.0 * u;  // blue to white
    return Color(s, s, 1.0);
  }
  const double s = 2.0 * (u - 0.5);  // white to red
  return Color(1.0, 1.0 - s, 1.0 - s);
}

namespace renderdetail {

inline Color phong(const Vec3& n, const Vec3& l, const Vec3& v) {
  const Color base(0.7, 0.75, 0.8);
  const double diff = std::max(0.0, n.dot(l));
  const Vec3 refl = 2.0 * n.dot(l) * n - l;
  const double spec =
      n.dot(l) > 0.0 ? std::pow(std::max(0.0, refl.dot(v)), 32.0) : 0.0;
  return (0.1 + 0.7 * diff) * base + 0.3 * spec * Color::Ones();
}

}  // namespace renderdetail

// Shades an accepted hit. A vanishing gradient yields the background color
// and sets *degenerate; the caller counts those.
inline Color shade(const ImplicitField& f, const TraceResult& hit,
                   const Camera& cam, const RenderConfig& cfg,
                   bool* degenerate = nullptr) {
  if (degenerate) *degenerate = false;
  const ImplicitProbe probe = f.probe(hit.point);
  const double r = probe.gradient.norm();
  if (r <= kGradEps) {
    if (degenerate) *degenerate = true;
    return cfg.background;
  }
  const Vec3 n = probe.gradient / r;
  const Vec3 v = (cam.position - hit.point).normalized();
  const Vec3 l = cfg.light_dir.squaredNorm() > 0.0
                     ? cfg.light_dir.normalized()
                     : v;  // headlight

  switch (cfg.mode) {
    case ShadeMode::phong:
      return renderdetail::phong(n, l, v).cwiseMin(1.0).cwiseMax(0.0);
    case ShadeMode::gaussian:
      return transfer_color(gaussian_curvature(probe), cfg.transfer_lo,
                            cfg.transfer_hi);
    case ShadeMode::mean:
      return transfer_color(mean_curvature(probe), cfg.transfer_lo,
                            cfg.transfer_hi);
    case ShadeMode::ward: {
      const CurvatureReport rep = curvatures(probe);
      const double spec = ward_specular(n, rep.e1, rep.e2, l, v,
                                        cfg.ward_alpha1, cfg.ward_alpha2);
      const Color gray = 0.5 * std::max(0.0, n.dot(l)) * Color::Ones();
      return (gray + spec * Color::Ones()).cwiseMin(1.0);
    }
  }
  return cfg.background;
}

struct Image {
  int width = 0;
  int height = 0;
  std::vector<Color> pixels;  // row-major, top row first

  Color& at(int x, int y) {
    return pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                  static_cast<std::size_t>(x)];
  }
  const Color& at(int x, int y) const {
    return pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                  static_cast<std::size_t>(x)];
  }
};

struct RenderStats {
  long rays = 0;
  long hits = 0;
  long degenerate_hits = 0;
};

// One primary ray per pixel through the pinhole model; deterministic.
inline Image render(const ImplicitField& f, const Camera& cam,
                    const RenderConfig& cfg, RenderStats* stats = nullptr) {
  validate_camera(cam);
  validate_render_config(cfg);

  const Vec3 forward = (cam.look_at - cam.position).normalized();
  const Vec3 right = forward.cross(cam.up).normalized();
  const Vec3 up = right.cross(forward);
  const double half_h = std::tan(0.5 * cam.fov_deg * M_PI / 180.0);
  const double half_w =
      half_h * static_cast<double>(cam.width) / cam.height;

  Image img;
  img.width = cam.width;
  img.height = cam.height;
  img.pixels.assign(
      static_cast<std::size_t>(cam.width) * static_cast<std::size_t>(cam.height),
      cfg.background);
  RenderStats st;
  st.rays = static_cast<long>(cam.width) * cam.height;

  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      const double sx = (2.0 * (x + 0.5) / cam.width - 1.0) * half_w;
      const double sy = (1.0 - 2.0 * (y + 0.5) / cam.height) * half_h;
      const Vec3 dir = (forward + sx * right + sy * up).normalized();
      const TraceResult tr = sphere_trace(f, cam.position, dir, cfg);
      if (!tr.hit) continue;
      ++st.hits;
      bool degenerate = false;
      img.at(x, y) = shade(f, tr, cam, cfg, &degenerate);
      if (degenerate) ++st.degenerate_hits;
    }
  }
  if (stats) *stats = st;
  return img;
}

// binary PPM, 8-bit RGB
inline void write_ppm(const std::string& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write image: " + path);
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  std::vector<std::uint8_t> row(static_cast<std::size_t>(img.width) * 3);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const Color& c = img.at(x, y);
      for (int k = 0; k < 3; ++k) {
        const double v = std::clamp(c[k], 0.0, 1.0);
        row[static_cast<std::size_t>(x) * 3 + static_cast<std::size_t>(k)] =
            static_cast<std::uint8_t>(std::lround(255.0 * v));
      }
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw IoError("failed writing image: " + path);
}

}  // namespace nsdf
