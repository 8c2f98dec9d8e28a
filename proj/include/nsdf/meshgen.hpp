#pragma once

// Procedural test meshes, all outward-oriented (CCW faces seen from outside).

#include "nsdf/mesh.hpp"

#include <cmath>
#include <map>
#include <utility>

namespace nsdf {

// Subdivided icosahedron projected to the sphere.
inline TriMesh icosphere(double radius, int subdivisions) {
  if (radius <= 0.0) throw ConfigError("icosphere radius must be positive");
  if (subdivisions < 0 || subdivisions > 7) {
    throw ConfigError("icosphere subdivisions out of range");
  }
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  TriMesh m;
  m.vertices = {
      {-1, t, 0}, {1, t, 0},   {-1, -t, 0}, {1, -t, 0},
      {0, -1, t}, {0, 1, t},   {0, -1, -t}, {0, 1, -t},
      {t, 0, -1}, {t, 0, 1},   {-t, 0, -1}, {-t, 0, 1},
  };
  m.faces = {{0, 11, 5},  {0, 5, 1},   {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
             {1, 5, 9},   {5, 11, 4},  {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
             {3, 9, 4},   {3, 4, 2},   {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
             {4, 9, 5},   {2, 4, 11},  {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (Vec3& v : m.vertices) v.normalize();

  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      const int id = static_cast<int>(m.vertices.size());
      m.vertices.push_back(
          (m.vertices[static_cast<std::size_t>(a)] +
           m.vertices[static_cast<std::size_t>(b)])
              .normalized());
      midpoint.emplace(key, id);
      return id;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(m.faces.size() * 4);
    for (const auto& f : m.faces) {
      const int ab = mid(f[0], f[1]);
      const int bc = mid(f[1], f[2]);
      const int ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    m.faces = std::move(next);
  }
  for (Vec3& v : m.vertices) v *= radius;
  return m;
}

// Open cylinder around the z axis, centered at the origin. Rings are stacked
// in z; side walls only, no caps, so the top and bottom rings are boundary.
inline TriMesh cylinder_grid(double radius, double height, int n_theta,
                             int n_z) {
  if (radius <= 0.0 || height <= 0.0) {
    throw ConfigError("cylinder needs positive radius and height");
  }
  if (n_theta < 3 || n_z < 1) throw ConfigError("cylinder grid too coarse");
  TriMesh m;
  for (int j = 0; j <= n_z; ++j) {
    const double z = -0.5 * height + height * j / n_z;
    for (int i = 0; i < n_theta; ++i) {
      const double a = 2.0 * M_PI * i / n_theta;
      m.vertices.emplace_back(radius * std::cos(a), radius * std::sin(a), z);
    }
  }
  auto vid = [&](int i, int j) { return j * n_theta + (i % n_theta); };
  for (int j = 0; j < n_z; ++j) {
    for (int i = 0; i < n_theta; ++i) {
      const int a = vid(i, j), b = vid(i + 1, j);
      const int c = vid(i + 1, j + 1), d = vid(i, j + 1);
      m.faces.push_back({a, b, c});
      m.faces.push_back({a, c, d});
    }
  }
  return m;
}

inline TriMesh torus_mesh(double major, double minor, int n_u, int n_v) {
  if (minor <= 0.0 || major <= minor) {
    throw ConfigError("torus mesh requires major > minor > 0");
  }
  if (n_u < 3 || n_v < 3) throw ConfigError("torus grid too coarse");
  TriMesh m;
  for (int j = 0; j < n_v; ++j) {
    const double v = 2.0 * M_PI * j / n_v;
    for (int i = 0; i < n_u; ++i) {
      const double u = 2.0 * M_PI * i / n_u;
      const double rho = major + minor * std::cos(v);
      m.vertices.emplace_back(rho * std::cos(u), rho * std::sin(u),
                              minor * std::sin(v));
    }
  }
  auto vid = [&](int i, int j) { return (j % n_v) * n_u + (i % n_u); };
  for (int j = 0; j < n_v; ++j) {
    for (int i = 0; i < n_u; ++i) {
      const int a = vid(i, j), b = vid(i + 1, j);
      const int c = vid(i + 1, j + 1), d = vid(i, j + 1);
      m.faces.push_back({a, b, c});
      m.faces.push_back({a, c, d});
    }
  }
  return m;
}

// Flat grid in the z = 0 plane, normals +z, centered at the origin.
inline TriMesh flat_grid(int nx, int ny, double spacing) {
  if (nx < 1 || ny < 1 || spacing <= 0.0) {
    throw ConfigError("flat grid needs positive cell counts and spacing");
  }
  TriMesh m;
  const double x0 = -0.5 * nx * spacing;
  const double y0 = -0.5 * ny * spacing;
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      m.vertices.emplace_back(x0 + i * spacing, y0 + j * spacing, 0.0);
    }
  }
  auto vid = [&](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      m.faces.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)});
      m.faces.push_back({vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)});
    }
  }
  return m;
}

// Icosphere displaced radially by a smooth trigonometric field, producing a
// closed star-shaped surface with strongly varying curvature. Deterministic.
inline TriMesh bumpy_sphere(double radius, int subdivisions,
                            double amplitude) {
  TriMesh m = icosphere(1.0, subdivisions);
  for (Vec3& v : m.vertices) {
    const double s = std::sin(4.0 * v.x() + 1.0) *
                         std::sin(5.0 * v.y() + 2.0) +
                     0.5 * std::sin(6.0 * v.z()) * std::sin(3.0 * v.x());
    v *= radius * (1.0 + amplitude * s);
  }
  return m;
}

}  // namespace nsdf
