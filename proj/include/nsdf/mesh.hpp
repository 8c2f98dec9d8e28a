#pragma once

// Triangle meshes and discrete curvature. The per-vertex shape operator
// integrates signed dihedral angles over the edges crossing a barycentric
// dual cell; its eigenstructure yields principal curvatures whose directions
// come out transposed (the eigenvector paired with kappa_1 points along the
// kappa_2 direction), which vertex_geometry() undoes. Sign convention matches
// the implicit side: convex regions of an outward-oriented mesh are positive.

#include "nsdf/core.hpp"
#include "nsdf/implicit.hpp"

#include <array>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

namespace nsdf {

struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;
  // optional, parallel to vertices when present (e.g. loaded from OBJ)
  std::vector<Vec3> input_normals;
};

inline Vec3 face_normal_raw(const TriMesh& m, int f) {
  const auto& [a, b, c] = m.faces[static_cast<std::size_t>(f)];
  return (m.vertices[b] - m.vertices[a]).cross(m.vertices[c] - m.vertices[a]);
}

inline double face_area(const TriMesh& m, int f) {
  return 0.5 * face_normal_raw(m, f).norm();
}

// Drops faces with repeated indices or numerically zero area. Returns how
// many were removed.
inline int drop_degenerate_faces(TriMesh& m) {
  double diag = 0.0;
  if (!m.vertices.empty()) {
    Vec3 lo = m.vertices.front(), hi = lo;
    for (const Vec3& v : m.vertices) {
      lo = lo.cwiseMin(v);
      hi = hi.cwiseMax(v);
    }
    diag = (hi - lo).norm();
  }
  const double area_tol = 1e-14 * std::max(1.0, diag * diag);
  std::vector<std::array<int, 3>> kept;
  kept.reserve(m.faces.size());
  int dropped = 0;
  for (std::size_t f = 0; f < m.faces.size(); ++f) {
    const auto& [a, b, c] = m.faces[f];
    const bool repeated = (a == b || b == c || a == c);
    if (repeated || face_area(m, static_cast<int>(f)) <= area_tol) {
      ++dropped;
      continue;
    }
    kept.push_back(m.faces[f]);
  }
  m.faces = std::move(kept);
  return dropped;
}

struct MeshEdge {
  int a = -1, b = -1;        // a < b
  int face_left = -1;        // face traversing a -> b
  int face_right = -1;       // face traversing b -> a
  int incident = 0;          // total incident faces
  bool manifold_interior() const {
    return incident == 2 && face_left >= 0 && face_right >= 0;
  }
};

struct MeshTopology {
  std::vector<MeshEdge> edges;
  std::vector<std::vector<int>> vertex_faces;
  std::vector<std::vector<int>> vertex_edges;
  std::vector<std::uint8_t> vertex_boundary;
  std::vector<std::uint8_t> vertex_nonmanifold;
  int nonmanifold_edges = 0;
};

inline MeshTopology build_topology(const TriMesh& m) {
  const int nv = static_cast<int>(m.vertices.size());
  for (const auto& f : m.faces) {
    for (int k = 0; k < 3; ++k) {
      if (f[static_cast<std::size_t>(k)] < 0 ||
          f[static_cast<std::size_t>(k)] >= nv) {
        throw SchemaError("face references vertex out of range");
      }
    }
  }
  MeshTopology topo;
  topo.vertex_faces.resize(static_cast<std::size_t>(nv));
  topo.vertex_edges.resize(static_cast<std::size_t>(nv));
  topo.vertex_boundary.assign(static_cast<std::size_t>(nv), 0);
  topo.vertex_nonmanifold.assign(static_cast<std::size_t>(nv), 0);

  std::unordered_map<std::uint64_t, int> edge_index;
  edge_index.reserve(m.faces.size() * 3);
  const auto key = [](int a, int b) {
    return (static_cast<std::uint64_t>(a) << 32) |
           static_cast<std::uint64_t>(b);
  };

  for (int f = 0; f < static_cast<int>(m.faces.size()); ++f) {
    const auto& tri = m.faces[static_cast<std::size_t>(f)];
    for (int k = 0; k < 3; ++k) {
      topo.vertex_faces[static_cast<std::size_t>(tri[static_cast<std::size_t>(k)])]
          .push_back(f);
      const int u = tri[static_cast<std::size_t>(k)];
      const int v = tri[static_cast<std::size_t>((k + 1) % 3)];
      const int a = std::min(u, v), b = std::max(u, v);
      auto [it, inserted] = edge_index.try_emplace(
          key(a, b), static_cast<int>(topo.edges.size()));
      if (inserted) {
        MeshEdge e;
        e.a = a;
        e.b = b;
        topo.edges.push_back(e);
        topo.vertex_edges[static_cast<std::size_t>(a)].push_back(it->second);
        topo.vertex_edges[static_cast<std::size_t>(b)].push_back(it->second);
      }
      MeshEdge& e = topo.edges[static_cast<std::size_t>(it->second)];
      ++e.incident;
      if (u == a) {
        // duplicate left assignment means inconsistent orientation
        if (e.face_left >= 0) e.incident = 3;
        else e.face_left = f;
      } else {
        if (e.face_right >= 0) e.incident = 3;
        else e.face_right = f;
      }
    }
  }

  for (const MeshEdge& e : topo.edges) {
    if (e.incident > 2) {
      ++topo.nonmanifold_edges;
      topo.vertex_nonmanifold[static_cast<std::size_t>(e.a)] = 1;
      topo.vertex_nonmanifold[static_cast<std::size_t>(e.b)] = 1;
    } else if (e.incident == 1) {
      topo.vertex_boundary[static_cast<std::size_t>(e.a)] = 1;
      topo.vertex_boundary[static_cast<std::size_t>(e.b)] = 1;
    }
  }
  return topo;
}

// Area-weighted vertex normals; zero for isolated vertices.
inline std::vector<Vec3> vertex_normals(const TriMesh& m) {
  std::vector<Vec3> out(m.vertices.size(), Vec3::Zero());
  for (int f = 0; f < static_cast<int>(m.faces.size()); ++f) {
    const Vec3 n = face_normal_raw(m, f);  // length is twice the face area
    for (int k = 0; k < 3; ++k) {
      out[static_cast<std::size_t>(
          m.faces[static_cast<std::size_t>(f)][static_cast<std::size_t>(k)])] += n;
    }
  }
  for (Vec3& n : out) {
    const double len = n.norm();
    if (len > 1e-14) n /= len;
  }
  return out;
}

// Signed dihedral across an interior manifold edge: positive where the mesh
// is locally convex (outward orientation assumed).
inline double edge_dihedral(const TriMesh& m, const MeshEdge& e,
                            const std::vector<Vec3>& face_normals) {
  const Vec3 nl = face_normals[static_cast<std::size_t>(e.face_left)];
  const Vec3 nr = face_normals[static_cast<std::size_t>(e.face_right)];
  const Vec3 dir = (m.vertices[static_cast<std::size_t>(e.b)] -
                    m.vertices[static_cast<std::size_t>(e.a)])
                       .normalized();
  return std::atan2(nl.cross(nr).dot(dir), nl.dot(nr));
}

inline double barycentric_dual_area(const TriMesh& m, const MeshTopology& topo,
                                    int vertex) {
  double a = 0.0;
  for (int f : topo.vertex_faces[static_cast<std::size_t>(vertex)]) {
    a += face_area(m, f);
  }
  return a / 3.0;
}

// Edge-integrated shape operator over the barycentric dual cell: each
// interior manifold edge contributes dihedral * half-length * (unit edge
// outer product), normalized by the cell area. Non-manifold and boundary
// edges are skipped.
inline Mat3 discrete_shape_operator(const TriMesh& m, const MeshTopology& topo,
                                    const std::vector<Vec3>& face_normals,
                                    int vertex) {
  const double area = barycentric_dual_area(m, topo, vertex);
  if (area <= 0.0) return Mat3::Zero();
  Mat3 s = Mat3::Zero();
  for (int ei : topo.vertex_edges[static_cast<std::size_t>(vertex)]) {
    const MeshEdge& e = topo.edges[static_cast<std::size_t>(ei)];
    if (!e.manifold_interior()) continue;
    const Vec3 edge = m.vertices[static_cast<std::size_t>(e.b)] -
                      m.vertices[static_cast<std::size_t>(e.a)];
    const double len = edge.norm();
    if (len <= 0.0) continue;
    const Vec3 dir = edge / len;
    const double beta = edge_dihedral(m, e, face_normals);
    s += beta * (0.5 * len) * (dir * dir.transpose());
  }
  return s / area;
}

inline Mat3 discrete_shape_operator(const TriMesh& m, int vertex) {
  const MeshTopology topo = build_topology(m);
  std::vector<Vec3> fn(m.faces.size());
  for (int f = 0; f < static_cast<int>(m.faces.size()); ++f) {
    fn[static_cast<std::size_t>(f)] = face_normal_raw(m, f).normalized();
  }
  return discrete_shape_operator(m, topo, fn, vertex);
}

struct VertexGeometry {
  Vec3 normal = Vec3::Zero();
  double kappa1 = 0.0;  // kappa1 >= kappa2
  double kappa2 = 0.0;
  Vec3 e1 = Vec3::Zero();
  Vec3 e2 = Vec3::Zero();
  double feature = 0.0;  // |kappa1| + |kappa2|
  double dual_area = 0.0;
  bool flat = false;      // operator numerically rank deficient
  bool boundary = false;
  bool isolated = false;
  bool nonmanifold = false;
};

// Full per-vertex curvature extraction. The eigenvector with the smallest
// |eigenvalue| estimates the normal; when the two smallest are
// indistinguishable (parabolic vertices: cylinders, cones) the normal is
// recovered by projecting the area-weighted normal onto that eigenspace.
// The remaining eigenpairs give curvatures sorted descending with their
// directions swapped back.
inline std::vector<VertexGeometry> vertex_geometry(const TriMesh& m) {
  const MeshTopology topo = build_topology(m);
  std::vector<Vec3> fn(m.faces.size());
  for (int f = 0; f < static_cast<int>(m.faces.size()); ++f) {
    fn[static_cast<std::size_t>(f)] = face_normal_raw(m, f).normalized();
  }
  const std::vector<Vec3> nref = vertex_normals(m);

  std::vector<VertexGeometry> out(m.vertices.size());
  for (int i = 0; i < static_cast<int>(m.vertices.size()); ++i) {
    VertexGeometry& vg = out[static_cast<std::size_t>(i)];
    vg.boundary = topo.vertex_boundary[static_cast<std::size_t>(i)] != 0;
    vg.nonmanifold = topo.vertex_nonmanifold[static_cast<std::size_t>(i)] != 0;
    if (topo.vertex_faces[static_cast<std::size_t>(i)].empty()) {
      vg.isolated = true;
      vg.flat = true;
      continue;
    }
    vg.dual_area = barycentric_dual_area(m, topo, i);
    const Vec3 approx_n = nref[static_cast<std::size_t>(i)];

    const Mat3 s = discrete_shape_operator(m, topo, fn, i);
    const Sym3Eigen eig = sym3_eigen(0.5 * (s + s.transpose()));

    // order eigenpairs by |eigenvalue|
    std::array<int, 3> idx = {0, 1, 2};
    std::sort(idx.begin(), idx.end(), [&](int x, int y) {
      return std::abs(eig.values[x]) < std::abs(eig.values[y]);
    });
    const double smax = std::abs(eig.values[idx[2]]);

    if (smax < 1e-12) {
      vg.flat = true;
      vg.normal = approx_n;
      if (approx_n.norm() > 0.5) tangent_basis(vg.normal, vg.e1, vg.e2);
      continue;
    }

    Vec3 normal_dir;
    double v1, v2;  // curvature candidates, unordered
    Vec3 w1, w2;    // their eigenvectors
    const double ambiguous = 0.25 * smax;
    if (std::abs(eig.values[idx[1]]) > ambiguous) {
      // generic case: smallest |eigenvalue| clearly identifies the normal
      normal_dir = eig.vectors.col(idx[0]);
      v1 = eig.values[idx[1]];
      w1 = eig.vectors.col(idx[1]);
      v2 = eig.values[idx[2]];
      w2 = eig.vectors.col(idx[2]);
    } else {
      // two near-zero eigenvalues: their eigenspace mixes the normal with a
      // low-curvature tangent, split it using the reference normal
      const Vec3 p0 = eig.vectors.col(idx[0]);
      const Vec3 p1 = eig.vectors.col(idx[1]);
      Vec3 proj = p0 * p0.dot(approx_n) + p1 * p1.dot(approx_n);
      if (proj.norm() < 1e-9) proj = p0;
      normal_dir = proj.normalized();
      v2 = eig.values[idx[2]];
      w2 = eig.vectors.col(idx[2]);
      w1 = w2.cross(normal_dir);
      v1 = w1.dot(s * w1);
    }

    if (normal_dir.dot(approx_n) < 0.0) normal_dir = -normal_dir;
    vg.normal = normal_dir;
    if (v1 < v2) {
      std::swap(v1, v2);
      std::swap(w1, w2);
    }
    vg.kappa1 = v1;
    vg.kappa2 = v2;
    // the operator reports each curvature along the orthogonal direction
    vg.e1 = w2;
    vg.e2 = w1;
    if (vg.e1.cross(vg.e2).dot(vg.normal) < 0.0) vg.e2 = -vg.e2;
    vg.feature = std::abs(vg.kappa1) + std::abs(vg.kappa2);
  }
  return out;
}

// Cotangent-Laplacian mean curvature with Voronoi-mixed cell areas. Signed
// against the area-weighted vertex normal; convex regions are positive.
// Optionally reports the per-vertex mixed areas (they tile the surface).
inline std::vector<double> meyer_mean_curvature(
    const TriMesh& m, std::vector<double>* mixed_out = nullptr) {
  const std::size_t nv = m.vertices.size();
  std::vector<Vec3> lap(nv, Vec3::Zero());
  std::vector<double> mixed(nv, 0.0);

  for (const auto& tri : m.faces) {
    const Vec3& pa = m.vertices[static_cast<std::size_t>(tri[0])];
    const Vec3& pb = m.vertices[static_cast<std::size_t>(tri[1])];
    const Vec3& pc = m.vertices[static_cast<std::size_t>(tri[2])];
    const double area = 0.5 * (pb - pa).cross(pc - pa).norm();
    if (area <= 0.0) continue;

    const std::array<const Vec3*, 3> p = {&pa, &pb, &pc};
    std::array<double, 3> cot;  // cotangent of the angle at each corner
    std::array<double, 3> edge2;  // squared length of the opposite edge
    bool obtuse = false;
    int obtuse_at = -1;
    for (int k = 0; k < 3; ++k) {
      const Vec3 u = *p[static_cast<std::size_t>((k + 1) % 3)] -
                     *p[static_cast<std::size_t>(k)];
      const Vec3 v = *p[static_cast<std::size_t>((k + 2) % 3)] -
                     *p[static_cast<std::size_t>(k)];
      const double cross = u.cross(v).norm();
      const double dot = u.dot(v);
      cot[static_cast<std::size_t>(k)] = dot / std::max(cross, 1e-300);
      edge2[static_cast<std::size_t>(k)] =
          (*p[static_cast<std::size_t>((k + 2) % 3)] -
           *p[static_cast<std::size_t>((k + 1) % 3)])
              .squaredNorm();
      if (dot < 0.0) {
        obtuse = true;
        obtuse_at = k;
      }
    }

    for (int k = 0; k < 3; ++k) {
      const int i = tri[static_cast<std::size_t>(k)];
      const int j = tri[static_cast<std::size_t>((k + 1) % 3)];
      // cot at the third corner weights edge (i, j)
      const double w = cot[static_cast<std::size_t>((k + 2) % 3)];
      lap[static_cast<std::size_t>(i)] +=
          w * (m.vertices[static_cast<std::size_t>(i)] -
               m.vertices[static_cast<std::size_t>(j)]);
      lap[static_cast<std::size_t>(j)] +=
          w * (m.vertices[static_cast<std::size_t>(j)] -
               m.vertices[static_cast<std::size_t>(i)]);

      // Voronoi-mixed area contribution of this triangle at corner k
      double contrib;
      if (!obtuse) {
        contrib = 0.125 * (edge2[static_cast<std::size_t>((k + 1) % 3)] *
                               cot[static_cast<std::size_t>((k + 1) % 3)] +
                           edge2[static_cast<std::size_t>((k + 2) % 3)] *
                               cot[static_cast<std::size_t>((k + 2) % 3)]);
      } else {
        contrib = (k == obtuse_at) ? 0.5 * area : 0.25 * area;
      }
      mixed[static_cast<std::size_t>(tri[static_cast<std::size_t>(k)])] +=
          contrib;
    }
  }

  const std::vector<Vec3> normals = vertex_normals(m);
  std::vector<double> h(nv, 0.0);
  for (std::size_t i = 0; i < nv; ++i) {
    if (mixed[i] <= 0.0) continue;
    const Vec3 k_vec = lap[i] / (2.0 * mixed[i]);
    const double sign = k_vec.dot(normals[i]) >= 0.0 ? 1.0 : -1.0;
    h[i] = sign * 0.5 * k_vec.norm();
  }
  if (mixed_out) *mixed_out = std::move(mixed);
  return h;
}

// -------- OBJ I/O --------

namespace objdetail {

inline int resolve_index(long raw, std::size_t count, int line_no) {
  long idx = raw;
  if (idx < 0) idx = static_cast<long>(count) + idx;  // relative reference
  else idx -= 1;
  if (idx < 0 || idx >= static_cast<long>(count)) {
    throw SchemaError("obj line " + std::to_string(line_no) +
                      ": index out of range");
  }
  return static_cast<int>(idx);
}

}  // namespace objdetail

// Loads v / vn / f records; polygons are fan-triangulated, texture indices
// ignored, unrecognized directives skipped. Malformed records throw
// SchemaError with the 1-based line number.
inline TriMesh load_obj(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open obj: " + path);

  std::vector<Vec3> file_normals;
  std::vector<int> vertex_normal_id;
  TriMesh mesh;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      double x, y, z;
      if (!(ss >> x >> y >> z)) {
        throw SchemaError("obj line " + std::to_string(line_no) +
                          ": vertex needs 3 coordinates");
      }
      mesh.vertices.emplace_back(x, y, z);
      vertex_normal_id.push_back(-1);
    } else if (tag == "vn") {
      double x, y, z;
      if (!(ss >> x >> y >> z)) {
        throw SchemaError("obj line " + std::to_string(line_no) +
                          ": normal needs 3 coordinates");
      }
      file_normals.emplace_back(x, y, z);
    } else if (tag == "f") {
      std::vector<int> verts;
      std::vector<int> norms;
      std::string token;
      while (ss >> token) {
        long vi = 0, ni = 0;
        bool has_n = false;
        const std::size_t s1 = token.find('/');
        try {
          if (s1 == std::string::npos) {
            vi = std::stol(token);
          } else {
            vi = std::stol(token.substr(0, s1));
            const std::size_t s2 = token.find('/', s1 + 1);
            if (s2 != std::string::npos && s2 + 1 < token.size()) {
              ni = std::stol(token.substr(s2 + 1));
              has_n = true;
            }
          }
        } catch (const std::exception&) {
          throw SchemaError("obj line " + std::to_string(line_no) +
                            ": bad face token '" + token + "'");
        }
        verts.push_back(
            objdetail::resolve_index(vi, mesh.vertices.size(), line_no));
        norms.push_back(has_n ? objdetail::resolve_index(
                                    ni, file_normals.size(), line_no)
                              : -1);
      }
      if (verts.size() < 3) {
        throw SchemaError("obj line " + std::to_string(line_no) +
                          ": face needs at least 3 vertices");
      }
      for (std::size_t k = 1; k + 1 < verts.size(); ++k) {
        mesh.faces.push_back({verts[0], verts[k], verts[k + 1]});
      }
      for (std::size_t k = 0; k < verts.size(); ++k) {
        if (norms[k] >= 0 &&
            vertex_normal_id[static_cast<std::size_t>(verts[k])] < 0) {
          vertex_normal_id[static_cast<std::size_t>(verts[k])] = norms[k];
        }
      }
    }
    // vt, g, o, s, usemtl, mtllib and friends are intentionally ignored
  }

  bool any_normal = false;
  for (int id : vertex_normal_id) any_normal |= (id >= 0);
  if (any_normal) {
    mesh.input_normals.assign(mesh.vertices.size(), Vec3::Zero());
    for (std::size_t i = 0; i < vertex_normal_id.size(); ++i) {
      if (vertex_normal_id[i] >= 0) {
        Vec3 n = file_normals[static_cast<std::size_t>(vertex_normal_id[i])];
        const double len = n.norm();
        if (len > 1e-14) n /= len;
        mesh.input_normals[i] = n;
      }
    }
  }
  drop_degenerate_faces(mesh);
  build_topology(mesh);  // validates index ranges
  return mesh;
}

inline void save_obj(const TriMesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write obj: " + path);
  out.precision(17);
  for (const Vec3& v : mesh.vertices) {
    out << "v " << v.x() << " " << v.y() << " " << v.z() << "\n";
  }
  for (const auto& f : mesh.faces) {
    out << "f " << f[0] + 1 << " " << f[1] + 1 << " " << f[2] + 1 << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

// Per-vertex geometry dump shared by the curvature tooling.
inline void write_vertex_geometry_csv(const std::vector<VertexGeometry>& geo,
                                      const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write csv: " + path);
  out.precision(12);
  out << "index,nx,ny,nz,kappa1,kappa2,e1x,e1y,e1z,e2x,e2y,e2z,feature,"
         "dual_area,flat,boundary\n";
  for (std::size_t i = 0; i < geo.size(); ++i) {
    const VertexGeometry& g = geo[i];
    out << i << "," << g.normal.x() << "," << g.normal.y() << ","
        << g.normal.z() << "," << g.kappa1 << "," << g.kappa2 << ","
        << g.e1.x() << "," << g.e1.y() << "," << g.e1.z() << "," << g.e2.x()
        << "," << g.e2.y() << "," << g.e2.z() << "," << g.feature << ","
        << g.dual_area << "," << (g.flat ? 1 : 0) << ","
        << (g.boundary ? 1 : 0) << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace nsdf
