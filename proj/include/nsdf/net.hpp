#pragma once

// Sinusoidal MLP with closed-form input derivatives. Forward evaluation
// propagates second-order jets (value, gradient, Hessian of each activation
// with respect to the network input), so f, grad f and Hess f come out of a
// single pass without autodiff. The reverse pass turns adjoints of those
// jets into parameter gradients.

#include "nsdf/core.hpp"
#include "nsdf/implicit.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace nsdf {

struct CheckpointError : SchemaError {
  using SchemaError::SchemaError;
};
struct CorruptCheckpoint : CheckpointError {
  using CheckpointError::CheckpointError;
};
struct CheckpointVersionMismatch : CheckpointError {
  using CheckpointError::CheckpointError;
};
struct CheckpointDimensionMismatch : CheckpointError {
  using CheckpointError::CheckpointError;
};

inline constexpr int kCheckpointFormatVersion = 1;

// f(p) = W_L sin(.. sin(omega0 (W_0 p + b_0)) ..) + b_L. The first sine is
// scaled by omega0, later ones are plain.
struct SineMlp {
  std::vector<MatX> weights;  // weights[i] maps layer i input to its output
  std::vector<VecX> biases;
  double omega0 = 30.0;

  int input_dim() const { return static_cast<int>(weights.front().cols()); }
  std::vector<int> layer_dims() const {
    std::vector<int> dims;
    dims.push_back(input_dim());
    for (const auto& w : weights) dims.push_back(static_cast<int>(w.rows()));
    return dims;
  }
  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      n += static_cast<std::size_t>(weights[i].size()) +
           static_cast<std::size_t>(biases[i].size());
    }
    return n;
  }
};

inline void validate_dims(const std::vector<int>& dims) {
  if (dims.size() < 2) throw ConfigError("network needs at least one layer");
  if (dims.front() != 3) throw ConfigError("network input must be 3d");
  if (dims.back() != 1) throw ConfigError("network output must be scalar");
  for (int d : dims) {
    if (d <= 0) throw ConfigError("layer widths must be positive");
  }
}

// Standard sinusoidal initialization: first layer uniform in +-1/input_dim,
// hidden layers uniform in +-sqrt(6/fan_in)/omega0, biases in +-1/sqrt(fan_in).
inline SineMlp init_siren(const std::vector<int>& dims, double omega0,
                          std::uint64_t seed) {
  validate_dims(dims);
  if (omega0 <= 0.0) throw ConfigError("omega0 must be positive");
  SineMlp net;
  net.omega0 = omega0;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const int fan_in = dims[i];
    const int fan_out = dims[i + 1];
    const double wb = (i == 0) ? 1.0 / fan_in
                               : std::sqrt(6.0 / fan_in) / omega0;
    std::uniform_real_distribution<double> wdist(-wb, wb);
    MatX w(fan_out, fan_in);
    for (int r = 0; r < fan_out; ++r) {
      for (int c = 0; c < fan_in; ++c) w(r, c) = wdist(rng);
    }
    const double bb = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> bdist(-bb, bb);
    VecX b(fan_out);
    for (int r = 0; r < fan_out; ++r) b[r] = bdist(rng);
    net.weights.push_back(std::move(w));
    net.biases.push_back(std::move(b));
  }
  return net;
}

// Plain scalar evaluation, used where derivatives are not needed (rendering,
// dirichlet metrics).
inline double forward(const SineMlp& net, const Vec3& p) {
  VecX x = p;
  const std::size_t last = net.weights.size() - 1;
  for (std::size_t i = 0; i < last; ++i) {
    const double w = (i == 0) ? net.omega0 : 1.0;
    x = ((net.weights[i] * x + net.biases[i]) * w).array().sin().matrix();
  }
  return (net.weights[last] * x + net.biases[last])(0);
}

namespace jet {

// Jets are stored point-major: each point owns `comps` consecutive columns,
// [value, d/dx, d/dy, d/dz, xx, xy, xz, yy, yz, zz]. Without Hessians only
// the first 4 components exist. This keeps every layer a single GEMM.
inline constexpr int kFull = 10;
inline constexpr int kNoHess = 4;

// (row, col) component pairs behind the six Hessian slots.
inline constexpr int kSymA[6] = {1, 1, 1, 2, 2, 3};
inline constexpr int kSymB[6] = {1, 2, 3, 2, 3, 3};

using View = Eigen::Map<MatX, 0, Eigen::OuterStride<>>;
using ConstView = Eigen::Map<const MatX, 0, Eigen::OuterStride<>>;

inline View comp(MatX& m, int comps, int c) {
  const auto rows = m.rows();
  return View(m.data() + c * rows, rows, m.cols() / comps,
              Eigen::OuterStride<>(comps * rows));
}
inline ConstView comp(const MatX& m, int comps, int c) {
  const auto rows = m.rows();
  return ConstView(m.data() + c * rows, rows, m.cols() / comps,
                   Eigen::OuterStride<>(comps * rows));
}

}  // namespace jet

// Retained state of one forward pass over a batch of points, enough to run
// the reverse pass without recomputation.
struct JetWorkspace {
  int comps = jet::kFull;
  int batch = 0;
  std::vector<MatX> pre;     // pre-activation jets per hidden layer
  std::vector<MatX> post;    // post[0] = input jets, post[i+1] = sin outputs
  std::vector<MatX> cos_wa;  // cos(omega * pre value), cached for backprop
  MatX out;                  // 1 x comps*batch
};

// Forward propagation of jets through every layer. points is 3 x B.
inline void forward_jets(const SineMlp& net, const MatX& points,
                         bool with_hessian, JetWorkspace& ws) {
  const int B = static_cast<int>(points.cols());
  const int C = with_hessian ? jet::kFull : jet::kNoHess;
  const std::size_t hidden = net.weights.size() - 1;
  ws.comps = C;
  ws.batch = B;
  ws.pre.resize(hidden);
  ws.cos_wa.resize(hidden);
  ws.post.resize(hidden + 1);

  MatX& x0 = ws.post[0];
  x0.setZero(3, C * B);
  for (int b = 0; b < B; ++b) {
    x0.col(b * C) = points.col(b);
    for (int k = 0; k < 3; ++k) x0(k, b * C + 1 + k) = 1.0;
  }

  for (std::size_t i = 0; i < hidden; ++i) {
    MatX& a = ws.pre[i];
    a.noalias() = net.weights[i] * ws.post[i];
    jet::comp(a, C, 0).colwise() += net.biases[i];

    const double w = (i == 0) ? net.omega0 : 1.0;
    const auto aval = jet::comp(a, C, 0);
    ws.cos_wa[i] = (w * aval.array()).cos().matrix();
    const auto& cs = ws.cos_wa[i];

    MatX& z = ws.post[i + 1];
    z.resize(a.rows(), a.cols());
    jet::comp(z, C, 0) = (w * aval.array()).sin().matrix();
    for (int c = 1; c < 4; ++c) {
      jet::comp(z, C, c) =
          (w * cs.array() * jet::comp(a, C, c).array()).matrix();
    }
    if (with_hessian) {
      const auto sn = jet::comp(z, C, 0);  // sin(w a)
      for (int c = 4; c < 10; ++c) {
        const auto ja = jet::comp(a, C, jet::kSymA[c - 4]).array();
        const auto jb = jet::comp(a, C, jet::kSymB[c - 4]).array();
        jet::comp(z, C, c) = (w * cs.array() * jet::comp(a, C, c).array() -
                              w * w * sn.array() * ja * jb)
                                 .matrix();
      }
    }
  }

  ws.out.noalias() = net.weights.back() * ws.post[hidden];
  jet::comp(ws.out, C, 0).colwise() += net.biases.back();
}

// Parameter gradient accumulator shaped like the network.
struct ParamTangent {
  std::vector<MatX> d_weights;
  std::vector<VecX> d_biases;

  static ParamTangent zeros_like(const SineMlp& net) {
    ParamTangent t;
    for (std::size_t i = 0; i < net.weights.size(); ++i) {
      t.d_weights.emplace_back(
          MatX::Zero(net.weights[i].rows(), net.weights[i].cols()));
      t.d_biases.emplace_back(VecX::Zero(net.biases[i].size()));
    }
    return t;
  }

  ParamTangent& operator+=(const ParamTangent& o) {
    for (std::size_t i = 0; i < d_weights.size(); ++i) {
      d_weights[i] += o.d_weights[i];
      d_biases[i] += o.d_biases[i];
    }
    return *this;
  }

  // Flat view in checkpoint order (per layer: W row-major, then b), mostly
  // for finite-difference comparisons.
  VecX flatten() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < d_weights.size(); ++i) {
      n += static_cast<std::size_t>(d_weights[i].size() + d_biases[i].size());
    }
    VecX v(n);
    std::size_t at = 0;
    for (std::size_t i = 0; i < d_weights.size(); ++i) {
      const MatX& w = d_weights[i];
      for (Eigen::Index r = 0; r < w.rows(); ++r) {
        for (Eigen::Index c = 0; c < w.cols(); ++c) v[at++] = w(r, c);
      }
      for (Eigen::Index r = 0; r < d_biases[i].size(); ++r) {
        v[at++] = d_biases[i][r];
      }
    }
    return v;
  }
};

// Reverse pass: out_adjoint holds dL/d(out jets), laid out exactly like
// ws.out. Accumulates dL/d(params) into accum.
inline void backprop_jets(const SineMlp& net, const JetWorkspace& ws,
                          const MatX& out_adjoint, ParamTangent& accum) {
  const int C = ws.comps;
  const std::size_t hidden = net.weights.size() - 1;

  accum.d_weights.back().noalias() +=
      out_adjoint * ws.post[hidden].transpose();
  accum.d_biases.back() +=
      jet::comp(out_adjoint, C, 0).rowwise().sum();
  MatX cur = net.weights.back().transpose() * out_adjoint;

  for (std::size_t ii = hidden; ii-- > 0;) {
    const double w = (ii == 0) ? net.omega0 : 1.0;
    const MatX& a = ws.pre[ii];
    const auto cs = ws.cos_wa[ii].array();
    const auto sn = jet::comp(ws.post[ii + 1], C, 0).array();

    MatX abar(a.rows(), a.cols());
    // value slot: chain through sin(w a) and through every jet that carries a
    auto abar_v = jet::comp(abar, C, 0);
    abar_v = (w * cs * jet::comp(cur, C, 0).array()).matrix();
    for (int c = 1; c < 4; ++c) {
      abar_v.array() -= w * w * sn * jet::comp(a, C, c).array() *
                        jet::comp(cur, C, c).array();
    }
    if (C == jet::kFull) {
      for (int c = 4; c < 10; ++c) {
        const auto ja = jet::comp(a, C, jet::kSymA[c - 4]).array();
        const auto jb = jet::comp(a, C, jet::kSymB[c - 4]).array();
        abar_v.array() -= (w * w * sn * jet::comp(a, C, c).array() +
                           w * w * w * cs * ja * jb) *
                          jet::comp(cur, C, c).array();
      }
    }
    // gradient slots
    for (int c = 1; c < 4; ++c) {
      auto dst = jet::comp(abar, C, c);
      dst = (w * cs * jet::comp(cur, C, c).array()).matrix();
    }
    if (C == jet::kFull) {
      // d(hessian slot)/d(gradient slot): the outer-product term
      for (int c = 4; c < 10; ++c) {
        const int ia = jet::kSymA[c - 4];
        const int ib = jet::kSymB[c - 4];
        const auto zc = jet::comp(cur, C, c).array();
        jet::comp(abar, C, ia).array() -=
            w * w * sn * jet::comp(a, C, ib).array() * zc;
        jet::comp(abar, C, ib).array() -=
            w * w * sn * jet::comp(a, C, ia).array() * zc;
      }
      // hessian slots pass straight through the cosine factor
      for (int c = 4; c < 10; ++c) {
        jet::comp(abar, C, c) =
            (w * cs * jet::comp(cur, C, c).array()).matrix();
      }
    }

    accum.d_weights[ii].noalias() += abar * ws.post[ii].transpose();
    accum.d_biases[ii] += jet::comp(abar, C, 0).rowwise().sum();
    if (ii > 0) cur = net.weights[ii].transpose() * abar;
  }
}

inline ImplicitProbe probe_from_jets(const JetWorkspace& ws, int b) {
  const int C = ws.comps;
  ImplicitProbe p;
  p.value = ws.out(0, b * C);
  p.gradient = Vec3(ws.out(0, b * C + 1), ws.out(0, b * C + 2),
                    ws.out(0, b * C + 3));
  if (C == jet::kFull) {
    Sym6 s;
    for (int k = 0; k < 6; ++k) s[k] = ws.out(0, b * C + 4 + k);
    p.hessian = sym_to_mat(s);
  }
  return p;
}

inline ImplicitProbe probe(const SineMlp& net, const Vec3& p) {
  JetWorkspace ws;
  forward_jets(net, p, true, ws);
  return probe_from_jets(ws, 0);
}

inline Vec3 input_gradient(const SineMlp& net, const Vec3& p) {
  JetWorkspace ws;
  forward_jets(net, p, false, ws);
  return Vec3(ws.out(0, 1), ws.out(0, 2), ws.out(0, 3));
}

inline Mat3 input_hessian(const SineMlp& net, const Vec3& p) {
  return probe(net, p).hessian;
}

// Adapter so a trained network can be used wherever an ImplicitField is
// expected (rendering, evaluation).
struct MlpField final : ImplicitField {
  const SineMlp* net;
  explicit MlpField(const SineMlp& n) : net(&n) {}
  double value(const Vec3& p) const override { return forward(*net, p); }
  ImplicitProbe probe(const Vec3& p) const override {
    return nsdf::probe(*net, p);
  }
};

// -------- checkpoint serialization --------

inline void save_checkpoint(const SineMlp& net, const std::string& path,
                            const std::map<std::string, std::string>& metadata = {}) {
  nlohmann::json j;
  j["format_version"] = kCheckpointFormatVersion;
  j["omega0"] = net.omega0;
  j["layer_dims"] = net.layer_dims();
  std::vector<double> params;
  params.reserve(net.parameter_count());
  for (std::size_t i = 0; i < net.weights.size(); ++i) {
    const MatX& w = net.weights[i];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) params.push_back(w(r, c));
    }
    for (Eigen::Index r = 0; r < net.biases[i].size(); ++r) {
      params.push_back(net.biases[i][r]);
    }
  }
  j["parameters"] = params;
  j["metadata"] = metadata;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out << j.dump(1) << "\n";
  if (!out) throw IoError("write failed: " + path);
}

inline SineMlp load_checkpoint(const std::string& path,
                               std::map<std::string, std::string>* metadata = nullptr) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw CorruptCheckpoint(std::string("unparseable checkpoint: ") + e.what());
  }
  if (!j.is_object() || !j.contains("format_version") ||
      !j["format_version"].is_number_integer()) {
    throw CorruptCheckpoint("checkpoint missing format_version");
  }
  if (j["format_version"].get<int>() != kCheckpointFormatVersion) {
    throw CheckpointVersionMismatch(
        "unsupported checkpoint format_version " +
        std::to_string(j["format_version"].get<int>()));
  }
  if (!j.contains("layer_dims") || !j.contains("parameters") ||
      !j.contains("omega0")) {
    throw CorruptCheckpoint("checkpoint missing required fields");
  }
  std::vector<int> dims;
  std::vector<double> params;
  double omega0 = 0.0;
  try {
    dims = j["layer_dims"].get<std::vector<int>>();
    params = j["parameters"].get<std::vector<double>>();
    omega0 = j["omega0"].get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw CorruptCheckpoint(std::string("malformed checkpoint field: ") +
                            e.what());
  }
  try {
    validate_dims(dims);
  } catch (const ConfigError& e) {
    throw CheckpointDimensionMismatch(e.what());
  }
  if (omega0 <= 0.0) throw CorruptCheckpoint("omega0 must be positive");

  std::size_t expected = 0;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    expected += static_cast<std::size_t>(dims[i + 1]) *
                    static_cast<std::size_t>(dims[i]) +
                static_cast<std::size_t>(dims[i + 1]);
  }
  if (params.size() != expected) {
    throw CheckpointDimensionMismatch(
        "parameter count " + std::to_string(params.size()) +
        " does not match layer dims (expected " + std::to_string(expected) +
        ")");
  }
  for (double v : params) {
    if (!std::isfinite(v)) throw CorruptCheckpoint("non-finite parameter");
  }

  SineMlp net;
  net.omega0 = omega0;
  std::size_t at = 0;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    MatX w(dims[i + 1], dims[i]);
    for (int r = 0; r < dims[i + 1]; ++r) {
      for (int c = 0; c < dims[i]; ++c) w(r, c) = params[at++];
    }
    VecX b(dims[i + 1]);
    for (int r = 0; r < dims[i + 1]; ++r) b[r] = params[at++];
    net.weights.push_back(std::move(w));
    net.biases.push_back(std::move(b));
  }
  if (metadata) {
    metadata->clear();
    if (j.contains("metadata")) {
      try {
        for (auto it = j["metadata"].begin(); it != j["metadata"].end(); ++it) {
          (*metadata)[it.key()] = it.value().get<std::string>();
        }
      } catch (const nlohmann::json::exception& e) {
        throw CorruptCheckpoint(std::string("malformed metadata: ") + e.what());
      }
    }
  }
  return net;
}

}  // namespace nsdf
