#pragma once

// ADAM training loop: epoch scheduling per the ceil(n/m) rule, divergence
// guard, epoch logging, checkpoint cadence, and the dataset builders that
// turn analytic surfaces or triangle meshes into training data.

#include "nsdf/core.hpp"
#include "nsdf/implicit.hpp"
#include "nsdf/loss.hpp"
#include "nsdf/mesh.hpp"
#include "nsdf/net.hpp"
#include "nsdf/sampler.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace nsdf {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  ParamTangent m, v;  // v accumulates elementwise squared gradients
  long step = 0;

  static AdamState init(const SineMlp& net) {
    return {ParamTangent::zeros_like(net), ParamTangent::zeros_like(net), 0};
  }
};

inline void adam_step(SineMlp& net, const ParamTangent& grad, AdamState& st,
                      const AdamConfig& cfg) {
  const std::size_t layers = net.weights.size();
  if (grad.d_weights.size() != layers || st.m.d_weights.size() != layers) {
    throw ConfigError("optimizer state does not match the network");
  }
  for (std::size_t l = 0; l < layers; ++l) {
    if (grad.d_weights[l].rows() != net.weights[l].rows() ||
        grad.d_weights[l].cols() != net.weights[l].cols() ||
        grad.d_biases[l].size() != net.biases[l].size()) {
      throw ConfigError("gradient shape does not match the network");
    }
  }

  st.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.step));
  const auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v.array() = cfg.beta2 * v.array() + (1.0 - cfg.beta2) * g.array().square();
    param.array() -= cfg.learning_rate * (m.array() / bc1) /
                     ((v.array() / bc2).sqrt() + cfg.eps);
  };
  for (std::size_t l = 0; l < layers; ++l) {
    update(net.weights[l], st.m.d_weights[l], st.v.d_weights[l],
           grad.d_weights[l]);
    update(net.biases[l], st.m.d_biases[l], st.v.d_biases[l],
           grad.d_biases[l]);
  }
}

// Uniform scale and translation taking raw geometry into the training cube:
// q = scale * (p - center), chosen so the shape fits [-0.9, 0.9]^3 with the
// vertex centroid at the origin. The margin leaves room for off-surface
// sampling in [-1, 1]^3.
struct NormalizeTransform {
  Vec3 center = Vec3::Zero();
  double scale = 1.0;

  Vec3 apply(const Vec3& p) const { return scale * (p - center); }
  Vec3 invert(const Vec3& q) const { return q / scale + center; }
};

inline NormalizeTransform normalize_mesh(TriMesh& mesh,
                                         double target_half = 0.9) {
  if (mesh.vertices.empty()) throw ConfigError("cannot normalize empty mesh");
  NormalizeTransform t;
  for (const Vec3& v : mesh.vertices) t.center += v;
  t.center /= static_cast<double>(mesh.vertices.size());
  double extent = 0.0;
  for (const Vec3& v : mesh.vertices) {
    extent = std::max(extent, (v - t.center).cwiseAbs().maxCoeff());
  }
  t.scale = extent > 0.0 ? target_half / extent : 1.0;
  for (Vec3& v : mesh.vertices) v = t.apply(v);
  return t;
}

inline void transform_to_metadata(const NormalizeTransform& t,
                                  std::map<std::string, std::string>& meta) {
  std::ostringstream c;
  c.precision(17);
  c << t.center[0] << " " << t.center[1] << " " << t.center[2];
  meta["normalize_center"] = c.str();
  std::ostringstream s;
  s.precision(17);
  s << t.scale;
  meta["normalize_scale"] = s.str();
}

inline NormalizeTransform transform_from_metadata(
    const std::map<std::string, std::string>& meta) {
  NormalizeTransform t;
  const auto c = meta.find("normalize_center");
  const auto s = meta.find("normalize_scale");
  if (c != meta.end()) {
    std::istringstream in(c->second);
    if (!(in >> t.center[0] >> t.center[1] >> t.center[2])) {
      throw SchemaError("malformed normalize_center metadata");
    }
  }
  if (s != meta.end()) {
    std::istringstream in(s->second);
    if (!(in >> t.scale) || t.scale <= 0.0) {
      throw SchemaError("malformed normalize_scale metadata");
    }
  }
  return t;
}

// Training data plus the threshold used for the anisotropy region flags and
// the normalization that produced the coordinates.
struct TrainData {
  SurfaceDataset surface;
  double tau = 0.0;
  NormalizeTransform transform;
};

// resolves a negative threshold to the 60th percentile of |k1 - k2|
inline double resolve_region_tau(const SurfaceDataset& d, double tau) {
  if (tau >= 0.0) return tau;
  std::vector<double> gaps;
  gaps.reserve(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    gaps.push_back(std::abs(d.kappa1[i] - d.kappa2[i]));
  }
  return percentile(gaps, 60.0);
}

inline TrainData dataset_from_analytic(const AnalyticSurface& surface,
                                       std::size_t n, std::uint64_t seed,
                                       double tau = -1.0) {
  if (n == 0) throw ConfigError("dataset size must be positive");
  TrainData td;
  SurfaceDataset& d = td.surface;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const SurfaceSample s = surface.sample_surface(rng);
    const CurvatureReport rep = surface.curvature_at(s.point);
    d.points.push_back(s.point);
    d.normals.push_back(rep.normal);
    d.e1.push_back(rep.e1);
    d.e2.push_back(rep.e2);
    d.kappa1.push_back(rep.kappa1);
    d.kappa2.push_back(rep.kappa2);
    d.feature.push_back(std::abs(rep.kappa1) + std::abs(rep.kappa2));
  }
  td.tau = resolve_region_tau(d, tau);
  set_region_flags(d, td.tau);
  d.validate();
  return td;
}

// Vertices with reliable differential estimates become training samples;
// boundary, nonmanifold, and isolated vertices are left out. The mesh is
// expected to be normalized already (curvatures must match the coordinates
// the network sees).
inline TrainData dataset_from_mesh(const TriMesh& mesh, double tau = -1.0,
                                   NormalizeTransform transform = {}) {
  const std::vector<VertexGeometry> geom = vertex_geometry(mesh);
  TrainData td;
  td.transform = transform;
  SurfaceDataset& d = td.surface;
  for (std::size_t i = 0; i < geom.size(); ++i) {
    const VertexGeometry& g = geom[i];
    if (g.boundary || g.nonmanifold || g.isolated) continue;
    d.points.push_back(mesh.vertices[i]);
    d.normals.push_back(g.normal);
    d.e1.push_back(g.e1);
    d.e2.push_back(g.e2);
    d.kappa1.push_back(g.kappa1);
    d.kappa2.push_back(g.kappa2);
    d.feature.push_back(g.feature);
  }
  if (d.points.empty()) {
    throw ConfigError("mesh has no usable interior vertices");
  }
  td.tau = resolve_region_tau(d, tau);
  set_region_flags(d, td.tau);
  d.validate();
  return td;
}

struct PartitionFractions {
  double low = 0.5, medium = 0.4, high = 0.1;
};

inline Partition partition_from_fractions(const SurfaceDataset& d,
                                          const PartitionFractions& f) {
  const int n = static_cast<int>(d.size());
  const std::array<int, 3> sizes =
      class_counts({f.low, f.medium, f.high}, n);
  return partition_by_curvature(d.feature, sizes[0], sizes[1], sizes[2]);
}

struct TrainConfig {
  std::vector<int> dims = {3, 80, 80, 1};
  double omega0 = 30.0;
  int epochs = 100;
  std::uint64_t seed = 0;
  AdamConfig adam;
  BatchSpec batch;
  LossWeights weights;
  PartitionFractions partition;
  int checkpoint_every = 0;         // epochs between periodic saves; 0 = none
  std::string checkpoint_path;      // final (and periodic) checkpoint target
  std::string log_csv;              // epoch log target, empty = no file
  bool verbose = false;             // one progress line per epoch on stdout
  std::map<std::string, std::string> metadata;  // embedded in checkpoints
};

struct EpochLog {
  int epoch = 0;           // 1-based
  LossBreakdown mean;      // per-term means over the epoch's iterations
  double seconds = 0.0;
  long points_visited = 0;
};

struct TrainResult {
  SineMlp net;
  std::vector<EpochLog> log;
  bool diverged = false;
  long steps = 0;
};

inline void write_epoch_csv(const std::string& path,
                            const std::vector<EpochLog>& log) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write epoch log: " + path);
  out << "epoch,eikonal,dirichlet_on,dirichlet_off,neumann,dir_align,"
         "curv_match,exp_off,total,seconds,points_visited\n";
  out.precision(17);
  for (const EpochLog& e : log) {
    out << e.epoch << ',' << e.mean.eikonal << ',' << e.mean.dirichlet_on
        << ',' << e.mean.dirichlet_off << ',' << e.mean.neumann << ','
        << e.mean.dir_align << ',' << e.mean.curv_match << ','
        << e.mean.exp_off << ',' << e.mean.total << ',' << e.seconds << ','
        << e.points_visited << '\n';
  }
  if (!out) throw IoError("failed writing epoch log: " + path);
}

// Step-level training driver. Owns the network, optimizer state, and the
// sampling stream; the dataset and oracle are borrowed and must outlive it.
// commit() marks a consistent state (epoch boundary); a non-finite loss
// rolls the parameters back to the last committed state and freezes the
// trainer with the diverged flag set.
class Trainer {
 public:
  Trainer(const TrainConfig& cfg, const TrainData& data,
          const SignedDistance& oracle)
      : cfg_(cfg),
        net_(init_siren(cfg.dims, cfg.omega0, cfg.seed)),
        part_(partition_from_fractions(data.surface, cfg.partition)),
        sampler_(data.surface, part_, derived_spec(cfg), oracle),
        adam_(AdamState::init(net_)),
        snapshot_(net_),
        iters_(epoch_plan(static_cast<long>(data.surface.size()),
                          cfg.batch.m)) {
    if (cfg.epochs < 0) throw ConfigError("epoch count must be nonnegative");
    if (cfg.adam.learning_rate <= 0.0) {
      throw ConfigError("learning rate must be positive");
    }
  }

  LossBreakdown step() {
    if (diverged_) return LossBreakdown{};
    const Minibatch batch = sampler_.next();
    auto [bd, grad] = loss_param_gradient(net_, batch, cfg_.weights);
    if (!std::isfinite(bd.total)) {
      diverged_ = true;
      net_ = snapshot_;
      return bd;
    }
    adam_step(net_, grad, adam_, cfg_.adam);
    ++steps_;
    return bd;
  }

  void commit() { snapshot_ = net_; }

  // replaces the parameters (same architecture), e.g. to resume training;
  // optimizer moments reset
  void set_net(SineMlp net) {
    if (net.layer_dims() != net_.layer_dims()) {
      throw ConfigError("replacement network has different dimensions");
    }
    net_ = std::move(net);
    snapshot_ = net_;
    adam_ = AdamState::init(net_);
  }

  const SineMlp& net() const { return net_; }
  const Partition& partition() const { return part_; }
  bool diverged() const { return diverged_; }
  long steps_done() const { return steps_; }
  long iterations_per_epoch() const { return iters_; }

 private:
  // decouple the sampling stream from the init stream sharing cfg.seed
  static BatchSpec derived_spec(const TrainConfig& cfg) {
    BatchSpec spec = cfg.batch;
    spec.seed = cfg.seed ^ 0x9e3779b97f4a7c15ULL;
    return spec;
  }

  TrainConfig cfg_;
  SineMlp net_;
  Partition part_;
  MinibatchSampler sampler_;
  AdamState adam_;
  SineMlp snapshot_;
  long iters_;
  long steps_ = 0;
  bool diverged_ = false;
};

namespace trainerdetail {

inline void accumulate(LossBreakdown& sum, const LossBreakdown& bd) {
  sum.eikonal += bd.eikonal;
  sum.dirichlet_on += bd.dirichlet_on;
  sum.dirichlet_off += bd.dirichlet_off;
  sum.neumann += bd.neumann;
  sum.dir_align += bd.dir_align;
  sum.curv_match += bd.curv_match;
  sum.exp_off += bd.exp_off;
  sum.total += bd.total;
  sum.neumann_skipped += bd.neumann_skipped;
  sum.curv_skipped += bd.curv_skipped;
  sum.dir_eligible += bd.dir_eligible;
}

inline void scale(LossBreakdown& bd, double s) {
  bd.eikonal *= s;
  bd.dirichlet_on *= s;
  bd.dirichlet_off *= s;
  bd.neumann *= s;
  bd.dir_align *= s;
  bd.curv_match *= s;
  bd.exp_off *= s;
  bd.total *= s;
}

inline std::string periodic_path(const std::string& base, int epoch) {
  const std::size_t dot = base.find_last_of('.');
  const std::size_t slash = base.find_last_of('/');
  const bool has_ext = dot != std::string::npos &&
                       (slash == std::string::npos || dot > slash);
  const std::string stem = has_ext ? base.substr(0, dot) : base;
  const std::string ext = has_ext ? base.substr(dot) : std::string();
  return stem + "_e" + std::to_string(epoch) + ext;
}

}  // namespace trainerdetail

inline TrainResult train(const TrainConfig& cfg, const TrainData& data,
                         const SignedDistance& oracle) {
  Trainer trainer(cfg, data, oracle);
  TrainResult res;

  std::map<std::string, std::string> meta = cfg.metadata;
  transform_to_metadata(data.transform, meta);
  {
    std::ostringstream s;
    s << cfg.seed;
    meta["seed"] = s.str();
  }

  for (int e = 1; e <= cfg.epochs && !trainer.diverged(); ++e) {
    const auto t0 = std::chrono::steady_clock::now();
    LossBreakdown sum;
    long done = 0;
    for (long it = 0; it < trainer.iterations_per_epoch(); ++it) {
      const LossBreakdown bd = trainer.step();
      if (trainer.diverged()) break;
      trainerdetail::accumulate(sum, bd);
      ++done;
    }
    if (trainer.diverged()) break;
    trainer.commit();

    EpochLog lg;
    lg.epoch = e;
    lg.mean = sum;
    trainerdetail::scale(lg.mean, 1.0 / static_cast<double>(done));
    lg.seconds = std::chrono::duration<double>(
                     std::chrono::steady_clock::now() - t0)
                     .count();
    lg.points_visited =
        done * (cfg.batch.m + (cfg.batch.m_off < 0 ? cfg.batch.m
                                                   : cfg.batch.m_off));
    res.log.push_back(lg);

    if (cfg.verbose) {
      std::printf("epoch %4d  total %.6g  dirichlet_on %.6g  eikonal %.6g\n",
                  e, lg.mean.total, lg.mean.dirichlet_on, lg.mean.eikonal);
      std::fflush(stdout);
    }
    if (!cfg.checkpoint_path.empty() && cfg.checkpoint_every > 0 &&
        e % cfg.checkpoint_every == 0 && e < cfg.epochs) {
      meta["trained_epochs"] = std::to_string(e);
      save_checkpoint(trainer.net(),
                      trainerdetail::periodic_path(cfg.checkpoint_path, e),
                      meta);
    }
  }

  res.net = trainer.net();
  res.diverged = trainer.diverged();
  res.steps = trainer.steps_done();

  if (!cfg.checkpoint_path.empty()) {
    meta["trained_epochs"] = std::to_string(
        res.log.empty() ? 0 : res.log.back().epoch);
    save_checkpoint(res.net, cfg.checkpoint_path, meta);
  }
  if (!cfg.log_csv.empty()) write_epoch_csv(cfg.log_csv, res.log);
  return res;
}

}  // namespace nsdf
