// Command-line driver: train, render, eval, curvature, rbf, sample-stats.
// A JSON config file supplies defaults; flags override the config. Exit
// codes: 0 ok, 2 usage, 3 I/O, 4 config/schema, 5 numerical divergence.

#include <Eigen/Core>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include "nsdf/core.hpp"
#include "nsdf/evaluation.hpp"
#include "nsdf/implicit.hpp"
#include "nsdf/mesh.hpp"
#include "nsdf/net.hpp"
#include "nsdf/rbf.hpp"
#include "nsdf/render.hpp"
#include "nsdf/sampler.hpp"
#include "nsdf/sdf_oracle.hpp"
#include "nsdf/trainer.hpp"

using nlohmann::json;
using namespace nsdf;

namespace {

// the analytic shapes every command understands
std::unique_ptr<AnalyticSurface> make_surface(const std::string& name) {
  if (name == "sphere") return std::make_unique<SphereSurface>(0.9);
  if (name == "torus") return std::make_unique<TorusSurface>(0.6, 0.25);
  throw ConfigError("unknown surface: " + name);
}

// -------- config document --------

struct CliSettings {
  TrainConfig train;
  std::size_t dataset_size = 2500;
  Camera camera;
  RenderConfig render;
  double step_scale = -1.0;  // <= 0 picks 1.0 for exact fields, 0.9 for nets
  MetricConfig eval;
  RbfKernel kernel = RbfKernel::multiquadric;
  double rbf_shape = -1.0;
  int rbf_on = 2500;
  int rbf_off = 2500;
  std::uint64_t rbf_seed = 0;
};

json config_schema() {
  return json{
      {"train",
       {{"dims", true},
        {"omega0", true},
        {"epochs", true},
        {"seed", true},
        {"learning_rate", true},
        {"dataset_size", true},
        {"checkpoint_every", true},
        {"verbose", true},
        {"batch",
         {{"m", true},
          {"m_off", true},
          {"p1", true},
          {"p2", true},
          {"p3", true},
          {"box_lo", true},
          {"box_hi", true}}},
        {"weights",
         {{"eikonal", true},
          {"dirichlet_on", true},
          {"dirichlet_off", true},
          {"neumann", true},
          {"dir_align", true},
          {"curv_match", true},
          {"curv_mode", true},
          {"e_region_tau", true},
          {"exp_off", true},
          {"exp_alpha", true}}},
        {"partition", {{"low", true}, {"medium", true}, {"high", true}}}}},
      {"render",
       {{"mode", true},
        {"width", true},
        {"height", true},
        {"fov_deg", true},
        {"position", true},
        {"look_at", true},
        {"up", true},
        {"max_iterations", true},
        {"eps_hit", true},
        {"t_max", true},
        {"step_scale", true},
        {"light_dir", true},
        {"ward_alpha1", true},
        {"ward_alpha2", true},
        {"transfer_lo", true},
        {"transfer_hi", true},
        {"background", true}}},
      {"eval",
       {{"n_surface", true},
        {"n_domain", true},
        {"repetitions", true},
        {"seed", true},
        {"shell_half_width", true},
        {"box_lo", true},
        {"box_hi", true}}},
      {"rbf",
       {{"kernel", true},
        {"shape", true},
        {"n_on", true},
        {"n_off", true},
        {"seed", true}}}};
}

void reject_unknown_keys(const json& doc, const json& schema,
                         const std::string& path) {
  for (const auto& [key, value] : doc.items()) {
    if (!schema.contains(key)) {
      throw SchemaError("unknown config key: " + path + key);
    }
    if (schema.at(key).is_object()) {
      if (!value.is_object()) {
        throw SchemaError("config key '" + path + key +
                          "' must be an object");
      }
      reject_unknown_keys(value, schema.at(key), path + key + ".");
    }
  }
}

template <typename T>
void read_key(const json& j, const char* key, T& out, const std::string& path) {
  if (!j.contains(key)) return;
  try {
    j.at(key).get_to(out);
  } catch (const json::exception&) {
    throw SchemaError("config key '" + path + key + "' has the wrong type");
  }
}

void read_vec3(const json& j, const char* key, Vec3& out,
               const std::string& path) {
  if (!j.contains(key)) return;
  std::vector<double> v;
  read_key(j, key, v, path);
  if (v.size() != 3) {
    throw SchemaError("config key '" + path + key + "' needs three numbers");
  }
  out = Vec3(v[0], v[1], v[2]);
}

CurvMode curv_mode_from(const std::string& s) {
  if (s == "off") return CurvMode::off;
  if (s == "principal") return CurvMode::principal;
  if (s == "mean") return CurvMode::mean;
  throw SchemaError("unknown curvature mode: " + s);
}

ShadeMode shade_mode_from(const std::string& s) {
  if (s == "phong") return ShadeMode::phong;
  if (s == "gaussian") return ShadeMode::gaussian;
  if (s == "mean") return ShadeMode::mean;
  if (s == "ward") return ShadeMode::ward;
  throw SchemaError("unknown shade mode: " + s);
}

RbfKernel kernel_from(const std::string& s) {
  if (s == "multiquadric") return RbfKernel::multiquadric;
  if (s == "thin-plate") return RbfKernel::thin_plate;
  if (s == "gaussian") return RbfKernel::gaussian;
  throw SchemaError("unknown rbf kernel: " + s);
}

void apply_config(CliSettings& s, const json& doc) {
  reject_unknown_keys(doc, config_schema(), "");
  if (doc.contains("train")) {
    const json& t = doc.at("train");
    read_key(t, "dims", s.train.dims, "train.");
    read_key(t, "omega0", s.train.omega0, "train.");
    read_key(t, "epochs", s.train.epochs, "train.");
    read_key(t, "seed", s.train.seed, "train.");
    read_key(t, "learning_rate", s.train.adam.learning_rate, "train.");
    read_key(t, "dataset_size", s.dataset_size, "train.");
    read_key(t, "checkpoint_every", s.train.checkpoint_every, "train.");
    read_key(t, "verbose", s.train.verbose, "train.");
    if (t.contains("batch")) {
      const json& b = t.at("batch");
      read_key(b, "m", s.train.batch.m, "train.batch.");
      read_key(b, "m_off", s.train.batch.m_off, "train.batch.");
      read_key(b, "p1", s.train.batch.p1, "train.batch.");
      read_key(b, "p2", s.train.batch.p2, "train.batch.");
      read_key(b, "p3", s.train.batch.p3, "train.batch.");
      read_vec3(b, "box_lo", s.train.batch.box_lo, "train.batch.");
      read_vec3(b, "box_hi", s.train.batch.box_hi, "train.batch.");
    }
    if (t.contains("weights")) {
      const json& w = t.at("weights");
      LossWeights& lw = s.train.weights;
      read_key(w, "eikonal", lw.eikonal, "train.weights.");
      read_key(w, "dirichlet_on", lw.dirichlet_on, "train.weights.");
      read_key(w, "dirichlet_off", lw.dirichlet_off, "train.weights.");
      read_key(w, "neumann", lw.neumann, "train.weights.");
      read_key(w, "dir_align", lw.dir_align, "train.weights.");
      read_key(w, "curv_match", lw.curv_match, "train.weights.");
      read_key(w, "e_region_tau", lw.e_region_tau, "train.weights.");
      read_key(w, "exp_off", lw.exp_off, "train.weights.");
      read_key(w, "exp_alpha", lw.exp_alpha, "train.weights.");
      if (w.contains("curv_mode")) {
        std::string mode;
        read_key(w, "curv_mode", mode, "train.weights.");
        lw.curv_mode = curv_mode_from(mode);
      }
    }
    if (t.contains("partition")) {
      const json& p = t.at("partition");
      read_key(p, "low", s.train.partition.low, "train.partition.");
      read_key(p, "medium", s.train.partition.medium, "train.partition.");
      read_key(p, "high", s.train.partition.high, "train.partition.");
    }
  }
  if (doc.contains("render")) {
    const json& r = doc.at("render");
    if (r.contains("mode")) {
      std::string mode;
      read_key(r, "mode", mode, "render.");
      s.render.mode = shade_mode_from(mode);
    }
    read_key(r, "width", s.camera.width, "render.");
    read_key(r, "height", s.camera.height, "render.");
    read_key(r, "fov_deg", s.camera.fov_deg, "render.");
    read_vec3(r, "position", s.camera.position, "render.");
    read_vec3(r, "look_at", s.camera.look_at, "render.");
    read_vec3(r, "up", s.camera.up, "render.");
    read_key(r, "max_iterations", s.render.max_iterations, "render.");
    read_key(r, "eps_hit", s.render.eps_hit, "render.");
    read_key(r, "t_max", s.render.t_max, "render.");
    read_key(r, "step_scale", s.step_scale, "render.");
    read_vec3(r, "light_dir", s.render.light_dir, "render.");
    read_key(r, "ward_alpha1", s.render.ward_alpha1, "render.");
    read_key(r, "ward_alpha2", s.render.ward_alpha2, "render.");
    read_key(r, "transfer_lo", s.render.transfer_lo, "render.");
    read_key(r, "transfer_hi", s.render.transfer_hi, "render.");
    read_vec3(r, "background", s.render.background, "render.");
  }
  if (doc.contains("eval")) {
    const json& e = doc.at("eval");
    read_key(e, "n_surface", s.eval.n_surface, "eval.");
    read_key(e, "n_domain", s.eval.n_domain, "eval.");
    read_key(e, "repetitions", s.eval.repetitions, "eval.");
    read_key(e, "seed", s.eval.seed, "eval.");
    read_key(e, "shell_half_width", s.eval.shell_half_width, "eval.");
    read_vec3(e, "box_lo", s.eval.box_lo, "eval.");
    read_vec3(e, "box_hi", s.eval.box_hi, "eval.");
  }
  if (doc.contains("rbf")) {
    const json& r = doc.at("rbf");
    if (r.contains("kernel")) {
      std::string kernel;
      read_key(r, "kernel", kernel, "rbf.");
      s.kernel = kernel_from(kernel);
    }
    read_key(r, "shape", s.rbf_shape, "rbf.");
    read_key(r, "n_on", s.rbf_on, "rbf.");
    read_key(r, "n_off", s.rbf_off, "rbf.");
    read_key(r, "seed", s.rbf_seed, "rbf.");
  }
}

json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw SchemaError("config is not valid JSON: " + std::string(e.what()));
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write: " + path);
  out << text;
  if (!out) throw IoError("write failed: " + path);
}

// -------- shared command state --------

struct Args {
  std::string config_path;
  std::string surface;
  std::string mesh_path;
  std::string model_path;
  std::string out_path;
  std::string csv_path;
  std::string label = "ours";
  std::string method;
  std::string mode;
  std::string kernel;
  int threads = 1;
  double n1 = 0.5, n2 = 0.4, n3 = 0.1;
  // flag values that need an "explicitly set" test live in the subcommand
  // option objects; plain fields are read back via count()
  int epochs = 0;
  std::uint64_t seed = 0;
  std::size_t dataset_size = 0;
  int batch_m = 0;
  double lr = 0.0;
  double tau = 0.0;
  int checkpoint_every = 0;
  bool verbose = false;
  int width = 0, height = 0;
  double fov = 0.0;
  std::vector<double> cam_pos, look_at, up_dir, light, background;
  int iters = 0;
  double eps_hit = 0.0, t_max = 0.0, step_scale = 0.0;
  double alpha1 = 0.0, alpha2 = 0.0, transfer_lo = 0.0, transfer_hi = 0.0;
  int n_surface = 0, n_domain = 0, reps = 0;
  double shell = 0.0;
  double rbf_shape = 0.0;
  int rbf_on = 0, rbf_off = 0;
};

CliSettings settings_for(const CLI::App* cmd, const Args& a) {
  CliSettings s;
  if (!a.config_path.empty()) apply_config(s, load_config_file(a.config_path));

  const auto given = [cmd](const std::string& flag) {
    const CLI::Option* opt = cmd->get_option_no_throw(flag);
    return opt != nullptr && opt->count() > 0;
  };
  if (given("--epochs")) s.train.epochs = a.epochs;
  if (given("--seed")) {
    s.train.seed = a.seed;
    s.eval.seed = a.seed;
    s.rbf_seed = a.seed;
  }
  if (given("--dataset-size")) s.dataset_size = a.dataset_size;
  if (given("--batch-size")) s.train.batch.m = a.batch_m;
  if (given("--lr")) s.train.adam.learning_rate = a.lr;
  if (given("--tau")) s.train.weights.e_region_tau = a.tau;
  if (given("--checkpoint-every")) s.train.checkpoint_every = a.checkpoint_every;
  if (given("--verbose")) s.train.verbose = true;
  if (given("--mode")) s.render.mode = shade_mode_from(a.mode);
  if (given("--width")) s.camera.width = a.width;
  if (given("--height")) s.camera.height = a.height;
  if (given("--fov")) s.camera.fov_deg = a.fov;
  if (given("--cam-pos")) s.camera.position = Vec3(a.cam_pos[0], a.cam_pos[1], a.cam_pos[2]);
  if (given("--look-at")) s.camera.look_at = Vec3(a.look_at[0], a.look_at[1], a.look_at[2]);
  if (given("--up")) s.camera.up = Vec3(a.up_dir[0], a.up_dir[1], a.up_dir[2]);
  if (given("--iterations")) s.render.max_iterations = a.iters;
  if (given("--eps-hit")) s.render.eps_hit = a.eps_hit;
  if (given("--t-max")) s.render.t_max = a.t_max;
  if (given("--step-scale")) s.step_scale = a.step_scale;
  if (given("--light")) s.render.light_dir = Vec3(a.light[0], a.light[1], a.light[2]);
  if (given("--background")) s.render.background = Color(a.background[0], a.background[1], a.background[2]);
  if (given("--alpha1")) s.render.ward_alpha1 = a.alpha1;
  if (given("--alpha2")) s.render.ward_alpha2 = a.alpha2;
  if (given("--transfer-lo")) s.render.transfer_lo = a.transfer_lo;
  if (given("--transfer-hi")) s.render.transfer_hi = a.transfer_hi;
  if (given("--n-surface")) s.eval.n_surface = a.n_surface;
  if (given("--n-domain")) s.eval.n_domain = a.n_domain;
  if (given("--repetitions")) s.eval.repetitions = a.reps;
  if (given("--shell")) s.eval.shell_half_width = a.shell;
  if (given("--kernel")) s.kernel = kernel_from(a.kernel);
  if (given("--shape")) s.rbf_shape = a.rbf_shape;
  if (given("--n-on")) s.rbf_on = a.rbf_on;
  if (given("--n-off")) s.rbf_off = a.rbf_off;
  return s;
}

// mesh vertices plus discrete normals, skipping vertices without a stable one
void usable_vertices(const TriMesh& mesh, std::vector<Vec3>& points,
                     std::vector<Vec3>& normals) {
  const std::vector<VertexGeometry> geom = vertex_geometry(mesh);
  for (std::size_t i = 0; i < geom.size(); ++i) {
    const VertexGeometry& vg = geom[i];
    if (vg.boundary || vg.isolated || vg.nonmanifold) continue;
    points.push_back(mesh.vertices[i]);
    normals.push_back(vg.normal);
  }
  if (points.empty()) throw ConfigError("mesh has no usable vertices");
}

// -------- commands --------

int command_train(const CLI::App* cmd, const Args& a) {
  CliSettings s = settings_for(cmd, a);
  s.train.checkpoint_path = a.out_path;
  s.train.log_csv = a.csv_path;

  TrainData data;
  std::unique_ptr<AnalyticSurface> surface;
  std::unique_ptr<SdfOracle> oracle;
  const SignedDistance* sd = nullptr;
  if (!a.surface.empty()) {
    surface = make_surface(a.surface);
    data = dataset_from_analytic(*surface, s.dataset_size, s.train.seed,
                                 s.train.weights.e_region_tau);
    s.train.metadata["source"] = a.surface;
    sd = surface.get();
  } else {
    TriMesh mesh = load_obj(a.mesh_path);
    const NormalizeTransform t = normalize_mesh(mesh);
    data = dataset_from_mesh(mesh, s.train.weights.e_region_tau, t);
    oracle = std::make_unique<SdfOracle>(data.surface.points,
                                         data.surface.normals);
    s.train.metadata["source"] = a.mesh_path;
    sd = oracle.get();
  }

  const TrainResult res = train(s.train, data, *sd);
  if (res.diverged) {
    std::cerr << "error: training diverged after " << res.steps << " steps\n";
    return 5;
  }
  std::cout << "trained " << res.steps << " steps; checkpoint: " << a.out_path
            << "\n";
  return 0;
}

int command_render(const CLI::App* cmd, const Args& a) {
  CliSettings s = settings_for(cmd, a);

  std::unique_ptr<AnalyticSurface> surface;
  SineMlp net;
  std::unique_ptr<MlpField> net_field;
  const ImplicitField* field = nullptr;
  if (!a.surface.empty()) {
    surface = make_surface(a.surface);
    field = surface.get();
    s.render.step_scale = s.step_scale > 0.0 ? s.step_scale : 1.0;
  } else {
    net = load_checkpoint(a.model_path);
    net_field = std::make_unique<MlpField>(net);
    field = net_field.get();
    // trained fields are only approximately unit-gradient; march shorter
    s.render.step_scale = s.step_scale > 0.0 ? s.step_scale : 0.9;
  }

  RenderStats stats;
  const Image img = render(*field, s.camera, s.render, &stats);
  write_ppm(a.out_path, img);
  std::cout << "rays " << stats.rays << ", hits " << stats.hits
            << ", degenerate " << stats.degenerate_hits << ", image "
            << a.out_path << "\n";
  return 0;
}

int command_eval(const CLI::App* cmd, const Args& a) {
  CliSettings s = settings_for(cmd, a);
  std::map<std::string, std::string> meta;
  const SineMlp net = load_checkpoint(a.model_path, &meta);
  const MlpField candidate(net);

  MetricReport rep;
  if (!a.surface.empty()) {
    const auto surface = make_surface(a.surface);
    rep = table1_metrics(candidate, *surface, s.eval);
  } else {
    TriMesh mesh = load_obj(a.mesh_path);
    // put the mesh into the frame the model was trained in
    const NormalizeTransform t = transform_from_metadata(meta);
    for (Vec3& v : mesh.vertices) v = t.apply(v);
    std::vector<Vec3> points, normals;
    usable_vertices(mesh, points, normals);
    const SdfOracle oracle(points, normals);
    rep = table1_metrics(candidate, mesh, oracle, s.eval);
  }

  const std::string csv = metric_report_csv(rep, a.label);
  if (a.out_path.empty()) {
    std::cout << csv;
  } else {
    write_text(a.out_path, csv);
  }
  return 0;
}

int command_curvature(const CLI::App*, const Args& a) {
  const TriMesh mesh = load_obj(a.mesh_path);
  if (a.method == "discrete") {
    write_vertex_geometry_csv(vertex_geometry(mesh), a.out_path);
    std::cout << "wrote " << mesh.vertices.size() << " vertices to "
              << a.out_path << "\n";
    return 0;
  }

  std::map<std::string, std::string> meta;
  const SineMlp net = load_checkpoint(a.model_path, &meta);
  const NormalizeTransform t = transform_from_metadata(meta);
  std::ostringstream out;
  out.precision(12);
  out << "index,x,y,z,kappa1,kappa2,mean,gaussian\n";
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const Vec3& v = mesh.vertices[i];
    const ImplicitProbe pr = probe(net, t.apply(v));
    // curvatures in the normalized frame shrink by the scale factor
    const CurvatureReport rep = curvatures(pr);
    out << i << ',' << v.x() << ',' << v.y() << ',' << v.z() << ','
        << rep.kappa1 * t.scale << ',' << rep.kappa2 * t.scale << ','
        << mean_curvature(pr) * t.scale << ','
        << gaussian_curvature(pr) * t.scale * t.scale << '\n';
  }
  write_text(a.out_path, out.str());
  std::cout << "wrote " << mesh.vertices.size() << " vertices to "
            << a.out_path << "\n";
  return 0;
}

int command_rbf(const CLI::App* cmd, const Args& a) {
  CliSettings s = settings_for(cmd, a);

  std::vector<Vec3> centers;
  std::vector<double> values;
  std::mt19937_64 rng(s.rbf_seed);
  std::unique_ptr<AnalyticSurface> surface;
  std::unique_ptr<SdfOracle> oracle;
  TriMesh mesh;
  if (!a.surface.empty()) {
    surface = make_surface(a.surface);
    for (int i = 0; i < s.rbf_on; ++i) {
      centers.push_back(surface->sample_surface(rng).point);
      values.push_back(0.0);
    }
    for (int i = 0; i < s.rbf_off; ++i) {
      const Vec3 p = evaldetail::uniform_in_box(rng, s.eval.box_lo,
                                                s.eval.box_hi);
      centers.push_back(p);
      values.push_back(surface->value(p));
    }
  } else {
    mesh = load_obj(a.mesh_path);
    normalize_mesh(mesh);
    std::vector<Vec3> points, normals;
    usable_vertices(mesh, points, normals);
    oracle = std::make_unique<SdfOracle>(points, normals);
    std::vector<std::size_t> idx(points.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    const std::size_t take =
        std::min(idx.size(), static_cast<std::size_t>(s.rbf_on));
    for (std::size_t i = 0; i < take; ++i) {
      centers.push_back(points[idx[i]]);
      values.push_back(0.0);
    }
    for (int i = 0; i < s.rbf_off; ++i) {
      const Vec3 p = evaldetail::uniform_in_box(rng, s.eval.box_lo,
                                                s.eval.box_hi);
      centers.push_back(p);
      values.push_back(oracle->signed_distance(p));
    }
  }

  Eigen::VectorXd f(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) {
    f[static_cast<Eigen::Index>(i)] = values[i];
  }
  const RbfField candidate(rbf_fit(centers, f, s.kernel, s.rbf_shape));
  std::cout << "fitted " << centers.size() << " centers, max residual "
            << candidate.model().max_residual << "\n";

  MetricReport rep;
  if (surface) {
    rep = table1_metrics(candidate, *surface, s.eval);
  } else {
    rep = table1_metrics(candidate, mesh, *oracle, s.eval);
  }
  const std::string csv = metric_report_csv(rep, a.label);
  if (a.out_path.empty()) {
    std::cout << csv;
  } else {
    write_text(a.out_path, csv);
  }
  return 0;
}

int command_sample_stats(const CLI::App* cmd, const Args& a) {
  CliSettings s = settings_for(cmd, a);
  TrainData data;
  if (!a.surface.empty()) {
    const auto surface = make_surface(a.surface);
    data = dataset_from_analytic(*surface, s.dataset_size, s.train.seed,
                                 s.train.weights.e_region_tau);
  } else {
    TriMesh mesh = load_obj(a.mesh_path);
    data = dataset_from_mesh(mesh, s.train.weights.e_region_tau);
  }
  PartitionFractions frac;
  frac.low = a.n1;
  frac.medium = a.n2;
  frac.high = a.n3;
  const Partition part = partition_from_fractions(data.surface, frac);
  const auto n = static_cast<long>(data.surface.size());
  std::size_t flagged = 0;
  for (const auto f : data.surface.region_e) flagged += f;
  std::cout << "class,count,fraction\n";
  std::cout << "low," << part.n1 << ',' << static_cast<double>(part.n1) / n
            << "\n";
  std::cout << "medium," << part.n2 << ',' << static_cast<double>(part.n2) / n
            << "\n";
  std::cout << "high," << part.n3 << ',' << static_cast<double>(part.n3) / n
            << "\n";
  std::cout << "total," << (part.n1 + part.n2 + part.n3) << ",1\n";
  std::cout << "region_tau," << data.tau << ','
            << static_cast<double>(flagged) / n << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"neural signed-distance fields: training, rendering, and "
               "evaluation"};
  app.require_subcommand(1);
  Args a;

  const auto add_common = [&a](CLI::App* cmd) {
    cmd->add_option("--config", a.config_path, "JSON config file");
    cmd->add_option("--threads", a.threads, "worker thread cap")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--seed", a.seed, "seed for every random stream");
  };
  const auto add_source = [&a](CLI::App* cmd, bool with_model) {
    auto* group = cmd->add_option_group("source", "what to operate on");
    group->add_option("--surface", a.surface, "analytic surface")
        ->check(CLI::IsMember({"sphere", "torus"}));
    group->add_option("--mesh", a.mesh_path, "triangle mesh (.obj)");
    if (with_model) {
      group->add_option("--model", a.model_path, "trained checkpoint");
    }
    group->require_option(1);
  };

  CLI::App* cmd_train = app.add_subcommand("train", "fit a network");
  add_common(cmd_train);
  add_source(cmd_train, false);
  cmd_train->add_option("--out", a.out_path, "checkpoint path")->required();
  cmd_train->add_option("--csv", a.csv_path, "epoch log path");
  cmd_train->add_option("--epochs", a.epochs, "training epochs");
  cmd_train->add_option("--dataset-size", a.dataset_size,
                        "surface samples for analytic sources");
  cmd_train->add_option("--batch-size", a.batch_m, "on-surface batch size");
  cmd_train->add_option("--lr", a.lr, "learning rate");
  cmd_train->add_option("--tau", a.tau, "curvature-gap region threshold");
  cmd_train->add_option("--checkpoint-every", a.checkpoint_every,
                        "periodic checkpoint cadence (epochs)");
  cmd_train->add_flag("--verbose", a.verbose, "progress line per epoch");

  CLI::App* cmd_render = app.add_subcommand("render", "ray cast a field");
  add_common(cmd_render);
  {
    auto* group = cmd_render->add_option_group("source");
    group->add_option("--surface", a.surface, "analytic surface")
        ->check(CLI::IsMember({"sphere", "torus"}));
    group->add_option("--model", a.model_path, "trained checkpoint");
    group->require_option(1);
  }
  cmd_render->add_option("--out", a.out_path, "output image (.ppm)")
      ->required();
  cmd_render->add_option("--mode", a.mode, "shading mode")
      ->check(CLI::IsMember({"phong", "gaussian", "mean", "ward"}));
  cmd_render->add_option("--width", a.width, "image width");
  cmd_render->add_option("--height", a.height, "image height");
  cmd_render->add_option("--fov", a.fov, "vertical field of view, degrees");
  cmd_render->add_option("--cam-pos", a.cam_pos, "camera position")
      ->expected(3);
  cmd_render->add_option("--look-at", a.look_at, "camera target")->expected(3);
  cmd_render->add_option("--up", a.up_dir, "camera up hint")->expected(3);
  cmd_render->add_option("--iterations", a.iters, "sphere-trace budget");
  cmd_render->add_option("--eps-hit", a.eps_hit, "hit threshold");
  cmd_render->add_option("--t-max", a.t_max, "ray length budget");
  cmd_render->add_option("--step-scale", a.step_scale,
                         "march damping (default: 1 exact, 0.9 model)");
  cmd_render->add_option("--light", a.light, "light direction")->expected(3);
  cmd_render->add_option("--background", a.background, "background color")
      ->expected(3);
  cmd_render->add_option("--alpha1", a.alpha1, "ward roughness along e1");
  cmd_render->add_option("--alpha2", a.alpha2, "ward roughness along e2");
  cmd_render->add_option("--transfer-lo", a.transfer_lo,
                         "curvature mapped to blue");
  cmd_render->add_option("--transfer-hi", a.transfer_hi,
                         "curvature mapped to red");

  CLI::App* cmd_eval = app.add_subcommand("eval", "held-out metric table row");
  add_common(cmd_eval);
  add_source(cmd_eval, false);
  cmd_eval->add_option("--model", a.model_path, "trained checkpoint")
      ->required();
  cmd_eval->add_option("--out", a.out_path, "CSV path (default: stdout)");
  cmd_eval->add_option("--label", a.label, "method column value");
  cmd_eval->add_option("--n-surface", a.n_surface, "surface samples");
  cmd_eval->add_option("--n-domain", a.n_domain, "domain samples");
  cmd_eval->add_option("--repetitions", a.reps, "measurement repetitions");
  cmd_eval->add_option("--shell", a.shell, "domain shell half-width");

  CLI::App* cmd_curv = app.add_subcommand("curvature",
                                          "per-vertex curvature CSV");
  add_common(cmd_curv);
  cmd_curv->add_option("--mesh", a.mesh_path, "triangle mesh (.obj)")
      ->required();
  cmd_curv->add_option("--method", a.method, "estimator")
      ->check(CLI::IsMember({"discrete", "neural"}))
      ->required();
  cmd_curv->add_option("--model", a.model_path,
                       "trained checkpoint (neural method)");
  cmd_curv->add_option("--out", a.out_path, "CSV path")->required();

  CLI::App* cmd_rbf = app.add_subcommand("rbf", "interpolation baseline row");
  add_common(cmd_rbf);
  add_source(cmd_rbf, false);
  cmd_rbf->add_option("--out", a.out_path, "CSV path (default: stdout)");
  cmd_rbf->add_option("--label", a.label, "method column value");
  cmd_rbf->add_option("--kernel", a.kernel, "radial kernel")
      ->check(CLI::IsMember({"multiquadric", "thin-plate", "gaussian"}));
  cmd_rbf->add_option("--shape", a.rbf_shape, "kernel width (<=0: auto)");
  cmd_rbf->add_option("--n-on", a.rbf_on, "on-surface centers");
  cmd_rbf->add_option("--n-off", a.rbf_off, "off-surface centers");
  cmd_rbf->add_option("--n-surface", a.n_surface, "metric surface samples");
  cmd_rbf->add_option("--n-domain", a.n_domain, "metric domain samples");
  cmd_rbf->add_option("--repetitions", a.reps, "measurement repetitions");

  CLI::App* cmd_stats = app.add_subcommand("sample-stats",
                                           "curvature class sizes");
  add_common(cmd_stats);
  add_source(cmd_stats, false);
  cmd_stats->add_option("--n1", a.n1, "low-curvature fraction");
  cmd_stats->add_option("--n2", a.n2, "medium-curvature fraction");
  cmd_stats->add_option("--n3", a.n3, "high-curvature fraction");
  cmd_stats->add_option("--dataset-size", a.dataset_size,
                        "surface samples for analytic sources");
  cmd_stats->add_option("--tau", a.tau, "curvature-gap region threshold");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    Eigen::setNbThreads(a.threads);
    if (cmd_curv->parsed() && a.method == "neural" && a.model_path.empty()) {
      std::cerr << "error: --method neural needs --model\n";
      return 2;
    }
    if (cmd_train->parsed()) return command_train(cmd_train, a);
    if (cmd_render->parsed()) return command_render(cmd_render, a);
    if (cmd_eval->parsed()) return command_eval(cmd_eval, a);
    if (cmd_curv->parsed()) return command_curvature(cmd_curv, a);
    if (cmd_rbf->parsed()) return command_rbf(cmd_rbf, a);
    if (cmd_stats->parsed()) return command_sample_stats(cmd_stats, a);
    return 2;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const SchemaError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 5;
  }
}
