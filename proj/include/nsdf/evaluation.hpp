#pragma once

// Held-out accuracy metrics for fitted implicit fields (absolute SDF error
// in the domain and on the surface, plus gradient-normal alignment), the
// uniform-vs-biased sampling comparison, and the small statistics helpers
// both report with.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "nsdf/core.hpp"
#include "nsdf/implicit.hpp"
#include "nsdf/mesh.hpp"
#include "nsdf/net.hpp"
#include "nsdf/sampler.hpp"
#include "nsdf/sdf_oracle.hpp"
#include "nsdf/trainer.hpp"

namespace nsdf {

struct MetricConfig {
  int n_surface = 2500;
  int n_domain = 2500;
  int repetitions = 100;
  std::uint64_t seed = 0;
  Vec3 box_lo = Vec3(-1.0, -1.0, -1.0);
  Vec3 box_hi = Vec3(1.0, 1.0, 1.0);
  // domain draws reject points closer to the surface than this
  double shell_half_width = 0.01;
};

struct MetricReport {
  double domain_mean = 0.0, domain_max = 0.0;    // |f_hat - f| off the surface
  double surface_mean = 0.0, surface_max = 0.0;  // |f_hat - f| on the surface
  double align_mean = 0.0, align_max = 0.0;      // 1 - <grad_hat, n>, in [0,2]
  // spread of the per-repetition means (standard error across repetitions)
  double domain_mean_se = 0.0, surface_mean_se = 0.0, align_mean_se = 0.0;
  int n_surface = 0, n_domain = 0, repetitions = 0;
};

namespace evaldetail {

// keeps evaluation draws disjoint from the training streams that share the
// user-facing seed (the trainer offsets with a different constant)
constexpr std::uint64_t kEvalStream = 0x5851f42d4c957f2dULL;

struct ReferenceView {
  std::function<double(const Vec3&)> value;
  // draws a held-out surface point and its unit normal
  std::function<void(std::mt19937_64&, Vec3&, Vec3&)> draw_surface;
};

inline double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) /
         static_cast<double>(v.size());
}

inline double standard_error(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1) /
                   static_cast<double>(v.size()));
}

inline double median_of(std::vector<double> v) {
  const std::size_t n = v.size();
  std::nth_element(v.begin(), v.begin() + n / 2, v.end());
  const double hi = v[n / 2];
  if (n % 2 == 1) return hi;
  std::nth_element(v.begin(), v.begin() + n / 2 - 1, v.end());
  return 0.5 * (v[n / 2 - 1] + hi);
}

inline Vec3 uniform_in_box(std::mt19937_64& rng, const Vec3& lo,
                           const Vec3& hi) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vec3 p;
  for (int a = 0; a < 3; ++a) p[a] = lo[a] + u(rng) * (hi[a] - lo[a]);
  return p;
}

inline MetricReport run_metrics(const ImplicitField& candidate,
                                const ReferenceView& ref,
                                const MetricConfig& cfg) {
  if (cfg.n_surface < 1 || cfg.n_domain < 0 || cfg.repetitions < 1) {
    throw ConfigError("metric sample counts must be positive");
  }
  std::mt19937_64 rng(cfg.seed ^ kEvalStream);

  std::vector<double> dom_means, surf_means, align_means;
  MetricReport rep;
  for (int r = 0; r < cfg.repetitions; ++r) {
    double surf_sum = 0.0, surf_max = 0.0;
    double align_sum = 0.0, align_max = 0.0;
    for (int i = 0; i < cfg.n_surface; ++i) {
      Vec3 p, n;
      ref.draw_surface(rng, p, n);
      const ImplicitProbe pr = candidate.probe(p);
      const double err = std::abs(pr.value - ref.value(p));
      surf_sum += err;
      surf_max = std::max(surf_max, err);
      const double gnorm = pr.gradient.norm();
      // a vanishing candidate gradient carries no direction: score it as
      // orthogonal rather than poisoning the mean with NaN
      const double align =
          gnorm > kGradEps ? 1.0 - pr.gradient.dot(n) / gnorm : 1.0;
      align_sum += align;
      align_max = std::max(align_max, align);
    }

    double dom_sum = 0.0, dom_max = 0.0;
    for (int i = 0; i < cfg.n_domain; ++i) {
      Vec3 p;
      double fref = 0.0;
      int tries = 0;
      do {
        if (++tries > 10000) {
          throw ConfigError("surface shell leaves no room in the metric box");
        }
        p = uniform_in_box(rng, cfg.box_lo, cfg.box_hi);
        fref = ref.value(p);
      } while (std::abs(fref) <= cfg.shell_half_width);
      const double err = std::abs(candidate.value(p) - fref);
      dom_sum += err;
      dom_max = std::max(dom_max, err);
    }

    surf_means.push_back(surf_sum / cfg.n_surface);
    align_means.push_back(align_sum / cfg.n_surface);
    dom_means.push_back(cfg.n_domain > 0 ? dom_sum / cfg.n_domain : 0.0);
    rep.surface_max += surf_max;
    rep.align_max += align_max;
    rep.domain_max += dom_max;
  }

  const double inv_reps = 1.0 / cfg.repetitions;
  rep.surface_mean = mean_of(surf_means);
  rep.align_mean = mean_of(align_means);
  rep.domain_mean = mean_of(dom_means);
  rep.surface_max *= inv_reps;
  rep.align_max *= inv_reps;
  rep.domain_max *= inv_reps;
  rep.surface_mean_se = standard_error(surf_means);
  rep.align_mean_se = standard_error(align_means);
  rep.domain_mean_se = standard_error(dom_means);
  rep.n_surface = cfg.n_surface;
  rep.n_domain = cfg.n_domain;
  rep.repetitions = cfg.repetitions;
  return rep;
}

}  // namespace evaldetail

inline MetricReport table1_metrics(const ImplicitField& candidate,
                                   const AnalyticSurface& reference,
                                   const MetricConfig& cfg = {}) {
  evaldetail::ReferenceView ref;
  ref.value = [&reference](const Vec3& p) { return reference.value(p); };
  ref.draw_surface = [&reference](std::mt19937_64& rng, Vec3& p, Vec3& n) {
    const SurfaceSample s = reference.sample_surface(rng);
    p = s.point;
    n = s.normal;
  };
  return evaldetail::run_metrics(candidate, ref, cfg);
}

// Mesh reference: surface error and alignment are measured at mesh vertices
// against discrete vertex normals, domain error against oracle distances.
inline MetricReport table1_metrics(const ImplicitField& candidate,
                                   const TriMesh& mesh,
                                   const SignedDistance& oracle,
                                   const MetricConfig& cfg = {}) {
  const std::vector<VertexGeometry> geom = vertex_geometry(mesh);
  std::vector<Vec3> points, normals;
  for (std::size_t i = 0; i < geom.size(); ++i) {
    const VertexGeometry& vg = geom[i];
    if (vg.boundary || vg.isolated || vg.nonmanifold) continue;
    points.push_back(mesh.vertices[i]);
    normals.push_back(vg.normal);
  }
  if (points.empty()) throw ConfigError("mesh has no usable vertices");

  evaldetail::ReferenceView ref;
  ref.value = [&oracle](const Vec3& p) { return oracle.signed_distance(p); };
  ref.draw_surface = [&points, &normals](std::mt19937_64& rng, Vec3& p,
                                         Vec3& n) {
    std::uniform_int_distribution<std::size_t> pick(0, points.size() - 1);
    const std::size_t i = pick(rng);
    p = points[i];
    n = normals[i];
  };
  return evaldetail::run_metrics(candidate, ref, cfg);
}

// one row in the layout of the comparison table: |f_hat-f| in the domain,
// |f_hat-f| on the surface, normal alignment; mean and max of each
inline std::string metric_report_csv(const MetricReport& rep,
                                     const std::string& label,
                                     bool header = true) {
  std::ostringstream out;
  out.precision(17);
  if (header) {
    out << "method,domain_mean,domain_max,surface_mean,surface_max,"
           "align_mean,align_max,n_surface,n_domain,repetitions\n";
  }
  out << label << ',' << rep.domain_mean << ',' << rep.domain_max << ','
      << rep.surface_mean << ',' << rep.surface_max << ',' << rep.align_mean
      << ',' << rep.align_max << ',' << rep.n_surface << ',' << rep.n_domain
      << ',' << rep.repetitions << '\n';
  return out.str();
}

// -------- statistics helpers --------

// Two-sided exact binomial sign test under a fair coin; ties are dropped by
// the caller. Returns the p-value for a split at least as lopsided.
inline double sign_test_p_value(int wins, int losses) {
  if (wins < 0 || losses < 0) throw ConfigError("sign test counts negative");
  const int n = wins + losses;
  if (n == 0) return 1.0;
  const int k = std::min(wins, losses);
  const double log_half_n = n * std::log(0.5);
  double tail = 0.0;
  for (int i = 0; i <= k; ++i) {
    tail += std::exp(std::lgamma(n + 1.0) - std::lgamma(i + 1.0) -
                     std::lgamma(n - i + 1.0) + log_half_n);
  }
  return std::min(1.0, 2.0 * tail);
}

namespace evaldetail {

// average ranks, ties share their midpoint rank
inline std::vector<double> ranks_of(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&v](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double shared = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) rank[order[t]] = shared;
    i = j + 1;
  }
  return rank;
}

}  // namespace evaldetail

// Spearman rank correlation (Pearson correlation of average ranks).
// Returns 0 when either input is constant.
inline double spearman_rank_correlation(const std::vector<double>& a,
                                        const std::vector<double>& b) {
  if (a.size() != b.size()) {
    throw ConfigError("rank correlation needs equal-length inputs");
  }
  if (a.size() < 2) throw ConfigError("rank correlation needs two points");
  const std::vector<double> ra = evaldetail::ranks_of(a);
  const std::vector<double> rb = evaldetail::ranks_of(b);
  const double ma = evaldetail::mean_of(ra), mb = evaldetail::mean_of(rb);
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (va == 0.0 || vb == 0.0) return 0.0;
  return cov / std::sqrt(va * vb);
}

// -------- uniform vs. curvature-biased sampling comparison --------

struct AbTestConfig {
  TrainConfig base;  // shared setup; per-arm draw fractions are applied on top
  std::array<double, 3> uniform_draw = {-1.0, -1.0, -1.0};  // proportional
  std::array<double, 3> biased_draw = {0.0, 0.8, 0.2};  // doubled mid/high
  int seeds = 5;
  std::uint64_t seed0 = 0;
  // cumulative gradient-step counts to measure at; empty means half and full
  // of the budget implied by base.epochs
  std::vector<long> checkpoints;
  int metric_points = 500;  // fixed on-surface probe subset size
  std::uint64_t metric_seed = 0x94d049bb133111ebULL;
};

struct AbTestReport {
  std::vector<long> checkpoints;
  // metric[seed][checkpoint], mean |f_theta| over the probe subset
  std::vector<std::vector<double>> uniform_metric, biased_metric;
  std::vector<double> uniform_median, biased_median;
  std::vector<double> median_diff;  // biased - uniform, per checkpoint
  std::vector<double> sign_p;       // two-sided sign test, ties dropped
};

namespace evaldetail {

inline double dirichlet_metric(const SineMlp& net,
                               const std::vector<Vec3>& probes) {
  double sum = 0.0;
  for (const Vec3& p : probes) sum += std::abs(forward(net, p));
  return sum / static_cast<double>(probes.size());
}

inline std::vector<double> run_arm(const TrainData& data,
                                   const SignedDistance& oracle,
                                   TrainConfig cfg, std::uint64_t init_seed,
                                   const std::array<double, 3>& draw,
                                   const std::vector<long>& checkpoints,
                                   const std::vector<Vec3>& probes) {
  cfg.batch.p1 = draw[0];
  cfg.batch.p2 = draw[1];
  cfg.batch.p3 = draw[2];
  Trainer trainer(cfg, data, oracle);
  // arms share the initialization but keep their own sampling streams
  trainer.set_net(init_siren(cfg.dims, cfg.omega0, init_seed));
  std::vector<double> out;
  long done = 0;
  for (const long target : checkpoints) {
    while (done < target && !trainer.diverged()) {
      trainer.step();
      ++done;
    }
    trainer.commit();
    out.push_back(dirichlet_metric(trainer.net(), probes));
  }
  return out;
}

}  // namespace evaldetail

inline AbTestReport sampling_ab_test(const TrainData& data,
                                     const SignedDistance& oracle,
                                     const AbTestConfig& cfg) {
  if (cfg.seeds < 1) throw ConfigError("ab test needs at least one seed");
  if (cfg.metric_points < 1) throw ConfigError("ab test needs probe points");

  AbTestReport report;
  report.checkpoints = cfg.checkpoints;
  if (report.checkpoints.empty()) {
    const long iters =
        (static_cast<long>(data.surface.size()) + cfg.base.batch.m - 1) /
        cfg.base.batch.m;
    const long total = static_cast<long>(cfg.base.epochs) * iters;
    report.checkpoints = total > 0 ? std::vector<long>{total / 2, total}
                                   : std::vector<long>{0};
  }
  for (std::size_t i = 0; i < report.checkpoints.size(); ++i) {
    if (report.checkpoints[i] < 0 ||
        (i > 0 && report.checkpoints[i] < report.checkpoints[i - 1])) {
      throw ConfigError("checkpoints must be ascending step counts");
    }
  }

  // fixed probe subset, shared by every arm, seed, and checkpoint
  std::vector<Vec3> probes;
  {
    std::vector<std::size_t> idx(data.surface.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::mt19937_64 rng(cfg.metric_seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    const std::size_t take =
        std::min(idx.size(), static_cast<std::size_t>(cfg.metric_points));
    for (std::size_t i = 0; i < take; ++i) {
      probes.push_back(data.surface.points[idx[i]]);
    }
  }

  for (int s = 0; s < cfg.seeds; ++s) {
    const std::uint64_t init_seed = cfg.seed0 + static_cast<std::uint64_t>(s);
    TrainConfig arm = cfg.base;
    arm.verbose = false;
    arm.checkpoint_every = 0;
    arm.checkpoint_path.clear();
    arm.log_csv.clear();
    arm.seed = 2 * init_seed;  // distinct sampling stream per arm
    report.uniform_metric.push_back(
        evaldetail::run_arm(data, oracle, arm, init_seed, cfg.uniform_draw,
                            report.checkpoints, probes));
    arm.seed = 2 * init_seed + 1;
    report.biased_metric.push_back(
        evaldetail::run_arm(data, oracle, arm, init_seed, cfg.biased_draw,
                            report.checkpoints, probes));
  }

  for (std::size_t c = 0; c < report.checkpoints.size(); ++c) {
    std::vector<double> u, b;
    int wins = 0, losses = 0;
    for (int s = 0; s < cfg.seeds; ++s) {
      u.push_back(report.uniform_metric[static_cast<std::size_t>(s)][c]);
      b.push_back(report.biased_metric[static_cast<std::size_t>(s)][c]);
      if (b.back() < u.back()) ++wins;
      if (b.back() > u.back()) ++losses;
    }
    report.uniform_median.push_back(evaldetail::median_of(u));
    report.biased_median.push_back(evaldetail::median_of(b));
    report.median_diff.push_back(report.biased_median.back() -
                                 report.uniform_median.back());
    report.sign_p.push_back(sign_test_p_value(wins, losses));
  }
  return report;
}

}  // namespace nsdf
