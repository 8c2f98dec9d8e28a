#pragma once

// Training objective. Every term is a mean over its own admissible point set:
//
//   eikonal        E | 1 - |grad f| |        over on- and off-surface points
//   dirichlet_on   E | f |                   over on-surface points
//   dirichlet_off  E | f - d |               over off-surface points (oracle d)
//   neumann        E ( 1 - <n, N> )          over on-surface points, n = unit grad
//   dir_align      E ( 1 - <e1_f, e1_gt>^2 ) over the high-anisotropy region
//   curv_match     principal: E |k1_f - k1| + |k2_f - k2|, or
//                  mean:      E |H_f - H|    (H from the divergence form)
//   exp_off        E exp(-alpha |f|)         optional off-surface repulsion
//
// total_loss reports raw term values plus the weighted total;
// loss_param_gradient additionally backpropagates the same objective to the
// network parameters through the value/gradient/Hessian jets. Both paths
// share one evaluation pass, so their reported values are identical.

#include "nsdf/core.hpp"
#include "nsdf/implicit.hpp"
#include "nsdf/net.hpp"
#include "nsdf/sampler.hpp"

#include <cmath>
#include <utility>
#include <vector>

namespace nsdf {

enum class CurvMode { off, principal, mean };

struct LossWeights {
  double eikonal = 50.0;
  double dirichlet_on = 3000.0;
  double dirichlet_off = 100.0;
  double neumann = 100.0;
  double dir_align = 10.0;
  double curv_match = 0.1;
  CurvMode curv_mode = CurvMode::mean;
  // minimum ground-truth |k1 - k2| for direction-alignment eligibility;
  // negative means "60th percentile of the dataset", resolved where the
  // dataset is built (the batch then carries the resolved flag per point)
  double e_region_tau = -1.0;
  double exp_off = 0.0;        // disabled by default
  double exp_alpha = 100.0;
};

inline bool needs_hessian(const LossWeights& w) {
  return w.dir_align > 0.0 ||
         (w.curv_match > 0.0 && w.curv_mode != CurvMode::off);
}

struct LossBreakdown {
  double eikonal = 0.0;
  double dirichlet_on = 0.0;
  double dirichlet_off = 0.0;
  double neumann = 0.0;
  double dir_align = 0.0;
  double curv_match = 0.0;
  double exp_off = 0.0;
  double total = 0.0;
  int neumann_skipped = 0;
  int curv_skipped = 0;
  int dir_eligible = 0;
  bool dir_align_empty = false;
};

namespace lossdetail {

inline double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// Adjoint of one probe (value, gradient, packed Hessian).
struct ProbeAdjoint {
  double f = 0.0;
  Vec3 g = Vec3::Zero();
  Sym6 s = Sym6::Zero();
};

// Principal curvatures and the leading direction of the network level set,
// with all intermediates retained so the exact reverse chain can be replayed.
// Mirrors curvatures(): two-sided tangent restriction of H/|g|, closed-form
// 2x2 eigenstructure.
class TangentReduction {
 public:
  explicit TangentReduction(const ImplicitProbe& p) : hess_(p.hessian) {
    r_ = p.gradient.norm();
    n_ = p.gradient / r_;
    k_ = 0;
    if (std::abs(n_[1]) < std::abs(n_[k_])) k_ = 1;
    if (std::abs(n_[2]) < std::abs(n_[k_])) k_ = 2;
    u_ = Vec3::Unit(k_) - n_[k_] * n_;
    un_ = u_.norm();
    t1_ = u_ / un_;
    t2_ = n_.cross(t1_);
    ht1_ = hess_ * t1_;
    ht2_ = hess_ * t2_;
    m11_ = t1_.dot(ht1_) / r_;
    m22_ = t2_.dot(ht2_) / r_;
    m12_ = 0.5 * (t1_.dot(ht2_) + t2_.dot(ht1_)) / r_;
    mu_ = 0.5 * (m11_ + m22_);
    dh_ = 0.5 * (m11_ - m22_);
    rad_ = std::hypot(dh_, m12_);
    phi_ = 0.5 * std::atan2(m12_, dh_);
    cphi_ = std::cos(phi_);
    sphi_ = std::sin(phi_);
  }

  double kappa1() const { return mu_ + rad_; }
  double kappa2() const { return mu_ - rad_; }
  Vec3 e1() const { return cphi_ * t1_ + sphi_ * t2_; }
  bool near_umbilic() const {
    return 2.0 * rad_ <= kUmbilicRelTol *
                             std::max(1.0, std::abs(kappa1()) +
                                               std::abs(kappa2()));
  }

  // Accumulates d(loss)/d(gradient, Hessian) given adjoints of kappa1,
  // kappa2 and e1.
  void backward(double k1_bar, double k2_bar, const Vec3& e1_bar,
                ProbeAdjoint& adj) const {
    const double mu_bar = k1_bar + k2_bar;
    double dh_bar = 0.0, off_bar = 0.0;
    if (rad_ > 0.0) {
      const double rad_bar = k1_bar - k2_bar;
      dh_bar += rad_bar * dh_ / rad_;
      off_bar += rad_bar * m12_ / rad_;
    }

    Vec3 t1_bar = Vec3::Zero(), t2_bar = Vec3::Zero();
    if (e1_bar.squaredNorm() > 0.0) {
      t1_bar += cphi_ * e1_bar;
      t2_bar += sphi_ * e1_bar;
      const double phi_bar = e1_bar.dot(-sphi_ * t1_ + cphi_ * t2_);
      const double denom = rad_ * rad_;
      if (denom > 0.0) {
        off_bar += phi_bar * 0.5 * dh_ / denom;
        dh_bar -= phi_bar * 0.5 * m12_ / denom;
      }
    }

    const double m11_bar = 0.5 * mu_bar + 0.5 * dh_bar;
    const double m22_bar = 0.5 * mu_bar - 0.5 * dh_bar;
    const double m12_bar = off_bar;

    t1_bar += (2.0 * m11_bar * ht1_ + m12_bar * ht2_) / r_;
    t2_bar += (2.0 * m22_bar * ht2_ + m12_bar * ht1_) / r_;
    Mat3 h_raw = (m11_bar * t1_ * t1_.transpose() +
                  m22_bar * t2_ * t2_.transpose() +
                  0.5 * m12_bar *
                      (t1_ * t2_.transpose() + t2_ * t1_.transpose())) /
                 r_;
    double r_bar = -(m11_bar * m11_ + m22_bar * m22_ + m12_bar * m12_) / r_;

    // t2 = n x t1
    Vec3 n_bar = t1_.cross(t2_bar);
    t1_bar += t2_bar.cross(n_);
    // t1 = u / |u|
    const Vec3 u_bar = (t1_bar - t1_ * t1_.dot(t1_bar)) / un_;
    // u = e_k - n_k n
    n_bar += -n_[k_] * u_bar;
    n_bar[k_] += -u_bar.dot(n_);
    // n = g / r
    adj.g += (n_bar - n_ * n_.dot(n_bar)) / r_ + r_bar * n_;
    adj.s += sym_adjoint(h_raw);
  }

 private:
  Mat3 hess_;
  double r_;
  Vec3 n_;
  int k_;
  Vec3 u_, t1_, t2_, ht1_, ht2_;
  double un_, m11_, m22_, m12_, mu_, dh_, rad_, phi_, cphi_, sphi_;
};

// Mean curvature of the level set through the divergence identity,
// H = tr(H)/(2r) - g^T H g/(2 r^3), with its reverse chain.
inline double mean_curv_head(const ImplicitProbe& p, ProbeAdjoint* adj,
                             double out_bar) {
  const double r = p.gradient.norm();
  const double tr = p.hessian.trace();
  const Vec3 hg = p.hessian * p.gradient;
  const double q = p.gradient.dot(hg);
  const double r3 = r * r * r;
  const double h = 0.5 * tr / r - 0.5 * q / r3;
  if (adj && out_bar != 0.0) {
    const double dr = -0.5 * tr / (r * r) + 1.5 * q / (r3 * r);
    adj->g += out_bar * (dr * (p.gradient / r) - (1.0 / r3) * hg);
    const Mat3 h_raw =
        out_bar * (0.5 / r * Mat3::Identity() -
                   0.5 / r3 * p.gradient * p.gradient.transpose());
    adj->s += sym_adjoint(h_raw);
  }
  return h;
}

// Per-point admissibility, shared between the value and gradient passes.
}  // namespace lossdetail

// -------- term values over probe arrays --------

inline double eikonal_term(const std::vector<ImplicitProbe>& probes) {
  if (probes.empty()) return 0.0;
  double sum = 0.0;
  for (const ImplicitProbe& p : probes) {
    sum += std::abs(1.0 - p.gradient.norm());
  }
  return sum / static_cast<double>(probes.size());
}

inline std::pair<double, double> dirichlet_terms(
    const std::vector<ImplicitProbe>& on,
    const std::vector<ImplicitProbe>& off,
    const std::vector<double>& off_targets) {
  double son = 0.0, soff = 0.0;
  for (const ImplicitProbe& p : on) son += std::abs(p.value);
  for (std::size_t i = 0; i < off.size(); ++i) {
    soff += std::abs(off[i].value - off_targets[i]);
  }
  return {on.empty() ? 0.0 : son / static_cast<double>(on.size()),
          off.empty() ? 0.0 : soff / static_cast<double>(off.size())};
}

inline double neumann_term(const std::vector<ImplicitProbe>& on,
                           const std::vector<Vec3>& normals,
                           int* skipped = nullptr) {
  double sum = 0.0;
  int used = 0;
  for (std::size_t i = 0; i < on.size(); ++i) {
    const double r = on[i].gradient.norm();
    if (r <= kGradEps) continue;
    sum += 1.0 - on[i].gradient.dot(normals[i]) / r;
    ++used;
  }
  if (skipped) *skipped = static_cast<int>(on.size()) - used;
  if (!on.empty() && used == 0) {
    throw NumericalError("normal alignment: every gradient vanished");
  }
  return used > 0 ? sum / used : 0.0;
}

// Alignment of the level set's maximum-curvature direction with ground
// truth, restricted to points flagged anisotropic whose network curvature is
// itself resolvable (excluded points leave both numerator and denominator).
inline double direction_alignment_term(const std::vector<ImplicitProbe>& on,
                                       const std::vector<Vec3>& gt_e1,
                                       const std::vector<std::uint8_t>& region,
                                       int* eligible = nullptr,
                                       bool* empty = nullptr) {
  double sum = 0.0;
  int used = 0;
  for (std::size_t i = 0; i < on.size(); ++i) {
    if (!region[i]) continue;
    if (on[i].gradient.norm() <= kGradEps) continue;
    const lossdetail::TangentReduction red(on[i]);
    if (red.near_umbilic()) continue;
    const double d = red.e1().dot(gt_e1[i]);
    sum += 1.0 - d * d;
    ++used;
  }
  if (eligible) *eligible = used;
  if (empty) *empty = (used == 0);
  return used > 0 ? sum / used : 0.0;
}

inline double curvature_match_term(const std::vector<ImplicitProbe>& on,
                                   const std::vector<double>& gt_k1,
                                   const std::vector<double>& gt_k2,
                                   CurvMode mode, int* skipped = nullptr) {
  if (mode == CurvMode::off) {
    if (skipped) *skipped = 0;
    return 0.0;
  }
  double sum = 0.0;
  int used = 0;
  for (std::size_t i = 0; i < on.size(); ++i) {
    if (on[i].gradient.norm() <= kGradEps) continue;
    if (mode == CurvMode::principal) {
      const lossdetail::TangentReduction red(on[i]);
      sum += std::abs(red.kappa1() - gt_k1[i]) +
             std::abs(red.kappa2() - gt_k2[i]);
    } else {
      const double h = lossdetail::mean_curv_head(on[i], nullptr, 0.0);
      sum += std::abs(h - 0.5 * (gt_k1[i] + gt_k2[i]));
    }
    ++used;
  }
  if (skipped) *skipped = static_cast<int>(on.size()) - used;
  return used > 0 ? sum / used : 0.0;
}

inline double exp_off_term(const std::vector<ImplicitProbe>& off,
                           double alpha) {
  if (off.empty()) return 0.0;
  double sum = 0.0;
  for (const ImplicitProbe& p : off) sum += std::exp(-alpha * std::abs(p.value));
  return sum / static_cast<double>(off.size());
}

// -------- batched evaluation against a network --------

namespace lossdetail {

inline constexpr int kChunk = 256;

struct BatchForward {
  std::vector<JetWorkspace> on_ws, off_ws;
  std::vector<ImplicitProbe> on, off;
};

inline void forward_minibatch(const SineMlp& net, const Minibatch& batch,
                              bool hessian_on, BatchForward& bf) {
  const int m = static_cast<int>(batch.on.size());
  const int m_off = static_cast<int>(batch.off.size());
  bf.on.resize(static_cast<std::size_t>(m));
  bf.off.resize(static_cast<std::size_t>(m_off));
  bf.on_ws.resize(static_cast<std::size_t>((m + kChunk - 1) / kChunk));
  bf.off_ws.resize(static_cast<std::size_t>((m_off + kChunk - 1) / kChunk));

  for (int c = 0, lo = 0; lo < m; ++c, lo += kChunk) {
    const int hi = std::min(m, lo + kChunk);
    MatX pts(3, hi - lo);
    for (int i = lo; i < hi; ++i) {
      pts.col(i - lo) = batch.on[static_cast<std::size_t>(i)].point;
    }
    JetWorkspace& ws = bf.on_ws[static_cast<std::size_t>(c)];
    forward_jets(net, pts, hessian_on, ws);
    for (int i = lo; i < hi; ++i) {
      bf.on[static_cast<std::size_t>(i)] = probe_from_jets(ws, i - lo);
    }
  }
  for (int c = 0, lo = 0; lo < m_off; ++c, lo += kChunk) {
    const int hi = std::min(m_off, lo + kChunk);
    MatX pts(3, hi - lo);
    for (int i = lo; i < hi; ++i) {
      pts.col(i - lo) = batch.off[static_cast<std::size_t>(i)].point;
    }
    JetWorkspace& ws = bf.off_ws[static_cast<std::size_t>(c)];
    forward_jets(net, pts, false, ws);
    for (int i = lo; i < hi; ++i) {
      bf.off[static_cast<std::size_t>(i)] = probe_from_jets(ws, i - lo);
    }
  }
}

struct BatchColumns {
  std::vector<Vec3> normals, e1;
  std::vector<double> k1, k2, off_sdf;
  std::vector<std::uint8_t> region;
};

inline BatchColumns split_columns(const Minibatch& batch) {
  BatchColumns c;
  c.normals.reserve(batch.on.size());
  c.e1.reserve(batch.on.size());
  for (const OnSample& s : batch.on) {
    c.normals.push_back(s.normal);
    c.e1.push_back(s.e1);
    c.k1.push_back(s.kappa1);
    c.k2.push_back(s.kappa2);
    c.region.push_back(s.region_e ? 1 : 0);
  }
  for (const OffSample& s : batch.off) c.off_sdf.push_back(s.sdf);
  return c;
}

inline LossBreakdown evaluate_terms(const BatchForward& bf,
                                    const BatchColumns& cols,
                                    const LossWeights& w) {
  LossBreakdown bd;
  // eikonal runs over the concatenation of both point sets
  double eik_sum = 0.0;
  for (const ImplicitProbe& p : bf.on) {
    eik_sum += std::abs(1.0 - p.gradient.norm());
  }
  for (const ImplicitProbe& p : bf.off) {
    eik_sum += std::abs(1.0 - p.gradient.norm());
  }
  const std::size_t n_eik = bf.on.size() + bf.off.size();
  bd.eikonal = n_eik > 0 ? eik_sum / static_cast<double>(n_eik) : 0.0;

  std::tie(bd.dirichlet_on, bd.dirichlet_off) =
      dirichlet_terms(bf.on, bf.off, cols.off_sdf);
  bd.neumann = neumann_term(bf.on, cols.normals, &bd.neumann_skipped);
  if (w.dir_align > 0.0) {
    bd.dir_align = direction_alignment_term(bf.on, cols.e1, cols.region,
                                            &bd.dir_eligible,
                                            &bd.dir_align_empty);
  }
  if (w.curv_match > 0.0 && w.curv_mode != CurvMode::off) {
    bd.curv_match = curvature_match_term(bf.on, cols.k1, cols.k2, w.curv_mode,
                                         &bd.curv_skipped);
  }
  if (w.exp_off > 0.0) bd.exp_off = exp_off_term(bf.off, w.exp_alpha);

  bd.total = w.eikonal * bd.eikonal + w.dirichlet_on * bd.dirichlet_on +
             w.dirichlet_off * bd.dirichlet_off + w.neumann * bd.neumann +
             w.dir_align * bd.dir_align + w.curv_match * bd.curv_match +
             w.exp_off * bd.exp_off;
  return bd;
}

}  // namespace lossdetail

inline LossBreakdown total_loss(const SineMlp& net, const Minibatch& batch,
                                const LossWeights& w) {
  lossdetail::BatchForward bf;
  lossdetail::forward_minibatch(net, batch, needs_hessian(w), bf);
  return lossdetail::evaluate_terms(bf, lossdetail::split_columns(batch), w);
}

// Breakdown plus d(total)/d(parameters). The reported breakdown is computed
// by the same code as total_loss on the same forward pass.
inline std::pair<LossBreakdown, ParamTangent> loss_param_gradient(
    const SineMlp& net, const Minibatch& batch, const LossWeights& w) {
  using lossdetail::ProbeAdjoint;
  using lossdetail::sgn;

  const bool hess_on = needs_hessian(w);
  lossdetail::BatchForward bf;
  lossdetail::forward_minibatch(net, batch, hess_on, bf);
  const lossdetail::BatchColumns cols = lossdetail::split_columns(batch);
  const LossBreakdown bd = lossdetail::evaluate_terms(bf, cols, w);

  const int m = static_cast<int>(bf.on.size());
  const int m_off = static_cast<int>(bf.off.size());
  const std::size_t n_eik = bf.on.size() + bf.off.size();
  const double c_eik = n_eik > 0 ? w.eikonal / static_cast<double>(n_eik) : 0.0;
  const double c_don = m > 0 ? w.dirichlet_on / m : 0.0;
  const double c_doff = m_off > 0 ? w.dirichlet_off / m_off : 0.0;
  const int neu_used = m - bd.neumann_skipped;
  const double c_neu = neu_used > 0 ? w.neumann / neu_used : 0.0;
  const double c_dir =
      bd.dir_eligible > 0 ? w.dir_align / bd.dir_eligible : 0.0;
  const int curv_used = m - bd.curv_skipped;
  const double c_curv =
      (w.curv_match > 0.0 && w.curv_mode != CurvMode::off && curv_used > 0)
          ? w.curv_match / curv_used
          : 0.0;
  const double c_exp = m_off > 0 ? w.exp_off / m_off : 0.0;

  ParamTangent grad = ParamTangent::zeros_like(net);

  const auto seed_eikonal = [&](const ImplicitProbe& p, ProbeAdjoint& adj) {
    const double r = p.gradient.norm();
    if (r <= kGradEps) return;  // kinked at the origin, keep a zero seed
    adj.g += c_eik * (-sgn(1.0 - r)) * (p.gradient / r);
  };

  // on-surface chunks
  for (std::size_t c = 0; c < bf.on_ws.size(); ++c) {
    const JetWorkspace& ws = bf.on_ws[c];
    const int comps = ws.comps;
    MatX seed = MatX::Zero(1, static_cast<Eigen::Index>(comps) * ws.batch);
    for (int b = 0; b < ws.batch; ++b) {
      const int i = static_cast<int>(c) * lossdetail::kChunk + b;
      const ImplicitProbe& p = bf.on[static_cast<std::size_t>(i)];
      ProbeAdjoint adj;
      seed_eikonal(p, adj);
      adj.f += c_don * sgn(p.value);
      const double r = p.gradient.norm();
      if (r > kGradEps) {
        const Vec3& gtn = cols.normals[static_cast<std::size_t>(i)];
        const Vec3 n = p.gradient / r;
        adj.g += c_neu * (-(gtn - n * n.dot(gtn)) / r);

        if (c_curv > 0.0) {
          if (w.curv_mode == CurvMode::mean) {
            const double h = lossdetail::mean_curv_head(p, nullptr, 0.0);
            const double h_gt = 0.5 * (cols.k1[static_cast<std::size_t>(i)] +
                                       cols.k2[static_cast<std::size_t>(i)]);
            lossdetail::mean_curv_head(p, &adj, c_curv * sgn(h - h_gt));
          } else {
            const lossdetail::TangentReduction red(p);
            const double k1b =
                c_curv * sgn(red.kappa1() - cols.k1[static_cast<std::size_t>(i)]);
            const double k2b =
                c_curv * sgn(red.kappa2() - cols.k2[static_cast<std::size_t>(i)]);
            red.backward(k1b, k2b, Vec3::Zero(), adj);
          }
        }
        if (c_dir > 0.0 && cols.region[static_cast<std::size_t>(i)]) {
          const lossdetail::TangentReduction red(p);
          if (!red.near_umbilic()) {
            const Vec3& gt = cols.e1[static_cast<std::size_t>(i)];
            const Vec3 e1 = red.e1();
            const Vec3 e1_bar = c_dir * (-2.0 * e1.dot(gt)) * gt;
            red.backward(0.0, 0.0, e1_bar, adj);
          }
        }
      }
      seed(0, b * comps) = adj.f;
      for (int k = 0; k < 3; ++k) seed(0, b * comps + 1 + k) = adj.g[k];
      if (comps == jet::kFull) {
        for (int k = 0; k < 6; ++k) seed(0, b * comps + 4 + k) = adj.s[k];
      }
    }
    backprop_jets(net, ws, seed, grad);
  }

  // off-surface chunks
  for (std::size_t c = 0; c < bf.off_ws.size(); ++c) {
    const JetWorkspace& ws = bf.off_ws[c];
    const int comps = ws.comps;
    MatX seed = MatX::Zero(1, static_cast<Eigen::Index>(comps) * ws.batch);
    for (int b = 0; b < ws.batch; ++b) {
      const int i = static_cast<int>(c) * lossdetail::kChunk + b;
      const ImplicitProbe& p = bf.off[static_cast<std::size_t>(i)];
      ProbeAdjoint adj;
      seed_eikonal(p, adj);
      adj.f += c_doff * sgn(p.value - cols.off_sdf[static_cast<std::size_t>(i)]);
      if (c_exp > 0.0) {
        const double e = std::exp(-w.exp_alpha * std::abs(p.value));
        adj.f += c_exp * (-w.exp_alpha * sgn(p.value)) * e;
      }
      seed(0, b * comps) = adj.f;
      for (int k = 0; k < 3; ++k) seed(0, b * comps + 1 + k) = adj.g[k];
    }
    backprop_jets(net, ws, seed, grad);
  }

  return {bd, grad};
}

}  // namespace nsdf
