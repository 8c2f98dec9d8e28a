#include "nsdf/render.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "test_util.hpp"

using namespace nsdf;

namespace {

// wraps a field and tracks the lowest value the tracer ever saw
class RecordingField : public ImplicitField {
 public:
  explicit RecordingField(const ImplicitField& base) : base_(base) {}
  double value(const Vec3& p) const override {
    const double v = base_.value(p);
    min_seen = std::min(min_seen, v);
    return v;
  }
  ImplicitProbe probe(const Vec3& p) const override { return base_.probe(p); }
  mutable double min_seen = std::numeric_limits<double>::infinity();

 private:
  const ImplicitField& base_;
};

class ConstantField : public ImplicitField {
 public:
  explicit ConstantField(double v) : v_(v) {}
  double value(const Vec3&) const override { return v_; }
  ImplicitProbe probe(const Vec3&) const override {
    ImplicitProbe p;
    p.value = v_;
    return p;  // zero gradient
  }

 private:
  double v_;
};

TEST(TraceTest, AxialRayHitsUnitSphereAtMinusOne) {
  const SphereSurface sphere(1.0);
  RenderConfig cfg;
  const TraceResult tr =
      sphere_trace(sphere, Vec3(0, 0, -3), Vec3(0, 0, 1), cfg);
  ASSERT_TRUE(tr.hit);
  EXPECT_NEAR(tr.t, 2.0, cfg.eps_hit);
  EXPECT_LT((tr.point - Vec3(0, 0, -1)).norm(), cfg.eps_hit);
}

TEST(TraceTest, PerpendicularRayMisses) {
  const SphereSurface sphere(1.0);
  RenderConfig cfg;
  EXPECT_FALSE(sphere_trace(sphere, Vec3(0, 0, -3), Vec3(0, 1, 0), cfg).hit);
}

TEST(TraceTest, AxialRayThroughTorusHoleMisses) {
  const TorusSurface torus(2.0, 0.5);
  RenderConfig cfg;
  const TraceResult tr =
      sphere_trace(torus, Vec3(0, 0, -5), Vec3(0, 0, 1), cfg);
  EXPECT_FALSE(tr.hit);
}

TEST(TraceTest, NeverOvershootsExactDistanceFields) {
  const SphereSurface sphere(1.0);
  const TorusSurface torus(0.6, 0.25);
  RenderConfig cfg;  // undamped step for exact fields
  std::mt19937_64 rng(9);
  for (const ImplicitField* f :
       {static_cast<const ImplicitField*>(&sphere),
        static_cast<const ImplicitField*>(&torus)}) {
    RecordingField rec(*f);
    for (int i = 0; i < 5000; ++i) {
      const Vec3 origin = 3.0 * testutil::random_unit(rng);
      const Vec3 dir = testutil::random_unit(rng);
      sphere_trace(rec, origin, dir, cfg);
    }
    EXPECT_GE(rec.min_seen, -cfg.eps_hit);
  }
}

TEST(ShadeTest, WardHandValues) {
  const Vec3 n = Vec3::UnitZ(), v1 = Vec3::UnitX(), v2 = Vec3::UnitY();
  // N = l = v puts the half vector on the normal: exp(0) survives
  EXPECT_NEAR(ward_specular(n, v1, v2, n, n, 0.5, 0.5), 1.0 / M_PI, 1e-12);
  EXPECT_NEAR(ward_specular(n, v1, v2, n, n, 0.2, 0.5),
              1.0 / (4.0 * M_PI * 0.2 * 0.5), 1e-12);
  // light below the horizon contributes nothing
  EXPECT_EQ(ward_specular(n, v1, v2, -n, n, 0.5, 0.5), 0.0);
}

TEST(ShadeTest, WardSymmetricUnderFrameSwap) {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 30; ++i) {
    const Vec3 n = testutil::random_unit(rng);
    Vec3 t1, t2;
    tangent_basis(n, t1, t2);
    Vec3 l = (n + 0.4 * testutil::random_unit(rng)).normalized();
    Vec3 v = (n + 0.4 * testutil::random_unit(rng)).normalized();
    if (l.dot(n) <= 0.0 || v.dot(n) <= 0.0) continue;
    const double a = ward_specular(n, t1, t2, l, v, 0.2, 0.7);
    const double b = ward_specular(n, t2, t1, l, v, 0.7, 0.2);
    EXPECT_NEAR(a, b, 1e-15 + 1e-12 * std::abs(a));
  }
}

TEST(ShadeTest, TransferEndpointsAndLinearity) {
  EXPECT_EQ(transfer_color(-5.0, -1.0, 1.0), Color(0, 0, 1));
  EXPECT_EQ(transfer_color(5.0, -1.0, 1.0), Color(1, 0, 0));
  EXPECT_EQ(transfer_color(0.0, -1.0, 1.0), Color(1, 1, 1));
  EXPECT_LT((transfer_color(-0.5, -1.0, 1.0) - Color(0.5, 0.5, 1.0)).norm(),
            1e-15);
  EXPECT_LT((transfer_color(0.5, -1.0, 1.0) - Color(1.0, 0.5, 0.5)).norm(),
            1e-15);
}

Camera front_camera(int res = 128) {
  Camera cam;
  cam.position = Vec3(0, 0, -3);
  cam.look_at = Vec3::Zero();
  cam.width = cam.height = res;
  return cam;
}

TEST(RenderTest, EmptySceneIsAllBackground) {
  const ConstantField one(1.0);
  RenderConfig cfg;
  cfg.background = Color(0.2, 0.0, 0.4);
  RenderStats st;
  const Image img = render(one, front_camera(32), cfg, &st);
  EXPECT_EQ(st.hits, 0);
  for (const Color& c : img.pixels) EXPECT_EQ(c, cfg.background);
}

TEST(RenderTest, ZeroFieldHitsAreDegenerate) {
  const ConstantField zero(0.0);
  RenderConfig cfg;
  RenderStats st;
  const Image img = render(zero, front_camera(16), cfg, &st);
  EXPECT_EQ(st.hits, 16 * 16);
  EXPECT_EQ(st.degenerate_hits, 16 * 16);
  for (const Color& c : img.pixels) EXPECT_EQ(c, cfg.background);
}

TEST(RenderTest, GaussianModeUniformOnSphere) {
  const SphereSurface sphere(1.0);
  RenderConfig cfg;
  cfg.mode = ShadeMode::gaussian;
  cfg.transfer_lo = 0.0;
  cfg.transfer_hi = 2.0;  // K = 1 lands exactly mid-scale
  RenderStats st;
  const Image img = render(sphere, front_camera(64), cfg, &st);
  ASSERT_GT(st.hits, 0);
  // hit points land within eps_hit of the surface, so K = 1/r^2 carries
  // an O(eps_hit) error into the color
  for (const Color& c : img.pixels) {
    if (c == cfg.background) continue;
    EXPECT_LT((c - Color(1, 1, 1)).cwiseAbs().maxCoeff(), 10.0 * cfg.eps_hit);
  }
}

TEST(RenderTest, MeanModeMidColorOnPlane) {
  const PlaneSurface plane;
  RenderConfig cfg;
  cfg.mode = ShadeMode::mean;  // H = 0 inside the symmetric default range
  Camera cam;
  cam.position = Vec3(0.3, 0.4, 2.5);
  cam.look_at = Vec3(0, 0, 0);
  cam.width = cam.height = 32;
  RenderStats st;
  const Image img = render(plane, cam, cfg, &st);
  ASSERT_GT(st.hits, 0);
  for (const Color& c : img.pixels) {
    if (c == cfg.background) continue;
    EXPECT_LT((c - Color(1, 1, 1)).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(RenderTest, SilhouetteMatchesPinholeProjection) {
  const SphereSurface sphere(1.0);
  const Camera cam = front_camera(256);
  RenderConfig cfg;
  RenderStats st;
  const Image img = render(sphere, cam, cfg, &st);
  ASSERT_GT(st.hits, 0);

  double max_r = 0.0;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      if (img.at(x, y) == cfg.background) continue;
      const double dx = x + 0.5 - 0.5 * img.width;
      const double dy = y + 0.5 - 0.5 * img.height;
      max_r = std::max(max_r, std::hypot(dx, dy));
    }
  }
  // a sphere of radius 1 at distance 3: silhouette cone tangent
  // tan(theta) = 1/sqrt(8), image half-height tan(fov/2) maps to 128 px
  const double expect_r = std::tan(std::asin(1.0 / 3.0)) /
                          std::tan(0.5 * cam.fov_deg * M_PI / 180.0) * 128.0;
  EXPECT_NEAR(max_r, expect_r, 1.0);
}

TEST(RenderTest, DeterministicImages) {
  const TorusSurface torus(0.6, 0.25);
  RenderConfig cfg;
  cfg.mode = ShadeMode::ward;
  const Camera cam = front_camera(48);
  const Image a = render(torus, cam, cfg);
  const Image b = render(torus, cam, cfg);
  ASSERT_EQ(a.pixels.size(), b.pixels.size());
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    EXPECT_EQ(a.pixels[i], b.pixels[i]);
  }
}

TEST(RenderTest, PpmBytesExact) {
  Image img;
  img.width = 2;
  img.height = 2;
  img.pixels = {Color(0, 0, 0), Color(1, 1, 1), Color(0.5, 0, 1),
                Color(2.0, -1.0, 0.25)};  // out-of-range values clamp
  const std::string path =
      (std::filesystem::temp_directory_path() / "nsdf_render_test.ppm")
          .string();
  write_ppm(path, img);
  std::ifstream in(path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string bytes = buf.str();
  const std::string header = "P6\n2 2\n255\n";
  ASSERT_EQ(bytes.size(), header.size() + 12);
  EXPECT_EQ(bytes.substr(0, header.size()), header);
  const auto px = reinterpret_cast<const unsigned char*>(
      bytes.data() + header.size());
  const unsigned char want[12] = {0,   0, 0,  255, 255, 255,
                                  128, 0, 255, 255, 0,   64};
  for (int i = 0; i < 12; ++i) EXPECT_EQ(px[i], want[i]);
  std::filesystem::remove(path);
}

TEST(RenderTest, ValidationRejectsBadSetups) {
  const SphereSurface sphere(1.0);
  Camera cam = front_camera();
  cam.width = 0;
  EXPECT_THROW(render(sphere, cam, RenderConfig{}), ConfigError);
  cam = front_camera();
  cam.up = Vec3(0, 0, 2);  // collinear with the view direction
  EXPECT_THROW(render(sphere, cam, RenderConfig{}), ConfigError);
  cam = front_camera();
  cam.fov_deg = 0.0;
  EXPECT_THROW(render(sphere, cam, RenderConfig{}), ConfigError);

  RenderConfig cfg;
  cfg.eps_hit = 0.0;
  EXPECT_THROW(render(sphere, front_camera(), cfg), ConfigError);
  cfg = RenderConfig{};
  cfg.ward_alpha1 = 0.0;
  EXPECT_THROW(render(sphere, front_camera(), cfg), ConfigError);
  cfg = RenderConfig{};
  cfg.transfer_lo = 1.0;
  cfg.transfer_hi = 1.0;
  EXPECT_THROW(render(sphere, front_camera(), cfg), ConfigError);
}

}  // namespace
