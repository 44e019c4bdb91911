#include <gtest/gtest.h>

#include <filesystem>

#include "bvsr/flow.hpp"
#include "bvsr/metrics.hpp"
#include "support/synthetic.hpp"

using namespace bvsr;
using bvsr::testing::AnalyticTexture;

namespace {

std::pair<double, double> interior_mean(const FlowField& f, int margin) {
  double su = 0.0, sv = 0.0;
  int n = 0;
  for (int y = margin; y < f.height() - margin; ++y)
    for (int x = margin; x < f.width() - margin; ++x) {
      su += f.u(y, x);
      sv += f.v(y, x);
      ++n;
    }
  return {su / n, sv / n};
}

Frame crop(const Frame& f, int margin) {
  Frame out(f.height() - 2 * margin, f.width() - 2 * margin, f.channels());
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x)
      for (int c = 0; c < f.channels(); ++c) out.at(y, x, c) = f.at(y + margin, x + margin, c);
  return out;
}

}  // namespace

TEST(Luminance, Weights) {
  Frame f(1, 1, 3, std::vector<double>{1.0, 0.5, 0.25});
  EXPECT_NEAR(luminance(f).at(0, 0), 0.299 + 0.587 * 0.5 + 0.114 * 0.25, 1e-15);
}

TEST(EstimateFlow, IdenticalFramesGiveZeroFlow) {
  const Frame f = AnalyticTexture(1).render(64, 64);
  const FlowField flow = estimate_flow(f, f);
  EXPECT_EQ(flow.height(), 64);
  EXPECT_EQ(flow.width(), 64);
  EXPECT_LE(flow.max_magnitude(), 1e-3);
}

TEST(EstimateFlow, RecoversIntegerShift) {
  const Frame target = AnalyticTexture(2).render(96, 96);
  const Frame source = warp(target, FlowField(96, 96, 2.0, 0.0));
  const auto [u, v] = interior_mean(estimate_flow(target, source), 12);
  EXPECT_NEAR(u, -2.0, 0.25);
  EXPECT_NEAR(v, 0.0, 0.25);
}

TEST(EstimateFlow, RecoversHalfPixelShift) {
  const Frame target = AnalyticTexture(3).render(96, 96);
  const Frame source = warp(target, FlowField(96, 96, 0.5, 0.0));
  const auto [u, v] = interior_mean(estimate_flow(target, source), 12);
  EXPECT_NEAR(u, -0.5, 0.25);
  EXPECT_NEAR(v, 0.0, 0.25);
}

TEST(EstimateFlow, RecoversVerticalAnalyticShift) {
  AnalyticTexture tex(4);
  const Frame target = tex.render(96, 96);
  const Frame source = tex.render(96, 96, -1.5, 0.0);  // content moved down by 1.5
  const auto [u, v] = interior_mean(estimate_flow(target, source), 12);
  EXPECT_NEAR(u, 0.0, 0.25);
  EXPECT_NEAR(v, 1.5, 0.25);
}

TEST(EstimateFlow, Errors) {
  EXPECT_THROW(estimate_flow(Frame(8, 8, 1), Frame(8, 9, 1)), DimensionError);
  FlowConfig cfg;
  cfg.pyramid_levels = 0;
  EXPECT_THROW(estimate_flow(Frame(8, 8, 1), Frame(8, 8, 1), cfg), ConfigError);
  cfg = {};
  cfg.smoothness_weight = 0.0;
  EXPECT_THROW(estimate_flow(Frame(8, 8, 1), Frame(8, 8, 1), cfg), ConfigError);
}

TEST(AlignGuides, StaticWindowGivesBicubicReference) {
  const Frame lr = AnalyticTexture(5).render(24, 24);
  const AlignedGuides g = align_guides(lr, lr, lr, 2);
  const Frame up = bicubic_resize(lr, 2);
  EXPECT_EQ(g.prev, up);
  EXPECT_EQ(g.next, up);
  EXPECT_EQ(g.reference, up);
  EXPECT_EQ(g.flow_prev.height(), 48);
}

TEST(AlignGuides, GlobalShiftIsCompensated) {
  AnalyticTexture tex(6);
  const Frame ref = tex.render(48, 48);
  const Frame prev = tex.render(48, 48, 0.0, -1.0);
  const Frame next = tex.render(48, 48, 0.5, 1.0);
  const AlignedGuides g = align_guides(prev, ref, next, 2);
  const Frame up = bicubic_resize(ref, 2);
  EXPECT_GE(psnr(crop(g.prev, 8), crop(up, 8)), 35.0);
  EXPECT_GE(psnr(crop(g.next, 8), crop(up, 8)), 35.0);
}

TEST(AlignGuides, ScaleOneIsEstimatePlusWarp) {
  AnalyticTexture tex(7);
  const Frame ref = tex.render(32, 32), prev = tex.render(32, 32, 0.3, 0.7), next = tex.render(32, 32, -0.4, 0.2);
  const AlignedGuides g = align_guides(prev, ref, next, 1);
  EXPECT_EQ(g.prev, warp(prev, estimate_flow(ref, prev)));
  EXPECT_EQ(g.next, warp(next, estimate_flow(ref, next)));
  const AlignedGuides again = align_guides(prev, ref, next, 1);
  EXPECT_EQ(again.prev, g.prev);
}

TEST(FloFile, RoundTripAndRejection) {
  const auto dir = std::filesystem::temp_directory_path() / "bvsr_flo_test";
  std::filesystem::create_directories(dir);
  FlowField f(3, 4);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 4; ++x) {
      f.u(y, x) = 0.25 * x - y;
      f.v(y, x) = 1.5 * y;
    }
  save_flo(dir / "a.flo", f);
  EXPECT_EQ(std::filesystem::file_size(dir / "a.flo"), 12u + 3 * 4 * 8);
  const FlowField g = load_flo(dir / "a.flo");
  EXPECT_EQ(g.u_data(), f.u_data());
  EXPECT_EQ(g.v_data(), f.v_data());
  std::ofstream(dir / "bad.flo", std::ios::binary) << "PIEH";
  EXPECT_THROW(load_flo(dir / "bad.flo"), IoError);
  std::filesystem::remove_all(dir);
}
