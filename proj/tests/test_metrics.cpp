#include <gtest/gtest.h>

#include <sstream>

#include "bvsr/kernel_estimator.hpp"
#include "bvsr/metrics.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace bvsr;
using bvsr::testing::AnalyticTexture;
using bvsr::testing::random_frame;

TEST(Psnr, IdenticalFramesAreInfinite) {
  const Frame a = random_frame(8, 8, 3, 1);
  EXPECT_EQ(psnr(a, a), kPsnrIdentical);
  EXPECT_TRUE(std::isinf(psnr(a, a)));
}

TEST(Psnr, UniformOffsetOfTenthGivesTwentyDb) {
  const Frame a(8, 8, 3, 0.5), b(8, 8, 3, 0.6);
  EXPECT_NEAR(psnr(a, b), 20.0, 1e-9);
}

TEST(Psnr, MatchesScalarOracleAndIsSymmetric) {
  const Frame a = random_frame(7, 9, 3, 2), b = random_frame(7, 9, 3, 3);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a.data()[i] - b.data()[i]) * (a.data()[i] - b.data()[i]);
  EXPECT_NEAR(psnr(a, b), -10.0 * std::log10(s / a.size()), 1e-12);
  EXPECT_EQ(psnr(a, b), psnr(b, a));
  EXPECT_THROW(psnr(a, Frame(7, 9, 1)), DimensionError);
}

TEST(Psnr, DecreasesWithNoiseAmplitude) {
  const Frame a = random_frame(16, 16, 1, 4);
  const Frame noise = random_frame(16, 16, 1, 5, -1.0, 1.0);
  double prev = kPsnrIdentical;
  for (double amp : {0.01, 0.02, 0.05, 0.1}) {
    Frame b = a;
    for (std::size_t i = 0; i < b.size(); ++i) b.data()[i] += amp * noise.data()[i];
    const double p = psnr(b, a);
    EXPECT_LT(p, prev);
    prev = p;
  }
}

TEST(Ssim, IdenticalFramesScoreExactlyOne) {
  const Frame a = AnalyticTexture(6).render(24, 20);
  EXPECT_EQ(ssim(a, a), 1.0);
}

TEST(Ssim, InvertedImageIsNegative) {
  const Frame a = AnalyticTexture(7).render(32, 32);
  Frame b = a;
  for (double& v : b.samples()) v = 1.0 - v;
  EXPECT_LT(ssim(a, b), 0.0);
}

TEST(Ssim, MatchesDirectWindowReference) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Frame a = random_frame(16, 18, 3, 10 + seed);
    Frame b = a;
    const Frame n = random_frame(16, 18, 3, 20 + seed, -0.1, 0.1);
    for (std::size_t i = 0; i < b.size(); ++i) b.data()[i] += n.data()[i];
    EXPECT_NEAR(ssim(a, b), oracle::ssim_reference(a, b), 1e-10);
  }
}

TEST(Ssim, Errors) {
  EXPECT_THROW(ssim(Frame(10, 20, 1), Frame(10, 20, 1)), DimensionError);
  EXPECT_THROW(ssim(Frame(12, 12, 1), Frame(12, 12, 3)), DimensionError);
}

TEST(EvaluateSequences, PerFrameAndMeans) {
  Sequence pred, truth;
  truth.push_back(Frame(12, 12, 1, 0.5));
  truth.push_back(Frame(12, 12, 1, 0.5));
  pred.push_back(Frame(12, 12, 1, 0.6));
  pred.push_back(Frame(12, 12, 1, 0.51));
  const MetricReport r = evaluate_sequences(pred, truth);
  ASSERT_EQ(r.frame_psnr.size(), 2u);
  EXPECT_NEAR(r.frame_psnr[0], 20.0, 1e-9);
  EXPECT_NEAR(r.frame_psnr[1], 40.0, 1e-9);
  EXPECT_NEAR(r.psnr_db, 30.0, 1e-9);
  Sequence shorter;
  shorter.push_back(Frame(12, 12, 1));
  EXPECT_THROW(evaluate_sequences(shorter, truth), DimensionError);
}

TEST(KernelAccuracy, TrueKernelIsExactAndWrongKernelIsWorse) {
  const BlurKernel truth_k = gaussian_kernel(7, 1.0);
  Sequence hr, lr;
  for (int i = 0; i < 2; ++i) {
    hr.push_back(AnalyticTexture(30 + i).render(48, 48));
    lr.push_back(sk_forward(hr[i], truth_k, 2));
  }
  EXPECT_EQ(kernel_accuracy(hr, lr, truth_k, 2).psnr_db, kPsnrIdentical);
  const double near = kernel_accuracy(hr, lr, gaussian_kernel(7, 1.1), 2).psnr_db;
  const double far = kernel_accuracy(hr, lr, gaussian_kernel(7, 2.0), 2).psnr_db;
  EXPECT_GT(near, far);
}

TEST(ReportCsv, Layout) {
  MetricReport r;
  r.frame_psnr = {kPsnrIdentical, 30.5};
  r.frame_ssim = {1.0, 0.25};
  r.psnr_db = kPsnrIdentical;
  r.ssim = 0.625;
  std::ostringstream os;
  write_report_csv(os, r);
  EXPECT_EQ(os.str(),
            "frame,psnr_db,ssim\n0,inf,1.000000\n1,30.500000,0.250000\nmean,inf,0.625000\n");
}
