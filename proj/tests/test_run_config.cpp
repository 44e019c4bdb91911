#include <gtest/gtest.h>

#include <sstream>

#include "bvsr/run_config.hpp"

using namespace bvsr;

TEST(RunConfig, DefaultsResolveToModuleDefaults) {
  const RunConfig rc;
  EXPECT_EQ(rc.scale(), 4);
  EXPECT_EQ(rc.bit_depth(), 8);
  const PipelineConfig p = rc.pipeline();
  EXPECT_EQ(p.solver.gamma, 0.02);
  EXPECT_EQ(p.solver.cg_tolerance, 1e-6);
  EXPECT_EQ(p.solver.cg_max_iters, 200);
  EXPECT_EQ(p.estimator.kernel_size, 15);
  EXPECT_EQ(p.estimator.init_sigma, 2.0);
  EXPECT_EQ(p.flow.pyramid_levels, 4);
  EXPECT_EQ(p.restorer, RestorerKind::confidence_fusion);
  const DegradationConfig d = rc.degradation();
  EXPECT_EQ(d.kernel.size(), 15);
  EXPECT_EQ(d.noise_std, 0.0);
}

TEST(RunConfig, LoadsFileWithCommentsAndOverrides) {
  RunConfig rc;
  std::istringstream is("# comment\n\nscale = 2\nsolver.gamma=0.1  # trailing\n");
  rc.load(is);
  rc.set_assignment("estimator.mode = fc-net");
  EXPECT_EQ(rc.scale(), 2);
  EXPECT_EQ(rc.solver().gamma, 0.1);
  EXPECT_EQ(rc.estimator().mode, EstimatorMode::fc_net);
}

TEST(RunConfig, RejectsUnknownKeysAndBadValues) {
  RunConfig rc;
  EXPECT_THROW(rc.set("solver.gama", "1"), ConfigError);
  EXPECT_THROW(rc.set_assignment("no equals sign"), ConfigError);
  std::istringstream bad("scale = 2\nbogus = 1\n");
  try {
    rc.load(bad, "run.cfg");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("run.cfg:2"), std::string::npos);
  }
  rc.set("scale", "two");
  EXPECT_THROW(rc.scale(), ConfigError);
  rc.set("scale", "0");
  EXPECT_THROW(rc.scale(), ConfigError);
  rc.set("scale", "4");
  rc.set("solver.warm_start", "maybe");
  EXPECT_THROW(rc.solver(), ConfigError);
  rc.set("solver.warm_start", "true");
  rc.set("estimator.kernel_size", "14");
  EXPECT_THROW(rc.estimator(), ConfigError);
  rc.set("estimator.kernel_size", "15");
  rc.set("pipeline.restorer", "external");
  EXPECT_THROW(rc.pipeline(), ConfigError);
  rc.set("io.bit_depth", "12");
  EXPECT_THROW(rc.bit_depth(), ConfigError);
}

TEST(RunConfig, WriteRoundTrips) {
  RunConfig a;
  a.set("seed", "42");
  a.set("flow.smoothness_weight", "7.5");
  std::ostringstream os;
  a.write(os);
  RunConfig b;
  std::istringstream is(os.str());
  b.load(is);
  std::ostringstream os2;
  b.write(os2);
  EXPECT_EQ(os.str(), os2.str());
  EXPECT_EQ(b.get_int("seed"), 42);
}
