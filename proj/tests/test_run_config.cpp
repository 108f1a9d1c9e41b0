#include <doctest.h>

#include <fstream>

#include "fixtures.hpp"
#include "specwave/error.hpp"
#include "specwave/run_config.hpp"

using namespace specwave;

TEST_CASE("defaults resolve to valid objects")
{
  const RunConfig rc;
  CHECK(rc.grid() == Grid2D{});
  CHECK(rc.scene().kind == scenes::SceneKind::waveguide);
  CHECK(rc.schedule().points().size() == 16);
  const auto tc = rc.train_config();
  CHECK(tc.epochs == 200);
  CHECK(tc.batch_size == 32);
  CHECK(tc.lr == 0.002);
  CHECK(tc.lr_min == 0.00001);
  CHECK(tc.trained_wavelengths == rc.schedule().points());
  const auto m = rc.model(rc.grid(), 6.0);
  CHECK(m.channels == 32);
  CHECK(m.eps_max == 6.0);
  CHECK(rc.get("eval.lambda") == "4.1e-07");
}

TEST_CASE("unknown keys are rejected in every layer")
{
  RunConfig rc;
  CHECK_THROWS_AS(rc.apply(KeyValues::parse("model.chanels=8\n"), "file"), InvalidArgument);
  CHECK_THROWS_AS(rc.set("bogus", "1"), InvalidArgument);
  CHECK_THROWS_AS(KeyValues::parse("a=1\na=2\n"), InvalidArgument);
}

TEST_CASE("later layers override earlier ones")
{
  RunConfig rc;
  rc.apply(KeyValues::parse("# file layer\ntrain.epochs=50\nmodel.channels=16\n"), "file");
  rc.apply(KeyValues::parse("train.epochs=7\n"), "flags");
  CHECK(rc.train_config().epochs == 7);
  CHECK(rc.model(rc.grid(), 6.0).channels == 16);
  CHECK(rc.train_config().batch_size == 32);
}

TEST_CASE("resolved copy reproduces the configuration")
{
  testing::TempDir tmp("specwave_test_run_config");
  RunConfig rc;
  rc.set("gen.count", "17");
  rc.set("schedule.step", "6e-08");
  rc.save(tmp.path / "resolved.cfg", "gen");
  RunConfig again;
  again.apply(KeyValues::load(tmp.path / "resolved.cfg"), "resolved");
  CHECK(again.values().str() == rc.values().str());
  CHECK(again.generate_options().count == 17);
}

TEST_CASE("list and size parsing")
{
  CHECK(parse_grid_size("64x32") == std::pair<int, int>{64, 32});
  CHECK_THROWS_AS(parse_grid_size("64"), InvalidArgument);
  CHECK_THROWS_AS(parse_grid_size("ax4"), InvalidArgument);
  CHECK(parse_number_list("k", "0.5, 1") == std::vector<double>{0.5, 1.0});
  RunConfig rc;
  rc.set("bench.batch", "1,2.5");
  CHECK_THROWS_AS(rc.integers("bench.batch"), InvalidArgument);
}

TEST_CASE("value validation")
{
  RunConfig rc;
  rc.set("sim.fd_order", "sixth");
  CHECK_THROWS_AS(rc.sim(), InvalidArgument);
  rc = RunConfig{};
  rc.set("gen.count", "0");
  CHECK_THROWS_AS(rc.generate_options(), InvalidArgument);
  rc = RunConfig{};
  rc.set("model.groups", "5");
  CHECK_THROWS_AS(rc.model(rc.grid(), 6.0), InvalidArgument);
  rc = RunConfig{};
  rc.set("threads", "-1");
  CHECK_THROWS_AS(rc.threads(), InvalidArgument);
  rc = RunConfig{};
  rc.set("train.epochs", "many");
  CHECK_THROWS_AS(rc.train_config(), InvalidArgument);
}
