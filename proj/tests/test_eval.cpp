#include <doctest.h>

#include <cmath>
#include <fstream>
#include <set>

#include "fixtures.hpp"
#include "specwave/error.hpp"
#include "specwave/eval.hpp"
#include "specwave/metrics.hpp"
#include "specwave/scenes.hpp"

using namespace specwave;
using namespace specwave::eval;
using specwave::testing::small_dataset;
using specwave::testing::small_model;
using specwave::testing::trained_wavelengths;

namespace
{

const Predictor identity = [](const data::Dataset &ds, const data::Record &r) { return data::field(ds, r); };

/// Half the target: NMSE 0.25 on every sample and region.
const Predictor halved = [](const data::Dataset &ds, const data::Record &r) {
  auto f = data::field(ds, r);
  for (auto &v : f.values)
  {
    v *= 0.5;
  }
  return f;
};

data::Dataset mixed_set()
{
  data::Dataset ds = small_dataset(false, 6, 31);
  for (const auto &r : small_dataset(true, 5, 32).records)
  {
    ds.records.push_back(r);
  }
  return ds;
}

}  // namespace

TEST_CASE("identity predictor scores zero")
{
  const auto &one = small_dataset(false, 1, 30);
  const auto rep = evaluate(identity, one, trained_wavelengths(), Region::all);
  REQUIRE(rep.rows.size() == 1);
  CHECK(rep.rows[0].mean == 0.0);
  CHECK(rep.nmse_all[0] == 0.0);
  CHECK(rep.nmse_design[0] == 0.0);
  CHECK(rep.trained.count == 1);
  CHECK(rep.untrained.count == 0);
}

TEST_CASE("rows follow distinct wavelengths and aggregates recompute from them")
{
  const auto ds = mixed_set();
  const nn::Parameters<float> params = nn::init_params<float>(small_model());
  const auto rep = evaluate(params, ds, trained_wavelengths(), Region::all);
  CHECK(rep.rows.size() == data::wavelength_histogram(ds).size());
  std::size_t total = 0;
  double trained_sum = 0.0;
  double untrained_sum = 0.0;
  for (std::size_t i = 0; i < rep.rows.size(); ++i)
  {
    const auto &row = rep.rows[i];
    total += row.count;
    (row.trained ? trained_sum : untrained_sum) += row.mean * static_cast<double>(row.count);
    if (i > 0)
    {
      CHECK(row.wavelength > rep.rows[i - 1].wavelength);
    }
  }
  CHECK(total == ds.size());
  CHECK(rep.trained.count + rep.untrained.count == ds.size());
  CHECK(rep.trained.count == 6);
  CHECK(rep.trained.mean_all == doctest::Approx(trained_sum / 6.0).epsilon(1e-12));
  CHECK(rep.untrained.mean_all == doctest::Approx(untrained_sum / 5.0).epsilon(1e-12));
}

TEST_CASE("per-record values match the metric directly")
{
  const auto ds = mixed_set();
  const auto rep = evaluate(halved, ds, trained_wavelengths(), Region::design);
  for (std::size_t i = 0; i < ds.size(); ++i)
  {
    CHECK(rep.nmse_all[i] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(rep.nmse_design[i] == doctest::Approx(0.25).epsilon(1e-12));
  }
  const nn::Parameters<float> params = nn::init_params<float>(small_model());
  const auto model_rep = evaluate(params, ds, trained_wavelengths(), Region::design);
  const auto pred = model_predictor(params);
  const auto &r = ds.records[3];
  CHECK(model_rep.nmse_design[3] == doctest::Approx(nmse(pred(ds, r), data::field(ds, r), r.design_box)));
}

TEST_CASE("design region equals whole domain when the box covers the grid")
{
  data::Dataset ds = small_dataset(true, 3, 33);
  for (auto &r : ds.records)
  {
    r.design_box = Box::whole(ds.grid);
  }
  const nn::Parameters<float> params = nn::init_params<float>(small_model());
  const auto all = evaluate(params, ds, trained_wavelengths(), Region::all);
  const auto design = evaluate(params, ds, trained_wavelengths(), Region::design);
  REQUIRE(all.rows.size() == design.rows.size());
  for (std::size_t i = 0; i < all.rows.size(); ++i)
  {
    CHECK(all.rows[i].mean == design.rows[i].mean);
  }
  CHECK(all.untrained.mean_all == design.untrained.mean_design);
}

TEST_CASE("evaluation is reproducible and thread independent")
{
  const auto ds = mixed_set();
  const nn::Parameters<float> params = nn::init_params<float>(small_model());
  const auto a = evaluate(params, ds, trained_wavelengths(), Region::all, 0.5e-9, 1);
  const auto b = evaluate(params, ds, trained_wavelengths(), Region::all, 0.5e-9, 3);
  CHECK(a.nmse_all == b.nmse_all);
  CHECK(a.nmse_design == b.nmse_design);
}

TEST_CASE("grid mismatch is rejected")
{
  nn::ModelConfig cfg = small_model();
  cfg.grid = Grid2D{32, 32, 25e-9, 25e-9};
  CHECK_THROWS_AS(evaluate(nn::init_params<float>(cfg), small_dataset(true, 3, 33), trained_wavelengths(),
                           Region::all),
                  ShapeMismatch);
}

TEST_CASE("sweep rows, bands and markers")
{
  const auto ds = mixed_set();
  const auto rep = evaluate(halved, ds, trained_wavelengths(), Region::all);
  const auto rows = sweep(rep);
  REQUIRE(rows.size() == rep.rows.size());
  std::size_t markers = 0;
  double weighted = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < rows.size(); ++i)
  {
    if (i > 0)
    {
      CHECK(rows[i].wavelength > rows[i - 1].wavelength);
    }
    CHECK(rows[i].band_lo == doctest::Approx(rows[i].mean - 2.0 * rows[i].std));
    CHECK(rows[i].band_hi == doctest::Approx(rows[i].mean + 2.0 * rows[i].std));
    markers += rows[i].trained ? 1 : 0;
    weighted += rows[i].mean * static_cast<double>(rows[i].count);
    count += rows[i].count;
  }
  const std::set<double> distinct_trained = [&] {
    std::set<double> s;
    for (const auto &r : rep.rows)
    {
      if (r.trained)
      {
        s.insert(r.wavelength);
      }
    }
    return s;
  }();
  CHECK(markers == distinct_trained.size());
  const double overall =
      (rep.trained.mean_all * rep.trained.count + rep.untrained.mean_all * rep.untrained.count) / count;
  CHECK(weighted / count == doctest::Approx(overall).epsilon(1e-12));
  const std::vector<double> expected{400e-9, 10e-6};
  CHECK_THROWS_AS(sweep(rep, expected), InvalidArgument);
}

TEST_CASE("sweep over a fixed-structure dense set marks every trained wavelength")
{
  data::GenerateOptions o;
  o.schedule = data::WavelengthSchedule{400e-9, 700e-9, 30e-9, data::ScheduleMode::dense_grid};
  o.count = 11;
  o.fixed_structures = true;
  o.threads = 1;
  const auto ds = data::generate_dataset(o).dataset;
  const auto rep = evaluate(halved, ds, trained_wavelengths(), Region::all);
  const auto rows = sweep(rep, o.schedule.points());
  CHECK(rows.size() == 11);
  std::size_t markers = 0;
  for (const auto &r : rows)
  {
    markers += r.trained ? 1 : 0;
  }
  CHECK(markers == trained_wavelengths().size());
}

TEST_CASE("error map examples")
{
  const auto &ds = small_dataset(true, 1, 34);
  const auto &r = ds.records[0];
  const auto target = data::field(ds, r);
  const auto exact = error_map(target, target, r.design_box);
  for (unsigned char px : exact.render())
  {
    REQUIRE(px == 0);
  }
  const auto pred = model_predictor(nn::init_params<float>(small_model()))(ds, r);
  const auto map = error_map(pred, target, r.design_box);
  REQUIRE(map.abs_error.size() == ds.grid.cells());
  for (float v : map.abs_error)
  {
    REQUIRE(v >= 0.0f);
  }
  const auto img = map.render();
  CHECK(img[map.argmax()] == 255);
  CHECK(std::abs(map.abs_error[100] - static_cast<float>(std::abs(pred.values[100] - target.values[100]))) < 1e-6f);

  testing::TempDir tmp("specwave_test_eval");
  write_error_map(tmp.path / "map", map);
  std::ifstream pgm(tmp.path / "map.pgm", std::ios::binary);
  std::string magic;
  std::getline(pgm, magic);
  CHECK(magic == "P5");
  std::string comment;
  std::getline(pgm, comment);
  CHECK(comment.rfind("# design_box", 0) == 0);
  CHECK(std::filesystem::file_size(tmp.path / "map.f32") == 4 * ds.grid.cells());
}

TEST_CASE("report csv lists one row per wavelength")
{
  testing::TempDir tmp("specwave_test_eval_csv");
  const auto ds = mixed_set();
  const auto rep = evaluate(halved, ds, trained_wavelengths(), Region::all);
  write_report_csv(tmp.path / "report.csv", rep);
  std::ifstream in(tmp.path / "report.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "wavelength_nm,count,trained,region,nmse_mean,nmse_std");
  std::size_t rows = 0;
  while (std::getline(in, line))
  {
    rows += line.rfind("#", 0) == 0 ? 0 : 1;
  }
  CHECK(rows == rep.rows.size());
}

TEST_CASE("bench reports one row per batch size plus the solver")
{
  const auto params = nn::init_params<float>(small_model());
  scenes::SceneParams sp;
  const std::vector<PermittivityMap> structures{scenes::generate(sp)};
  BenchOptions opts;
  opts.trials = 3;
  opts.warmup = 1;
  fdfd::SimSettings sim;
  const auto res = bench(params, structures, sim, fdfd::default_source(sim.pml), opts);
  REQUIRE(res.model.size() == 2);
  CHECK(res.model[0].batch == 1);
  CHECK(res.model[1].batch == 32);
  CHECK(res.solver.seconds_per_sample > 0.0);
  for (std::size_t i = 0; i < res.model.size(); ++i)
  {
    CHECK(res.model[i].seconds_per_sample > 0.0);
    CHECK(res.speedup(i) == doctest::Approx(res.solver.seconds_per_sample / res.model[i].seconds_per_sample));
  }
  CHECK_FALSE(res.hardware.empty());
}

TEST_CASE("solver cost grows faster than the cell count")
{
  scenes::SceneParams small;
  scenes::SceneParams large;
  large.grid = Grid2D{128, 128, 25e-9, 25e-9};
  const fdfd::SimSettings sim;
  const double t64 = fdfd::bench_solve_seconds(scenes::generate(small), 500e-9, sim, 3, 1);
  const double t128 = fdfd::bench_solve_seconds(scenes::generate(large), 500e-9, sim, 3, 1);
  CHECK(t128 / t64 > 4.0);
}

TEST_CASE("dataset-size study trains one model per fraction")
{
  const auto &train_ds = small_dataset(false, 8, 21);
  const auto &val_ds = small_dataset(true, 4, 22);
  const auto tc = testing::short_training(2);
  const std::vector<double> fractions{0.5, 1.0};
  const auto rows = dataset_size_study(small_model(), tc, train_ds, val_ds, val_ds, fractions);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].train_count == 4);
  CHECK(rows[1].train_count == 8);
  const auto plain = train::train(small_model(), train_ds, val_ds, tc);
  const auto rep = evaluate(plain.best, val_ds, tc.trained_wavelengths, Region::all);
  CHECK(rows[1].untrained_all == rep.untrained.mean_all);
  CHECK(rows[1].best_val == plain.best_val);
  const std::vector<double> bad{0.01};
  CHECK_THROWS_AS(dataset_size_study(small_model(), tc, train_ds, val_ds, val_ds, bad), InvalidArgument);
}
