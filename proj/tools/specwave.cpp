#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "specwave/binio.hpp"
#include "specwave/checkpoint.hpp"
#include "specwave/dataset.hpp"
#include "specwave/error.hpp"
#include "specwave/eval.hpp"
#include "specwave/rng.hpp"
#include "specwave/run_config.hpp"
#include "specwave/training.hpp"
#include "specwave/wave_prior.hpp"

namespace fs = std::filesystem;
using namespace specwave;

namespace
{

constexpr int kExitUsage = 2;
constexpr int kExitGeneration = 3;
constexpr int kExitIncompatible = 4;

using Overrides = std::map<std::string, std::string>;

void bind_key(CLI::App *cmd, const std::string &flag, const std::string &key, Overrides &ov, const std::string &help)
{
  cmd->add_option_function<std::string>(
      flag, [&ov, key](const std::string &v) { ov[key] = v; }, help);
}

fs::path required_path(const RunConfig &rc, const std::string &key, const std::string &flag)
{
  const std::string &p = rc.get(key);
  if (p.empty())
  {
    throw InvalidArgument(flag + " is required (or set " + key + " in the config file)");
  }
  return p;
}

data::Dataset load_data(const fs::path &path)
{
  if (!fs::exists(path))
  {
    throw InvalidArgument("dataset '" + path.string() + "' does not exist");
  }
  return data::read_dataset(path);
}

nn::Parameters<float> load_model(const fs::path &path)
{
  if (!fs::exists(path))
  {
    throw InvalidArgument("checkpoint '" + path.string() + "' does not exist");
  }
  return nn::cast_params<float>(load_checkpoint(path));
}

void write_pgm(const fs::path &path, int rows, int cols, const std::vector<unsigned char> &pixels)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << "P5\n" << cols << ' ' << rows << "\n255\n";
  out.write(reinterpret_cast<const char *>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

int cmd_gen(const RunConfig &rc)
{
  const fs::path out = required_path(rc, "path.out", "--out");
  const data::GenerateOptions opts = rc.generate_options();
  data::GenerateResult res;
  try
  {
    res = data::generate_dataset(opts);
  }
  catch (const SolverError &e)
  {
    std::cerr << "generation failed: " << e.what() << '\n';
    return kExitGeneration;
  }
  for (const auto &line : res.log)
  {
    std::cerr << line << '\n';
  }
  data::write_dataset(out, res.dataset);
  data::make_manifest(opts, res).save(data::manifest_path(out));
  fs::path cfg = out;
  cfg += ".cfg";
  rc.save(cfg, "gen");
  std::cout << "wrote " << res.dataset.size() << " records to " << out.string() << " (" << res.skipped
            << " skipped)\n";
  return 0;
}

int cmd_train(const RunConfig &rc)
{
  const fs::path out = required_path(rc, "path.out", "--out");
  const data::Dataset train_ds = load_data(required_path(rc, "path.data", "--data"));
  const data::Dataset val_ds = load_data(required_path(rc, "path.val", "--val"));
  const nn::ModelConfig cfg = rc.model(train_ds.grid, std::max(train_ds.max_eps(), val_ds.max_eps()));
  const train::TrainConfig tc = rc.train_config();
  rc.save(out / "resolved.cfg", "train");
  train::TrainOutputs outputs;
  outputs.dir = out;
  outputs.on_epoch = [](const train::HistoryRow &r) {
    std::printf("epoch %4d  lr %.6f  train %.5f  val %.5f  %.1fs\n", r.epoch, r.lr, r.train_nmse,
                r.val_nmse_untrained, r.wall_seconds);
    std::fflush(stdout);
  };
  const auto res = train::train(cfg, train_ds, val_ds, tc, outputs);
  std::cout << "best epoch " << res.best_epoch << " val_nmse_untrained " << res.best_val << '\n';
  return 0;
}

int cmd_eval(const RunConfig &rc)
{
  const fs::path out = required_path(rc, "path.out", "--out");
  const auto params = load_model(required_path(rc, "path.checkpoint", "--checkpoint"));
  const data::Dataset ds = load_data(required_path(rc, "path.data", "--data"));
  const train::TrainConfig tc = rc.train_config();
  const auto region = eval::parse_region(rc.get("eval.region"));
  const auto rep = eval::evaluate(params, ds, tc.trained_wavelengths, region, tc.split_tol, rc.threads());
  rc.save(out / "resolved.cfg", "eval");
  eval::write_report_csv(out / "report.csv", rep);
  std::cout << "trained   n=" << rep.trained.count << " all=" << rep.trained.mean_all
            << " design=" << rep.trained.mean_design << '\n'
            << "untrained n=" << rep.untrained.count << " all=" << rep.untrained.mean_all
            << " design=" << rep.untrained.mean_design << '\n';
  return 0;
}

int cmd_sweep(const RunConfig &rc)
{
  const fs::path out = required_path(rc, "path.out", "--out");
  const auto params = load_model(required_path(rc, "path.checkpoint", "--checkpoint"));
  const fs::path data_path = required_path(rc, "path.data", "--data");
  const data::Dataset ds = load_data(data_path);
  const train::TrainConfig tc = rc.train_config();
  std::optional<std::vector<double>> expected;
  const fs::path mp = data::manifest_path(data_path);
  if (fs::exists(mp))
  {
    const KeyValues m = KeyValues::load(mp);
    expected = data::WavelengthSchedule{m.get_double("schedule_start"), m.get_double("schedule_end"),
                                        m.get_double("schedule_step"), data::ScheduleMode::dense_grid}
                   .points();
  }
  const auto rep = eval::evaluate(params, ds, tc.trained_wavelengths, eval::parse_region(rc.get("eval.region")),
                                  tc.split_tol, rc.threads());
  const auto rows = eval::sweep(rep, expected);
  rc.save(out / "resolved.cfg", "sweep");
  eval::write_sweep_csv(out / "sweep.csv", rows);
  std::cout << "wrote " << rows.size() << " wavelengths to " << (out / "sweep.csv").string() << '\n';
  return 0;
}

int cmd_bench(const RunConfig &rc)
{
  const fs::path out = required_path(rc, "path.out", "--out");
  scenes::SceneParams scene = rc.scene();
  nn::Parameters<float> params;
  if (!rc.get("path.checkpoint").empty())
  {
    params = load_model(rc.get("path.checkpoint"));
    scene.grid = params.config.grid;
  }
  else
  {
    params = nn::init_params<float>(rc.model(scene.grid, scene.material()));
  }
  std::vector<PermittivityMap> structures;
  const auto count = std::max<long long>(1, rc.integer("bench.structures"));
  for (long long i = 0; i < count; ++i)
  {
    scenes::SceneParams p = scene;
    p.seed = mix_seed(scene.seed, static_cast<std::uint64_t>(i));
    structures.push_back(scenes::generate(p));
  }
  eval::BenchOptions opts;
  opts.batch_sizes = rc.integers("bench.batch");
  opts.trials = static_cast<int>(rc.integer("bench.trials"));
  opts.warmup = static_cast<int>(rc.integer("bench.warmup"));
  opts.wavelength = rc.number("bench.lambda");
  if (opts.trials < 1 || opts.warmup < 0 || opts.batch_sizes.empty())
  {
    throw InvalidArgument("bench needs trials >= 1, warmup >= 0 and at least one batch size");
  }
  fdfd::SourceSpec source;
  source.z_index = scenes::source_z_index(scene);
  const auto res = eval::bench(params, structures, rc.sim(), source, opts);
  rc.save(out / "resolved.cfg", "bench");
  eval::write_bench_txt(out / "bench.txt", res);
  std::cout << "hardware: " << res.hardware << '\n';
  for (std::size_t i = 0; i < res.model.size(); ++i)
  {
    std::printf("model  batch %3d  %.6f s/sample  speedup %.1fx\n", res.model[i].batch,
                res.model[i].seconds_per_sample, res.speedup(i));
  }
  std::printf("solver batch   1  %.6f s/sample\n", res.solver.seconds_per_sample);
  return 0;
}

int cmd_prior(const RunConfig &rc)
{
  const fs::path out = required_path(rc, "path.out", "--out");
  const Grid2D g = rc.grid();
  const double wl = rc.number("eval.lambda");
  const WavePrior prior = refined_wave_prior(g, wl);
  const auto ch = prior_channels(prior);
  const char *names[4] = {"wx_re", "wx_im", "wz_re", "wz_im"};
  fs::create_directories(out);
  const std::size_t n = g.cells();
  for (int c = 0; c < 4; ++c)
  {
    std::vector<unsigned char> px(n);
    for (std::size_t i = 0; i < n; ++i)
    {
      px[i] = static_cast<unsigned char>(std::lround(127.5 * (ch[c * n + i] + 1.0)));
    }
    write_pgm(out / (std::string("prior_") + names[c] + ".pgm"), g.nx, g.nz, px);
  }
  binio::Writer w;
  for (double v : ch)
  {
    w.put(static_cast<float>(v));
  }
  binio::write_file(out / "prior.f32", w.bytes());
  rc.save(out / "resolved.cfg", "prior");
  std::printf("spectral peak x: bin %d (expected %.3f)\n", spectral_peak(prior, Axis::x), g.nx * g.dl_x / wl);
  std::printf("spectral peak z: bin %d (expected %.3f)\n", spectral_peak(prior, Axis::z), g.nz * g.dl_z / wl);
  return 0;
}

int cmd_errmap(const RunConfig &rc)
{
  const fs::path out = required_path(rc, "path.out", "--out");
  const auto params = load_model(required_path(rc, "path.checkpoint", "--checkpoint"));
  const data::Dataset ds = load_data(required_path(rc, "path.data", "--data"));
  if (ds.size() == 0)
  {
    throw InvalidArgument("dataset is empty");
  }
  if (!(params.config.grid == ds.grid))
  {
    throw ShapeMismatch("model grid does not match dataset grid");
  }
  std::size_t pick = 0;
  const long long index = rc.integer("eval.index");
  if (index >= 0)
  {
    if (static_cast<std::size_t>(index) >= ds.size())
    {
      throw InvalidArgument("eval.index out of range");
    }
    pick = static_cast<std::size_t>(index);
  }
  else
  {
    const double target = rc.number("eval.lambda");
    for (std::size_t i = 1; i < ds.size(); ++i)
    {
      if (std::abs(ds.records[i].wavelength - target) < std::abs(ds.records[pick].wavelength - target))
      {
        pick = i;
      }
    }
  }
  const auto &r = ds.records[pick];
  const auto pred = eval::model_predictor(params)(ds, r);
  const auto map = eval::error_map(pred, data::field(ds, r), r.design_box);
  eval::write_error_map(out / "errmap", map);
  rc.save(out / "resolved.cfg", "errmap");
  std::cout << "record " << pick << " at " << data::wavelength_key(r.wavelength) << " nm, max |error| "
            << map.abs_error[map.argmax()] << '\n';
  return 0;
}

int cmd_study(const RunConfig &rc)
{
  const fs::path out = required_path(rc, "path.out", "--out");
  const data::Dataset train_ds = load_data(required_path(rc, "path.data", "--data"));
  const data::Dataset val_ds = load_data(required_path(rc, "path.val", "--val"));
  const data::Dataset test_ds = load_data(required_path(rc, "path.test", "--test"));
  const nn::ModelConfig cfg = rc.model(train_ds.grid, std::max(train_ds.max_eps(), val_ds.max_eps()));
  const auto fractions = rc.numbers("study.fractions");
  const auto rows = eval::dataset_size_study(cfg, rc.train_config(), train_ds, val_ds, test_ds, fractions);
  rc.save(out / "resolved.cfg", "study");
  eval::write_study_csv(out / "study.csv", rows);
  for (const auto &r : rows)
  {
    std::printf("fraction %.3f  n=%zu  trained %.5f  untrained %.5f\n", r.fraction, r.train_count, r.trained_all,
                r.untrained_all);
  }
  return 0;
}

}  // namespace

int main(int argc, char **argv)
{
  CLI::App app{"Broadband field-surrogate toolkit: FDFD data generation, neural operator training and evaluation"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string("specwave 1.0.0 (dataset WFD1 v") +
                                        std::to_string(data::kDatasetVersion) + ", checkpoint WFC1 v" +
                                        std::to_string(kCheckpointVersion) + ")");
  std::string config_path;
  Overrides ov;
  app.add_option("--config", config_path, "key=value run configuration file");
  bind_key(&app, "--threads", "threads", ov, "worker thread cap (0 = all cores)");

  auto grid_flags = [&](CLI::App *cmd) {
    cmd->add_option_function<std::string>(
        "--grid",
        [&ov](const std::string &v) {
          std::pair<int, int> size;
          try
          {
            size = parse_grid_size(v);
          }
          catch (const InvalidArgument &e)
          {
            throw CLI::ValidationError("--grid", e.what());
          }
          const auto [h, w] = size;
          ov["grid.nx"] = std::to_string(h);
          ov["grid.nz"] = std::to_string(w);
        },
        "grid size HxW");
    cmd->add_option_function<std::string>(
        "--dl",
        [&ov](const std::string &v) {
          ov["grid.dl_x"] = v;
          ov["grid.dl_z"] = v;
        },
        "cell size in meters (both axes)");
  };
  auto seed_flag = [&](CLI::App *cmd, std::vector<std::string> keys) {
    cmd->add_option_function<std::string>(
        "--seed",
        [&ov, keys](const std::string &v) {
          for (const auto &k : keys)
          {
            ov[k] = v;
          }
        },
        "random seed");
  };

  CLI::App *gen = app.add_subcommand("gen", "generate a WFD1 dataset");
  bind_key(gen, "--scene", "scene.kind", ov, "metalens | splitter | waveguide");
  bind_key(gen, "--n", "gen.count", ov, "number of samples");
  bind_key(gen, "--wl-start", "schedule.start", ov, "first wavelength (m)");
  bind_key(gen, "--wl-end", "schedule.end", ov, "last wavelength (m)");
  bind_key(gen, "--wl-step", "schedule.step", ov, "wavelength step (m)");
  bind_key(gen, "--mode", "schedule.mode", ov, "trained_grid | dense_grid");
  grid_flags(gen);
  seed_flag(gen, {"gen.seed"});
  bind_key(gen, "--out", "path.out", ov, "output dataset file");
  gen->add_flag_callback("--fixed-structures", [&ov] { ov["gen.fixed_structures"] = "true"; },
                         "hold structures fixed across the wavelength grid");

  CLI::App *trn = app.add_subcommand("train", "train a model");
  bind_key(trn, "--data", "path.data", ov, "training dataset");
  bind_key(trn, "--val", "path.val", ov, "validation dataset");
  bind_key(trn, "--out", "path.out", ov, "output directory");
  bind_key(trn, "--epochs", "train.epochs", ov, "epochs");
  bind_key(trn, "--lr", "train.lr", ov, "peak learning rate");
  bind_key(trn, "--batch-size", "train.batch_size", ov, "batch size");
  bind_key(trn, "--conditioning", "model.conditioning", ov, "wime | concat");
  seed_flag(trn, {"train.seed", "model.seed"});

  CLI::App *ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  bind_key(ev, "--checkpoint", "path.checkpoint", ov, "WFC1 checkpoint");
  bind_key(ev, "--data", "path.data", ov, "dataset");
  bind_key(ev, "--region", "eval.region", ov, "all | design");
  bind_key(ev, "--out", "path.out", ov, "output directory");

  CLI::App *sw = app.add_subcommand("sweep", "NMSE versus wavelength on a dense dataset");
  bind_key(sw, "--checkpoint", "path.checkpoint", ov, "WFC1 checkpoint");
  bind_key(sw, "--data", "path.data", ov, "dense dataset");
  bind_key(sw, "--region", "eval.region", ov, "all | design");
  bind_key(sw, "--out", "path.out", ov, "output directory");

  CLI::App *bn = app.add_subcommand("bench", "time model inference against the FDFD solver");
  bind_key(bn, "--checkpoint", "path.checkpoint", ov, "WFC1 checkpoint (default: freshly initialized model)");
  bind_key(bn, "--batch", "bench.batch", ov, "comma-separated batch sizes");
  bind_key(bn, "--trials", "bench.trials", ov, "timed trials");
  bind_key(bn, "--warmup", "bench.warmup", ov, "untimed warm-up trials");
  bind_key(bn, "--structures", "bench.structures", ov, "distinct structures cycled through");
  grid_flags(bn);
  bind_key(bn, "--out", "path.out", ov, "output directory");

  CLI::App *pr = app.add_subcommand("prior", "render the refined wave prior");
  bind_key(pr, "--lambda", "eval.lambda", ov, "wavelength (m)");
  grid_flags(pr);
  bind_key(pr, "--out", "path.out", ov, "output directory");

  CLI::App *em = app.add_subcommand("errmap", "absolute error map for one record");
  bind_key(em, "--checkpoint", "path.checkpoint", ov, "WFC1 checkpoint");
  bind_key(em, "--data", "path.data", ov, "dataset");
  bind_key(em, "--lambda", "eval.lambda", ov, "pick the record nearest this wavelength");
  bind_key(em, "--index", "eval.index", ov, "record index (overrides --lambda)");
  bind_key(em, "--out", "path.out", ov, "output directory");

  CLI::App *st = app.add_subcommand("study", "dataset-size study");
  bind_key(st, "--data", "path.data", ov, "training dataset");
  bind_key(st, "--val", "path.val", ov, "validation dataset");
  bind_key(st, "--test", "path.test", ov, "test dataset");
  bind_key(st, "--fractions", "study.fractions", ov, "comma-separated fractions in (0, 1]");
  bind_key(st, "--out", "path.out", ov, "output directory");

  try
  {
    app.parse(argc, argv);
  }
  catch (const CLI::ParseError &e)
  {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try
  {
    RunConfig rc;
    if (!config_path.empty())
    {
      rc.apply(KeyValues::load(config_path), config_path);
    }
    KeyValues flags;
    for (const auto &[k, v] : ov)
    {
      flags.set(k, v);
    }
    rc.apply(flags, "command line");

    if (gen->parsed())
    {
      return cmd_gen(rc);
    }
    if (trn->parsed())
    {
      return cmd_train(rc);
    }
    if (ev->parsed())
    {
      return cmd_eval(rc);
    }
    if (sw->parsed())
    {
      return cmd_sweep(rc);
    }
    if (bn->parsed())
    {
      return cmd_bench(rc);
    }
    if (pr->parsed())
    {
      return cmd_prior(rc);
    }
    if (em->parsed())
    {
      return cmd_errmap(rc);
    }
    if (st->parsed())
    {
      return cmd_study(rc);
    }
  }
  catch (const ShapeMismatch &e)
  {
    std::cerr << "incompatible inputs: " << e.what() << '\n';
    return kExitIncompatible;
  }
  catch (const FormatError &e)
  {
    std::cerr << "incompatible file: " << e.what() << '\n';
    return kExitIncompatible;
  }
  catch (const SolverError &e)
  {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kExitGeneration;
  }
  catch (const InvalidArgument &e)
  {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  catch (const std::exception &e)
  {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kExitUsage;
}
