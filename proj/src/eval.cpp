#include "specwave/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <thread>

#include "specwave/binio.hpp"
#include "specwave/error.hpp"
#include "specwave/metrics.hpp"

namespace specwave::eval
{

std::string to_string(Region r)
{
  return r == Region::all ? "all" : "design";
}

Region parse_region(const std::string &name)
{
  if (name == "all")
  {
    return Region::all;
  }
  if (name == "design")
  {
    return Region::design;
  }
  throw InvalidArgument("unknown region '" + name + "' (expected all or design)");
}

Predictor model_predictor(const nn::Parameters<float> &params)
{
  auto net = std::make_shared<const nn::Network<float>>(params.config);
  auto values = std::make_shared<const std::vector<float>>(params.values);
  return [net, values](const data::Dataset &ds, const data::Record &r) {
    if (!(ds.grid == net->config().grid))
    {
      throw ShapeMismatch("dataset grid does not match the model grid");
    }
    return nn::predict(*net, *values, data::permittivity(ds, r), r.wavelength);
  };
}

namespace
{

struct Stats
{
  double mean = 0.0;
  double std = 0.0;
};

Stats stats(const std::vector<double> &v)
{
  Stats s;
  if (v.empty())
  {
    return s;
  }
  for (double x : v)
  {
    s.mean += x;
  }
  s.mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v)
  {
    var += (x - s.mean) * (x - s.mean);
  }
  s.std = std::sqrt(var / static_cast<double>(v.size()));
  return s;
}

}  // namespace

MetricsReport evaluate(const Predictor &predict, const data::Dataset &ds, std::span<const double> trained,
                       Region region, double tol, int threads)
{
  MetricsReport rep;
  rep.region = region;
  const std::size_t n = ds.size();
  rep.nmse_all.resize(n);
  rep.nmse_design.resize(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++)
    {
      const auto &r = ds.records[i];
      const ComplexField pred = predict(ds, r);
      const ComplexField target = data::field(ds, r);
      rep.nmse_all[i] = nmse(pred, target);
      rep.nmse_design[i] = nmse(pred, target, r.design_box);
    }
  };
  const int workers = std::clamp(threads, 1, static_cast<int>(std::max<std::size_t>(n, 1)));
  if (workers == 1)
  {
    work();
  }
  else
  {
    std::vector<std::jthread> pool;
    for (int t = 0; t < workers; ++t)
    {
      pool.emplace_back(work);
    }
  }

  const data::Split split = data::split_by_wavelength(ds, trained, tol);
  std::vector<bool> is_trained(n, false);
  for (std::size_t i : split.trained)
  {
    is_trained[i] = true;
  }

  std::map<double, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i)
  {
    groups[std::round(ds.records[i].wavelength * 1e12) / 1e12].push_back(i);
  }
  const auto &chosen = region == Region::all ? rep.nmse_all : rep.nmse_design;
  for (const auto &[wl, idx] : groups)
  {
    std::vector<double> v;
    for (std::size_t i : idx)
    {
      v.push_back(chosen[i]);
    }
    const Stats s = stats(v);
    rep.rows.push_back({wl, idx.size(), static_cast<bool>(is_trained[idx.front()]), s.mean, s.std});
  }

  for (std::size_t i = 0; i < n; ++i)
  {
    Aggregate &a = is_trained[i] ? rep.trained : rep.untrained;
    ++a.count;
    a.mean_all += rep.nmse_all[i];
    a.mean_design += rep.nmse_design[i];
  }
  for (Aggregate *a : {&rep.trained, &rep.untrained})
  {
    if (a->count > 0)
    {
      a->mean_all /= static_cast<double>(a->count);
      a->mean_design /= static_cast<double>(a->count);
    }
  }
  return rep;
}

MetricsReport evaluate(const nn::Parameters<float> &params, const data::Dataset &ds, std::span<const double> trained,
                       Region region, double tol, int threads)
{
  if (!(params.config.grid == ds.grid))
  {
    throw ShapeMismatch("model grid " + std::to_string(params.config.grid.nx) + "x" +
                        std::to_string(params.config.grid.nz) + " does not match dataset grid " +
                        std::to_string(ds.grid.nx) + "x" + std::to_string(ds.grid.nz));
  }
  return evaluate(model_predictor(params), ds, trained, region, tol, threads);
}

namespace
{

std::ofstream open_out(const std::filesystem::path &path)
{
  if (path.has_parent_path())
  {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out)
  {
    throw InvalidArgument("cannot write '" + path.string() + "'");
  }
  out.precision(10);
  return out;
}

}  // namespace

void write_report_csv(const std::filesystem::path &path, const MetricsReport &report)
{
  auto out = open_out(path);
  out << "wavelength_nm,count,trained,region,nmse_mean,nmse_std\n";
  for (const auto &r : report.rows)
  {
    out << data::wavelength_key(r.wavelength) << ',' << r.count << ',' << (r.trained ? 1 : 0) << ','
        << to_string(report.region) << ',' << r.mean << ',' << r.std << '\n';
  }
  out << "# trained_count=" << report.trained.count << " trained_all=" << report.trained.mean_all
      << " trained_design=" << report.trained.mean_design << '\n';
  out << "# untrained_count=" << report.untrained.count << " untrained_all=" << report.untrained.mean_all
      << " untrained_design=" << report.untrained.mean_design << '\n';
}

std::vector<SweepRow> sweep(const MetricsReport &report, const std::optional<std::vector<double>> &expected)
{
  if (report.rows.empty())
  {
    throw InvalidArgument("sweep over an empty dataset");
  }
  if (expected)
  {
    for (double wl : *expected)
    {
      const bool found = std::any_of(report.rows.begin(), report.rows.end(),
                                     [&](const WavelengthRow &r) { return std::abs(r.wavelength - wl) < 1e-13; });
      if (!found)
      {
        throw InvalidArgument("no samples at " + data::wavelength_key(wl) + " nm");
      }
    }
  }
  std::vector<SweepRow> rows;
  for (const auto &r : report.rows)
  {
    rows.push_back({r.wavelength, r.count, r.mean, r.std, r.mean - 2.0 * r.std, r.mean + 2.0 * r.std, r.trained});
  }
  return rows;
}

void write_sweep_csv(const std::filesystem::path &path, std::span<const SweepRow> rows)
{
  auto out = open_out(path);
  out << "wavelength_nm,count,nmse_mean,nmse_std,band_lo,band_hi,trained\n";
  for (const auto &r : rows)
  {
    out << data::wavelength_key(r.wavelength) << ',' << r.count << ',' << r.mean << ',' << r.std << ','
        << r.band_lo << ',' << r.band_hi << ',' << (r.trained ? 1 : 0) << '\n';
  }
}

std::size_t ErrorMap::argmax() const
{
  return static_cast<std::size_t>(std::max_element(abs_error.begin(), abs_error.end()) - abs_error.begin());
}

std::vector<unsigned char> ErrorMap::render() const
{
  std::vector<unsigned char> img(abs_error.size(), 0);
  const float peak = abs_error.empty() ? 0.0f : abs_error[argmax()];
  if (!(peak > 0.0f))
  {
    return img;
  }
  for (std::size_t c = 0; c < img.size(); ++c)
  {
    img[c] = static_cast<unsigned char>(std::lround(255.0 * abs_error[c] / peak));
  }
  return img;
}

ErrorMap error_map(const ComplexField &prediction, const ComplexField &target, const Box &design_box)
{
  if (!(prediction.grid == target.grid))
  {
    throw ShapeMismatch("prediction and target grids differ");
  }
  ErrorMap m;
  m.grid = target.grid;
  m.design_box = design_box;
  m.abs_error.resize(target.values.size());
  for (std::size_t c = 0; c < m.abs_error.size(); ++c)
  {
    m.abs_error[c] = static_cast<float>(std::abs(prediction.values[c] - target.values[c]));
  }
  return m;
}

void write_error_map(const std::filesystem::path &stem, const ErrorMap &map)
{
  std::filesystem::path pgm = stem, raw = stem;
  pgm += ".pgm";
  raw += ".f32";
  const auto img = map.render();
  {
    auto out = open_out(pgm);
    out << "P5\n# design_box " << map.design_box.i0 << ' ' << map.design_box.k0 << ' ' << map.design_box.i1 << ' '
        << map.design_box.k1 << "\n# max_abs_error " << (map.abs_error.empty() ? 0.0f : map.abs_error[map.argmax()])
        << '\n'
        << map.grid.nz << ' ' << map.grid.nx << "\n255\n";
    out.write(reinterpret_cast<const char *>(img.data()), static_cast<std::streamsize>(img.size()));
  }
  binio::Writer w;
  for (float v : map.abs_error)
  {
    w.put(v);
  }
  binio::write_file(raw, w.bytes());
}

std::string hardware_descriptor()
{
  std::string model = "unknown cpu";
  std::ifstream cpu("/proc/cpuinfo");
  std::string line;
  while (std::getline(cpu, line))
  {
    if (line.rfind("model name", 0) == 0)
    {
      const auto colon = line.find(':');
      if (colon != std::string::npos)
      {
        model = line.substr(colon + 2);
      }
      break;
    }
  }
  return model + " (" + std::to_string(std::thread::hardware_concurrency()) + " hw threads, 1 used)";
}

namespace
{

struct TimedJob
{
  BenchRow row;
  std::function<void()> run;
};

/// Calibrates repetitions per job, then runs the trials round-robin so slow
/// drifts in machine load hit every job alike. Fills each row with the
/// median per-sample time.
void time_interleaved(std::vector<TimedJob> &jobs, const BenchOptions &opts)
{
  using clock = std::chrono::steady_clock;
  for (auto &job : jobs)
  {
    for (int w = 0; w < opts.warmup; ++w)
    {
      job.run();
    }
    job.row.reps = 1;
    for (;;)
    {
      const auto t0 = clock::now();
      for (int r = 0; r < job.row.reps; ++r)
      {
        job.run();
      }
      const double dt = std::chrono::duration<double>(clock::now() - t0).count();
      if (dt >= opts.min_trial_seconds || job.row.reps >= (1 << 20))
      {
        break;
      }
      job.row.reps *= 2;
    }
  }
  const int trials = std::max(opts.trials, 1);
  std::vector<std::vector<double>> times(jobs.size());
  for (int t = 0; t < trials; ++t)
  {
    for (std::size_t j = 0; j < jobs.size(); ++j)
    {
      const auto t0 = clock::now();
      for (int r = 0; r < jobs[j].row.reps; ++r)
      {
        jobs[j].run();
      }
      times[j].push_back(std::chrono::duration<double>(clock::now() - t0).count() /
                         (jobs[j].row.reps * jobs[j].row.batch));
    }
  }
  for (std::size_t j = 0; j < jobs.size(); ++j)
  {
    auto &v = times[j];
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size();
    jobs[j].row.seconds_per_sample = m % 2 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
    jobs[j].row.trials = static_cast<int>(m);
  }
}

}  // namespace

BenchResult bench(const nn::Parameters<float> &params, std::span<const PermittivityMap> structures,
                  const fdfd::SimSettings &sim, const fdfd::SourceSpec &source, const BenchOptions &opts)
{
  if (structures.empty())
  {
    throw InvalidArgument("bench needs at least one structure");
  }
  for (const auto &s : structures)
  {
    if (!(s.grid == params.config.grid))
    {
      throw ShapeMismatch("bench structure grid does not match the model grid");
    }
  }
  BenchResult res;
  res.hardware = hardware_descriptor();
  const nn::Network<float> net(params.config);
  nn::Tape<float> tape;
  std::vector<float> out;
  std::vector<TimedJob> jobs;
  std::size_t next_model = 0;
  for (int b : opts.batch_sizes)
  {
    if (b < 1)
    {
      throw InvalidArgument("batch sizes must be positive");
    }
    jobs.push_back({BenchRow{"model", b}, [&, b] {
                      for (int s = 0; s < b; ++s)
                      {
                        const auto &eps = structures[next_model++ % structures.size()];
                        net.forward(params.values, nn::Input{eps.eps, opts.wavelength}, tape);
                        out.assign(tape.output.begin(), tape.output.end());
                      }
                    }});
  }
  std::size_t next_solver = 0;
  jobs.push_back({BenchRow{"solver", 1}, [&] {
                    const auto &eps = structures[next_solver++ % structures.size()];
                    (void)fdfd::simulate(eps, opts.wavelength, source, sim);
                  }});
  time_interleaved(jobs, opts);
  for (std::size_t j = 0; j + 1 < jobs.size(); ++j)
  {
    res.model.push_back(jobs[j].row);
  }
  res.solver = jobs.back().row;
  return res;
}

void write_bench_txt(const std::filesystem::path &path, const BenchResult &r)
{
  auto out = open_out(path);
  out << "hardware=" << r.hardware << '\n';
  for (std::size_t i = 0; i < r.model.size(); ++i)
  {
    const auto &m = r.model[i];
    out << "model_batch" << m.batch << "_seconds_per_sample=" << m.seconds_per_sample << '\n';
    out << "model_batch" << m.batch << "_trials=" << m.trials << '\n';
    out << "model_batch" << m.batch << "_reps=" << m.reps << '\n';
    out << "speedup_batch" << m.batch << '=' << r.speedup(i) << '\n';
  }
  out << "solver_seconds_per_sample=" << r.solver.seconds_per_sample << '\n';
  out << "solver_trials=" << r.solver.trials << '\n';
}

std::vector<StudyRow> dataset_size_study(const nn::ModelConfig &cfg, const train::TrainConfig &tc,
                                         const data::Dataset &train_ds, const data::Dataset &val_ds,
                                         const data::Dataset &test_ds, std::span<const double> fractions)
{
  if (fractions.empty())
  {
    throw InvalidArgument("no dataset fractions given");
  }
  std::vector<double> trained = tc.trained_wavelengths;
  if (trained.empty())
  {
    for (const auto &[wl, n] : data::wavelength_histogram(train_ds))
    {
      trained.push_back(wl);
    }
  }
  std::vector<StudyRow> rows;
  for (double f : fractions)
  {
    const data::Dataset part = data::take_fraction(train_ds, f);
    train::TrainConfig run = tc;
    run.trained_wavelengths = trained;
    const train::TrainResult tr = train::train(cfg, part, val_ds, run);
    const MetricsReport rep = evaluate(tr.best, test_ds, trained, Region::all, tc.split_tol, tc.threads);
    rows.push_back({f, part.size(), rep.trained.mean_all, rep.trained.mean_design, rep.untrained.mean_all,
                    rep.untrained.mean_design, tr.best_val});
  }
  return rows;
}

void write_study_csv(const std::filesystem::path &path, std::span<const StudyRow> rows)
{
  auto out = open_out(path);
  out << "fraction,train_count,trained_all,trained_design,untrained_all,untrained_design,best_val\n";
  for (const auto &r : rows)
  {
    out << r.fraction << ',' << r.train_count << ',' << r.trained_all << ',' << r.trained_design << ','
        << r.untrained_all << ',' << r.untrained_design << ',' << r.best_val << '\n';
  }
}

}  // namespace specwave::eval
