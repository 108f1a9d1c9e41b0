#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <thread>

#include "specwave/binio.hpp"
#include "specwave/checkpoint.hpp"
#include "specwave/dataset.hpp"
#include "specwave/eval.hpp"
#include "specwave/fdfd.hpp"
#include "specwave/metrics.hpp"
#include "specwave/model.hpp"
#include "specwave/rng.hpp"
#include "specwave/scenes.hpp"
#include "specwave/training.hpp"
#include "specwave/wave_prior.hpp"

using namespace specwave;

namespace
{

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point t0)
{
  return std::chrono::duration<double>(clock_type::now() - t0).count();
}

struct Verdict
{
  bool pass = false;
  std::string detail;
};

std::string fmt(const char *f, auto... args)
{
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// 1. Plane wave in vacuum against the analytic solution.
Verdict fdfd_oracle()
{
  const int n = 96;
  const double dl = 25e-9;
  const double wl = 500e-9;
  PermittivityMap eps(Grid2D{n, n, dl, dl}, 4.0);
  eps.design_box = Box{};
  const fdfd::SimSettings st;
  const auto src = fdfd::default_source(st.pml);
  const auto t0 = clock_type::now();
  const auto sys = fdfd::assemble_helmholtz(eps, wl, st.pml, st.order);
  const auto e = fdfd::solve_field(sys, src, st.solve);
  const double solve_seconds = seconds_since(t0);
  const double residual = fdfd::relative_residual(sys, e, fdfd::source_vector(sys, src));

  const double k0 = 2.0 * std::numbers::pi / wl;
  const int pml = st.pml.thickness;
  const int zlo = src.z_index + 1;
  const int zhi = n - pml;
  const int fit = (zlo + zhi) / 2;
  auto analytic = [&](int k) { return std::exp(cdouble(0.0, -k0 * (k - src.z_index) * dl)); };
  cdouble num = 0.0;
  double den = 0.0;
  for (int i = pml; i < n - pml; ++i)
  {
    num += e(i, fit) * std::conj(analytic(fit));
    den += 1.0;
  }
  const cdouble a0 = num / den;
  double err = 0.0;
  double ref = 0.0;
  for (int i = pml; i < n - pml; ++i)
  {
    for (int k = zlo; k < zhi; ++k)
    {
      err += std::norm(e(i, k) - a0 * analytic(k));
      ref += std::norm(a0 * analytic(k));
    }
  }
  const double rel = std::sqrt(err / ref);
  return {rel < 1e-2 && residual <= 1e-8 && solve_seconds < 5.0,
          fmt("rel L2 %.3e (< 1e-2), residual %.2e (<= 1e-8), solve %.3f s (< 5 s), |A0| %.4f", rel, residual,
              solve_seconds, std::abs(a0))};
}

// 2. Refined prior peak bins over 400..700 nm.
Verdict spectral_consistency()
{
  const auto t0 = clock_type::now();
  const Grid2D g{64, 64, 25e-9, 25e-9};
  bool ok = true;
  double worst = 0.0;
  int at400 = -1;
  for (int nm = 400; nm <= 700; nm += 25)
  {
    const double wl = nm * 1e-9;
    const auto p = refined_wave_prior(g, wl);
    for (Axis a : {Axis::x, Axis::z})
    {
      const int bin = spectral_peak(p, a);
      const double dev = std::abs(bin - g.nx * g.dl_x / wl);
      worst = std::max(worst, dev);
      ok = ok && dev <= 1.0;
      if (nm == 400 && a == Axis::x)
      {
        at400 = bin;
      }
    }
  }
  const double secs = seconds_since(t0);
  return {ok && at400 == 4 && secs < 1.0,
          fmt("max |bin - N dl/lambda| %.3f (<= 1), bin at 400 nm %d (== 4), %.3f s (< 1 s)", worst, at400, secs)};
}

// 3. Finite-difference gradient check on the tiny model.
Verdict gradient_exactness()
{
  const auto t0 = clock_type::now();
  double worst = 0.0;
  std::size_t checked = 0;
  for (auto mode : {nn::Conditioning::wime, nn::Conditioning::concat})
  {
    nn::ModelConfig cfg;
    cfg.grid = Grid2D{16, 16, 25e-9, 25e-9};
    cfg.channels = 8;
    cfg.layers = 2;
    cfg.modes_v = 4;
    cfg.modes_h = 4;
    cfg.groups = 2;
    cfg.lift_width = 8;
    cfg.conditioning = mode;
    cfg.seed = 3;
    const nn::Network<double> net(cfg);
    auto p = nn::init_params<double>(cfg);
    Rng rng(17);
    for (double &v : p.values)
    {
      v += 0.3 * rng.normal();
    }
    std::vector<double> eps(cfg.grid.cells());
    for (double &e : eps)
    {
      e = rng.uniform() < 0.4 ? 4.0 : 1.0;
    }
    std::vector<double> target(2 * cfg.grid.cells());
    for (double &v : target)
    {
      v = rng.normal();
    }
    const nn::Input in{eps, 530e-9};
    nn::Tape<double> tape;
    auto loss = [&](std::span<const double> params) {
      net.forward(params, in, tape);
      return nmse_planes<double>(tape.output, target, cfg.grid);
    };
    net.forward(p.values, in, tape);
    std::vector<double> d_out(target.size());
    nmse_and_grad<double>(tape.output, target, d_out, 1.0);
    std::vector<double> grad(p.values.size(), 0.0);
    net.backward(p.values, tape, d_out, grad);
    const double h = 1e-5;
    for (std::size_t i = 0; i < p.values.size(); ++i)
    {
      const double keep = p.values[i];
      p.values[i] = keep + h;
      const double up = loss(p.values);
      p.values[i] = keep - h;
      const double down = loss(p.values);
      p.values[i] = keep;
      const double fd = (up - down) / (2.0 * h);
      worst = std::max(worst, std::abs(grad[i] - fd) / std::max({std::abs(grad[i]), std::abs(fd), 1e-6}));
      ++checked;
    }
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && secs < 60.0,
          fmt("%zu parameters (wime + concat), worst relative error %.3e (< 1e-4), %.2f s (< 60 s)", checked, worst,
              secs)};
}

// 4. Spectral parameter count against an independent enumeration.
Verdict parameter_formula()
{
  struct Case
  {
    int c, mv, mh;
  };
  bool ok = true;
  std::string detail;
  for (const Case k : {Case{32, 12, 12}, Case{16, 8, 8}, Case{64, 6, 10}})
  {
    nn::ModelConfig cfg;
    cfg.channels = k.c;
    cfg.modes_v = k.mv;
    cfg.modes_h = k.mh;
    cfg.groups = 4;
    const nn::ParameterLayout layout(cfg);
    std::int64_t enumerated = 0;
    std::int64_t all_layers = 0;
    std::int64_t reals = 0;
    for (const auto &t : layout.tensors())
    {
      std::int64_t n = 1;
      for (int d : t.shape)
      {
        n *= d;
      }
      reals += t.complex ? 2 * n : n;
      if (t.name.rfind("layer0.spectral", 0) == 0)
      {
        enumerated += n;
      }
      if (t.name.rfind("layer", 0) == 0 && t.name.find(".spectral") != std::string::npos)
      {
        all_layers += n;
      }
    }
    const std::int64_t formula = static_cast<std::int64_t>(k.c) * k.c * (k.mv + k.mh) / (4 * cfg.groups);
    const bool this_ok = enumerated == formula && nn::spectral_complex_entries(cfg) == formula &&
                         reals == nn::param_count(cfg) && all_layers == cfg.layers * formula;
    ok = ok && this_ok;
    detail += fmt("%sC=%d M=(%d,%d): enumerated %lld formula %lld total %lld", detail.empty() ? "" : "; ", k.c, k.mv, k.mh,
                  static_cast<long long>(enumerated), static_cast<long long>(formula),
                  static_cast<long long>(nn::param_count(cfg)));
  }
  return {ok, detail};
}

// Shared data and runs for 5 and 6.
struct DeskSeed
{
  double wime_trained = 0.0;
  double wime_untrained = 0.0;
  double concat_untrained = 0.0;
  double half_untrained = 0.0;
  bool has_half = false;
};

class DeskExperiment
{
public:
  DeskExperiment(int threads, int epochs) : threads_(threads), epochs_(epochs) {}

  const DeskSeed &seed(std::uint64_t s, bool need_half)
  {
    auto it = runs_.find(s);
    if (it == runs_.end())
    {
      it = runs_.emplace(s, run_full(s)).first;
    }
    if (need_half && !it->second.has_half)
    {
      run_half(s, it->second);
    }
    return it->second;
  }

private:
  struct Data
  {
    data::Dataset train, val, test_untrained, test_trained;
  };

  static std::vector<double> trained() { return schedule(false).points(); }

  static data::WavelengthSchedule schedule(bool midpoints)
  {
    return midpoints ? data::WavelengthSchedule{430e-9, 670e-9, 60e-9, data::ScheduleMode::trained_grid}
                     : data::WavelengthSchedule{400e-9, 700e-9, 60e-9, data::ScheduleMode::trained_grid};
  }

  data::Dataset generate(bool midpoints, std::size_t n, std::uint64_t seed) const
  {
    data::GenerateOptions o;
    o.schedule = schedule(midpoints);
    o.count = n;
    o.seed = seed;
    o.threads = threads_;
    return data::generate_dataset(o).dataset;
  }

  Data &data_for(std::uint64_t s)
  {
    auto it = data_.find(s);
    if (it == data_.end())
    {
      const auto t0 = clock_type::now();
      Data d{generate(false, 600, mix_seed(s, 1)), generate(true, 100, mix_seed(s, 2)),
             generate(true, 100, mix_seed(s, 3)), generate(false, 100, mix_seed(s, 4))};
      const auto hist = data::wavelength_histogram(d.train);
      std::string counts;
      for (const auto &[wl, n] : hist)
      {
        counts += data::wavelength_key(wl) + ":" + std::to_string(n) + " ";
      }
      std::printf("  seed %llu: generated 900 samples in %.0f s; train histogram %s\n",
                  static_cast<unsigned long long>(s), seconds_since(t0), counts.c_str());
      std::fflush(stdout);
      it = data_.emplace(s, std::move(d)).first;
    }
    return it->second;
  }

  train::TrainResult fit(nn::Conditioning mode, const data::Dataset &train_ds, const data::Dataset &val_ds,
                         std::uint64_t s, const char *label) const
  {
    nn::ModelConfig cfg;
    cfg.grid = train_ds.grid;
    cfg.conditioning = mode;
    cfg.eps_max = train_ds.max_eps();
    cfg.seed = s;
    train::TrainConfig tc;
    tc.epochs = epochs_;
    tc.seed = s;
    tc.trained_wavelengths = trained();
    tc.threads = threads_;
    const auto t0 = clock_type::now();
    auto res = train::train(cfg, train_ds, val_ds, tc);
    const auto &h = res.history;
    double tail = 0.0;
    const std::size_t k = std::min<std::size_t>(5, h.size());
    for (std::size_t i = h.size() - k; i < h.size(); ++i)
    {
      tail += h[i].train_nmse / static_cast<double>(k);
    }
    std::printf("  seed %llu %s: %d epochs in %.0f s, train NMSE %.4f -> %.4f (x%.1f), best val %.4f at epoch %d\n",
                static_cast<unsigned long long>(s), label, epochs_, seconds_since(t0), h.front().train_nmse, tail,
                h.front().train_nmse / tail, res.best_val, res.best_epoch);
    std::fflush(stdout);
    return res;
  }

  DeskSeed run_full(std::uint64_t s)
  {
    Data &d = data_for(s);
    DeskSeed out;
    const auto tw = trained();
    const auto wime = fit(nn::Conditioning::wime, d.train, d.val, s, "wime");
    out.wime_untrained = eval::evaluate(wime.best, d.test_untrained, tw, eval::Region::all, 0.5e-9, threads_)
                             .untrained.mean_all;
    out.wime_trained =
        eval::evaluate(wime.best, d.test_trained, tw, eval::Region::all, 0.5e-9, threads_).trained.mean_all;
    const auto concat = fit(nn::Conditioning::concat, d.train, d.val, s, "concat");
    out.concat_untrained = eval::evaluate(concat.best, d.test_untrained, tw, eval::Region::all, 0.5e-9, threads_)
                               .untrained.mean_all;
    std::printf("  seed %llu: wime trained %.4f untrained %.4f | concat untrained %.4f\n",
                static_cast<unsigned long long>(s), out.wime_trained, out.wime_untrained, out.concat_untrained);
    std::fflush(stdout);
    return out;
  }

  void run_half(std::uint64_t s, DeskSeed &out)
  {
    Data &d = data_for(s);
    const auto half = data::take_fraction(d.train, 0.5);
    const auto res = fit(nn::Conditioning::wime, half, d.val, s, "wime-50%");
    out.half_untrained = eval::evaluate(res.best, d.test_untrained, trained(), eval::Region::all, 0.5e-9, threads_)
                             .untrained.mean_all;
    out.has_half = true;
    std::printf("  seed %llu: wime 50%% untrained %.4f vs 100%% %.4f (x%.2f)\n", static_cast<unsigned long long>(s),
                out.half_untrained, out.wime_untrained, out.half_untrained / out.wime_untrained);
    std::fflush(stdout);
  }

  int threads_;
  int epochs_;
  std::map<std::uint64_t, Data> data_;
  std::map<std::uint64_t, DeskSeed> runs_;
};

/// Evaluates seeds in order until "at least `need` of `seeds.size()` pass"
/// is decided either way.
Verdict majority(const std::vector<std::uint64_t> &seeds, std::size_t need,
                 const std::function<std::pair<bool, std::string>(std::uint64_t)> &check)
{
  std::size_t passed = 0;
  std::size_t done = 0;
  std::string detail;
  for (std::uint64_t s : seeds)
  {
    if (passed >= need || passed + (seeds.size() - done) < need)
    {
      break;
    }
    const auto [ok, text] = check(s);
    passed += ok ? 1 : 0;
    ++done;
    detail += fmt("seed %llu %s (%s); ", static_cast<unsigned long long>(s), ok ? "pass" : "fail", text.c_str());
  }
  detail += fmt("%zu of %zu evaluated seeds pass, need %zu of %zu", passed, done, need, seeds.size());
  return {passed >= need, detail};
}

Verdict desk_interpolation(DeskExperiment &exp, const std::vector<std::uint64_t> &seeds)
{
  const auto t0 = clock_type::now();
  auto v = majority(seeds, 2, [&](std::uint64_t s) {
    const DeskSeed &r = exp.seed(s, false);
    const bool a = r.wime_untrained <= 2.0 * r.wime_trained;
    const bool b = r.wime_untrained < r.concat_untrained;
    return std::make_pair(a && b, fmt("a: %.4f <= 2 x %.4f %s, b: %.4f < %.4f %s", r.wime_untrained, r.wime_trained,
                                      a ? "ok" : "no", r.wime_untrained, r.concat_untrained, b ? "ok" : "no"));
  });
  v.detail += fmt("; wall %.1f min on %u hardware threads", seconds_since(t0) / 60.0,
                  std::max(1u, std::thread::hardware_concurrency()));
  return v;
}

Verdict dataset_robustness(DeskExperiment &exp, const std::vector<std::uint64_t> &seeds)
{
  return majority(seeds, 2, [&](std::uint64_t s) {
    const DeskSeed &r = exp.seed(s, true);
    const double ratio = r.half_untrained / r.wime_untrained;
    return std::make_pair(ratio <= 2.0, fmt("50%% %.4f / 100%% %.4f = %.2f (<= 2)", r.half_untrained,
                                            r.wime_untrained, ratio));
  });
}

// 7. Model inference vs one FDFD solve on the 64x64 grid.
Verdict speed()
{
  nn::ModelConfig cfg;
  const auto params = nn::init_params<float>(cfg);
  std::vector<PermittivityMap> structures;
  for (std::uint64_t i = 0; i < 8; ++i)
  {
    scenes::SceneParams sp;
    sp.seed = mix_seed(77, i);
    structures.push_back(scenes::generate(sp));
  }
  const fdfd::SimSettings sim;
  const auto r = eval::bench(params, structures, sim, fdfd::default_source(sim.pml), eval::BenchOptions{});
  const double t1 = r.model[0].seconds_per_sample;
  const double t32 = r.model[1].seconds_per_sample;
  const double speedup = r.speedup(1);
  return {speedup >= 5.0 && t32 <= 1.1 * t1,
          fmt("batch-32 speedup %.1fx (>= 5), model %.4f s (b1) %.4f s (b32, <= 1.1 x b1), solver %.4f s; %s", speedup,
              t1, t32, r.solver.seconds_per_sample, r.hardware.c_str())};
}

// 8. Round trips, determinism and property invariants.
Verdict round_trip_and_determinism(int threads)
{
  const auto t0 = clock_type::now();
  std::vector<std::string> failures;
  auto expect = [&](bool ok, const std::string &what) {
    if (!ok)
    {
      failures.push_back(what);
    }
  };

  data::GenerateOptions o;
  o.schedule = data::WavelengthSchedule{400e-9, 700e-9, 60e-9, data::ScheduleMode::trained_grid};
  o.count = 8;
  o.seed = 5;
  o.threads = 1;
  const auto ds = data::generate_dataset(o).dataset;
  const auto dir = std::filesystem::temp_directory_path() / "specwave_acceptance";
  std::filesystem::create_directories(dir);
  const auto bytes = data::encode_dataset(ds);
  data::write_dataset(dir / "a.wfd", ds);
  const auto ds_back = data::read_dataset(dir / "a.wfd");
  expect(ds_back == ds, "WFD1 decoded records");
  data::write_dataset(dir / "b.wfd", ds_back);
  expect(binio::read_file(dir / "a.wfd") == binio::read_file(dir / "b.wfd"), "WFD1 round trip");
  o.threads = threads;
  expect(data::encode_dataset(data::generate_dataset(o).dataset) == bytes, "generation determinism");

  nn::ModelConfig cfg;
  cfg.channels = 8;
  cfg.layers = 2;
  cfg.modes_v = 6;
  cfg.modes_h = 6;
  cfg.groups = 2;
  cfg.lift_width = 8;
  const auto p = nn::init_params<double>(cfg);
  save_checkpoint(dir / "a.wfc", cfg, p.values);
  const auto back = load_checkpoint(dir / "a.wfc");
  expect(back.values == p.values && back.config == cfg, "WFC1 decoded values");
  save_checkpoint(dir / "b.wfc", back.config, back.values);
  expect(binio::read_file(dir / "a.wfc") == binio::read_file(dir / "b.wfc"), "WFC1 round trip");
  std::filesystem::remove_all(dir);

  o.schedule = data::WavelengthSchedule{430e-9, 670e-9, 60e-9, data::ScheduleMode::trained_grid};
  o.count = 4;
  o.seed = 6;
  const auto val = data::generate_dataset(o).dataset;
  train::TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 4;
  tc.trained_wavelengths = data::WavelengthSchedule{400e-9, 700e-9, 60e-9, data::ScheduleMode::trained_grid}.points();
  tc.threads = 1;
  const auto r1 = train::train(cfg, ds, val, tc);
  tc.threads = threads;
  const auto r2 = train::train(cfg, ds, val, tc);
  bool same_history = r1.history.size() == r2.history.size();
  for (std::size_t i = 0; same_history && i < r1.history.size(); ++i)
  {
    same_history = r1.history[i].train_nmse == r2.history[i].train_nmse &&
                   r1.history[i].val_nmse_untrained == r2.history[i].val_nmse_untrained;
  }
  expect(same_history && r1.last.values == r2.last.values, "training determinism");
  const auto e1 = eval::evaluate(r1.best, val, tc.trained_wavelengths, eval::Region::all, 0.5e-9, 1);
  const auto e2 = eval::evaluate(r1.best, val, tc.trained_wavelengths, eval::Region::all, 0.5e-9, threads);
  expect(e1.nmse_all == e2.nmse_all && e1.nmse_design == e2.nmse_design, "evaluation determinism");

  Rng rng(41);
  const Grid2D g{16, 12, 25e-9, 25e-9};
  ComplexField u(g);
  ComplexField v(g);
  for (std::size_t i = 0; i < g.cells(); ++i)
  {
    u.values[i] = cdouble(rng.normal(), rng.normal());
    v.values[i] = cdouble(rng.normal(), rng.normal());
  }
  const double base = nmse(u, v);
  ComplexField su = u;
  ComplexField sv = v;
  for (std::size_t i = 0; i < g.cells(); ++i)
  {
    su.values[i] *= -2.5;
    sv.values[i] *= -2.5;
  }
  expect(std::abs(nmse(su, sv) - base) <= 1e-12 * base, "nmse scale invariance");
  expect(base > 0.0 && nmse(v, v) == 0.0, "nmse positivity");
  ComplexField zero(g);
  expect(std::abs(nmse(zero, v) - 1.0) < 1e-12, "nmse of zero prediction");

  nn::FeatureMap<double> x(12, 3, 4);
  for (double &d : x.data)
  {
    d = rng.normal();
  }
  for (int grp : {1, 2, 3, 4, 6, 12})
  {
    expect(nn::channel_shuffle(nn::channel_shuffle(x, grp), 12 / grp).data == x.data, "shuffle inverse");
  }
  auto orbit = nn::channel_shuffle(x, 4);
  int steps = 1;
  while (orbit.data != x.data && steps <= 12)
  {
    orbit = nn::channel_shuffle(orbit, 4);
    ++steps;
  }
  expect(orbit.data == x.data, "shuffle orbit closes");

  const int C = 8, K = 4, M = 4;
  std::vector<std::complex<double>> wv(M * K * K), wh(M * K * K);
  for (auto &w : wv)
  {
    w = {rng.normal(), rng.normal()};
  }
  for (auto &w : wh)
  {
    w = {rng.normal(), rng.normal()};
  }
  nn::FeatureMap<double> x1(C, 16, 16), x2(C, 16, 16), mix(C, 16, 16);
  const double a = rng.normal();
  const double b = rng.normal();
  for (std::size_t i = 0; i < x1.data.size(); ++i)
  {
    x1.data[i] = rng.normal();
    x2.data[i] = rng.normal();
    mix.data[i] = a * x1.data[i] + b * x2.data[i];
  }
  const auto y = nn::fgcs_layer<double>(mix, wv, wh, 2, M, M);
  const auto y1 = nn::fgcs_layer<double>(x1, wv, wh, 2, M, M);
  const auto y2 = nn::fgcs_layer<double>(x2, wv, wh, 2, M, M);
  const auto s = nn::channel_shuffle(mix, 2);
  const auto s1 = nn::channel_shuffle(x1, 2);
  const auto s2 = nn::channel_shuffle(x2, 2);
  double lin = 0.0;
  for (std::size_t i = 0; i < y.data.size(); ++i)
  {
    lin = std::max(lin, std::abs(y.data[i] - a * y1.data[i] - b * y2.data[i]));
    lin = std::max(lin, std::abs(s.data[i] - a * s1.data[i] - b * s2.data[i]));
  }
  expect(lin < 1e-10, "fgcs and shuffle linearity");

  const double secs = seconds_since(t0);
  expect(secs < 300.0, "runtime");
  std::string detail = fmt("%.1f s (< 300 s); ", secs);
  if (failures.empty())
  {
    detail += "all round-trip, determinism and invariant checks hold";
  }
  else
  {
    detail += "failed:";
    for (const auto &f : failures)
    {
      detail += " " + f + ";";
    }
  }
  return {failures.empty(), detail};
}

}  // namespace

int main(int argc, char **argv)
{
  CLI::App app{"Acceptance criteria 1-8"};
  std::vector<int> only;
  int threads = 0;
  int epochs = 100;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  app.add_option("--only", only, "criteria to run (default: all)")->delimiter(',');
  app.add_option("--threads", threads, "worker threads (0 = all cores)");
  app.add_option("--epochs", epochs, "epochs for criteria 5 and 6")->check(CLI::PositiveNumber);
  app.add_option("--seeds", seeds, "seeds for criteria 5 and 6")->delimiter(',');
  CLI11_PARSE(app, argc, argv);
  if (threads <= 0)
  {
    threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  }
  const std::set<int> selected = only.empty() ? std::set<int>{1, 2, 3, 4, 5, 6, 7, 8}
                                              : std::set<int>(only.begin(), only.end());

  DeskExperiment desk(threads, epochs);
  const std::map<int, std::pair<std::string, std::function<Verdict()>>> criteria{
      {1, {"FDFD oracle correctness", fdfd_oracle}},
      {2, {"spectral consistency", spectral_consistency}},
      {3, {"gradient exactness", gradient_exactness}},
      {4, {"parameter-count formula", parameter_formula}},
      {5, {"desk-scale broadband interpolation", [&] { return desk_interpolation(desk, seeds); }}},
      {6, {"dataset-size robustness", [&] { return dataset_robustness(desk, seeds); }}},
      {7, {"speed directionality", speed}},
      {8, {"round-trip and determinism suite", [&] { return round_trip_and_determinism(std::max(threads, 3)); }}},
  };

  int failed = 0;
  for (const auto &[id, entry] : criteria)
  {
    if (!selected.count(id))
    {
      continue;
    }
    Verdict v;
    try
    {
      v = entry.second();
    }
    catch (const std::exception &e)
    {
      v = {false, std::string("error: ") + e.what()};
    }
    failed += v.pass ? 0 : 1;
    std::printf("criterion %d %s: %s: %s\n", id, v.pass ? "PASS" : "FAIL", entry.first.c_str(), v.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
