#include "specwave/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstring>
#include <ctime>
#include <sstream>
#include <thread>

#include "specwave/binio.hpp"
#include "specwave/error.hpp"
#include "specwave/rng.hpp"

namespace specwave::data
{

std::string to_string(ScheduleMode m)
{
  return m == ScheduleMode::trained_grid ? "trained_grid" : "dense_grid";
}

ScheduleMode parse_schedule_mode(const std::string &name)
{
  if (name == "trained_grid")
  {
    return ScheduleMode::trained_grid;
  }
  if (name == "dense_grid")
  {
    return ScheduleMode::dense_grid;
  }
  throw InvalidArgument("unknown schedule mode '" + name + "'");
}

void WavelengthSchedule::validate() const
{
  if (!(start > 0.0) || !(end > start) || !(step > 0.0) || !std::isfinite(end) || !std::isfinite(step))
  {
    throw InvalidArgument("wavelength schedule needs 0 < start < end and step > 0");
  }
  const double steps = (end - start) / step;
  if (std::abs(steps - std::round(steps)) > 1e-6)
  {
    throw InvalidArgument("wavelength schedule: (end - start) is not a whole number of steps");
  }
}

std::vector<double> WavelengthSchedule::points() const
{
  validate();
  const auto n = static_cast<std::size_t>(std::llround((end - start) / step)) + 1;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i)
  {
    out[i] = start + static_cast<double>(i) * step;
  }
  out.back() = end;
  return out;
}

double Dataset::max_eps() const
{
  double m = 1.0;
  for (const auto &r : records)
  {
    for (float e : r.eps)
    {
      m = std::max(m, static_cast<double>(e));
    }
  }
  return m;
}

PermittivityMap permittivity(const Dataset &ds, const Record &r)
{
  PermittivityMap map;
  map.grid = ds.grid;
  map.eps.assign(r.eps.begin(), r.eps.end());
  map.design_box = r.design_box;
  map.eps_air = 1.0;
  map.eps_material = 1.0;
  for (double e : map.eps)
  {
    map.eps_material = std::max(map.eps_material, e);
  }
  if (map.eps_material == 1.0)
  {
    map.eps_material = scenes::default_eps_material(ds.scene_kind);
  }
  return map;
}

ComplexField field(const Dataset &ds, const Record &r)
{
  ComplexField f(ds.grid);
  for (std::size_t c = 0; c < f.values.size(); ++c)
  {
    f.values[c] = cdouble(r.field_re[c], r.field_im[c]);
  }
  return f;
}

std::string wavelength_key(double wavelength)
{
  const long long pm = std::llround(wavelength * 1e12);
  std::ostringstream out;
  out << pm / 1000;
  if (pm % 1000 != 0)
  {
    char frac[8];
    std::snprintf(frac, sizeof(frac), "%03lld", pm % 1000);
    std::string f(frac);
    while (!f.empty() && f.back() == '0')
    {
      f.pop_back();
    }
    out << "." << f;
  }
  return out.str();
}

std::map<double, std::size_t> wavelength_histogram(const Dataset &ds)
{
  std::map<double, std::size_t> h;
  for (const auto &r : ds.records)
  {
    ++h[std::round(r.wavelength * 1e12) / 1e12];
  }
  return h;
}

// ---------------------------------------------------------------------------
// Generation

namespace
{

struct Job
{
  double wavelength;
  std::uint64_t scene_seed;
};

std::vector<Job> plan_jobs(const GenerateOptions &opts, const std::vector<double> &wl)
{
  std::vector<Job> jobs(opts.count);
  if (opts.fixed_structures)
  {
    if (opts.count % wl.size() != 0)
    {
      throw InvalidArgument("fixed-structure generation needs count to be a multiple of the " +
                            std::to_string(wl.size()) + " schedule wavelengths");
    }
    for (std::size_t i = 0; i < opts.count; ++i)
    {
      jobs[i] = {wl[i % wl.size()], mix_seed(opts.seed, i / wl.size())};
    }
    return jobs;
  }
  for (std::size_t i = 0; i < opts.count; ++i)
  {
    Rng rng(mix_seed(opts.seed, i));
    const std::uint64_t scene_seed = rng.next_u64();
    jobs[i] = {wl[rng.below(wl.size())], scene_seed};
  }
  return jobs;
}

Record make_record(const PermittivityMap &eps, const ComplexField &f, double wavelength, std::uint64_t seed)
{
  Record r;
  r.wavelength = wavelength;
  r.scene_seed = seed;
  r.design_box = eps.design_box;
  const std::size_t n = eps.grid.cells();
  r.eps.resize(n);
  r.field_re.resize(n);
  r.field_im.resize(n);
  for (std::size_t c = 0; c < n; ++c)
  {
    r.eps[c] = static_cast<float>(eps.eps[c]);
    r.field_re[c] = static_cast<float>(f.values[c].real());
    r.field_im[c] = static_cast<float>(f.values[c].imag());
  }
  return r;
}

int worker_count(int requested, std::size_t jobs)
{
  int n = requested > 0 ? requested : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  return static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(n), std::max<std::size_t>(jobs, 1)));
}

}  // namespace

GenerateResult generate_dataset(const GenerateOptions &opts)
{
  if (opts.count == 0)
  {
    throw InvalidArgument("dataset size must be at least 1");
  }
  opts.scene.validate();
  const std::vector<double> wl = opts.schedule.points();
  const double shortest = *std::min_element(wl.begin(), wl.end());
  opts.scene.grid.check_resolution(shortest, opts.scene.material());
  opts.sim.pml.validate(opts.scene.grid);
  fdfd::SourceSpec source;
  source.z_index = scenes::source_z_index(opts.scene);
  source.validate(opts.scene.grid, opts.sim.pml);

  const std::vector<Job> jobs = plan_jobs(opts, wl);
  std::vector<std::optional<Record>> done(jobs.size());
  std::vector<std::string> failures(jobs.size());
  std::atomic<std::size_t> next{0};

  auto work = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++)
    {
      scenes::SceneParams p = opts.scene;
      p.seed = jobs[i].scene_seed;
      try
      {
        const PermittivityMap eps = scenes::generate(p);
        const ComplexField f = fdfd::simulate(eps, jobs[i].wavelength, source, opts.sim);
        done[i] = make_record(eps, f, jobs[i].wavelength, jobs[i].scene_seed);
      }
      catch (const SolverError &e)
      {
        std::ostringstream msg;
        msg << "sample " << i << " (seed " << jobs[i].scene_seed << ", lambda " << wavelength_key(jobs[i].wavelength)
            << " nm) skipped: " << e.what();
        failures[i] = msg.str();
      }
    }
  };

  const int threads = worker_count(opts.threads, jobs.size());
  if (threads <= 1)
  {
    work();
  }
  else
  {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t)
    {
      pool.emplace_back(work);
    }
  }

  GenerateResult result;
  result.dataset.grid = opts.scene.grid;
  result.dataset.scene_kind = opts.scene.kind;
  for (std::size_t i = 0; i < jobs.size(); ++i)
  {
    if (done[i])
    {
      result.dataset.records.push_back(std::move(*done[i]));
    }
    else
    {
      ++result.skipped;
      result.log.push_back(failures[i]);
    }
  }
  if (result.skipped > opts.skip_budget)
  {
    throw SolverError(std::to_string(result.skipped) + " of " + std::to_string(jobs.size()) +
                      " samples failed to solve (budget " + std::to_string(opts.skip_budget) + "); first: " +
                      result.log.front());
  }
  return result;
}

// ---------------------------------------------------------------------------
// WFD1 encoding

namespace
{

std::size_t record_bytes(const Grid2D &g)
{
  return 8 + 8 + 16 + 3 * 4 * g.cells();
}

}  // namespace

std::vector<std::uint8_t> encode_dataset(const Dataset &ds)
{
  ds.grid.validate();
  const std::size_t n = ds.grid.cells();
  binio::Writer w;
  w.bytes().reserve(kHeaderBytes + ds.records.size() * record_bytes(ds.grid));
  for (char c : kDatasetMagic)
  {
    w.put(static_cast<std::uint8_t>(c));
  }
  w.put(kDatasetVersion);
  w.put(static_cast<std::uint32_t>(ds.grid.nx));
  w.put(static_cast<std::uint32_t>(ds.grid.nz));
  w.put(ds.grid.dl_x);
  w.put(ds.grid.dl_z);
  w.put(static_cast<std::uint8_t>(ds.scene_kind));
  w.pad(7);
  w.put(static_cast<std::uint64_t>(ds.records.size()));
  for (const auto &r : ds.records)
  {
    if (r.eps.size() != n || r.field_re.size() != n || r.field_im.size() != n)
    {
      throw ShapeMismatch("record arrays do not match the dataset grid");
    }
    w.put(r.wavelength);
    w.put(r.scene_seed);
    for (int v : {r.design_box.i0, r.design_box.k0, r.design_box.i1, r.design_box.k1})
    {
      w.put(static_cast<std::uint32_t>(v));
    }
    for (const auto *arr : {&r.eps, &r.field_re, &r.field_im})
    {
      for (float v : *arr)
      {
        w.put(v);
      }
    }
  }
  return std::move(w.bytes());
}

Dataset decode_dataset(std::span<const std::uint8_t> bytes)
{
  binio::Reader r(bytes, "dataset header");
  const auto magic = r.take(4);
  if (std::memcmp(magic.data(), kDatasetMagic, 4) != 0)
  {
    throw BadMagicError("not a WFD1 dataset (bad magic)");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kDatasetVersion)
  {
    throw VersionMismatchError("dataset version " + std::to_string(version) + " not supported (expected " +
                               std::to_string(kDatasetVersion) + ")");
  }
  Dataset ds;
  ds.grid.nx = static_cast<int>(r.get<std::uint32_t>());
  ds.grid.nz = static_cast<int>(r.get<std::uint32_t>());
  ds.grid.dl_x = r.get<double>();
  ds.grid.dl_z = r.get<double>();
  const auto kind = r.get<std::uint8_t>();
  r.skip(7);
  const auto count = r.get<std::uint64_t>();
  try
  {
    ds.grid.validate();
  }
  catch (const InvalidArgument &e)
  {
    throw FileShapeError(std::string("dataset header shape invalid: ") + e.what());
  }
  if (kind > 2)
  {
    throw FileShapeError("dataset header has unknown scene kind " + std::to_string(kind));
  }
  ds.scene_kind = static_cast<scenes::SceneKind>(kind);

  const std::size_t stride = record_bytes(ds.grid);
  const std::uint64_t found = r.remaining() / stride;
  if (r.remaining() < count * stride)
  {
    throw TruncatedError("dataset truncated: header declares " + std::to_string(count) + " records, found " +
                             std::to_string(found) + " complete",
                         count, found);
  }
  if (r.remaining() != count * stride)
  {
    throw FormatError("dataset has " + std::to_string(r.remaining() - count * stride) +
                      " unexpected trailing bytes");
  }
  const std::size_t n = ds.grid.cells();
  ds.records.resize(count);
  for (auto &rec : ds.records)
  {
    rec.wavelength = r.get<double>();
    rec.scene_seed = r.get<std::uint64_t>();
    rec.design_box.i0 = static_cast<int>(r.get<std::uint32_t>());
    rec.design_box.k0 = static_cast<int>(r.get<std::uint32_t>());
    rec.design_box.i1 = static_cast<int>(r.get<std::uint32_t>());
    rec.design_box.k1 = static_cast<int>(r.get<std::uint32_t>());
    for (auto *arr : {&rec.eps, &rec.field_re, &rec.field_im})
    {
      arr->resize(n);
      for (float &v : *arr)
      {
        v = r.get<float>();
      }
    }
    if (!rec.design_box.inside(ds.grid))
    {
      throw FileShapeError("record design box lies outside the grid");
    }
  }
  return ds;
}

void write_dataset(const std::filesystem::path &path, const Dataset &ds)
{
  binio::write_file(path, encode_dataset(ds));
}

std::filesystem::path manifest_path(const std::filesystem::path &dataset_path)
{
  std::filesystem::path p = dataset_path;
  p += ".manifest";
  return p;
}

Dataset read_dataset(const std::filesystem::path &path, const ReadOptions &opts)
{
  Dataset ds = decode_dataset(binio::read_file(path));
  if (opts.expect_grid && !(*opts.expect_grid == ds.grid))
  {
    throw FileShapeError("dataset grid " + std::to_string(ds.grid.nx) + "x" + std::to_string(ds.grid.nz) +
                         " does not match the expected grid");
  }
  if (opts.verify)
  {
    fdfd::SimSettings settings;
    fdfd::SourceSpec source = fdfd::default_source(settings.pml);
    const auto mp = manifest_path(path);
    if (std::filesystem::exists(mp))
    {
      const KeyValues m = KeyValues::load(mp);
      settings = manifest_settings(m);
      source = manifest_source(m);
    }
    const double worst = verify_residuals(ds, settings, source, opts.verify_fraction, opts.verify_seed);
    if (worst > opts.verify_tolerance)
    {
      std::ostringstream msg;
      msg << "stored field residual " << worst << " exceeds " << opts.verify_tolerance;
      throw FormatError(msg.str());
    }
  }
  return ds;
}

double verify_residuals(const Dataset &ds, const fdfd::SimSettings &settings, const fdfd::SourceSpec &source,
                        double fraction, std::uint64_t seed)
{
  if (ds.records.empty())
  {
    return 0.0;
  }
  if (!(fraction > 0.0) || fraction > 1.0)
  {
    throw InvalidArgument("verification fraction must be in (0, 1]");
  }
  std::vector<std::size_t> order(ds.records.size());
  for (std::size_t i = 0; i < order.size(); ++i)
  {
    order[i] = i;
  }
  Rng rng(seed);
  rng.shuffle(order);
  const auto take = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(fraction * order.size())));
  double worst = 0.0;
  for (std::size_t j = 0; j < take; ++j)
  {
    const Record &r = ds.records[order[j]];
    worst = std::max(worst, fdfd::helmholtz_residual(permittivity(ds, r), r.wavelength, field(ds, r), source,
                                                     settings));
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Manifest

KeyValues make_manifest(const GenerateOptions &opts, const GenerateResult &result)
{
  KeyValues m;
  const auto &s = opts.scene;
  m.set("format", "WFD1");
  m.set("records", result.dataset.size());
  m.set("requested", opts.count);
  m.set("skipped", result.skipped);
  m.set("scene_kind", scenes::to_string(s.kind));
  m.set("nx", s.grid.nx);
  m.set("nz", s.grid.nz);
  m.set("dl_x", s.grid.dl_x);
  m.set("dl_z", s.grid.dl_z);
  m.set("eps_material", s.material());
  m.set("feature_cells", s.feature_cells);
  m.set("fill_density", s.fill_density);
  m.set("layer_count", s.layer_count);
  m.set("layer_cells", s.layer_cells);
  m.set("box_cells", s.box_cells);
  m.set("margin_cells", s.margin_cells);
  m.set("seed", opts.seed);
  m.set("fixed_structures", opts.fixed_structures);
  m.set("schedule_start", opts.schedule.start);
  m.set("schedule_end", opts.schedule.end);
  m.set("schedule_step", opts.schedule.step);
  m.set("schedule_mode", to_string(opts.schedule.mode));
  m.set("source_z", scenes::source_z_index(s));
  m.set("pml_thickness", opts.sim.pml.thickness);
  m.set("pml_sigma_max", opts.sim.pml.sigma_max);
  m.set("pml_poly_order", opts.sim.pml.poly_order);
  m.set("fd_order", opts.sim.order == fdfd::FdOrder::fourth ? "fourth" : "second");
  m.set("solver", opts.sim.solve.kind == fdfd::SolverKind::direct ? "direct" : "iterative");
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  m.set("created", std::string(stamp));
  for (const auto &[wl, n] : wavelength_histogram(result.dataset))
  {
    m.set("count." + wavelength_key(wl), n);
  }
  return m;
}

fdfd::SimSettings manifest_settings(const KeyValues &m)
{
  fdfd::SimSettings s;
  s.pml.thickness = static_cast<int>(m.get_int("pml_thickness"));
  s.pml.sigma_max = m.get_double("pml_sigma_max");
  s.pml.poly_order = m.get_double("pml_poly_order");
  s.order = m.get_or("fd_order", "fourth") == "second" ? fdfd::FdOrder::second : fdfd::FdOrder::fourth;
  s.solve.kind = m.get_or("solver", "direct") == "iterative" ? fdfd::SolverKind::iterative : fdfd::SolverKind::direct;
  return s;
}

fdfd::SourceSpec manifest_source(const KeyValues &m)
{
  fdfd::SourceSpec src;
  src.z_index = static_cast<int>(m.get_int("source_z"));
  return src;
}

std::map<std::string, std::size_t> manifest_histogram(const KeyValues &m)
{
  std::map<std::string, std::size_t> h;
  for (const auto &[k, v] : m.entries())
  {
    if (k.rfind("count.", 0) == 0)
    {
      h[k.substr(6)] = static_cast<std::size_t>(KeyValues::to_int(k, v));
    }
  }
  return h;
}

// ---------------------------------------------------------------------------
// Splits

Split split_by_wavelength(const Dataset &ds, std::span<const double> trained, double tol)
{
  if (!(tol >= 0.0))
  {
    throw InvalidArgument("split tolerance must be nonnegative");
  }
  std::vector<double> sorted(trained.begin(), trained.end());
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 1; i < sorted.size(); ++i)
  {
    if (tol >= (sorted[i] - sorted[i - 1]) / 2.0)
    {
      throw InvalidArgument("split tolerance must be below half the trained wavelength spacing");
    }
  }
  Split s;
  for (std::size_t i = 0; i < ds.records.size(); ++i)
  {
    const double wl = ds.records[i].wavelength;
    const bool hit = std::any_of(sorted.begin(), sorted.end(), [&](double w) { return std::abs(wl - w) <= tol; });
    (hit ? s.trained : s.untrained).push_back(i);
  }
  return s;
}

Dataset subset(const Dataset &ds, std::span<const std::size_t> indices)
{
  Dataset out;
  out.grid = ds.grid;
  out.scene_kind = ds.scene_kind;
  out.records.reserve(indices.size());
  for (std::size_t i : indices)
  {
    if (i >= ds.records.size())
    {
      throw InvalidArgument("record index out of range");
    }
    out.records.push_back(ds.records[i]);
  }
  return out;
}

Dataset take_fraction(const Dataset &ds, double fraction)
{
  if (!(fraction > 0.0) || fraction > 1.0)
  {
    throw InvalidArgument("dataset fraction must be in (0, 1]");
  }
  const auto n = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(ds.size()) + 1e-9));
  if (n == 0)
  {
    throw InvalidArgument("dataset fraction selects no records");
  }
  Dataset out;
  out.grid = ds.grid;
  out.scene_kind = ds.scene_kind;
  out.records.assign(ds.records.begin(), ds.records.begin() + static_cast<std::ptrdiff_t>(n));
  return out;
}

}  // namespace specwave::data
