#include "specwave/run_config.hpp"

#include <fstream>
#include <sstream>
#include <thread>

#include "specwave/error.hpp"

namespace specwave
{

namespace
{

KeyValues make_defaults()
{
  const Grid2D g;
  const scenes::SceneParams s;
  const data::WavelengthSchedule w = data::WavelengthSchedule::trained_default();
  const fdfd::SimSettings sim;
  const nn::ModelConfig m;
  const train::TrainConfig t;
  KeyValues kv;
  kv.set("grid.nx", g.nx);
  kv.set("grid.nz", g.nz);
  kv.set("grid.dl_x", g.dl_x);
  kv.set("grid.dl_z", g.dl_z);

  kv.set("scene.kind", scenes::to_string(s.kind));
  kv.set("scene.eps_material", s.eps_material);
  kv.set("scene.feature_cells", s.feature_cells);
  kv.set("scene.fill_density", s.fill_density);
  kv.set("scene.layer_count", s.layer_count);
  kv.set("scene.layer_cells", s.layer_cells);
  kv.set("scene.box_cells", s.box_cells);
  kv.set("scene.margin_cells", s.margin_cells);

  kv.set("schedule.start", w.start);
  kv.set("schedule.end", w.end);
  kv.set("schedule.step", w.step);
  kv.set("schedule.mode", data::to_string(w.mode));

  kv.set("gen.count", 600);
  kv.set("gen.seed", 0);
  kv.set("gen.fixed_structures", false);
  kv.set("gen.skip_budget", 0);

  kv.set("sim.pml_thickness", sim.pml.thickness);
  kv.set("sim.pml_sigma_max", sim.pml.sigma_max);
  kv.set("sim.pml_poly_order", sim.pml.poly_order);
  kv.set("sim.fd_order", "fourth");
  kv.set("sim.solver", "direct");
  kv.set("sim.max_iterations", sim.solve.max_iterations);

  kv.set("model.channels", m.channels);
  kv.set("model.layers", m.layers);
  kv.set("model.modes_v", m.modes_v);
  kv.set("model.modes_h", m.modes_h);
  kv.set("model.groups", m.groups);
  kv.set("model.conditioning", nn::to_string(m.conditioning));
  kv.set("model.lift_width", m.lift_width);
  kv.set("model.eps_max", 0.0);
  kv.set("model.seed", m.seed);

  kv.set("train.epochs", t.epochs);
  kv.set("train.batch_size", t.batch_size);
  kv.set("train.lr", t.lr);
  kv.set("train.beta1", t.beta1);
  kv.set("train.beta2", t.beta2);
  kv.set("train.eps_opt", t.eps_opt);
  kv.set("train.weight_decay", t.weight_decay);
  kv.set("train.lr_min", t.lr_min);
  kv.set("train.seed", t.seed);
  kv.set("train.val_every", t.val_every);
  kv.set("train.val_full_grid", t.val_full_grid);
  kv.set("train.trained_wavelengths", "");
  kv.set("train.split_tol", t.split_tol);

  kv.set("eval.region", "all");
  kv.set("eval.lambda", 410e-9);
  kv.set("eval.index", -1);

  kv.set("bench.batch", "1,32");
  kv.set("bench.trials", 20);
  kv.set("bench.warmup", 3);
  kv.set("bench.structures", 8);
  kv.set("bench.lambda", 500e-9);

  kv.set("study.fractions", "0.5,1");

  kv.set("path.data", "");
  kv.set("path.val", "");
  kv.set("path.test", "");
  kv.set("path.checkpoint", "");
  kv.set("path.out", "");

  kv.set("threads", 0);
  return kv;
}

}  // namespace

const KeyValues &RunConfig::defaults()
{
  static const KeyValues d = make_defaults();
  return d;
}

RunConfig::RunConfig() : values_(defaults()) {}

void RunConfig::apply(const KeyValues &layer, const std::string &origin)
{
  for (const auto &[k, v] : layer.entries())
  {
    if (!defaults().has(k))
    {
      throw InvalidArgument(origin + ": unknown key '" + k + "'");
    }
    values_.set(k, v);
  }
}

void RunConfig::set(const std::string &key, const std::string &value)
{
  if (!defaults().has(key))
  {
    throw InvalidArgument("unknown key '" + key + "'");
  }
  values_.set(key, value);
}

bool RunConfig::flag(const std::string &key) const
{
  return KeyValues::to_bool(key, get(key));
}

std::vector<double> parse_number_list(const std::string &key, const std::string &text)
{
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ','))
  {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos)
    {
      continue;
    }
    out.push_back(KeyValues::to_double(key, item.substr(b, e - b + 1)));
  }
  return out;
}

std::vector<double> RunConfig::numbers(const std::string &key) const
{
  return parse_number_list(key, get(key));
}

std::vector<int> RunConfig::integers(const std::string &key) const
{
  std::vector<int> out;
  for (double v : numbers(key))
  {
    if (v != static_cast<double>(static_cast<int>(v)))
    {
      throw InvalidArgument("key '" + key + "' expects integers");
    }
    out.push_back(static_cast<int>(v));
  }
  return out;
}

std::pair<int, int> parse_grid_size(const std::string &text)
{
  const auto x = text.find_first_of("xX");
  if (x == std::string::npos)
  {
    throw InvalidArgument("grid size '" + text + "' is not of the form HxW");
  }
  const auto h = KeyValues::to_int("grid", text.substr(0, x));
  const auto w = KeyValues::to_int("grid", text.substr(x + 1));
  return {static_cast<int>(h), static_cast<int>(w)};
}

Grid2D RunConfig::grid() const
{
  Grid2D g{static_cast<int>(integer("grid.nx")), static_cast<int>(integer("grid.nz")), number("grid.dl_x"),
           number("grid.dl_z")};
  g.validate();
  return g;
}

scenes::SceneParams RunConfig::scene() const
{
  scenes::SceneParams s;
  s.kind = scenes::parse_scene_kind(get("scene.kind"));
  s.grid = grid();
  s.eps_material = number("scene.eps_material");
  s.feature_cells = static_cast<int>(integer("scene.feature_cells"));
  s.fill_density = number("scene.fill_density");
  s.layer_count = static_cast<int>(integer("scene.layer_count"));
  s.layer_cells = static_cast<int>(integer("scene.layer_cells"));
  s.box_cells = static_cast<int>(integer("scene.box_cells"));
  s.margin_cells = static_cast<int>(integer("scene.margin_cells"));
  s.seed = static_cast<std::uint64_t>(integer("gen.seed"));
  s.validate();
  return s;
}

data::WavelengthSchedule RunConfig::schedule() const
{
  data::WavelengthSchedule w{number("schedule.start"), number("schedule.end"), number("schedule.step"),
                             data::parse_schedule_mode(get("schedule.mode"))};
  w.validate();
  return w;
}

fdfd::SimSettings RunConfig::sim() const
{
  fdfd::SimSettings s;
  s.pml.thickness = static_cast<int>(integer("sim.pml_thickness"));
  s.pml.sigma_max = number("sim.pml_sigma_max");
  s.pml.poly_order = number("sim.pml_poly_order");
  const std::string order = get("sim.fd_order");
  if (order != "fourth" && order != "second")
  {
    throw InvalidArgument("sim.fd_order must be fourth or second");
  }
  s.order = order == "second" ? fdfd::FdOrder::second : fdfd::FdOrder::fourth;
  const std::string solver = get("sim.solver");
  if (solver != "direct" && solver != "iterative")
  {
    throw InvalidArgument("sim.solver must be direct or iterative");
  }
  s.solve.kind = solver == "iterative" ? fdfd::SolverKind::iterative : fdfd::SolverKind::direct;
  s.solve.max_iterations = static_cast<int>(integer("sim.max_iterations"));
  if (s.solve.max_iterations < 1)
  {
    throw InvalidArgument("sim.max_iterations must be at least 1");
  }
  return s;
}

data::GenerateOptions RunConfig::generate_options() const
{
  data::GenerateOptions o;
  o.scene = scene();
  o.schedule = schedule();
  const long long n = integer("gen.count");
  if (n < 1)
  {
    throw InvalidArgument("gen.count must be at least 1");
  }
  o.count = static_cast<std::size_t>(n);
  o.seed = static_cast<std::uint64_t>(integer("gen.seed"));
  o.fixed_structures = flag("gen.fixed_structures");
  o.skip_budget = static_cast<std::size_t>(std::max(0LL, integer("gen.skip_budget")));
  o.sim = sim();
  o.threads = threads();
  return o;
}

nn::ModelConfig RunConfig::model(const Grid2D &grid, double eps_max) const
{
  nn::ModelConfig m;
  m.grid = grid;
  m.channels = static_cast<int>(integer("model.channels"));
  m.layers = static_cast<int>(integer("model.layers"));
  m.modes_v = static_cast<int>(integer("model.modes_v"));
  m.modes_h = static_cast<int>(integer("model.modes_h"));
  m.groups = static_cast<int>(integer("model.groups"));
  m.conditioning = nn::parse_conditioning(get("model.conditioning"));
  m.lift_width = static_cast<int>(integer("model.lift_width"));
  const double fixed = number("model.eps_max");
  m.eps_max = fixed > 0.0 ? fixed : eps_max;
  m.seed = static_cast<std::uint64_t>(integer("model.seed"));
  m.validate();
  return m;
}

train::TrainConfig RunConfig::train_config() const
{
  train::TrainConfig t;
  t.epochs = static_cast<int>(integer("train.epochs"));
  t.batch_size = static_cast<int>(integer("train.batch_size"));
  t.lr = number("train.lr");
  t.beta1 = number("train.beta1");
  t.beta2 = number("train.beta2");
  t.eps_opt = number("train.eps_opt");
  t.weight_decay = number("train.weight_decay");
  t.lr_min = number("train.lr_min");
  t.seed = static_cast<std::uint64_t>(integer("train.seed"));
  t.val_every = static_cast<int>(integer("train.val_every"));
  t.val_full_grid = flag("train.val_full_grid");
  t.trained_wavelengths = numbers("train.trained_wavelengths");
  if (t.trained_wavelengths.empty())
  {
    t.trained_wavelengths = schedule().points();
  }
  t.split_tol = number("train.split_tol");
  t.threads = threads();
  t.validate();
  return t;
}

int RunConfig::threads() const
{
  const long long n = integer("threads");
  if (n < 0)
  {
    throw InvalidArgument("threads must be nonnegative");
  }
  return n == 0 ? static_cast<int>(std::max(1u, std::thread::hardware_concurrency())) : static_cast<int>(n);
}

void RunConfig::save(const std::filesystem::path &path, const std::string &command) const
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
  out << "# resolved configuration for: specwave " << command << '\n' << values_.str();
}

}  // namespace specwave
