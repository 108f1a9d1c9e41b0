#pragma once

#include <filesystem>
#include <map>
#include <tuple>

#include "specwave/dataset.hpp"
#include "specwave/model.hpp"
#include "specwave/training.hpp"

namespace specwave::testing
{

/// 64x64 waveguide samples on the 60 nm trained grid (or its midpoints).
inline const data::Dataset &small_dataset(bool midpoints, std::size_t count, std::uint64_t seed)
{
  static std::map<std::tuple<bool, std::size_t, std::uint64_t>, data::Dataset> cache;
  auto key = std::make_tuple(midpoints, count, seed);
  auto it = cache.find(key);
  if (it == cache.end())
  {
    data::GenerateOptions o;
    o.count = count;
    o.seed = seed;
    o.threads = 1;
    o.schedule = midpoints ? data::WavelengthSchedule{430e-9, 670e-9, 60e-9, data::ScheduleMode::trained_grid}
                           : data::WavelengthSchedule{400e-9, 700e-9, 60e-9, data::ScheduleMode::trained_grid};
    it = cache.emplace(key, data::generate_dataset(o).dataset).first;
  }
  return it->second;
}

inline std::vector<double> trained_wavelengths()
{
  return data::WavelengthSchedule{400e-9, 700e-9, 60e-9, data::ScheduleMode::trained_grid}.points();
}

inline nn::ModelConfig small_model(nn::Conditioning mode = nn::Conditioning::wime)
{
  nn::ModelConfig cfg;
  cfg.grid = Grid2D{64, 64, 25e-9, 25e-9};
  cfg.channels = 8;
  cfg.layers = 1;
  cfg.modes_v = 4;
  cfg.modes_h = 4;
  cfg.groups = 2;
  cfg.lift_width = 8;
  cfg.conditioning = mode;
  cfg.seed = 5;
  return cfg;
}

inline train::TrainConfig short_training(int epochs = 3)
{
  train::TrainConfig tc;
  tc.epochs = epochs;
  tc.batch_size = 4;
  tc.seed = 2;
  tc.trained_wavelengths = trained_wavelengths();
  return tc;
}

struct TempDir
{
  std::filesystem::path path;
  explicit TempDir(const std::string &name) : path(std::filesystem::temp_directory_path() / name)
  {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace specwave::testing
