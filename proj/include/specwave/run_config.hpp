#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "specwave/dataset.hpp"
#include "specwave/keyvalue.hpp"
#include "specwave/model.hpp"
#include "specwave/scenes.hpp"
#include "specwave/training.hpp"

namespace specwave
{

/// Flat `section.key=value` run description shared by every subcommand.
/// Values resolve as flags > file > built-in defaults; unknown keys are
/// rejected at every layer.
class RunConfig
{
public:
  RunConfig();

  /// Every accepted key with its default value, in canonical order.
  static const KeyValues &defaults();

  /// Overlays `layer` (file contents or flag overrides).
  void apply(const KeyValues &layer, const std::string &origin);
  void set(const std::string &key, const std::string &value);

  const KeyValues &values() const { return values_; }
  const std::string &get(const std::string &key) const { return values_.get(key); }
  double number(const std::string &key) const { return values_.get_double(key); }
  long long integer(const std::string &key) const { return values_.get_int(key); }
  bool flag(const std::string &key) const;
  std::vector<double> numbers(const std::string &key) const;
  std::vector<int> integers(const std::string &key) const;

  Grid2D grid() const;
  scenes::SceneParams scene() const;
  data::WavelengthSchedule schedule() const;
  data::GenerateOptions generate_options() const;
  fdfd::SimSettings sim() const;
  nn::ModelConfig model(const Grid2D &grid, double eps_max) const;
  train::TrainConfig train_config() const;
  int threads() const;

  /// Writes the resolved values with a leading comment naming the command.
  void save(const std::filesystem::path &path, const std::string &command) const;

private:
  KeyValues values_;
};

/// Parses "64x64" (H x W, i.e. nx x nz).
std::pair<int, int> parse_grid_size(const std::string &text);

/// Comma-separated list of numbers.
std::vector<double> parse_number_list(const std::string &key, const std::string &text);

}  // namespace specwave
