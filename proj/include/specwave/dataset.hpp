#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "specwave/fdfd.hpp"
#include "specwave/grid.hpp"
#include "specwave/keyvalue.hpp"
#include "specwave/scenes.hpp"

namespace specwave::data
{

inline constexpr char kDatasetMagic[4] = {'W', 'F', 'D', '1'};
inline constexpr std::uint32_t kDatasetVersion = 1;
inline constexpr std::size_t kHeaderBytes = 48;

enum class ScheduleMode : std::uint8_t
{
  trained_grid,
  dense_grid
};

std::string to_string(ScheduleMode m);
ScheduleMode parse_schedule_mode(const std::string &name);

/// Evenly spaced wavelengths start, start + step, ..., end (meters).
struct WavelengthSchedule
{
  double start = 400e-9;
  double end = 700e-9;
  double step = 20e-9;
  ScheduleMode mode = ScheduleMode::trained_grid;

  static WavelengthSchedule trained_default() { return {400e-9, 700e-9, 20e-9, ScheduleMode::trained_grid}; }
  static WavelengthSchedule dense_default() { return {400e-9, 700e-9, 1e-9, ScheduleMode::dense_grid}; }

  /// Requires start < end, step > 0 and (end - start) a whole number of steps.
  void validate() const;
  std::vector<double> points() const;
};

/// One stored sample. Arrays are f32, nx*nz row-major.
struct Record
{
  double wavelength = 0.0;
  std::uint64_t scene_seed = 0;
  Box design_box;
  std::vector<float> eps;
  std::vector<float> field_re;
  std::vector<float> field_im;

  bool operator==(const Record &) const = default;
};

struct Dataset
{
  Grid2D grid;
  scenes::SceneKind scene_kind = scenes::SceneKind::waveguide;
  std::vector<Record> records;

  std::size_t size() const { return records.size(); }
  double max_eps() const;
  bool operator==(const Dataset &) const = default;
};

PermittivityMap permittivity(const Dataset &ds, const Record &r);
ComplexField field(const Dataset &ds, const Record &r);

/// Wavelength rounded to 1 pm, as text in nm; used as histogram key.
std::string wavelength_key(double wavelength);

/// Count of records per wavelength, keyed by wavelength_key order of value.
std::map<double, std::size_t> wavelength_histogram(const Dataset &ds);

struct GenerateOptions
{
  scenes::SceneParams scene;
  WavelengthSchedule schedule;
  std::size_t count = 0;
  std::uint64_t seed = 0;
  /// Reuse each structure across every schedule wavelength (count must be a
  /// multiple of the schedule length) instead of a fresh structure per sample.
  bool fixed_structures = false;
  fdfd::SimSettings sim;
  int threads = 0;              ///< 0 = hardware concurrency
  std::size_t skip_budget = 0;  ///< solver failures tolerated before giving up
};

struct GenerateResult
{
  Dataset dataset;
  std::size_t skipped = 0;
  std::vector<std::string> log;  ///< one line per skipped sample
};

/// Builds the scene, solves each sample and assembles records in index
/// order. Throws SolverError if more than skip_budget samples fail.
GenerateResult generate_dataset(const GenerateOptions &opts);

std::vector<std::uint8_t> encode_dataset(const Dataset &ds);
Dataset decode_dataset(std::span<const std::uint8_t> bytes);

void write_dataset(const std::filesystem::path &path, const Dataset &ds);

struct ReadOptions
{
  std::optional<Grid2D> expect_grid;  ///< FileShapeError if the header disagrees
  bool verify = false;                ///< residual spot check of stored fields
  double verify_fraction = 0.05;
  double verify_tolerance = 1e-5;
  std::uint64_t verify_seed = 0;
};

Dataset read_dataset(const std::filesystem::path &path, const ReadOptions &opts = {});

/// Manifest path for a dataset file: `<path>.manifest`.
std::filesystem::path manifest_path(const std::filesystem::path &dataset_path);

KeyValues make_manifest(const GenerateOptions &opts, const GenerateResult &result);

/// Simulation settings and source recorded in a manifest.
fdfd::SimSettings manifest_settings(const KeyValues &manifest);
fdfd::SourceSpec manifest_source(const KeyValues &manifest);

/// Histogram recorded in a manifest (count.<nm> keys).
std::map<std::string, std::size_t> manifest_histogram(const KeyValues &manifest);

/// Relative Helmholtz residual of stored fields on a seeded random subset of
/// records; returns the largest value.
double verify_residuals(const Dataset &ds, const fdfd::SimSettings &settings, const fdfd::SourceSpec &source,
                        double fraction, std::uint64_t seed);

struct Split
{
  std::vector<std::size_t> trained;
  std::vector<std::size_t> untrained;
};

/// Partitions record indices: trained iff |lambda - w| <= tol for some
/// trained w. tol must be below half the smallest trained-set spacing.
Split split_by_wavelength(const Dataset &ds, std::span<const double> trained, double tol);

Dataset subset(const Dataset &ds, std::span<const std::size_t> indices);

/// First `fraction` of the records (rounded down, at least one required).
Dataset take_fraction(const Dataset &ds, double fraction);

}  // namespace specwave::data
