#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "specwave/dataset.hpp"
#include "specwave/model.hpp"
#include "specwave/training.hpp"

namespace specwave::eval
{

enum class Region
{
  all,
  design
};

std::string to_string(Region r);
Region parse_region(const std::string &name);

/// Maps one record to a predicted field. Must be safe to call concurrently.
using Predictor = std::function<ComplexField(const data::Dataset &, const data::Record &)>;

/// Float inference with the given parameters.
Predictor model_predictor(const nn::Parameters<float> &params);

struct WavelengthRow
{
  double wavelength = 0.0;
  std::size_t count = 0;
  bool trained = false;
  double mean = 0.0;  ///< NMSE in the report's region
  double std = 0.0;   ///< population standard deviation
};

struct Aggregate
{
  std::size_t count = 0;
  double mean_all = 0.0;
  double mean_design = 0.0;
};

struct MetricsReport
{
  Region region = Region::all;
  std::vector<WavelengthRow> rows;  ///< ascending wavelength
  Aggregate trained;
  Aggregate untrained;
  std::vector<double> nmse_all;  ///< per record
  std::vector<double> nmse_design;
};

/// Per-record NMSE over the whole grid and over the design box, grouped by
/// wavelength; trained flags from split_by_wavelength(trained, tol).
MetricsReport evaluate(const Predictor &predict, const data::Dataset &ds, std::span<const double> trained,
                       Region region, double tol = 0.5e-9, int threads = 1);

/// Convenience overload: checks that the model grid matches the dataset.
MetricsReport evaluate(const nn::Parameters<float> &params, const data::Dataset &ds,
                       std::span<const double> trained, Region region, double tol = 0.5e-9, int threads = 1);

void write_report_csv(const std::filesystem::path &path, const MetricsReport &report);

struct SweepRow
{
  double wavelength = 0.0;
  std::size_t count = 0;
  double mean = 0.0;
  double std = 0.0;
  double band_lo = 0.0;  ///< mean - 2 std
  double band_hi = 0.0;  ///< mean + 2 std
  bool trained = false;
};

/// NMSE-vs-wavelength curve. With `expected` given, every listed wavelength
/// must have at least one record.
std::vector<SweepRow> sweep(const MetricsReport &report, const std::optional<std::vector<double>> &expected = {});

void write_sweep_csv(const std::filesystem::path &path, std::span<const SweepRow> rows);

struct ErrorMap
{
  Grid2D grid;
  Box design_box;
  std::vector<float> abs_error;  ///< |prediction - target| per cell, row-major

  std::size_t argmax() const;
  /// 8-bit render scaled so the largest error is 255 (all zero when exact).
  std::vector<unsigned char> render() const;
};

ErrorMap error_map(const ComplexField &prediction, const ComplexField &target, const Box &design_box);

/// Writes `<stem>.pgm` (with a design_box comment line) and `<stem>.f32`.
void write_error_map(const std::filesystem::path &stem, const ErrorMap &map);

struct BenchOptions
{
  std::vector<int> batch_sizes{1, 32};
  int trials = 20;
  int warmup = 3;
  double min_trial_seconds = 2e-3;  ///< trials shorter than this repeat internally
  double wavelength = 500e-9;
};

struct BenchRow
{
  std::string kind;  ///< "model" or "solver"
  int batch = 1;
  double seconds_per_sample = 0.0;
  int trials = 0;
  int reps = 1;
};

struct BenchResult
{
  std::vector<BenchRow> model;
  BenchRow solver;
  std::string hardware;

  double speedup(std::size_t i) const { return solver.seconds_per_sample / model.at(i).seconds_per_sample; }
};

std::string hardware_descriptor();

/// Median per-sample times on a single thread. The solver is timed on the
/// same structures the model sees.
BenchResult bench(const nn::Parameters<float> &params, std::span<const PermittivityMap> structures,
                  const fdfd::SimSettings &sim, const fdfd::SourceSpec &source, const BenchOptions &opts = {});

void write_bench_txt(const std::filesystem::path &path, const BenchResult &result);

struct StudyRow
{
  double fraction = 0.0;
  std::size_t train_count = 0;
  double trained_all = 0.0;
  double trained_design = 0.0;
  double untrained_all = 0.0;
  double untrained_design = 0.0;
  double best_val = 0.0;
};

/// One training run per fraction of train_ds with identical seeds, each
/// evaluated on test_ds.
std::vector<StudyRow> dataset_size_study(const nn::ModelConfig &cfg, const train::TrainConfig &tc,
                                         const data::Dataset &train_ds, const data::Dataset &val_ds,
                                         const data::Dataset &test_ds, std::span<const double> fractions);

void write_study_csv(const std::filesystem::path &path, std::span<const StudyRow> rows);

}  // namespace specwave::eval
