#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "specwave/dataset.hpp"
#include "specwave/model.hpp"

namespace specwave::train
{

struct TrainConfig
{
  int epochs = 200;
  int batch_size = 32;
  double lr = 0.002;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_opt = 1e-8;
  double weight_decay = 0.0001;
  double lr_min = 0.00001;
  std::uint64_t seed = 0;  ///< drives batch order only
  int val_every = 1;
  /// Validate on every validation record instead of the untrained subset.
  bool val_full_grid = false;
  /// Wavelengths counted as trained; empty = the distinct training-set wavelengths.
  std::vector<double> trained_wavelengths;
  double split_tol = 0.5e-9;
  int threads = 1;

  void validate() const;
};

/// lr_min + (lr - lr_min)(1 + cos(pi t / T)) / 2 for 0 <= t <= T.
double cosine_lr(int t, int total, double lr, double lr_min);

template <typename T>
struct AdamState
{
  std::vector<T> m;
  std::vector<T> v;
  std::int64_t step = 0;

  explicit AdamState(std::size_t n = 0) : m(n, T(0)), v(n, T(0)) {}
};

/// One AdamW update with bias correction and decoupled weight decay.
/// Throws NonFiniteError (parameters untouched) if any gradient is not finite.
template <typename T>
void adamw_step(std::span<T> params, std::span<const T> grad, AdamState<T> &state, const TrainConfig &tc,
                double lr_t);

/// A dataset record in model-ready form.
template <typename T>
struct Example
{
  std::vector<double> eps;
  double wavelength = 0.0;
  std::vector<T> target;  ///< real plane then imaginary plane
  Box design_box;
};

template <typename T>
std::vector<Example<T>> prepare(const data::Dataset &ds);

/// Reusable per-worker buffers for batch gradients.
template <typename T>
struct Workspace
{
  std::vector<nn::Tape<T>> tapes;
  std::vector<std::vector<T>> grads;
  std::vector<T> d_out;
};

/// Mean per-sample NMSE over `batch` and its gradient, written into `grad`.
/// Per-sample gradients are summed in batch order, so the result does not
/// depend on the thread count.
template <typename T>
double batch_loss_grad(const nn::Network<T> &net, std::span<const T> params,
                       std::span<const Example<T> *const> batch, std::span<T> grad, Workspace<T> &ws, int threads);

/// Per-sample NMSE of the model on each example (optionally restricted to
/// the example's design box).
template <typename T>
std::vector<double> sample_nmse(const nn::Network<T> &net, std::span<const T> params,
                                std::span<const Example<T>> examples, bool design_only, int threads);

struct HistoryRow
{
  int epoch = 0;
  double lr = 0.0;
  double train_nmse = 0.0;
  double val_nmse_untrained = 0.0;  ///< NaN on epochs without validation
  double wall_seconds = 0.0;
};

void write_history_csv(const std::filesystem::path &path, std::span<const HistoryRow> rows);

struct TrainResult
{
  nn::Parameters<float> best;
  nn::Parameters<float> last;
  std::vector<HistoryRow> history;
  double best_val = 0.0;
  int best_epoch = 0;
};

struct TrainOutputs
{
  std::optional<std::filesystem::path> dir;  ///< best.wfc, last.wfc, history.csv
  std::function<void(const HistoryRow &)> on_epoch;
};

/// Trains from init_params(cfg). cfg.grid must match both datasets.
TrainResult train(const nn::ModelConfig &cfg, const data::Dataset &train_ds, const data::Dataset &val_ds,
                  const TrainConfig &tc, const TrainOutputs &outputs = {});

/// Same, starting from given parameters.
TrainResult train_from(nn::Parameters<float> start, const data::Dataset &train_ds, const data::Dataset &val_ds,
                       const TrainConfig &tc, const TrainOutputs &outputs = {});

}  // namespace specwave::train
