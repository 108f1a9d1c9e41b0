#include "specwave/training.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <thread>

#include "specwave/checkpoint.hpp"
#include "specwave/error.hpp"
#include "specwave/metrics.hpp"
#include "specwave/rng.hpp"

namespace specwave::train
{

void TrainConfig::validate() const
{
  std::string bad;
  if (epochs < 1)
  {
    bad = "epochs must be >= 1";
  }
  else if (batch_size < 1)
  {
    bad = "batch_size must be >= 1";
  }
  else if (!(lr >= 0.0) || !(lr_min >= 0.0))
  {
    bad = "learning rates must be nonnegative";
  }
  else if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
  {
    bad = "betas must lie in [0, 1)";
  }
  else if (!(eps_opt > 0.0))
  {
    bad = "eps_opt must be positive";
  }
  else if (!(weight_decay >= 0.0))
  {
    bad = "weight_decay must be nonnegative";
  }
  else if (val_every < 1)
  {
    bad = "val_every must be >= 1";
  }
  else if (!(split_tol >= 0.0))
  {
    bad = "split_tol must be nonnegative";
  }
  if (!bad.empty())
  {
    throw InvalidArgument(bad);
  }
}

double cosine_lr(int t, int total, double lr, double lr_min)
{
  if (total < 1 || t < 0 || t > total)
  {
    throw InvalidArgument("cosine schedule needs 0 <= t <= T with T >= 1");
  }
  return lr_min + 0.5 * (lr - lr_min) * (1.0 + std::cos(std::numbers::pi * t / total));
}

template <typename T>
void adamw_step(std::span<T> params, std::span<const T> grad, AdamState<T> &state, const TrainConfig &tc,
                double lr_t)
{
  if (grad.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size())
  {
    throw ShapeMismatch("optimizer state does not match the parameter count");
  }
  for (std::size_t i = 0; i < grad.size(); ++i)
  {
    if (!std::isfinite(static_cast<double>(grad[i])))
    {
      throw NonFiniteError("non-finite gradient at parameter index " + std::to_string(i) + " (step " +
                           std::to_string(state.step + 1) + ")");
    }
  }
  ++state.step;
  const double b1 = tc.beta1, b2 = tc.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  const double decay = 1.0 - lr_t * tc.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i)
  {
    const double g = grad[i];
    const double m = b1 * state.m[i] + (1.0 - b1) * g;
    const double v = b2 * state.v[i] + (1.0 - b2) * g * g;
    state.m[i] = static_cast<T>(m);
    state.v[i] = static_cast<T>(v);
    const double update = (m / c1) / (std::sqrt(v / c2) + tc.eps_opt);
    params[i] = static_cast<T>(static_cast<double>(params[i]) * decay - lr_t * update);
  }
}

template <typename T>
std::vector<Example<T>> prepare(const data::Dataset &ds)
{
  const std::size_t n = ds.grid.cells();
  std::vector<Example<T>> out(ds.size());
  for (std::size_t s = 0; s < ds.size(); ++s)
  {
    const auto &r = ds.records[s];
    auto &e = out[s];
    e.eps.assign(r.eps.begin(), r.eps.end());
    e.wavelength = r.wavelength;
    e.design_box = r.design_box;
    e.target.resize(2 * n);
    for (std::size_t c = 0; c < n; ++c)
    {
      e.target[c] = static_cast<T>(r.field_re[c]);
      e.target[n + c] = static_cast<T>(r.field_im[c]);
    }
  }
  return out;
}

namespace
{

// Runs body(i, worker) for i in [0, n) on up to `threads` workers.
template <typename F>
void parallel_for(std::size_t n, int threads, F &&body)
{
  const auto workers = static_cast<std::size_t>(std::clamp<long>(threads, 1, static_cast<long>(std::max<std::size_t>(n, 1))));
  if (workers <= 1)
  {
    for (std::size_t i = 0; i < n; ++i)
    {
      body(i, std::size_t{0});
    }
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w)
  {
    pool.emplace_back([&, w] {
      for (std::size_t i = next++; i < n; i = next++)
      {
        body(i, w);
      }
    });
  }
}

}  // namespace

template <typename T>
double batch_loss_grad(const nn::Network<T> &net, std::span<const T> params,
                       std::span<const Example<T> *const> batch, std::span<T> grad, Workspace<T> &ws, int threads)
{
  const std::size_t B = batch.size();
  if (B == 0)
  {
    throw InvalidArgument("empty batch");
  }
  const std::size_t workers = static_cast<std::size_t>(std::max(1, threads));
  if (ws.tapes.size() < workers)
  {
    ws.tapes.resize(workers);
  }
  if (ws.grads.size() < B)
  {
    ws.grads.resize(B);
  }
  std::vector<double> losses(B);
  std::vector<std::vector<T>> d_outs(workers);
  const double weight = 1.0 / static_cast<double>(B);
  parallel_for(B, threads, [&](std::size_t s, std::size_t w) {
    const Example<T> &ex = *batch[s];
    auto &tape = ws.tapes[w];
    net.forward(params, nn::Input{ex.eps, ex.wavelength}, tape);
    auto &d_out = d_outs[w];
    d_out.resize(tape.output.size());
    losses[s] = nmse_and_grad<T>(tape.output, ex.target, d_out, weight);
    auto &g = ws.grads[s];
    g.assign(params.size(), T(0));
    net.backward(params, tape, d_out, g);
  });
  std::fill(grad.begin(), grad.end(), T(0));
  double loss = 0.0;
  for (std::size_t s = 0; s < B; ++s)
  {
    const auto &g = ws.grads[s];
    for (std::size_t i = 0; i < grad.size(); ++i)
    {
      grad[i] += g[i];
    }
    loss += losses[s];
  }
  return loss / static_cast<double>(B);
}

template <typename T>
std::vector<double> sample_nmse(const nn::Network<T> &net, std::span<const T> params,
                                std::span<const Example<T>> examples, bool design_only, int threads)
{
  std::vector<double> out(examples.size());
  std::vector<nn::Tape<T>> tapes(static_cast<std::size_t>(std::max(1, threads)));
  const Grid2D &g = net.config().grid;
  parallel_for(examples.size(), threads, [&](std::size_t s, std::size_t w) {
    const auto &ex = examples[s];
    net.forward(params, nn::Input{ex.eps, ex.wavelength}, tapes[w]);
    out[s] = nmse_planes<T>(tapes[w].output, ex.target, g,
                            design_only ? std::optional<Box>(ex.design_box) : std::nullopt);
  });
  return out;
}

void write_history_csv(const std::filesystem::path &path, std::span<const HistoryRow> rows)
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
  out << "epoch,lr,train_nmse,val_nmse_untrained,wall_seconds\n";
  out.precision(10);
  for (const auto &r : rows)
  {
    out << r.epoch << ',' << r.lr << ',' << r.train_nmse << ',';
    if (std::isfinite(r.val_nmse_untrained))
    {
      out << r.val_nmse_untrained;
    }
    out << ',' << r.wall_seconds << '\n';
  }
}

namespace
{

std::vector<double> distinct_wavelengths(const data::Dataset &ds)
{
  std::vector<double> wl;
  for (const auto &[w, n] : data::wavelength_histogram(ds))
  {
    wl.push_back(w);
  }
  return wl;
}

}  // namespace

TrainResult train(const nn::ModelConfig &cfg, const data::Dataset &train_ds, const data::Dataset &val_ds,
                  const TrainConfig &tc, const TrainOutputs &outputs)
{
  return train_from(nn::init_params<float>(cfg), train_ds, val_ds, tc, outputs);
}

TrainResult train_from(nn::Parameters<float> start, const data::Dataset &train_ds, const data::Dataset &val_ds,
                       const TrainConfig &tc, const TrainOutputs &outputs)
{
  tc.validate();
  const nn::ModelConfig &cfg = start.config;
  const nn::Network<float> net(cfg);
  if (start.values.size() != net.layout().total())
  {
    throw ShapeMismatch("starting parameters do not match the model layout");
  }
  if (!(train_ds.grid == cfg.grid) || !(val_ds.grid == cfg.grid))
  {
    throw ShapeMismatch("dataset grid does not match the model grid");
  }
  if (train_ds.size() == 0)
  {
    throw InvalidArgument("training set is empty");
  }

  const std::vector<double> trained =
      tc.trained_wavelengths.empty() ? distinct_wavelengths(train_ds) : tc.trained_wavelengths;
  const data::Split split = data::split_by_wavelength(val_ds, trained, tc.split_tol);
  std::vector<std::size_t> val_idx = tc.val_full_grid ? split.trained : split.untrained;
  if (tc.val_full_grid)
  {
    val_idx.insert(val_idx.end(), split.untrained.begin(), split.untrained.end());
    std::sort(val_idx.begin(), val_idx.end());
  }
  if (val_idx.empty())
  {
    throw InvalidArgument(tc.val_full_grid ? "validation set is empty"
                                           : "validation set has no untrained wavelengths");
  }

  const auto train_ex = prepare<float>(train_ds);
  const auto val_ex = prepare<float>(data::subset(val_ds, val_idx));

  TrainResult result;
  result.last = std::move(start);
  result.best = result.last;
  result.best_val = std::numeric_limits<double>::infinity();

  std::vector<float> &theta = result.last.values;
  AdamState<float> adam(theta.size());
  std::vector<float> grad(theta.size());
  Workspace<float> ws;
  Rng order_rng(mix_seed(tc.seed, 0x5eed));
  std::vector<std::size_t> order(train_ex.size());
  const double floor_lr = std::min(tc.lr_min, tc.lr);
  const auto t0 = std::chrono::steady_clock::now();

  for (int epoch = 1; epoch <= tc.epochs; ++epoch)
  {
    const double lr_t = cosine_lr(epoch - 1, tc.epochs, tc.lr, floor_lr);
    for (std::size_t i = 0; i < order.size(); ++i)
    {
      order[i] = i;
    }
    order_rng.shuffle(order);

    double loss_sum = 0.0;
    std::vector<const Example<float> *> batch;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(tc.batch_size))
    {
      const std::size_t e = std::min(order.size(), b + static_cast<std::size_t>(tc.batch_size));
      batch.clear();
      for (std::size_t i = b; i < e; ++i)
      {
        batch.push_back(&train_ex[order[i]]);
      }
      const double loss = batch_loss_grad<float>(net, theta, batch, grad, ws, tc.threads);
      if (!std::isfinite(loss))
      {
        throw NonFiniteError("training loss became non-finite at epoch " + std::to_string(epoch));
      }
      adamw_step<float>(theta, grad, adam, tc, lr_t);
      loss_sum += loss * static_cast<double>(e - b);
    }

    HistoryRow row;
    row.epoch = epoch;
    row.lr = lr_t;
    row.train_nmse = loss_sum / static_cast<double>(order.size());
    row.val_nmse_untrained = std::numeric_limits<double>::quiet_NaN();
    if (epoch % tc.val_every == 0 || epoch == tc.epochs)
    {
      const auto v = sample_nmse<float>(net, theta, val_ex, false, tc.threads);
      double mean = 0.0;
      for (double x : v)
      {
        mean += x;
      }
      mean /= static_cast<double>(v.size());
      row.val_nmse_untrained = mean;
      if (mean < result.best_val)
      {
        result.best_val = mean;
        result.best_epoch = epoch;
        result.best = result.last;
        if (outputs.dir)
        {
          save_checkpoint(*outputs.dir / "best.wfc", result.best);
        }
      }
    }
    row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.push_back(row);
    if (outputs.on_epoch)
    {
      outputs.on_epoch(row);
    }
  }

  if (outputs.dir)
  {
    save_checkpoint(*outputs.dir / "last.wfc", result.last);
    write_history_csv(*outputs.dir / "history.csv", result.history);
  }
  return result;
}

template void adamw_step<float>(std::span<float>, std::span<const float>, AdamState<float> &, const TrainConfig &,
                                double);
template void adamw_step<double>(std::span<double>, std::span<const double>, AdamState<double> &,
                                 const TrainConfig &, double);
template std::vector<Example<float>> prepare<float>(const data::Dataset &);
template std::vector<Example<double>> prepare<double>(const data::Dataset &);
template double batch_loss_grad<float>(const nn::Network<float> &, std::span<const float>,
                                       std::span<const Example<float> *const>, std::span<float>, Workspace<float> &,
                                       int);
template double batch_loss_grad<double>(const nn::Network<double> &, std::span<const double>,
                                        std::span<const Example<double> *const>, std::span<double>,
                                        Workspace<double> &, int);
template std::vector<double> sample_nmse<float>(const nn::Network<float> &, std::span<const float>,
                                                std::span<const Example<float>>, bool, int);
template std::vector<double> sample_nmse<double>(const nn::Network<double> &, std::span<const double>,
                                                 std::span<const Example<double>>, bool, int);

}  // namespace specwave::train
