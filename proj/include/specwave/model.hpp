#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "specwave/grid.hpp"

namespace specwave::nn
{

enum class Conditioning : std::uint8_t
{
  wime = 0,    ///< prior enters every layer by element-wise multiplication
  concat = 1,  ///< prior channels concatenated to the input, no multiplication
};

enum class Activation : std::uint8_t
{
  gelu = 0
};

std::string to_string(Conditioning c);
Conditioning parse_conditioning(const std::string &name);

struct ModelConfig
{
  Grid2D grid;  ///< bound grid: H = grid.nx rows, W = grid.nz columns
  int channels = 32;
  int layers = 4;
  int modes_v = 12;  ///< modes kept by the z-axis (column) transform
  int modes_h = 12;  ///< modes kept by the x-axis (row) transform
  int groups = 4;
  Conditioning conditioning = Conditioning::wime;
  Activation activation = Activation::gelu;
  int lift_width = 32;  ///< hidden width of the projection head
  double eps_max = 6.0;  ///< input normalization (eps - 1) / (eps_max - 1)
  std::uint64_t seed = 0;

  int group_width() const { return channels / groups; }
  int input_channels() const { return conditioning == Conditioning::concat ? 5 : 1; }
  void validate() const;

  bool operator==(const ModelConfig &) const = default;
};

/// Complex entries of one layer's spectral weights: (C/G)^2 (M_v + M_h).
std::int64_t spectral_complex_entries(const ModelConfig &cfg);

/// Exact trainable scalar count (complex entries count twice), closed form.
std::int64_t param_count(const ModelConfig &cfg);

/// One named tensor inside the flat parameter buffer.
struct TensorSpec
{
  std::string name;
  std::vector<int> shape;
  bool complex = false;
  std::size_t offset = 0;  ///< in reals
  std::size_t size = 0;    ///< in reals

  enum class Init
  {
    fan_in,
    spectral,
    zero
  } init = Init::zero;
  int fan_in = 1;
};

/// Declaration-ordered list of every parameter tensor for a config.
class ParameterLayout
{
public:
  explicit ParameterLayout(const ModelConfig &cfg);

  const std::vector<TensorSpec> &tensors() const { return tensors_; }
  std::size_t total() const { return total_; }
  const TensorSpec &find(const std::string &name) const;

  // Offsets of the tensors used by the forward pass.
  struct LayerSlots
  {
    std::size_t spectral_v, spectral_h, pointwise_w, pointwise_b, prior_w, prior_b;
  };
  std::size_t lift_w = 0, lift_b = 0, lift_prior_w = 0, lift_prior_b = 0;
  std::vector<LayerSlots> layer;
  std::size_t head_hidden_w = 0, head_hidden_b = 0, head_out_w = 0, head_out_b = 0;

private:
  std::size_t add(const std::string &name, std::vector<int> shape, bool complex, TensorSpec::Init init,
                  int fan_in);
  std::vector<TensorSpec> tensors_;
  std::size_t total_ = 0;
};

/// Trainable weights as one flat real buffer; complex tensors are stored as
/// interleaved (re, im) pairs.
template <typename T>
struct Parameters
{
  ModelConfig config;
  std::vector<T> values;

  std::span<const T> view() const { return values; }
  std::span<T> view() { return values; }
};

/// Seeded init: 1x1 weights U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases 0,
/// spectral re and im parts scale * U[0, 1) with scale 1/(C max(M_v, M_h)).
template <typename T>
Parameters<T> init_params(const ModelConfig &cfg);

/// Upper bound on |value| that init_params can produce for a tensor.
double init_bound(const ModelConfig &cfg, const TensorSpec &spec);

template <typename To, typename From>
Parameters<To> cast_params(const Parameters<From> &p)
{
  Parameters<To> out{p.config, std::vector<To>(p.values.begin(), p.values.end())};
  return out;
}

/// C x H x W feature map, channel planes contiguous.
template <typename T>
struct FeatureMap
{
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<T> data;

  FeatureMap() = default;
  FeatureMap(int c, int h, int w) : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, T(0)) {}
  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  T &at(int c, int i, int k) { return data[c * plane() + static_cast<std::size_t>(i) * width + k]; }
  T at(int c, int i, int k) const { return data[c * plane() + static_cast<std::size_t>(i) * width + k]; }
};

/// Channel c = g*(C/G) + k moves to k*G + g.
template <typename T>
FeatureMap<T> channel_shuffle(const FeatureMap<T> &x, int groups);

/// Precomputed truncated real DFT / inverse DFT matrices for an H x W grid.
template <typename T>
class SpectralBasis
{
public:
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
  SpectralBasis(int height, int width, int modes_v, int modes_h);

  int height, width, modes_v, modes_h;
  // Forward matrices give (re, im) of the DFT, so the *_sin ones carry the
  // minus sign; inverse matrices follow irfft (DC and Nyquist weight 1,
  // other bins 2, imaginary part of DC and Nyquist dropped).
  // z axis (length W): forward W x M_v, inverse M_v x W.
  Mat fz_cos, fz_sin, iz_cos, iz_sin;
  // x axis (length H): forward M_h x H, inverse H x M_h.
  Mat fx_cos, fx_sin, ix_cos, ix_sin;
};

/// Cached truncated spectra of the layer input, needed for weight gradients.
template <typename T>
struct SpectralCache
{
  std::vector<T> zr, zi;  ///< (C*H) x M_v, column-major
  std::vector<T> xr, xi;  ///< [m][c][w]
};

/// Factorized grouped spectral operator followed by channel shuffle.
/// spectral_v / spectral_h hold one shared (C/G)x(C/G) complex block per
/// retained mode, laid out [mode][out][in].
template <typename T>
FeatureMap<T> fgcs_layer(const FeatureMap<T> &x, std::span<const std::complex<T>> spectral_v,
                         std::span<const std::complex<T>> spectral_h, int groups, int modes_v, int modes_h);

/// Per-layer weights of a WIME layer as raw views into a parameter buffer.
template <typename T>
struct WimeWeights
{
  std::span<const std::complex<T>> spectral_v;
  std::span<const std::complex<T>> spectral_h;
  std::span<const T> pointwise_w;  ///< C x C, row-major [out][in]
  std::span<const T> pointwise_b;
  std::span<const T> prior_w;      ///< empty in concat mode
  std::span<const T> prior_b;
};

/// y = x + GELU(pointwise(fgcs(x))) * prior_proj(z_wp); with empty prior
/// weights (concat mode) the multiplication is skipped.
template <typename T>
FeatureMap<T> wime_layer(const FeatureMap<T> &x, const FeatureMap<T> &z_wp, const WimeWeights<T> &w,
                         int groups, int modes_v, int modes_h);

/// One model input: permittivity per cell and a wavelength in meters.
struct Input
{
  std::span<const double> eps;
  double wavelength = 0.0;
};

/// Activations kept by Network::forward for the backward pass.
template <typename T>
struct Tape
{
  std::vector<T> input;     ///< P x Cin
  std::vector<T> prior;     ///< P x 4
  std::vector<T> z_wp;      ///< P x C
  struct Layer
  {
    std::vector<T> x, shuffled, pre, act, mult;
    SpectralCache<T> spectra;
  };
  std::vector<Layer> layers;
  std::vector<T> trunk_out;  ///< P x C
  std::vector<T> head_pre;   ///< P x lift_width
  std::vector<T> head_act;
  std::vector<T> output;     ///< P x 2 (real plane, imaginary plane)

  // Scratch reused between calls.
  std::vector<T> work_a, work_b, work_c, work_d, work_e, work_f;
};

/// The surrogate model bound to one config. Stateless apart from the
/// precomputed spectral basis, so concurrent calls with separate tapes are safe.
template <typename T>
class Network
{
public:
  explicit Network(const ModelConfig &cfg);

  const ModelConfig &config() const { return cfg_; }
  const ParameterLayout &layout() const { return layout_; }
  std::size_t pixels() const { return static_cast<std::size_t>(cfg_.grid.nx) * cfg_.grid.nz; }

  /// Runs the model; the prediction is tape.output (real plane then imaginary plane).
  void forward(std::span<const T> params, const Input &input, Tape<T> &tape) const;

  /// Accumulates d loss / d params into `grad` given d loss / d output.
  void backward(std::span<const T> params, Tape<T> &tape, std::span<const T> d_output,
                std::span<T> grad) const;

  /// Four refined-prior channels for a wavelength, P x 4 column-major.
  std::vector<T> prior_features(double wavelength) const;

private:
  ModelConfig cfg_;
  ParameterLayout layout_;
  SpectralBasis<T> basis_;
};

/// Predicted complex field for one input.
ComplexField predict(const Network<double> &net, std::span<const double> params, const PermittivityMap &eps,
                     double wavelength);
ComplexField predict(const Network<float> &net, std::span<const float> params, const PermittivityMap &eps,
                     double wavelength);

}  // namespace specwave::nn
