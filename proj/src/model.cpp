#include "specwave/model.hpp"

#include <unsupported/Eigen/SpecialFunctions>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "specwave/error.hpp"
#include "specwave/rng.hpp"

namespace specwave::nn
{

namespace
{

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<Mat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const Mat<T>>;
template <typename T>
using MapRow = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapRow = Eigen::Map<const RowMat<T>>;
template <typename T>
using MapRowStrided = Eigen::Map<RowMat<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using CMapRowStrided = Eigen::Map<const RowMat<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using MapVec = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>;
template <typename T>
using MapArr = Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>>;
template <typename T>
using CMapArr = Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>;

using Ix = Eigen::Index;

template <typename T>
T gelu(T x)
{
  return T(0.5) * x * (T(1) + std::erf(x * T(std::numbers::sqrt2 / 2.0)));
}

// out = GELU(in), vectorized.
template <typename T>
void gelu_into(const T *in, T *out, Ix n)
{
  CMapArr<T> x(in, n);
  MapArr<T>(out, n) = T(0.5) * x * (T(1) + (x * T(std::numbers::sqrt2 / 2.0)).erf());
}

// g *= GELU'(x) with GELU'(x) = Phi(x) + x phi(x).
template <typename T>
void scale_by_gelu_slope(const T *pre, T *g, Ix n)
{
  CMapArr<T> x(pre, n);
  const T norm = T(0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
  MapArr<T>(g, n) *=
      T(0.5) * (T(1) + (x * T(std::numbers::sqrt2 / 2.0)).erf()) + x * norm * (T(-0.5) * x.square()).exp();
}

template <typename T>
void ensure(std::vector<T> &v, std::size_t n)
{
  if (v.size() != n)
  {
    v.assign(n, T(0));
  }
}

// Channel permutation on P-pixel planes: dst[k*G + g] = src[g*K + k].
template <typename T>
void shuffle_planes(const T *src, T *dst, int channels, int groups, std::size_t plane)
{
  const int width = channels / groups;
  for (int g = 0; g < groups; ++g)
  {
    for (int k = 0; k < width; ++k)
    {
      std::copy_n(src + (g * width + k) * plane, plane, dst + (k * groups + g) * plane);
    }
  }
}

// Adjoint (= inverse) of shuffle_planes.
template <typename T>
void unshuffle_planes(const T *src, T *dst, int channels, int groups, std::size_t plane)
{
  const int width = channels / groups;
  for (int g = 0; g < groups; ++g)
  {
    for (int k = 0; k < width; ++k)
    {
      std::copy_n(src + (k * groups + g) * plane, plane, dst + (g * width + k) * plane);
    }
  }
}

// Splits one mode's complex block [out][in] into real and imaginary parts.
template <typename T>
void split_block(const std::complex<T> *w, int width, Mat<T> &re, Mat<T> &im)
{
  re.resize(width, width);
  im.resize(width, width);
  for (int o = 0; o < width; ++o)
  {
    for (int i = 0; i < width; ++i)
    {
      re(o, i) = w[o * width + i].real();
      im(o, i) = w[o * width + i].imag();
    }
  }
}

// Mixes every group of one mode: for each group g the (lines x K) block of
// input columns becomes In * W^T. Blocks start at `base`, one block per
// group, each column-major with `lines` rows.
template <typename T>
void mix_mode(const T *in_r, const T *in_i, T *out_r, T *out_i, const Mat<T> &wr, const Mat<T> &wi, int groups,
              int width, int lines)
{
  for (int g = 0; g < groups; ++g)
  {
    const std::size_t off = static_cast<std::size_t>(g) * width * lines;
    CMapMat<T> ar(in_r + off, lines, width), ai(in_i + off, lines, width);
    MapMat<T> yr(out_r + off, lines, width), yi(out_i + off, lines, width);
    yr.noalias() = ar * wr.transpose();
    yr.noalias() -= ai * wi.transpose();
    yi.noalias() = ar * wi.transpose();
    yi.noalias() += ai * wr.transpose();
  }
}

// Adjoint of mix_mode: d_in += d_out * conj(W), d_W += d_out^T conj(in).
template <typename T>
void mix_mode_adjoint(const T *in_r, const T *in_i, const T *dout_r, const T *dout_i, T *din_r, T *din_i,
                      const Mat<T> &wr, const Mat<T> &wi, Mat<T> &dwr, Mat<T> &dwi, int groups, int width,
                      int lines)
{
  for (int g = 0; g < groups; ++g)
  {
    const std::size_t off = static_cast<std::size_t>(g) * width * lines;
    CMapMat<T> ar(in_r + off, lines, width), ai(in_i + off, lines, width);
    CMapMat<T> gr(dout_r + off, lines, width), gi(dout_i + off, lines, width);
    MapMat<T> xr(din_r + off, lines, width), xi(din_i + off, lines, width);
    xr.noalias() = gr * wr;
    xr.noalias() += gi * wi;
    xi.noalias() = gi * wr;
    xi.noalias() -= gr * wi;
    dwr.noalias() += gr.transpose() * ar;
    dwr.noalias() += gi.transpose() * ai;
    dwi.noalias() += gi.transpose() * ar;
    dwi.noalias() -= gr.transpose() * ai;
  }
}

// Factorized spectral operator (before channel shuffle) on a C x H x W map.
// y is overwritten. Spectra of x are written to `cache`.
template <typename T>
void spectral_forward(const SpectralBasis<T> &b, int channels, int groups, const T *x,
                      const std::complex<T> *wv, const std::complex<T> *wh, T *y, SpectralCache<T> &cache,
                      std::vector<T> &tmp_r, std::vector<T> &tmp_i)
{
  const int H = b.height, W = b.width, Mv = b.modes_v, Mh = b.modes_h;
  const int K = channels / groups;
  const std::size_t P = static_cast<std::size_t>(H) * W;
  const Ix CH = static_cast<Ix>(channels) * H;
  const Ix CW = static_cast<Ix>(channels) * W;
  Mat<T> wr, wi;

  // z branch: transform along the contiguous W axis.
  ensure(cache.zr, static_cast<std::size_t>(CH) * Mv);
  ensure(cache.zi, static_cast<std::size_t>(CH) * Mv);
  ensure(tmp_r, std::max(static_cast<std::size_t>(CH) * Mv, static_cast<std::size_t>(CW) * Mh));
  ensure(tmp_i, tmp_r.size());
  {
    CMapRow<T> xr(x, CH, W);
    MapMat<T> zr(cache.zr.data(), CH, Mv), zi(cache.zi.data(), CH, Mv);
    zr.noalias() = xr * b.fz_cos;
    zi.noalias() = xr * b.fz_sin;
    for (int m = 0; m < Mv; ++m)
    {
      split_block(wv + static_cast<std::size_t>(m) * K * K, K, wr, wi);
      const std::size_t base = static_cast<std::size_t>(m) * CH;
      mix_mode(cache.zr.data() + base, cache.zi.data() + base, tmp_r.data() + base, tmp_i.data() + base, wr, wi,
               groups, K, H);
    }
    MapRow<T> yr(y, CH, W);
    CMapMat<T> orr(tmp_r.data(), CH, Mv), oi(tmp_i.data(), CH, Mv);
    yr.noalias() = orr * b.iz_cos;
    yr.noalias() += oi * b.iz_sin;
  }

  // x branch: transform along H, spectra stored [m][c][w].
  ensure(cache.xr, static_cast<std::size_t>(CW) * Mh);
  ensure(cache.xi, static_cast<std::size_t>(CW) * Mh);
  for (int c = 0; c < channels; ++c)
  {
    CMapRow<T> xc(x + c * P, H, W);
    MapRowStrided<T> sr(cache.xr.data() + static_cast<std::size_t>(c) * W, Mh, W, Eigen::OuterStride<>(CW));
    MapRowStrided<T> si(cache.xi.data() + static_cast<std::size_t>(c) * W, Mh, W, Eigen::OuterStride<>(CW));
    sr.noalias() = b.fx_cos * xc;
    si.noalias() = b.fx_sin * xc;
  }
  for (int m = 0; m < Mh; ++m)
  {
    split_block(wh + static_cast<std::size_t>(m) * K * K, K, wr, wi);
    const std::size_t base = static_cast<std::size_t>(m) * CW;
    mix_mode(cache.xr.data() + base, cache.xi.data() + base, tmp_r.data() + base, tmp_i.data() + base, wr, wi,
             groups, K, W);
  }
  for (int c = 0; c < channels; ++c)
  {
    MapRow<T> yc(y + c * P, H, W);
    CMapRowStrided<T> orr(tmp_r.data() + static_cast<std::size_t>(c) * W, Mh, W, Eigen::OuterStride<>(CW));
    CMapRowStrided<T> oi(tmp_i.data() + static_cast<std::size_t>(c) * W, Mh, W, Eigen::OuterStride<>(CW));
    yc.noalias() += b.ix_cos * orr;
    yc.noalias() += b.ix_sin * oi;
  }
}

// Adjoint of spectral_forward. dx and the complex weight gradients are
// accumulated, not overwritten.
template <typename T>
void spectral_backward(const SpectralBasis<T> &b, int channels, int groups, const T *dy,
                       const std::complex<T> *wv, const std::complex<T> *wh, const SpectralCache<T> &cache, T *dx,
                       std::complex<T> *dwv, std::complex<T> *dwh, std::vector<T> &g_r, std::vector<T> &g_i,
                       std::vector<T> &a_r, std::vector<T> &a_i)
{
  const int H = b.height, W = b.width, Mv = b.modes_v, Mh = b.modes_h;
  const int K = channels / groups;
  const std::size_t P = static_cast<std::size_t>(H) * W;
  const Ix CH = static_cast<Ix>(channels) * H;
  const Ix CW = static_cast<Ix>(channels) * W;
  const std::size_t n = std::max(static_cast<std::size_t>(CH) * Mv, static_cast<std::size_t>(CW) * Mh);
  ensure(g_r, n);
  ensure(g_i, n);
  ensure(a_r, n);
  ensure(a_i, n);
  Mat<T> wr, wi, dwr(K, K), dwi(K, K);

  auto add_weight_grad = [&](std::complex<T> *dst) {
    for (int o = 0; o < K; ++o)
    {
      for (int i = 0; i < K; ++i)
      {
        dst[o * K + i] += std::complex<T>(dwr(o, i), dwi(o, i));
      }
    }
  };

  // z branch.
  {
    CMapRow<T> dyr(dy, CH, W);
    MapMat<T> gr(g_r.data(), CH, Mv), gi(g_i.data(), CH, Mv);
    gr.noalias() = dyr * b.iz_cos.transpose();
    gi.noalias() = dyr * b.iz_sin.transpose();
    for (int m = 0; m < Mv; ++m)
    {
      split_block(wv + static_cast<std::size_t>(m) * K * K, K, wr, wi);
      dwr.setZero();
      dwi.setZero();
      const std::size_t base = static_cast<std::size_t>(m) * CH;
      mix_mode_adjoint(cache.zr.data() + base, cache.zi.data() + base, g_r.data() + base, g_i.data() + base,
                       a_r.data() + base, a_i.data() + base, wr, wi, dwr, dwi, groups, K, H);
      add_weight_grad(dwv + static_cast<std::size_t>(m) * K * K);
    }
    MapRow<T> dxr(dx, CH, W);
    CMapMat<T> ar(a_r.data(), CH, Mv), ai(a_i.data(), CH, Mv);
    dxr.noalias() += ar * b.fz_cos.transpose();
    dxr.noalias() += ai * b.fz_sin.transpose();
  }

  // x branch.
  for (int c = 0; c < channels; ++c)
  {
    CMapRow<T> dyc(dy + c * P, H, W);
    MapRowStrided<T> gr(g_r.data() + static_cast<std::size_t>(c) * W, Mh, W, Eigen::OuterStride<>(CW));
    MapRowStrided<T> gi(g_i.data() + static_cast<std::size_t>(c) * W, Mh, W, Eigen::OuterStride<>(CW));
    gr.noalias() = b.ix_cos.transpose() * dyc;
    gi.noalias() = b.ix_sin.transpose() * dyc;
  }
  for (int m = 0; m < Mh; ++m)
  {
    split_block(wh + static_cast<std::size_t>(m) * K * K, K, wr, wi);
    dwr.setZero();
    dwi.setZero();
    const std::size_t base = static_cast<std::size_t>(m) * CW;
    mix_mode_adjoint(cache.xr.data() + base, cache.xi.data() + base, g_r.data() + base, g_i.data() + base,
                     a_r.data() + base, a_i.data() + base, wr, wi, dwr, dwi, groups, K, W);
    add_weight_grad(dwh + static_cast<std::size_t>(m) * K * K);
  }
  for (int c = 0; c < channels; ++c)
  {
    MapRow<T> dxc(dx + c * P, H, W);
    CMapRowStrided<T> ar(a_r.data() + static_cast<std::size_t>(c) * W, Mh, W, Eigen::OuterStride<>(CW));
    CMapRowStrided<T> ai(a_i.data() + static_cast<std::size_t>(c) * W, Mh, W, Eigen::OuterStride<>(CW));
    dxc.noalias() += b.fx_cos.transpose() * ar;
    dxc.noalias() += b.fx_sin.transpose() * ai;
  }
}

// Sum of a[i] * b[i] (or of b[i] when a is null) in an order that does not
// depend on buffer alignment.
template <typename T>
T fixed_order_dot(const T *a, const T *b, Ix n)
{
  constexpr int lanes = 8;
  T acc[lanes] = {};
  Ix i = 0;
  for (; i + lanes <= n; i += lanes)
  {
    for (int l = 0; l < lanes; ++l)
    {
      acc[l] += (a ? a[i + l] : T(1)) * b[i + l];
    }
  }
  T total = 0;
  for (; i < n; ++i)
  {
    total += (a ? a[i] : T(1)) * b[i];
  }
  for (int l = 0; l < lanes; ++l)
  {
    total += acc[l];
  }
  return total;
}

// y (P x out) = x (P x in) * W^T + 1 b^T with W stored [out][in].
template <typename T>
void dense(const T *x, Ix pixels, int in, int out, const T *w, const T *bias, T *y)
{
  CMapMat<T> xm(x, pixels, in);
  CMapMat<T> wt(w, in, out);
  MapMat<T> ym(y, pixels, out);
  ym.noalias() = xm * wt;
  for (int o = 0; o < out; ++o)
  {
    ym.col(o).array() += bias[o];
  }
}

// Gradients of dense(): dW, db accumulated; dx overwritten or accumulated.
template <typename T>
void dense_backward(const T *x, Ix pixels, int in, int out, const T *w, const T *dy, T *dw, T *db, T *dx,
                    bool accumulate_dx)
{
  CMapMat<T> xm(x, pixels, in);
  CMapMat<T> dym(dy, pixels, out);
  MapMat<T> dwt(dw, in, out);
  if (in == 1)
  {
    for (int o = 0; o < out; ++o)
    {
      dw[o] += fixed_order_dot(x, dy + o * pixels, pixels);
    }
  }
  else
  {
    dwt.noalias() += xm.transpose() * dym;
  }
  for (int o = 0; o < out; ++o)
  {
    db[o] += fixed_order_dot(static_cast<const T *>(nullptr), dy + o * pixels, pixels);
  }
  if (dx)
  {
    CMapMat<T> wt(w, in, out);
    MapMat<T> dxm(dx, pixels, in);
    if (accumulate_dx)
    {
      dxm.noalias() += dym * wt.transpose();
    }
    else
    {
      dxm.noalias() = dym * wt.transpose();
    }
  }
}

template <typename T>
const std::complex<T> *as_complex(const T *p)
{
  return reinterpret_cast<const std::complex<T> *>(p);
}

template <typename T>
std::complex<T> *as_complex(T *p)
{
  return reinterpret_cast<std::complex<T> *>(p);
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration and parameter layout

std::string to_string(Conditioning c)
{
  return c == Conditioning::wime ? "wime" : "concat";
}

Conditioning parse_conditioning(const std::string &name)
{
  if (name == "wime")
  {
    return Conditioning::wime;
  }
  if (name == "concat")
  {
    return Conditioning::concat;
  }
  throw InvalidArgument("unknown conditioning mode '" + name + "'");
}

void ModelConfig::validate() const
{
  grid.validate();
  std::ostringstream msg;
  if (channels < 1 || layers < 1 || groups < 1 || lift_width < 1)
  {
    msg << "channels, layers, groups and lift_width must be positive";
  }
  else if (channels % groups != 0)
  {
    msg << "channels (" << channels << ") not divisible by groups (" << groups << ")";
  }
  else if (modes_v < 1 || modes_v > grid.nz / 2 + 1)
  {
    msg << "modes_v=" << modes_v << " outside [1, nz/2+1] for nz=" << grid.nz;
  }
  else if (modes_h < 1 || modes_h > grid.nx / 2 + 1)
  {
    msg << "modes_h=" << modes_h << " outside [1, nx/2+1] for nx=" << grid.nx;
  }
  else if (!(eps_max > 1.0) || !std::isfinite(eps_max))
  {
    msg << "eps_max must exceed 1";
  }
  if (!msg.str().empty())
  {
    throw InvalidArgument(msg.str());
  }
}

std::int64_t spectral_complex_entries(const ModelConfig &cfg)
{
  const std::int64_t k = cfg.channels / cfg.groups;
  return k * k * (cfg.modes_v + cfg.modes_h);
}

std::int64_t param_count(const ModelConfig &cfg)
{
  const std::int64_t c = cfg.channels;
  const std::int64_t lw = cfg.lift_width;
  const bool wime = cfg.conditioning == Conditioning::wime;
  std::int64_t n = c * cfg.input_channels() + c;  // lift
  if (wime)
  {
    n += 4 * c + c;  // prior lift
  }
  std::int64_t per_layer = 2 * spectral_complex_entries(cfg) + c * c + c;
  if (wime)
  {
    per_layer += c * c + c;
  }
  n += cfg.layers * per_layer;
  n += lw * c + lw + 2 * lw + 2;  // head
  return n;
}

ParameterLayout::ParameterLayout(const ModelConfig &cfg)
{
  cfg.validate();
  const int c = cfg.channels;
  const int k = cfg.group_width();
  const bool wime = cfg.conditioning == Conditioning::wime;
  using I = TensorSpec::Init;
  lift_w = add("lift_eps.weight", {c, cfg.input_channels()}, false, I::fan_in, cfg.input_channels());
  lift_b = add("lift_eps.bias", {c}, false, I::zero, 1);
  if (wime)
  {
    lift_prior_w = add("lift_prior.weight", {c, 4}, false, I::fan_in, 4);
    lift_prior_b = add("lift_prior.bias", {c}, false, I::zero, 1);
  }
  for (int l = 0; l < cfg.layers; ++l)
  {
    const std::string p = "layer" + std::to_string(l) + ".";
    LayerSlots s{};
    s.spectral_v = add(p + "spectral_v", {cfg.modes_v, k, k}, true, I::spectral, 1);
    s.spectral_h = add(p + "spectral_h", {cfg.modes_h, k, k}, true, I::spectral, 1);
    s.pointwise_w = add(p + "pointwise.weight", {c, c}, false, I::fan_in, c);
    s.pointwise_b = add(p + "pointwise.bias", {c}, false, I::zero, 1);
    if (wime)
    {
      s.prior_w = add(p + "prior_proj.weight", {c, c}, false, I::fan_in, c);
      s.prior_b = add(p + "prior_proj.bias", {c}, false, I::zero, 1);
    }
    else
    {
      s.prior_w = s.prior_b = 0;
    }
    layer.push_back(s);
  }
  head_hidden_w = add("head.hidden.weight", {cfg.lift_width, c}, false, I::fan_in, c);
  head_hidden_b = add("head.hidden.bias", {cfg.lift_width}, false, I::zero, 1);
  head_out_w = add("head.out.weight", {2, cfg.lift_width}, false, I::fan_in, cfg.lift_width);
  head_out_b = add("head.out.bias", {2}, false, I::zero, 1);
}

std::size_t ParameterLayout::add(const std::string &name, std::vector<int> shape, bool complex,
                                 TensorSpec::Init init, int fan_in)
{
  TensorSpec t;
  t.name = name;
  t.shape = std::move(shape);
  t.complex = complex;
  t.offset = total_;
  std::size_t n = 1;
  for (int d : t.shape)
  {
    n *= static_cast<std::size_t>(d);
  }
  t.size = complex ? 2 * n : n;
  t.init = init;
  t.fan_in = fan_in;
  total_ += t.size;
  tensors_.push_back(std::move(t));
  return tensors_.back().offset;
}

const TensorSpec &ParameterLayout::find(const std::string &name) const
{
  for (const auto &t : tensors_)
  {
    if (t.name == name)
    {
      return t;
    }
  }
  throw InvalidArgument("no parameter tensor named '" + name + "'");
}

double init_bound(const ModelConfig &cfg, const TensorSpec &spec)
{
  switch (spec.init)
  {
    case TensorSpec::Init::fan_in:
      return 1.0 / std::sqrt(static_cast<double>(spec.fan_in));
    case TensorSpec::Init::spectral:
      return 1.0 / (static_cast<double>(cfg.channels) * std::max(cfg.modes_v, cfg.modes_h));
    case TensorSpec::Init::zero:
      return 0.0;
  }
  return 0.0;
}

template <typename T>
Parameters<T> init_params(const ModelConfig &cfg)
{
  const ParameterLayout layout(cfg);
  Parameters<T> p{cfg, std::vector<T>(layout.total(), T(0))};
  Rng rng(cfg.seed);
  for (const auto &t : layout.tensors())
  {
    const double bound = init_bound(cfg, t);
    for (std::size_t i = 0; i < t.size; ++i)
    {
      double v = 0.0;
      if (t.init == TensorSpec::Init::fan_in)
      {
        v = rng.uniform(-bound, bound);
      }
      else if (t.init == TensorSpec::Init::spectral)
      {
        v = bound * rng.uniform();
      }
      p.values[t.offset + i] = static_cast<T>(v);
    }
  }
  return p;
}

// ---------------------------------------------------------------------------
// Building blocks

template <typename T>
FeatureMap<T> channel_shuffle(const FeatureMap<T> &x, int groups)
{
  if (groups < 1 || x.channels % groups != 0)
  {
    throw InvalidArgument("channel count not divisible by groups");
  }
  FeatureMap<T> y(x.channels, x.height, x.width);
  shuffle_planes(x.data.data(), y.data.data(), x.channels, groups, x.plane());
  return y;
}

template <typename T>
SpectralBasis<T>::SpectralBasis(int h, int w, int mv, int mh) : height(h), width(w), modes_v(mv), modes_h(mh)
{
  if (mv < 1 || mv > w / 2 + 1 || mh < 1 || mh > h / 2 + 1)
  {
    throw InvalidArgument("retained modes exceed the Nyquist limit");
  }
  const double two_pi = 2.0 * std::numbers::pi;
  auto weight = [](int m, int n) {
    return (m == 0 || (n % 2 == 0 && m == n / 2)) ? 1.0 : 2.0;
  };
  fz_cos.resize(w, mv);
  fz_sin.resize(w, mv);
  iz_cos.resize(mv, w);
  iz_sin.resize(mv, w);
  for (int t = 0; t < w; ++t)
  {
    for (int m = 0; m < mv; ++m)
    {
      const double a = two_pi * static_cast<double>((static_cast<long>(m) * t) % w) / w;
      fz_cos(t, m) = static_cast<T>(std::cos(a));
      fz_sin(t, m) = static_cast<T>(-std::sin(a));
      iz_cos(m, t) = static_cast<T>(weight(m, w) * std::cos(a) / w);
      iz_sin(m, t) = static_cast<T>(-weight(m, w) * std::sin(a) / w);
    }
  }
  fx_cos.resize(mh, h);
  fx_sin.resize(mh, h);
  ix_cos.resize(h, mh);
  ix_sin.resize(h, mh);
  for (int t = 0; t < h; ++t)
  {
    for (int m = 0; m < mh; ++m)
    {
      const double a = two_pi * static_cast<double>((static_cast<long>(m) * t) % h) / h;
      fx_cos(m, t) = static_cast<T>(std::cos(a));
      fx_sin(m, t) = static_cast<T>(-std::sin(a));
      ix_cos(t, m) = static_cast<T>(weight(m, h) * std::cos(a) / h);
      ix_sin(t, m) = static_cast<T>(-weight(m, h) * std::sin(a) / h);
    }
  }
}

template <typename T>
FeatureMap<T> fgcs_layer(const FeatureMap<T> &x, std::span<const std::complex<T>> spectral_v,
                         std::span<const std::complex<T>> spectral_h, int groups, int modes_v, int modes_h)
{
  if (groups < 1 || x.channels % groups != 0)
  {
    throw InvalidArgument("channel count not divisible by groups");
  }
  const int k = x.channels / groups;
  if (spectral_v.size() != static_cast<std::size_t>(modes_v) * k * k ||
      spectral_h.size() != static_cast<std::size_t>(modes_h) * k * k)
  {
    throw ShapeMismatch("spectral weight size does not match modes and group width");
  }
  const SpectralBasis<T> basis(x.height, x.width, modes_v, modes_h);
  FeatureMap<T> sum(x.channels, x.height, x.width);
  SpectralCache<T> cache;
  std::vector<T> tr, ti;
  spectral_forward(basis, x.channels, groups, x.data.data(), spectral_v.data(), spectral_h.data(),
                   sum.data.data(), cache, tr, ti);
  return channel_shuffle(sum, groups);
}

template <typename T>
FeatureMap<T> wime_layer(const FeatureMap<T> &x, const FeatureMap<T> &z_wp, const WimeWeights<T> &w, int groups,
                         int modes_v, int modes_h)
{
  const int c = x.channels;
  const bool multiply = !w.prior_w.empty();
  if (multiply && (z_wp.height != x.height || z_wp.width != x.width || z_wp.channels != c))
  {
    throw ShapeMismatch("prior embedding is not co-registered with the feature map");
  }
  if (w.pointwise_w.size() != static_cast<std::size_t>(c) * c || w.pointwise_b.size() != static_cast<std::size_t>(c))
  {
    throw ShapeMismatch("pointwise weights do not match channel count");
  }
  const Ix pixels = static_cast<Ix>(x.plane());
  const FeatureMap<T> s = fgcs_layer(x, w.spectral_v, w.spectral_h, groups, modes_v, modes_h);
  FeatureMap<T> y = x;
  std::vector<T> pre(x.data.size()), mult;
  dense(s.data.data(), pixels, c, c, w.pointwise_w.data(), w.pointwise_b.data(), pre.data());
  if (multiply)
  {
    mult.resize(x.data.size());
    dense(z_wp.data.data(), pixels, c, c, w.prior_w.data(), w.prior_b.data(), mult.data());
  }
  for (std::size_t i = 0; i < y.data.size(); ++i)
  {
    y.data[i] += gelu(pre[i]) * (multiply ? mult[i] : T(1));
  }
  return y;
}

// ---------------------------------------------------------------------------
// Network

template <typename T>
Network<T>::Network(const ModelConfig &cfg)
  : cfg_(cfg), layout_(cfg), basis_(cfg.grid.nx, cfg.grid.nz, cfg.modes_v, cfg.modes_h)
{
}

template <typename T>
std::vector<T> Network<T>::prior_features(double wavelength) const
{
  if (!(wavelength > 0.0) || !std::isfinite(wavelength))
  {
    throw InvalidArgument("wavelength must be positive and finite");
  }
  const Grid2D &g = cfg_.grid;
  const std::size_t P = pixels();
  std::vector<T> out(4 * P);
  const double k0 = 2.0 * std::numbers::pi / wavelength;
  for (int i = 0; i < g.nx; ++i)
  {
    const double cx = std::cos(k0 * i * g.dl_x);
    const double sx = std::sin(k0 * i * g.dl_x);
    for (int k = 0; k < g.nz; ++k)
    {
      const std::size_t c = g.index(i, k);
      out[c] = static_cast<T>(cx);
      out[P + c] = static_cast<T>(sx);
      out[2 * P + c] = static_cast<T>(std::cos(k0 * k * g.dl_z));
      out[3 * P + c] = static_cast<T>(std::sin(k0 * k * g.dl_z));
    }
  }
  return out;
}

template <typename T>
void Network<T>::forward(std::span<const T> params, const Input &input, Tape<T> &tape) const
{
  if (params.size() != layout_.total())
  {
    throw ShapeMismatch("parameter buffer does not match the model layout");
  }
  const std::size_t P = pixels();
  if (input.eps.size() != P)
  {
    throw ShapeMismatch("input grid does not match the model grid");
  }
  const int C = cfg_.channels;
  const int G = cfg_.groups;
  const int cin = cfg_.input_channels();
  const bool wime = cfg_.conditioning == Conditioning::wime;
  const Ix pix = static_cast<Ix>(P);
  const T *w = params.data();

  tape.prior = prior_features(input.wavelength);
  ensure(tape.input, P * cin);
  const double scale = 1.0 / (cfg_.eps_max - 1.0);
  for (std::size_t c = 0; c < P; ++c)
  {
    tape.input[c] = static_cast<T>((input.eps[c] - 1.0) * scale);
  }
  if (!wime)
  {
    std::copy(tape.prior.begin(), tape.prior.end(), tape.input.begin() + P);
  }

  tape.layers.resize(cfg_.layers);
  std::vector<T> x(P * C);
  dense(tape.input.data(), pix, cin, C, w + layout_.lift_w, w + layout_.lift_b, x.data());
  if (wime)
  {
    ensure(tape.z_wp, P * C);
    dense(tape.prior.data(), pix, 4, C, w + layout_.lift_prior_w, w + layout_.lift_prior_b, tape.z_wp.data());
  }

  ensure(tape.work_a, P * C);
  for (int l = 0; l < cfg_.layers; ++l)
  {
    auto &L = tape.layers[l];
    const auto &s = layout_.layer[l];
    L.x = x;
    spectral_forward(basis_, C, G, L.x.data(), as_complex(w + s.spectral_v), as_complex(w + s.spectral_h),
                     tape.work_a.data(), L.spectra, tape.work_b, tape.work_c);
    ensure(L.shuffled, P * C);
    shuffle_planes(tape.work_a.data(), L.shuffled.data(), C, G, P);
    ensure(L.pre, P * C);
    dense(L.shuffled.data(), pix, C, C, w + s.pointwise_w, w + s.pointwise_b, L.pre.data());
    ensure(L.act, P * C);
    gelu_into(L.pre.data(), L.act.data(), pix * C);
    if (wime)
    {
      ensure(L.mult, P * C);
      dense(tape.z_wp.data(), pix, C, C, w + s.prior_w, w + s.prior_b, L.mult.data());
      MapArr<T>(x.data(), pix * C) += CMapArr<T>(L.act.data(), pix * C) * CMapArr<T>(L.mult.data(), pix * C);
    }
    else
    {
      MapArr<T>(x.data(), pix * C) += CMapArr<T>(L.act.data(), pix * C);
    }
  }
  tape.trunk_out = std::move(x);

  const int lw = cfg_.lift_width;
  ensure(tape.head_pre, P * lw);
  dense(tape.trunk_out.data(), pix, C, lw, w + layout_.head_hidden_w, w + layout_.head_hidden_b,
        tape.head_pre.data());
  ensure(tape.head_act, P * lw);
  gelu_into(tape.head_pre.data(), tape.head_act.data(), pix * lw);
  ensure(tape.output, P * 2);
  dense(tape.head_act.data(), pix, lw, 2, w + layout_.head_out_w, w + layout_.head_out_b, tape.output.data());
}

template <typename T>
void Network<T>::backward(std::span<const T> params, Tape<T> &tape, std::span<const T> d_output,
                          std::span<T> grad) const
{
  const std::size_t P = pixels();
  if (params.size() != layout_.total() || grad.size() != layout_.total() || d_output.size() != 2 * P)
  {
    throw ShapeMismatch("backward buffers do not match the model layout");
  }
  const int C = cfg_.channels;
  const int G = cfg_.groups;
  const int cin = cfg_.input_channels();
  const int lw = cfg_.lift_width;
  const bool wime = cfg_.conditioning == Conditioning::wime;
  const Ix pix = static_cast<Ix>(P);
  const T *w = params.data();
  T *dw = grad.data();

  // Head.
  std::vector<T> d_head(P * lw);
  dense_backward(tape.head_act.data(), pix, lw, 2, w + layout_.head_out_w, d_output.data(),
                 dw + layout_.head_out_w, dw + layout_.head_out_b, d_head.data(), false);
  scale_by_gelu_slope(tape.head_pre.data(), d_head.data(), pix * lw);
  std::vector<T> dx(P * C);
  dense_backward(tape.trunk_out.data(), pix, C, lw, w + layout_.head_hidden_w, d_head.data(),
                 dw + layout_.head_hidden_w, dw + layout_.head_hidden_b, dx.data(), false);

  std::vector<T> dz(wime ? P * C : 0, T(0));
  std::vector<T> dpre(P * C), dshuf(P * C), dsum(P * C);
  for (int l = cfg_.layers - 1; l >= 0; --l)
  {
    const auto &L = tape.layers[l];
    const auto &s = layout_.layer[l];
    CMapArr<T> g(dx.data(), pix * C);
    if (wime)
    {
      // d mult = dx * act, reuse dshuf as scratch for it.
      MapArr<T>(dshuf.data(), pix * C) = g * CMapArr<T>(L.act.data(), pix * C);
      dense_backward(tape.z_wp.data(), pix, C, C, w + s.prior_w, dshuf.data(), dw + s.prior_w, dw + s.prior_b,
                     dz.data(), true);
      MapArr<T>(dpre.data(), pix * C) = g * CMapArr<T>(L.mult.data(), pix * C);
    }
    else
    {
      MapArr<T>(dpre.data(), pix * C) = g;
    }
    scale_by_gelu_slope(L.pre.data(), dpre.data(), pix * C);
    dense_backward(L.shuffled.data(), pix, C, C, w + s.pointwise_w, dpre.data(), dw + s.pointwise_w,
                   dw + s.pointwise_b, dshuf.data(), false);
    unshuffle_planes(dshuf.data(), dsum.data(), C, G, P);
    // Residual branch keeps dx; the spectral branch adds to it.
    spectral_backward(basis_, C, G, dsum.data(), as_complex(w + s.spectral_v), as_complex(w + s.spectral_h),
                      L.spectra, dx.data(), as_complex(dw + s.spectral_v), as_complex(dw + s.spectral_h),
                      tape.work_b, tape.work_c, tape.work_d, tape.work_e);
  }

  dense_backward(tape.input.data(), pix, cin, C, w + layout_.lift_w, dx.data(), dw + layout_.lift_w,
                 dw + layout_.lift_b, static_cast<T *>(nullptr), false);
  if (wime)
  {
    dense_backward(tape.prior.data(), pix, 4, C, w + layout_.lift_prior_w, dz.data(), dw + layout_.lift_prior_w,
                   dw + layout_.lift_prior_b, static_cast<T *>(nullptr), false);
  }
}

namespace
{

template <typename T>
ComplexField predict_impl(const Network<T> &net, std::span<const T> params, const PermittivityMap &eps,
                          double wavelength)
{
  if (!(eps.grid == net.config().grid))
  {
    throw ShapeMismatch("permittivity grid does not match the model grid");
  }
  Tape<T> tape;
  net.forward(params, Input{eps.eps, wavelength}, tape);
  ComplexField f(eps.grid);
  const std::size_t P = net.pixels();
  for (std::size_t c = 0; c < P; ++c)
  {
    f.values[c] = cdouble(static_cast<double>(tape.output[c]), static_cast<double>(tape.output[P + c]));
  }
  return f;
}

}  // namespace

ComplexField predict(const Network<double> &net, std::span<const double> params, const PermittivityMap &eps,
                     double wavelength)
{
  return predict_impl(net, params, eps, wavelength);
}

ComplexField predict(const Network<float> &net, std::span<const float> params, const PermittivityMap &eps,
                     double wavelength)
{
  return predict_impl(net, params, eps, wavelength);
}

#define SPECWAVE_INSTANTIATE(T)                                                                            \
  template Parameters<T> init_params<T>(const ModelConfig &);                                              \
  template FeatureMap<T> channel_shuffle<T>(const FeatureMap<T> &, int);                                   \
  template class SpectralBasis<T>;                                                                         \
  template FeatureMap<T> fgcs_layer<T>(const FeatureMap<T> &, std::span<const std::complex<T>>,            \
                                       std::span<const std::complex<T>>, int, int, int);                   \
  template FeatureMap<T> wime_layer<T>(const FeatureMap<T> &, const FeatureMap<T> &, const WimeWeights<T> &, \
                                       int, int, int);                                                     \
  template class Network<T>;

SPECWAVE_INSTANTIATE(float)
SPECWAVE_INSTANTIATE(double)

#undef SPECWAVE_INSTANTIATE

}  // namespace specwave::nn
