#include "specwave/wave_prior.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "specwave/error.hpp"

namespace specwave
{

namespace
{

void check_wavelength(double wavelength)
{
  if (!(wavelength > 0.0) || !std::isfinite(wavelength))
  {
    throw InvalidArgument("wavelength must be positive and finite");
  }
}

WavePrior build(const Grid2D &g, double wavelength, const std::vector<double> *eps)
{
  check_wavelength(wavelength);
  g.validate();
  WavePrior p;
  p.grid = g;
  p.wavelength = wavelength;
  p.wx.resize(g.cells());
  p.wz.resize(g.cells());
  const double k0 = 2.0 * std::numbers::pi / wavelength;
  for (int i = 0; i < g.nx; ++i)
  {
    for (int k = 0; k < g.nz; ++k)
    {
      const std::size_t c = g.index(i, k);
      const double n = eps ? std::sqrt((*eps)[c]) : 1.0;
      p.wx[c] = std::polar(1.0, k0 * n * i * g.dl_x);
      p.wz[c] = std::polar(1.0, k0 * n * k * g.dl_z);
    }
  }
  return p;
}

}  // namespace

WavePrior wave_prior(const PermittivityMap &eps, double wavelength)
{
  if (eps.eps.size() != eps.grid.cells())
  {
    throw ShapeMismatch("permittivity array does not match grid");
  }
  for (double e : eps.eps)
  {
    if (!(e >= 1.0) || !std::isfinite(e))
    {
      throw InvalidArgument("wave prior needs real permittivity >= 1");
    }
  }
  return build(eps.grid, wavelength, &eps.eps);
}

WavePrior refined_wave_prior(const Grid2D &grid, double wavelength)
{
  return build(grid, wavelength, nullptr);
}

std::vector<double> axis_spectrum(const WavePrior &prior, Axis axis)
{
  const Grid2D &g = prior.grid;
  const int n = axis == Axis::x ? g.nx : g.nz;
  const int lines = axis == Axis::x ? g.nz : g.nx;
  const std::vector<cdouble> &channel = axis == Axis::x ? prior.wx : prior.wz;

  std::vector<cdouble> twiddle(n);
  for (int m = 0; m < n; ++m)
  {
    twiddle[m] = std::polar(1.0, -2.0 * std::numbers::pi * m / n);
  }
  std::vector<double> spectrum(n, 0.0);
  for (int line = 0; line < lines; ++line)
  {
    for (int bin = 0; bin < n; ++bin)
    {
      cdouble acc{};
      for (int t = 0; t < n; ++t)
      {
        const std::size_t c = axis == Axis::x ? g.index(t, line) : g.index(line, t);
        acc += channel[c] * twiddle[(static_cast<long>(bin) * t) % n];
      }
      spectrum[bin] += std::abs(acc);
    }
  }
  for (double &v : spectrum)
  {
    v /= lines;
  }
  return spectrum;
}

int spectral_peak(const WavePrior &prior, Axis axis)
{
  const std::vector<double> s = axis_spectrum(prior, axis);
  return static_cast<int>(std::max_element(s.begin(), s.end()) - s.begin());
}

std::vector<double> prior_channels(const WavePrior &prior)
{
  const std::size_t n = prior.grid.cells();
  std::vector<double> out(4 * n);
  for (std::size_t c = 0; c < n; ++c)
  {
    out[c] = prior.wx[c].real();
    out[n + c] = prior.wx[c].imag();
    out[2 * n + c] = prior.wz[c].real();
    out[3 * n + c] = prior.wz[c].imag();
  }
  return out;
}

}  // namespace specwave
