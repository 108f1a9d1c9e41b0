#include <doctest.h>

#include <cmath>
#include <numbers>

#include "specwave/error.hpp"
#include "specwave/rng.hpp"
#include "specwave/wave_prior.hpp"

using namespace specwave;

namespace
{

Grid2D grid(int n, double dl = 25e-9) { return Grid2D{n, n, dl, dl}; }

}  // namespace

TEST_CASE("peak bin equals N dl / lambda at commensurate wavelengths")
{
  const auto p = refined_wave_prior(grid(64), 400e-9);
  CHECK(spectral_peak(p, Axis::x) == 4);
  CHECK(spectral_peak(p, Axis::z) == 4);
  const auto q = refined_wave_prior(grid(64), 800e-9);
  CHECK(spectral_peak(q, Axis::x) == 2);
}

TEST_CASE("peak bin at a non-integer frequency lands on a neighbour")
{
  const auto p = refined_wave_prior(grid(128), 500e-9);
  const int bin = spectral_peak(p, Axis::x);
  CHECK((bin == 6 || bin == 7));
}

TEST_CASE("very long wavelength peaks at DC")
{
  const Grid2D g = grid(64);
  const auto p = refined_wave_prior(g, 10.0 * g.nx * g.dl_x);
  CHECK(spectral_peak(p, Axis::x) == 0);
  CHECK(spectral_peak(p, Axis::z) == 0);
}

TEST_CASE("spectral consistency over the visible band")
{
  const Grid2D g = grid(64);
  int previous = 1 << 30;
  for (int nm = 400; nm <= 700; nm += 5)
  {
    const double wl = nm * 1e-9;
    const auto p = refined_wave_prior(g, wl);
    const int bin = spectral_peak(p, Axis::x);
    CAPTURE(nm);
    CHECK(std::abs(bin - g.nx * g.dl_x / wl) <= 1.0);
    CHECK(bin <= previous);
    previous = bin;
  }
}

TEST_CASE("prior origin and periodicity")
{
  const auto p = refined_wave_prior(grid(64), 400e-9);
  const Grid2D &g = p.grid;
  for (int k = 0; k < g.nz; ++k)
  {
    CHECK(p.wx[g.index(0, k)] == cdouble(1.0, 0.0));
    CHECK(std::abs(p.wx[g.index(16, k)] - p.wx[g.index(0, k)]) < 1e-12);
  }
  for (int i = 0; i < g.nx; ++i)
  {
    CHECK(std::abs(p.wz[g.index(i, 16)] - p.wz[g.index(i, 0)]) < 1e-12);
    CHECK(p.wz[g.index(i, 0)] == cdouble(1.0, 0.0));
  }
}

TEST_CASE("prior is conjugate to the negated-phase construction")
{
  const Grid2D g = grid(32);
  const double wl = 530e-9;
  const auto p = refined_wave_prior(g, wl);
  for (int i = 0; i < g.nx; ++i)
  {
    const cdouble negated = std::exp(cdouble(0.0, -2.0 * std::numbers::pi * i * g.dl_x / wl));
    CHECK(std::abs(std::conj(p.wx[g.index(i, 3)]) - negated) < 1e-12);
  }
}

TEST_CASE("both variants are pure phase")
{
  const Grid2D g = grid(48);
  PermittivityMap eps(g, 4.0);
  Rng rng(2);
  for (double &e : eps.eps)
  {
    e = rng.uniform() < 0.5 ? 4.0 : 1.0;
  }
  eps.design_box = Box{};
  for (const auto &p : {wave_prior(eps, 600e-9), refined_wave_prior(g, 600e-9)})
  {
    for (std::size_t n = 0; n < g.cells(); ++n)
    {
      REQUIRE(std::abs(std::abs(p.wx[n]) - 1.0) < 1e-12);
      REQUIRE(std::abs(std::abs(p.wz[n]) - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("unit permittivity prior equals the refined prior")
{
  const Grid2D g = grid(32);
  PermittivityMap eps(g, 4.0);
  eps.design_box = Box{};
  const auto a = wave_prior(eps, 470e-9);
  const auto b = refined_wave_prior(g, 470e-9);
  CHECK(a.wx == b.wx);
  CHECK(a.wz == b.wz);
}

TEST_CASE("phase gradient doubles across an eps=4 interface")
{
  const Grid2D g = grid(64);
  PermittivityMap eps(g, 4.0);
  for (int i = 32; i < g.nx; ++i)
  {
    for (int k = 0; k < g.nz; ++k)
    {
      eps(i, k) = 4.0;
    }
  }
  eps.design_box = Box{};
  const double wl = 500e-9;
  const auto p = wave_prior(eps, wl);
  auto step = [&](int i) { return std::arg(p.wx[g.index(i + 1, 5)] / p.wx[g.index(i, 5)]); };
  const double air = step(10);
  const double material = step(45);
  CHECK(air == doctest::Approx(2.0 * std::numbers::pi * g.dl_x / wl));
  CHECK(material == doctest::Approx(2.0 * air));
}

TEST_CASE("prior channels layout")
{
  const Grid2D g = grid(16);
  const auto p = refined_wave_prior(g, 450e-9);
  const auto ch = prior_channels(p);
  REQUIRE(ch.size() == 4 * g.cells());
  const std::size_t n = g.cells();
  CHECK(ch[5] == p.wx[5].real());
  CHECK(ch[n + 5] == p.wx[5].imag());
  CHECK(ch[2 * n + 5] == p.wz[5].real());
  CHECK(ch[3 * n + 5] == p.wz[5].imag());
}

TEST_CASE("invalid wavelength is rejected")
{
  CHECK_THROWS_AS(refined_wave_prior(grid(16), 0.0), InvalidArgument);
  CHECK_THROWS_AS(refined_wave_prior(grid(16), std::nan("")), InvalidArgument);
}
