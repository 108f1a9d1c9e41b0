#pragma once

#include <vector>

#include "specwave/grid.hpp"

namespace specwave
{

/// Two-channel pure-phase conditioning embedding for one wavelength.
/// wx varies along x (rows), wz along z (columns); both unit modulus.
struct WavePrior
{
  Grid2D grid;
  double wavelength = 0.0;
  std::vector<cdouble> wx;
  std::vector<cdouble> wz;
};

enum class Axis
{
  x,
  z
};

/// Permittivity-aware prior: wx = exp(j 2 pi sqrt(eps) i dl_x / lambda),
/// wz = exp(j 2 pi sqrt(eps) k dl_z / lambda). Origin at cell (0, 0).
WavePrior wave_prior(const PermittivityMap &eps, double wavelength);

/// Free-space prior, independent of the permittivity:
/// wx = exp(j 2 pi i dl_x / lambda), wz = exp(j 2 pi k dl_z / lambda).
WavePrior refined_wave_prior(const Grid2D &grid, double wavelength);

/// Index of the strongest bin of the DFT of the axis channel along that
/// axis, with magnitudes averaged over the orthogonal axis.
int spectral_peak(const WavePrior &prior, Axis axis);

/// Magnitude spectrum behind spectral_peak (one value per bin).
std::vector<double> axis_spectrum(const WavePrior &prior, Axis axis);

/// The four real channels (Re wx, Im wx, Re wz, Im wz), each nx*nz row-major.
std::vector<double> prior_channels(const WavePrior &prior);

}  // namespace specwave
