#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace specwave
{

using cdouble = std::complex<double>;

/// Simulation domain: nx cells along x (array rows) and nz cells along z
/// (array columns). Light propagates along +z. Storage everywhere is
/// row-major, cell (i, k) at flat index i * nz + k.
struct Grid2D
{
  int nx = 64;
  int nz = 64;
  double dl_x = 25e-9;
  double dl_z = 25e-9;

  std::size_t cells() const { return static_cast<std::size_t>(nx) * static_cast<std::size_t>(nz); }
  std::size_t index(int i, int k) const
  {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(nz) + static_cast<std::size_t>(k);
  }

  /// Throws InvalidArgument unless nx, nz >= 8 and both steps are positive.
  void validate() const;

  /// Throws ResolutionError if the grid is too coarse for `wavelength`.
  /// The free-space rule dl <= lambda/10 is always enforced; `eps_max`
  /// additionally requires at least kMinPointsPerWavelength cells per
  /// wavelength inside the densest material.
  void check_resolution(double wavelength, double eps_max = 1.0) const;

  static constexpr double kMinPointsPerWavelength = 6.0;

  bool operator==(const Grid2D &) const = default;
};

/// Half-open rectangle of cell indices [i0, i1) x [k0, k1).
struct Box
{
  int i0 = 0;
  int k0 = 0;
  int i1 = 0;
  int k1 = 0;

  bool contains(int i, int k) const { return i >= i0 && i < i1 && k >= k0 && k < k1; }
  bool empty() const { return i1 <= i0 || k1 <= k0; }
  std::size_t cells() const
  {
    return empty() ? 0 : static_cast<std::size_t>(i1 - i0) * static_cast<std::size_t>(k1 - k0);
  }
  bool inside(const Grid2D &g) const
  {
    return i0 >= 0 && k0 >= 0 && i1 <= g.nx && k1 <= g.nz && i0 <= i1 && k0 <= k1;
  }
  static Box whole(const Grid2D &g) { return {0, 0, g.nx, g.nz}; }

  bool operator==(const Box &) const = default;
};

/// Relative permittivity per cell plus the design region the randomized
/// structures live in. Two-valued: every cell is eps_air or eps_material.
struct PermittivityMap
{
  Grid2D grid;
  std::vector<double> eps;
  Box design_box;
  double eps_air = 1.0;
  double eps_material = 4.0;

  PermittivityMap() = default;
  PermittivityMap(const Grid2D &g, double material);

  double operator()(int i, int k) const { return eps[grid.index(i, k)]; }
  double &operator()(int i, int k) { return eps[grid.index(i, k)]; }

  double max_eps() const;

  /// Fraction of material cells inside `box`.
  double material_fraction(const Box &box) const;

  /// Checks the two-valued invariant, the box placement and finiteness.
  void validate() const;
};

struct ComplexField
{
  Grid2D grid;
  std::vector<cdouble> values;

  ComplexField() = default;
  explicit ComplexField(const Grid2D &g) : grid(g), values(g.cells(), cdouble{}) {}

  cdouble operator()(int i, int k) const { return values[grid.index(i, k)]; }
  cdouble &operator()(int i, int k) { return values[grid.index(i, k)]; }
};

}  // namespace specwave
