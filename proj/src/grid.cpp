#include "specwave/grid.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "specwave/error.hpp"

namespace specwave
{

void Grid2D::validate() const
{
  if (nx < 8 || nz < 8)
  {
    std::ostringstream msg;
    msg << "grid must be at least 8x8 cells, got " << nx << "x" << nz;
    throw InvalidArgument(msg.str());
  }
  if (!(dl_x > 0.0) || !(dl_z > 0.0) || !std::isfinite(dl_x) || !std::isfinite(dl_z))
  {
    throw InvalidArgument("grid steps must be positive and finite");
  }
}

void Grid2D::check_resolution(double wavelength, double eps_max) const
{
  if (!(wavelength > 0.0) || !std::isfinite(wavelength))
  {
    throw InvalidArgument("wavelength must be positive and finite");
  }
  const double dl = std::max(dl_x, dl_z);
  if (dl > wavelength / 10.0 * (1.0 + 1e-12))
  {
    std::ostringstream msg;
    msg << "grid step " << dl << " m exceeds lambda/10 = " << wavelength / 10.0 << " m";
    throw ResolutionError(msg.str());
  }
  const double ppw = wavelength / (std::sqrt(std::max(eps_max, 1.0)) * dl);
  if (ppw < kMinPointsPerWavelength)
  {
    std::ostringstream msg;
    msg << "only " << ppw << " cells per wavelength inside eps=" << eps_max << " (need "
        << kMinPointsPerWavelength << ")";
    throw ResolutionError(msg.str());
  }
}

PermittivityMap::PermittivityMap(const Grid2D &g, double material)
  : grid(g), eps(g.cells(), 1.0), design_box{}, eps_air(1.0), eps_material(material)
{
}

double PermittivityMap::max_eps() const
{
  return eps.empty() ? eps_air : *std::max_element(eps.begin(), eps.end());
}

double PermittivityMap::material_fraction(const Box &box) const
{
  if (box.empty())
  {
    return 0.0;
  }
  std::size_t count = 0;
  for (int i = box.i0; i < box.i1; ++i)
  {
    for (int k = box.k0; k < box.k1; ++k)
    {
      count += (*this)(i, k) == eps_material ? 1 : 0;
    }
  }
  return static_cast<double>(count) / static_cast<double>(box.cells());
}

void PermittivityMap::validate() const
{
  grid.validate();
  if (eps.size() != grid.cells())
  {
    throw ShapeMismatch("permittivity array does not match grid");
  }
  if (eps_air != 1.0 || !(eps_material > eps_air))
  {
    throw InvalidArgument("material pair must satisfy eps_air = 1 < eps_material");
  }
  if (!design_box.inside(grid))
  {
    throw InvalidArgument("design box lies outside the grid");
  }
  for (double e : eps)
  {
    if (!std::isfinite(e))
    {
      throw NonFiniteError("non-finite permittivity value");
    }
    if (e != eps_air && e != eps_material)
    {
      throw InvalidArgument("permittivity map is not two-valued");
    }
  }
}

}  // namespace specwave
