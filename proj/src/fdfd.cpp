#include "specwave/fdfd.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <numbers>
#include <sstream>

#include "specwave/error.hpp"

namespace specwave::fdfd
{

namespace
{

// Stretch factor at continuous position p (in cells) along an axis of n cells.
cdouble stretch(double p, int n, const PmlSpec &pml)
{
  const double t = pml.thickness;
  if (t <= 0)
  {
    return {1.0, 0.0};
  }
  const double depth = std::max({t - p, p - (n - t), 0.0}) / t;
  return {1.0, -pml.sigma_max * std::pow(depth, pml.poly_order)};
}

// d s / d p, p in cells.
cdouble stretch_slope(double p, int n, const PmlSpec &pml)
{
  const double t = pml.thickness;
  if (t <= 0)
  {
    return {0.0, 0.0};
  }
  double direction = 0.0;
  double depth = 0.0;
  if (t - p > 0.0)
  {
    direction = -1.0;
    depth = (t - p) / t;
  }
  else if (p - (n - t) > 0.0)
  {
    direction = 1.0;
    depth = (p - (n - t)) / t;
  }
  if (direction == 0.0)
  {
    return {0.0, 0.0};
  }
  return {0.0, -pml.sigma_max * pml.poly_order * std::pow(depth, pml.poly_order - 1.0) * direction / t};
}

// One axis of the stretched second derivative, as coefficients on offsets
// -2..2 for every cell. Neighbours beyond the axis ends are dropped (zero
// Dirichlet ghost cells).
using AxisStencil = std::vector<std::array<cdouble, 5>>;

AxisStencil axis_stencil(int n, double dl, const PmlSpec &pml, FdOrder order)
{
  AxisStencil c(n);
  for (int i = 0; i < n; ++i)
  {
    auto &row = c[i];
    row.fill(cdouble{});
    const cdouble s = stretch(i + 0.5, n, pml);
    if (order == FdOrder::second)
    {
      // Yee staggering: stretch sampled at the half points either side.
      const cdouble lo = 1.0 / (dl * dl * s * stretch(i, n, pml));
      const cdouble hi = 1.0 / (dl * dl * s * stretch(i + 1.0, n, pml));
      row[1] = lo;
      row[2] = -(lo + hi);
      row[3] = hi;
    }
    else
    {
      const cdouble a = 1.0 / (s * s * (12.0 * dl * dl));
      const cdouble b = -(stretch_slope(i + 0.5, n, pml) / dl) / (s * s * s * (12.0 * dl));
      constexpr std::array<double, 5> d2{-1.0, 16.0, -30.0, 16.0, -1.0};
      constexpr std::array<double, 5> d1{1.0, -8.0, 0.0, 8.0, -1.0};
      for (int o = 0; o < 5; ++o)
      {
        row[o] = a * d2[o] + b * d1[o];
      }
    }
  }
  return c;
}

}  // namespace

void PmlSpec::validate(const Grid2D &grid) const
{
  if (thickness < 0 || 2 * thickness >= std::min(grid.nx, grid.nz))
  {
    std::ostringstream msg;
    msg << "PML thickness " << thickness << " leaves no interior on a " << grid.nx << "x"
        << grid.nz << " grid";
    throw InvalidArgument(msg.str());
  }
  if (!(sigma_max > 0.0) || !std::isfinite(sigma_max))
  {
    throw InvalidArgument("PML sigma_max must be positive");
  }
  if (poly_order < 2.0 || poly_order > 4.0)
  {
    throw InvalidArgument("PML polynomial order must lie in [2, 4]");
  }
}

void SourceSpec::validate(const Grid2D &grid, const PmlSpec &pml) const
{
  if (z_index < pml.thickness || z_index >= grid.nz - pml.thickness)
  {
    std::ostringstream msg;
    msg << "source line z=" << z_index << " is outside the non-PML interior";
    throw InvalidArgument(msg.str());
  }
  if (!std::isfinite(amplitude.real()) || !std::isfinite(amplitude.imag()))
  {
    throw NonFiniteError("source amplitude is not finite");
  }
}

SourceSpec default_source(const PmlSpec &pml)
{
  return SourceSpec{pml.thickness + 2, {1.0, 0.0}};
}

HelmholtzSystem assemble_helmholtz(const PermittivityMap &eps, double wavelength, const PmlSpec &pml,
                                   FdOrder order)
{
  const Grid2D &g = eps.grid;
  g.validate();
  pml.validate(g);
  if (eps.eps.size() != g.cells())
  {
    throw ShapeMismatch("permittivity array does not match grid");
  }
  for (double e : eps.eps)
  {
    if (!std::isfinite(e))
    {
      throw NonFiniteError("non-finite permittivity value");
    }
  }
  g.check_resolution(wavelength, eps.max_eps());

  HelmholtzSystem sys;
  sys.grid = g;
  sys.wavelength = wavelength;
  sys.k0 = 2.0 * std::numbers::pi / wavelength;
  const double k0sq = sys.k0 * sys.k0;

  sys.order = order;
  const AxisStencil cx = axis_stencil(g.nx, g.dl_x, pml, order);
  const AxisStencil cz = axis_stencil(g.nz, g.dl_z, pml, order);

  std::vector<Eigen::Triplet<cdouble, int>> triplets;
  triplets.reserve(g.cells() * (order == FdOrder::second ? 5 : 9));
  for (int i = 0; i < g.nx; ++i)
  {
    for (int k = 0; k < g.nz; ++k)
    {
      const int row = static_cast<int>(g.index(i, k));
      triplets.emplace_back(row, row, cx[i][2] + cz[k][2] + k0sq * eps(i, k));
      for (int o = -2; o <= 2; ++o)
      {
        if (o == 0)
        {
          continue;
        }
        const cdouble wx = cx[i][o + 2];
        if (wx != cdouble{} && i + o >= 0 && i + o < g.nx)
        {
          triplets.emplace_back(row, static_cast<int>(g.index(i + o, k)), wx);
        }
        const cdouble wz = cz[k][o + 2];
        if (wz != cdouble{} && k + o >= 0 && k + o < g.nz)
        {
          triplets.emplace_back(row, static_cast<int>(g.index(i, k + o)), wz);
        }
      }
    }
  }
  const int n = static_cast<int>(g.cells());
  sys.matrix.resize(n, n);
  sys.matrix.setFromTriplets(triplets.begin(), triplets.end());
  sys.matrix.makeCompressed();
  return sys;
}

Vector source_vector(const HelmholtzSystem &system, const SourceSpec &source)
{
  const Grid2D &g = system.grid;
  if (source.z_index < 0 || source.z_index >= g.nz)
  {
    throw InvalidArgument("source line outside grid");
  }
  Vector f = Vector::Zero(static_cast<Eigen::Index>(g.cells()));
  // E'' + k^2 E = -2jk A delta(z - z0) has the solution A exp(-jk|z - z0|).
  const cdouble value = cdouble(0.0, -2.0 * system.k0) * source.amplitude / g.dl_z;
  for (int i = 0; i < g.nx; ++i)
  {
    f[static_cast<Eigen::Index>(g.index(i, source.z_index))] = value;
  }
  return f;
}

double relative_residual(const HelmholtzSystem &system, const ComplexField &field, const Vector &rhs)
{
  if (!(field.grid == system.grid) || rhs.size() != system.matrix.rows())
  {
    throw ShapeMismatch("field, system and source disagree on shape");
  }
  const Eigen::Map<const Vector> e(field.values.data(), static_cast<Eigen::Index>(field.values.size()));
  const double fnorm = rhs.norm();
  const double rnorm = (system.matrix * e - rhs).norm();
  if (fnorm == 0.0)
  {
    return rnorm == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  }
  return rnorm / fnorm;
}

ComplexField solve_rhs(const HelmholtzSystem &system, const Vector &rhs, const SolveOptions &options)
{
  if (rhs.size() != system.matrix.rows())
  {
    throw ShapeMismatch("source vector does not match system size");
  }
  ComplexField field(system.grid);
  if (rhs.norm() == 0.0)
  {
    return field;
  }
  Vector x;

  double tolerance = options.direct_tolerance;
  if (options.kind == SolverKind::direct)
  {
    Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(system.matrix);
    if (lu.info() != Eigen::Success)
    {
      throw SolverError("sparse LU factorization failed: " + lu.lastErrorMessage());
    }
    x = lu.solve(rhs);
  }
  else
  {
    tolerance = options.iterative_tolerance;
    Eigen::BiCGSTAB<SparseMatrix, Eigen::IncompleteLUT<cdouble, int>> solver;
    solver.preconditioner().setDroptol(1e-4);
    solver.preconditioner().setFillfactor(20);
    solver.setMaxIterations(options.max_iterations);
    solver.setTolerance(tolerance * 0.1);
    solver.compute(system.matrix);
    if (solver.info() != Eigen::Success)
    {
      throw SolverError("ILUT preconditioner construction failed");
    }
    x = solver.solve(rhs);
  }
  std::copy(x.data(), x.data() + x.size(), field.values.begin());

  const double residual = relative_residual(system, field, rhs);
  if (!std::isfinite(residual) || residual > tolerance)
  {
    std::ostringstream msg;
    msg << "solve did not reach tolerance " << tolerance << " (residual " << residual << ")";
    throw SolverError(msg.str(), residual);
  }
  return field;
}

ComplexField solve_field(const HelmholtzSystem &system, const SourceSpec &source, const SolveOptions &options)
{
  return solve_rhs(system, source_vector(system, source), options);
}

double helmholtz_residual(const PermittivityMap &eps, double wavelength, const ComplexField &field,
                          const SourceSpec &source, const SimSettings &settings)
{
  if (!(field.grid == eps.grid))
  {
    throw ShapeMismatch("field grid does not match permittivity grid");
  }
  const HelmholtzSystem sys = assemble_helmholtz(eps, wavelength, settings.pml, settings.order);
  return relative_residual(sys, field, source_vector(sys, source));
}

ComplexField simulate(const PermittivityMap &eps, double wavelength, const SourceSpec &source,
                      const SimSettings &settings)
{
  source.validate(eps.grid, settings.pml);
  return solve_field(assemble_helmholtz(eps, wavelength, settings.pml, settings.order), source,
                     settings.solve);
}

double bench_solve_seconds(const PermittivityMap &eps, double wavelength, const SimSettings &settings,
                           int trials, int warmup)
{
  const SourceSpec source = default_source(settings.pml);
  for (int w = 0; w < warmup; ++w)
  {
    (void)simulate(eps, wavelength, source, settings);
  }
  std::vector<double> times;
  for (int t = 0; t < std::max(trials, 1); ++t)
  {
    const auto start = std::chrono::steady_clock::now();
    (void)simulate(eps, wavelength, source, settings);
    times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  }
  std::nth_element(times.begin(), times.begin() + times.size() / 2, times.end());
  return times[times.size() / 2];
}

}  // namespace specwave::fdfd
