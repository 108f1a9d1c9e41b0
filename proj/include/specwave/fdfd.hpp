#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "specwave/grid.hpp"

namespace specwave::fdfd
{

using SparseMatrix = Eigen::SparseMatrix<cdouble, Eigen::ColMajor, int>;
using Vector = Eigen::VectorXcd;

/// Absorbing layer by complex coordinate stretching,
/// s(d) = 1 - j * sigma_max * (d / thickness)^poly_order, d = depth into the layer.
struct PmlSpec
{
  int thickness = 10;
  double sigma_max = 16.0;
  double poly_order = 3.0;

  void validate(const Grid2D &grid) const;
};

/// Line current spanning every x cell at a fixed z index. Realizes a
/// normally incident plane wave travelling in +z (and -z on the other side).
struct SourceSpec
{
  int z_index = 12;
  cdouble amplitude{1.0, 0.0};

  void validate(const Grid2D &grid, const PmlSpec &pml) const;
};

/// Default placement: two cells past the PML on the low-z side.
SourceSpec default_source(const PmlSpec &pml);

/// Spatial accuracy of the Laplacian. `second` is the classic 5-point Yee
/// stencil; `fourth` uses 5-point-per-axis central differences with the PML
/// stretch written as s^-2 f'' - s' s^-3 f'.
enum class FdOrder
{
  second,
  fourth
};

/// Assembled operator s_x^-1 d_x(s_x^-1 d_x .) + s_z^-1 d_z(s_z^-1 d_z .) + k0^2 eps
/// on the cell-centred grid, Dirichlet beyond the outermost PML cells.
struct HelmholtzSystem
{
  Grid2D grid;
  double wavelength = 0.0;
  double k0 = 0.0;
  FdOrder order = FdOrder::fourth;
  SparseMatrix matrix;
};

HelmholtzSystem assemble_helmholtz(const PermittivityMap &eps, double wavelength, const PmlSpec &pml,
                                   FdOrder order = FdOrder::fourth);

/// Discretized right-hand side for a line source. The scaling makes a
/// unit-amplitude source radiate a unit-amplitude plane wave in vacuum.
Vector source_vector(const HelmholtzSystem &system, const SourceSpec &source);

enum class SolverKind
{
  direct,
  iterative
};

struct SolveOptions
{
  SolverKind kind = SolverKind::direct;
  double direct_tolerance = 1e-8;
  double iterative_tolerance = 1e-6;
  int max_iterations = 5000;
};

ComplexField solve_field(const HelmholtzSystem &system, const SourceSpec &source,
                         const SolveOptions &options = {});

/// Solve against an arbitrary right-hand side vector.
ComplexField solve_rhs(const HelmholtzSystem &system, const Vector &rhs,
                       const SolveOptions &options = {});

/// ||A E - f|| / ||f||; 0 when both sides vanish.
double relative_residual(const HelmholtzSystem &system, const ComplexField &field, const Vector &rhs);

/// Everything besides the scene and wavelength that determines a solve.
struct SimSettings
{
  PmlSpec pml;
  FdOrder order = FdOrder::fourth;
  SolveOptions solve;
};

double helmholtz_residual(const PermittivityMap &eps, double wavelength, const ComplexField &field,
                          const SourceSpec &source, const SimSettings &settings = {});

/// Convenience: assemble, build the source and solve.
ComplexField simulate(const PermittivityMap &eps, double wavelength, const SourceSpec &source,
                      const SimSettings &settings = {});

/// Benchmark hook: median wall-clock seconds of a full assemble + solve.
double bench_solve_seconds(const PermittivityMap &eps, double wavelength, const SimSettings &settings = {},
                           int trials = 5, int warmup = 1);

}  // namespace specwave::fdfd
