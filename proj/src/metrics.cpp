#include "specwave/metrics.hpp"

#include <cmath>

#include "specwave/error.hpp"

namespace specwave
{

namespace
{

void check_target(double den)
{
  if (!(den > 0.0) || !std::isfinite(den))
  {
    throw InvalidArgument("NMSE needs a target with nonzero finite norm");
  }
}

}  // namespace

double nmse(const ComplexField &pred, const ComplexField &target, const std::optional<Box> &mask)
{
  if (!(pred.grid == target.grid) || pred.values.size() != target.values.size())
  {
    throw ShapeMismatch("prediction and target grids differ");
  }
  const Grid2D &g = target.grid;
  const Box box = mask.value_or(Box::whole(g));
  if (!box.inside(g) || box.empty())
  {
    throw InvalidArgument("NMSE mask must be a nonempty box inside the grid");
  }
  double num = 0.0, den = 0.0;
  for (int i = box.i0; i < box.i1; ++i)
  {
    for (int k = box.k0; k < box.k1; ++k)
    {
      const std::size_t c = g.index(i, k);
      num += std::norm(pred.values[c] - target.values[c]);
      den += std::norm(target.values[c]);
    }
  }
  check_target(den);
  return num / den;
}

template <typename T>
double nmse_planes(std::span<const T> pred, std::span<const T> target, const Grid2D &grid,
                   const std::optional<Box> &mask)
{
  const std::size_t n = grid.cells();
  if (pred.size() != 2 * n || target.size() != 2 * n)
  {
    throw ShapeMismatch("field buffers do not match grid");
  }
  const Box box = mask.value_or(Box::whole(grid));
  if (!box.inside(grid) || box.empty())
  {
    throw InvalidArgument("NMSE mask must be a nonempty box inside the grid");
  }
  double num = 0.0, den = 0.0;
  for (int i = box.i0; i < box.i1; ++i)
  {
    for (int k = box.k0; k < box.k1; ++k)
    {
      for (std::size_t part = 0; part < 2; ++part)
      {
        const std::size_t c = part * n + grid.index(i, k);
        const double d = static_cast<double>(pred[c]) - static_cast<double>(target[c]);
        num += d * d;
        den += static_cast<double>(target[c]) * static_cast<double>(target[c]);
      }
    }
  }
  check_target(den);
  return num / den;
}

template <typename T>
double nmse_and_grad(std::span<const T> pred, std::span<const T> target, std::span<T> d_pred, double weight)
{
  if (pred.size() != target.size() || d_pred.size() != pred.size())
  {
    throw ShapeMismatch("field buffers differ in size");
  }
  double num = 0.0, den = 0.0;
  for (std::size_t c = 0; c < pred.size(); ++c)
  {
    const double d = static_cast<double>(pred[c]) - static_cast<double>(target[c]);
    num += d * d;
    den += static_cast<double>(target[c]) * static_cast<double>(target[c]);
  }
  check_target(den);
  if (!std::isfinite(num))
  {
    throw NonFiniteError("non-finite loss");
  }
  const double scale = 2.0 * weight / den;
  for (std::size_t c = 0; c < pred.size(); ++c)
  {
    d_pred[c] = static_cast<T>(scale * (static_cast<double>(pred[c]) - static_cast<double>(target[c])));
  }
  return num / den;
}

template double nmse_planes<float>(std::span<const float>, std::span<const float>, const Grid2D &,
                                   const std::optional<Box> &);
template double nmse_planes<double>(std::span<const double>, std::span<const double>, const Grid2D &,
                                    const std::optional<Box> &);
template double nmse_and_grad<float>(std::span<const float>, std::span<const float>, std::span<float>, double);
template double nmse_and_grad<double>(std::span<const double>, std::span<const double>, std::span<double>, double);

}  // namespace specwave
