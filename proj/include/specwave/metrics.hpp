#pragma once

#include <optional>
#include <span>

#include "specwave/grid.hpp"

namespace specwave
{

/// ||pred - target||^2 / ||target||^2 over stacked real and imaginary parts.
/// With a mask both norms are restricted to the box.
double nmse(const ComplexField &pred, const ComplexField &target, const std::optional<Box> &mask = std::nullopt);

/// Same ratio on planar buffers: [real plane | imaginary plane], each
/// grid.cells() long.
template <typename T>
double nmse_planes(std::span<const T> pred, std::span<const T> target, const Grid2D &grid,
                   const std::optional<Box> &mask = std::nullopt);

/// Whole-domain NMSE and its gradient with respect to pred, scaled by
/// `weight` and written into d_pred.
template <typename T>
double nmse_and_grad(std::span<const T> pred, std::span<const T> target, std::span<T> d_pred, double weight);

}  // namespace specwave
