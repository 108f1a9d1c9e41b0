#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "specwave/grid.hpp"

namespace specwave::scenes
{

enum class SceneKind : std::uint8_t
{
  metalens = 0,
  splitter = 1,
  waveguide = 2
};

std::string to_string(SceneKind kind);
SceneKind parse_scene_kind(std::string_view name);

/// Material permittivity used when SceneParams::eps_material is left at 0.
double default_eps_material(SceneKind kind);

struct SceneParams
{
  SceneKind kind = SceneKind::waveguide;
  Grid2D grid;
  double eps_material = 0.0;  ///< 0 selects default_eps_material(kind)
  int feature_cells = 2;
  double fill_density = 0.5;  ///< 0 is accepted and produces an empty design
  int layer_count = 5;        ///< splitter only
  int layer_cells = 0;        ///< thickness of one design layer; 0 = automatic
  int box_cells = 0;          ///< waveguide design box side; 0 = automatic
  int margin_cells = 10;      ///< absorbing layer width kept free of design
  std::uint64_t seed = 0;

  double material() const { return eps_material > 0.0 ? eps_material : default_eps_material(kind); }
  void validate() const;
};

/// z index of the line source the scenes are laid out around.
int source_z_index(const SceneParams &p);

PermittivityMap gen_metalens(const SceneParams &p);
PermittivityMap gen_splitter(const SceneParams &p);
PermittivityMap gen_waveguide(const SceneParams &p);

/// Dispatch on p.kind.
PermittivityMap generate(const SceneParams &p);

/// Row-major boolean mask helpers used for the minimum-feature invariant.
using Mask = std::vector<unsigned char>;

/// Morphological opening with a size x size square. Structuring elements
/// must lie entirely inside the rows x cols array.
Mask opening(const Mask &mask, int rows, int cols, int size);

/// True when no material region is narrower than `feature_cells` along
/// either axis, i.e. the material mask is invariant under opening.
bool satisfies_min_feature(const PermittivityMap &map, int feature_cells);

}  // namespace specwave::scenes
