#include "specwave/scenes.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "specwave/error.hpp"
#include "specwave/rng.hpp"

namespace specwave::scenes
{

namespace
{

constexpr int kSourceGap = 2;  // cells between absorbing layer and source line
constexpr int kDesignGap = 4;  // cells between source line and design region

// 1D random segment pattern of length `len`: segments and gaps both at least
// `feature` long, mean segment fraction close to `density`.
std::vector<unsigned char> random_segments(int len, int feature, double density, Rng &rng)
{
  std::vector<unsigned char> out(len, 0);
  if (density <= 0.0)
  {
    return out;
  }
  int pos = rng.uniform_int(0, feature);
  while (pos < len)
  {
    int width = 0;
    int gap = 0;
    const double jitter = rng.uniform(0.6, 1.4);
    if (density >= 0.5)
    {
      gap = rng.uniform_int(feature, 2 * feature);
      width = std::max(feature, static_cast<int>(std::lround(gap * density / (1.0 - density) * jitter)));
    }
    else
    {
      width = rng.uniform_int(feature, 2 * feature);
      gap = std::max(feature, static_cast<int>(std::lround(width * (1.0 - density) / density * jitter)));
    }
    const int end = std::min(pos + width, len);
    if (end - pos >= feature)
    {
      std::fill(out.begin() + pos, out.begin() + end, 1);
    }
    pos += width + gap;
  }
  return out;
}

void fill_layer(PermittivityMap &map, const std::vector<unsigned char> &pattern, int i0, int k0, int k1)
{
  for (int di = 0; di < static_cast<int>(pattern.size()); ++di)
  {
    if (!pattern[di])
    {
      continue;
    }
    for (int k = k0; k < k1; ++k)
    {
      map(i0 + di, k) = map.eps_material;
    }
  }
}

int layer_thickness(const SceneParams &p, int fallback)
{
  return p.layer_cells > 0 ? p.layer_cells : std::max(p.feature_cells, fallback);
}

// Separable Gaussian blur with clamped edges.
std::vector<double> blur(const std::vector<double> &in, int rows, int cols, double sigma)
{
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int o = -radius; o <= radius; ++o)
  {
    kernel[o + radius] = std::exp(-0.5 * o * o / (sigma * sigma));
    sum += kernel[o + radius];
  }
  for (double &w : kernel)
  {
    w /= sum;
  }
  std::vector<double> tmp(in.size(), 0.0);
  std::vector<double> out(in.size(), 0.0);
  for (int r = 0; r < rows; ++r)
  {
    for (int c = 0; c < cols; ++c)
    {
      double acc = 0.0;
      for (int o = -radius; o <= radius; ++o)
      {
        acc += kernel[o + radius] * in[r * cols + std::clamp(c + o, 0, cols - 1)];
      }
      tmp[r * cols + c] = acc;
    }
  }
  for (int r = 0; r < rows; ++r)
  {
    for (int c = 0; c < cols; ++c)
    {
      double acc = 0.0;
      for (int o = -radius; o <= radius; ++o)
      {
        acc += kernel[o + radius] * tmp[std::clamp(r + o, 0, rows - 1) * cols + c];
      }
      out[r * cols + c] = acc;
    }
  }
  return out;
}

double mask_fraction(const Mask &m)
{
  if (m.empty())
  {
    return 0.0;
  }
  return static_cast<double>(std::count(m.begin(), m.end(), 1)) / static_cast<double>(m.size());
}

}  // namespace

std::string to_string(SceneKind kind)
{
  switch (kind)
  {
    case SceneKind::metalens:
      return "metalens";
    case SceneKind::splitter:
      return "splitter";
    case SceneKind::waveguide:
      return "waveguide";
  }
  return "unknown";
}

SceneKind parse_scene_kind(std::string_view name)
{
  if (name == "metalens")
  {
    return SceneKind::metalens;
  }
  if (name == "splitter")
  {
    return SceneKind::splitter;
  }
  if (name == "waveguide")
  {
    return SceneKind::waveguide;
  }
  throw InvalidArgument("unknown scene kind '" + std::string(name) + "'");
}

double default_eps_material(SceneKind kind)
{
  switch (kind)
  {
    case SceneKind::metalens:
      return 4.0;
    case SceneKind::splitter:
      return 6.25;
    case SceneKind::waveguide:
      return 6.0;
  }
  return 4.0;
}

void SceneParams::validate() const
{
  grid.validate();
  if (feature_cells < 2)
  {
    throw InvalidArgument("feature_cells must be at least 2");
  }
  if (fill_density != 0.0 && (fill_density < 0.1 || fill_density > 0.9))
  {
    throw InvalidArgument("fill_density must be 0 or lie in [0.1, 0.9]");
  }
  if (!(material() > 1.0))
  {
    throw InvalidArgument("eps_material must exceed eps_air = 1");
  }
  if (margin_cells < 0 || 2 * margin_cells >= std::min(grid.nx, grid.nz))
  {
    throw InvalidArgument("margin leaves no interior");
  }
  if (layer_count < 1)
  {
    throw InvalidArgument("layer_count must be positive");
  }
  if (layer_cells != 0 && layer_cells < feature_cells)
  {
    throw InvalidArgument("layer_cells must be at least feature_cells");
  }
}

int source_z_index(const SceneParams &p)
{
  return p.margin_cells + kSourceGap;
}

PermittivityMap gen_metalens(const SceneParams &p)
{
  if (p.kind != SceneKind::metalens)
  {
    throw InvalidArgument("gen_metalens called with a non-metalens scene");
  }
  p.validate();
  PermittivityMap map(p.grid, p.material());
  const int k0 = source_z_index(p) + kDesignGap;
  const int k1 = k0 + layer_thickness(p, 4);
  if (k1 > p.grid.nz - p.margin_cells)
  {
    throw InvalidArgument("metalens layer is thicker than the grid interior");
  }
  map.design_box = Box{p.margin_cells, k0, p.grid.nx - p.margin_cells, k1};
  Rng rng(p.seed);
  const int width = map.design_box.i1 - map.design_box.i0;
  fill_layer(map, random_segments(width, p.feature_cells, p.fill_density, rng), map.design_box.i0, k0, k1);
  return map;
}

PermittivityMap gen_splitter(const SceneParams &p)
{
  if (p.kind != SceneKind::splitter)
  {
    throw InvalidArgument("gen_splitter called with a non-splitter scene");
  }
  p.validate();
  PermittivityMap map(p.grid, p.material());
  const int t = layer_thickness(p, 3);
  const int k0 = source_z_index(p) + kDesignGap;
  const int k1 = k0 + p.layer_count * t;
  if (k1 + kDesignGap > p.grid.nz - p.margin_cells)
  {
    std::ostringstream msg;
    msg << "grid too small for " << p.layer_count << " layers of " << t << " cells plus margins";
    throw InvalidArgument(msg.str());
  }
  map.design_box = Box{p.margin_cells, k0, p.grid.nx - p.margin_cells, k1};
  Rng rng(p.seed);
  const int width = map.design_box.i1 - map.design_box.i0;
  for (int layer = 0; layer < p.layer_count; ++layer)
  {
    const int lk = k0 + layer * t;
    fill_layer(map, random_segments(width, p.feature_cells, p.fill_density, rng), map.design_box.i0, lk,
               lk + t);
  }
  return map;
}

PermittivityMap gen_waveguide(const SceneParams &p)
{
  if (p.kind != SceneKind::waveguide)
  {
    throw InvalidArgument("gen_waveguide called with a non-waveguide scene");
  }
  p.validate();
  const Grid2D &g = p.grid;
  PermittivityMap map(g, p.material());

  const int interior_x = g.nx - 2 * p.margin_cells;
  const int z_lo = source_z_index(p) + kDesignGap;
  const int z_room = g.nz - p.margin_cells - z_lo;
  const int side = p.box_cells > 0 ? p.box_cells : std::min(interior_x, z_room) / 2;
  if (side < 2 * p.feature_cells || side > interior_x || side > z_room)
  {
    throw InvalidArgument("waveguide design box does not fit the grid interior");
  }
  const int i0 = (g.nx - side) / 2;
  const int k0 = z_lo + (z_room - side) / 2;
  map.design_box = Box{i0, k0, i0 + side, k0 + side};

  // Straight input/output strips along z, centred in x.
  const int strip = std::max(p.feature_cells, side / 3);
  const int s0 = (g.nx - strip) / 2;
  for (int i = s0; i < s0 + strip; ++i)
  {
    for (int k = 0; k < g.nz; ++k)
    {
      if (k < k0 || k >= k0 + side)
      {
        map(i, k) = map.eps_material;
      }
    }
  }

  if (p.fill_density > 0.0)
  {
    Rng rng(p.seed);
    std::vector<double> noise(static_cast<std::size_t>(side) * side);
    for (double &v : noise)
    {
      v = rng.normal();
    }
    const std::vector<double> field = blur(noise, side, side, 0.6 * p.feature_cells);

    // Pick the threshold whose opened pattern lands closest to the target
    // density. Opened density is monotone in the threshold, so bisect.
    auto pattern_at = [&](double threshold) {
      Mask m(field.size());
      for (std::size_t c = 0; c < field.size(); ++c)
      {
        m[c] = field[c] > threshold ? 1 : 0;
      }
      return opening(m, side, side, p.feature_cells);
    };
    double lo = *std::min_element(field.begin(), field.end()) - 1.0;
    double hi = *std::max_element(field.begin(), field.end()) + 1.0;
    Mask best = pattern_at(lo);
    double best_err = std::abs(mask_fraction(best) - p.fill_density);
    for (int iter = 0; iter < 40; ++iter)
    {
      const double mid = 0.5 * (lo + hi);
      Mask m = pattern_at(mid);
      const double frac = mask_fraction(m);
      const double err = std::abs(frac - p.fill_density);
      if (err < best_err)
      {
        best_err = err;
        best = std::move(m);
      }
      if (frac > p.fill_density)
      {
        lo = mid;
      }
      else
      {
        hi = mid;
      }
    }
    for (int r = 0; r < side; ++r)
    {
      for (int c = 0; c < side; ++c)
      {
        if (best[static_cast<std::size_t>(r) * side + c])
        {
          map(i0 + r, k0 + c) = map.eps_material;
        }
      }
    }
  }
  return map;
}

PermittivityMap generate(const SceneParams &p)
{
  switch (p.kind)
  {
    case SceneKind::metalens:
      return gen_metalens(p);
    case SceneKind::splitter:
      return gen_splitter(p);
    case SceneKind::waveguide:
      return gen_waveguide(p);
  }
  throw InvalidArgument("unknown scene kind");
}

Mask opening(const Mask &mask, int rows, int cols, int size)
{
  // Summed-area table for O(1) "square fully inside the set" queries.
  std::vector<int> sat(static_cast<std::size_t>(rows + 1) * (cols + 1), 0);
  auto at = [&](int r, int c) -> int & { return sat[static_cast<std::size_t>(r) * (cols + 1) + c]; };
  for (int r = 0; r < rows; ++r)
  {
    for (int c = 0; c < cols; ++c)
    {
      at(r + 1, c + 1) = mask[static_cast<std::size_t>(r) * cols + c] + at(r, c + 1) + at(r + 1, c) - at(r, c);
    }
  }
  Mask out(mask.size(), 0);
  const int full = size * size;
  for (int r = 0; r + size <= rows; ++r)
  {
    for (int c = 0; c + size <= cols; ++c)
    {
      const int sum = at(r + size, c + size) - at(r, c + size) - at(r + size, c) + at(r, c);
      if (sum == full)
      {
        for (int dr = 0; dr < size; ++dr)
        {
          std::fill_n(out.begin() + static_cast<std::ptrdiff_t>(r + dr) * cols + c, size, 1);
        }
      }
    }
  }
  return out;
}

bool satisfies_min_feature(const PermittivityMap &map, int feature_cells)
{
  const Grid2D &g = map.grid;
  Mask m(g.cells());
  for (std::size_t c = 0; c < m.size(); ++c)
  {
    m[c] = map.eps[c] == map.eps_material ? 1 : 0;
  }
  return opening(m, g.nx, g.nz, feature_cells) == m;
}

}  // namespace specwave::scenes
