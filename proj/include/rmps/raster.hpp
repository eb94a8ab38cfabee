#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "rmps/common.hpp"
#include "rmps/dynamics.hpp"

namespace rmps {

/// State-space window, pixel resolution and shading base.
struct RasterSpec {
  double x_min = -4.0, x_max = 4.0;
  double y_min = -4.0, y_max = 4.0;
  int width = 128;
  int height = 128;
  double alpha = 0.7;

  void validate() const;
};

/// Window [-4, 4]^2 used for the Hénon map.
RasterSpec henon_raster_spec(int size = 128);
/// Fixed (r, p_r) window covering the allowed section region for every mu in [1.5, 15].
RasterSpec sam_raster_spec(int size = 128);

/// Per-pixel point counts, row-major with row 0 at the top of the window.
struct CountGrid {
  int height = 0;
  int width = 0;
  std::vector<std::uint32_t> counts;

  std::uint32_t at(int h, int w) const { return counts[static_cast<std::size_t>(h) * width + w]; }
  std::uint64_t total() const;
};

/// Pixel values alpha^count in (0, 1], row-major.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<double> pixels;

  double at(int h, int w) const { return pixels[static_cast<std::size_t>(h) * width + w]; }
};

/// Pixel holding `p`, or false when p lies outside the window. Points on the
/// max-x / min-y edges fall into the last column / row.
bool pixel_index(const RasterSpec& spec, Point2 p, int& h, int& w);

CountGrid count_grid(const TrajectorySet& trajectories, const RasterSpec& spec);
Image shade(const CountGrid& counts, double alpha);
Image rasterize(const TrajectorySet& trajectories, const RasterSpec& spec);

struct AugmentLimits {
  int min_traj = 10;
  int max_traj = 225;
  int min_steps = 10;
  int max_steps = 250;

  void validate() const;
};

AugmentLimits henon_augment_limits();
AugmentLimits sam_augment_limits();

/// Random subset of trajectories, each truncated to a common random length.
/// N_traj ~ U{min_traj .. min(max_traj, n)}, N_steps ~ U{min_steps .. max_steps}.
TrajectorySet augment(const TrajectorySet& trajectories, const AugmentLimits& limits, Rng& rng);

/// 8-bit grayscale PNG, value = round(255 * pixel).
void write_png(const Image& image, const std::filesystem::path& path);

}  // namespace rmps
