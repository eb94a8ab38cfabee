#include "rmps/raster.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <numeric>

namespace rmps {

void RasterSpec::validate() const {
  if (!(x_max > x_min) || !(y_max > y_min))
    throw InvalidArgument("RasterSpec: window must have positive extent");
  if (width < 1 || height < 1) throw InvalidArgument("RasterSpec: width and height must be >= 1");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("RasterSpec: alpha must be in (0, 1]");
}

RasterSpec henon_raster_spec(int size) { return {-4.0, 4.0, -4.0, 4.0, size, size, 0.7}; }

RasterSpec sam_raster_spec(int size) { return {0.0, 2.05, -5.7, 5.7, size, size, 0.7}; }

std::uint64_t CountGrid::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

bool pixel_index(const RasterSpec& spec, Point2 p, int& h, int& w) {
  if (!(p.x >= spec.x_min && p.x <= spec.x_max && p.y >= spec.y_min && p.y <= spec.y_max))
    return false;
  const double fx = (p.x - spec.x_min) / (spec.x_max - spec.x_min) * spec.width;
  const double fy = (spec.y_max - p.y) / (spec.y_max - spec.y_min) * spec.height;
  w = std::min(static_cast<int>(std::floor(fx)), spec.width - 1);
  h = std::min(static_cast<int>(std::floor(fy)), spec.height - 1);
  return true;
}

CountGrid count_grid(const TrajectorySet& trajectories, const RasterSpec& spec) {
  spec.validate();
  CountGrid grid{spec.height, spec.width,
                 std::vector<std::uint32_t>(static_cast<std::size_t>(spec.height) * spec.width, 0)};
  int h = 0, w = 0;
  for (const auto& traj : trajectories)
    for (const auto& p : traj)
      if (pixel_index(spec, p, h, w)) ++grid.counts[static_cast<std::size_t>(h) * spec.width + w];
  return grid;
}

Image shade(const CountGrid& counts, double alpha) {
  Image img{counts.height, counts.width, std::vector<double>(counts.counts.size())};
  std::vector<double> table;
  for (std::size_t i = 0; i < counts.counts.size(); ++i) {
    const auto n = counts.counts[i];
    while (table.size() <= n) table.push_back(std::pow(alpha, static_cast<double>(table.size())));
    img.pixels[i] = table[n];
  }
  return img;
}

Image rasterize(const TrajectorySet& trajectories, const RasterSpec& spec) {
  return shade(count_grid(trajectories, spec), spec.alpha);
}

void AugmentLimits::validate() const {
  if (min_traj < 1 || max_traj < min_traj || min_steps < 1 || max_steps < min_steps)
    throw InvalidArgument("AugmentLimits: require 1 <= min <= max for counts and lengths");
}

AugmentLimits henon_augment_limits() { return {10, 225, 10, 250}; }

AugmentLimits sam_augment_limits() { return {10, 256, 1, 250}; }

TrajectorySet augment(const TrajectorySet& trajectories, const AugmentLimits& limits, Rng& rng) {
  limits.validate();
  if (trajectories.empty()) throw InvalidArgument("augment: empty trajectory collection");
  const auto n = static_cast<std::int64_t>(trajectories.size());
  const std::int64_t hi = std::min<std::int64_t>(limits.max_traj, n);
  const std::int64_t lo = std::min<std::int64_t>(limits.min_traj, hi);
  const auto n_traj = uniform_int(rng, lo, hi);

  // Partial Fisher-Yates: the first n_traj slots are a uniform subset.
  std::vector<std::size_t> order(trajectories.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::int64_t i = 0; i < n_traj; ++i) {
    const auto j = uniform_int(rng, i, n - 1);
    std::swap(order[i], order[j]);
  }
  const auto n_steps = static_cast<std::size_t>(uniform_int(rng, limits.min_steps, limits.max_steps));

  TrajectorySet out;
  out.reserve(n_traj);
  for (std::int64_t i = 0; i < n_traj; ++i) {
    const auto& src = trajectories[order[i]];
    const auto len = std::min(n_steps, src.size());
    out.emplace_back(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(len));
  }
  return out;
}

void write_png(const Image& image, const std::filesystem::path& path) {
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!fp) throw Error("write_png: cannot open " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error("write_png: libpng initialisation failed");
  }
  std::vector<png_byte> row(static_cast<std::size_t>(image.width));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("write_png: libpng error writing " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, image.width, image.height, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int h = 0; h < image.height; ++h) {
    for (int w = 0; w < image.width; ++w)
      row[w] = static_cast<png_byte>(std::lround(255.0 * std::clamp(image.at(h, w), 0.0, 1.0)));
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace rmps
