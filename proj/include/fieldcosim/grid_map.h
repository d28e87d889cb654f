#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace fieldcosim {

// Row-major occupancy grid. Row 0 covers the minimum y; column 0 the minimum x.
// Cell (col, row) spans [x0 + col*res, x0 + (col+1)*res) x [y0 + row*res, ...).
class GridMap {
 public:
  GridMap() = default;
  GridMap(std::size_t width, std::size_t height, double resolution, double x0, double y0);

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  double resolution() const { return resolution_; }
  double x0() const { return x0_; }
  double y0() const { return y0_; }
  const std::vector<bool>& cells() const { return cells_; }

  bool occupied(std::size_t col, std::size_t row) const { return cells_[row * width_ + col]; }
  void set_occupied(std::size_t col, std::size_t row, bool value = true);

  // World-coordinate lookup; points outside the map are free.
  bool occupied_at(double x, double y) const;
  std::optional<std::pair<std::size_t, std::size_t>> cell_at(double x, double y) const;

  // Marks every cell whose centre lies in the axis-aligned box.
  void fill_box(double x_min, double y_min, double x_max, double y_max);

  // Euclidean distance from (x, y) to the nearest occupied cell square, 0 when
  // the point lies inside one. Returns nullopt for a map with no obstacles.
  std::optional<double> distance_to_nearest_obstacle(double x, double y) const;

  std::size_t occupied_count() const;

  bool operator==(const GridMap&) const = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  double resolution_ = 1.0;
  double x0_ = 0.0;
  double y0_ = 0.0;
  std::vector<bool> cells_;
};

// Text format:
//   GRIDMAP 1
//   <width> <height> <resolution> <x0> <y0>
//   <height lines of width space-separated 0/1 digits, first line = row 0>
GridMap parse_grid_map(std::istream& in, const std::string& source_name = "<stream>");
GridMap read_grid_map(const std::filesystem::path& path);
void write_grid_map(const GridMap& map, std::ostream& out);
void write_grid_map(const GridMap& map, const std::filesystem::path& path);

}  // namespace fieldcosim
