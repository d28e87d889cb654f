#include "fieldcosim/grid_map.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "fieldcosim/errors.h"
#include "fieldcosim/numeric_format.h"

namespace fieldcosim {

GridMap::GridMap(std::size_t width, std::size_t height, double resolution, double x0, double y0)
    : width_(width), height_(height), resolution_(resolution), x0_(x0), y0_(y0),
      cells_(width * height, false) {
  if (!(resolution > 0.0) || !std::isfinite(resolution)) {
    throw std::invalid_argument("grid resolution must be positive and finite");
  }
  if (!std::isfinite(x0) || !std::isfinite(y0)) {
    throw std::invalid_argument("grid origin must be finite");
  }
}

void GridMap::set_occupied(std::size_t col, std::size_t row, bool value) {
  if (col >= width_ || row >= height_) throw std::out_of_range("grid cell out of range");
  cells_[row * width_ + col] = value;
}

std::optional<std::pair<std::size_t, std::size_t>> GridMap::cell_at(double x, double y) const {
  const double cx = std::floor((x - x0_) / resolution_);
  const double cy = std::floor((y - y0_) / resolution_);
  if (!(cx >= 0.0) || !(cy >= 0.0)) return std::nullopt;
  if (cx >= static_cast<double>(width_) || cy >= static_cast<double>(height_)) return std::nullopt;
  return std::make_pair(static_cast<std::size_t>(cx), static_cast<std::size_t>(cy));
}

bool GridMap::occupied_at(double x, double y) const {
  const auto cell = cell_at(x, y);
  return cell && occupied(cell->first, cell->second);
}

void GridMap::fill_box(double x_min, double y_min, double x_max, double y_max) {
  for (std::size_t row = 0; row < height_; ++row) {
    const double cy = y0_ + (static_cast<double>(row) + 0.5) * resolution_;
    if (cy < y_min || cy > y_max) continue;
    for (std::size_t col = 0; col < width_; ++col) {
      const double cx = x0_ + (static_cast<double>(col) + 0.5) * resolution_;
      if (cx >= x_min && cx <= x_max) set_occupied(col, row);
    }
  }
}

std::optional<double> GridMap::distance_to_nearest_obstacle(double x, double y) const {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t row = 0; row < height_; ++row) {
    const double ylo = y0_ + static_cast<double>(row) * resolution_;
    const double yhi = ylo + resolution_;
    const double dy = y < ylo ? ylo - y : (y > yhi ? y - yhi : 0.0);
    if (dy >= best) continue;
    for (std::size_t col = 0; col < width_; ++col) {
      if (!occupied(col, row)) continue;
      const double xlo = x0_ + static_cast<double>(col) * resolution_;
      const double xhi = xlo + resolution_;
      const double dx = x < xlo ? xlo - x : (x > xhi ? x - xhi : 0.0);
      best = std::min(best, std::hypot(dx, dy));
    }
  }
  if (std::isinf(best)) return std::nullopt;
  return best;
}

std::size_t GridMap::occupied_count() const {
  return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), true));
}

GridMap parse_grid_map(std::istream& in, const std::string& source_name) {
  auto fail = [&](std::size_t line, const std::string& what) -> ConfigError {
    return ConfigError(source_name + ":" + std::to_string(line) + ": " + what);
  };
  std::string line;
  if (!std::getline(in, line) || trim(line) != "GRIDMAP 1") {
    throw fail(1, "expected header 'GRIDMAP 1'");
  }
  if (!std::getline(in, line)) throw fail(2, "missing dimensions line");
  std::istringstream dims{std::string(trim(line))};
  std::string tok[5];
  for (auto& t : tok) {
    if (!(dims >> t)) throw fail(2, "expected 'width height resolution x0 y0'");
  }
  std::string extra;
  if (dims >> extra) throw fail(2, "trailing tokens on dimensions line");
  const auto w = parse_real(tok[0]);
  const auto h = parse_real(tok[1]);
  const auto res = parse_real(tok[2]);
  const auto x0 = parse_real(tok[3]);
  const auto y0 = parse_real(tok[4]);
  if (!w || !h || *w < 0 || *h < 0 || std::floor(*w) != *w || std::floor(*h) != *h) {
    throw fail(2, "width and height must be non-negative integers");
  }
  if (!res || !(*res > 0.0) || !std::isfinite(*res)) throw fail(2, "resolution must be positive");
  if (!x0 || !y0 || !std::isfinite(*x0) || !std::isfinite(*y0)) throw fail(2, "bad origin");

  GridMap map(static_cast<std::size_t>(*w), static_cast<std::size_t>(*h), *res, *x0, *y0);
  for (std::size_t row = 0; row < map.height(); ++row) {
    const std::size_t line_no = row + 3;
    if (!std::getline(in, line)) throw fail(line_no, "missing grid row");
    std::istringstream cells{line};
    std::string cell;
    std::size_t col = 0;
    while (cells >> cell) {
      if (col >= map.width()) throw fail(line_no, "too many cells in row");
      if (cell == "1") {
        map.set_occupied(col, row);
      } else if (cell != "0") {
        throw fail(line_no, "cell values must be 0 or 1");
      }
      ++col;
    }
    if (col != map.width()) throw fail(line_no, "too few cells in row");
  }
  while (std::getline(in, line)) {
    if (!trim(line).empty()) throw ConfigError(source_name + ": trailing content after grid rows");
  }
  return map;
}

GridMap read_grid_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open grid map '" + path.string() + "'");
  return parse_grid_map(in, path.string());
}

void write_grid_map(const GridMap& map, std::ostream& out) {
  out << "GRIDMAP 1\n"
      << map.width() << ' ' << map.height() << ' ' << format_real(map.resolution()) << ' '
      << format_real(map.x0()) << ' ' << format_real(map.y0()) << '\n';
  for (std::size_t row = 0; row < map.height(); ++row) {
    for (std::size_t col = 0; col < map.width(); ++col) {
      if (col) out << ' ';
      out << (map.occupied(col, row) ? '1' : '0');
    }
    out << '\n';
  }
}

void write_grid_map(const GridMap& map, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write grid map '" + path.string() + "'");
  write_grid_map(map, out);
  if (!out) throw ConfigError("write failed for '" + path.string() + "'");
}

}  // namespace fieldcosim
