#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "predicate.hpp"
#include "util.hpp"

namespace sash {

struct Cell {
  int x = 0;
  int y = 0;
  bool operator==(const Cell& o) const { return x == o.x && y == o.y; }
  bool operator!=(const Cell& o) const { return !(*this == o); }
};

inline std::ostream& operator<<(std::ostream& os, Cell c) {
  return os << '(' << c.x << ',' << c.y << ')';
}

/// The nine movement actions: the eight compass directions plus staying put.
/// The index order below is the tie-breaking order used everywhere.
enum class Action : int {
  north = 0,
  north_east,
  east,
  south_east,
  south,
  south_west,
  west,
  north_west,
  stay,
};

inline constexpr int kNumActions = 9;

inline constexpr int kActionDx[kNumActions] = {0, 1, 1, 1, 0, -1, -1, -1, 0};
inline constexpr int kActionDy[kNumActions] = {1, 1, 0, -1, -1, -1, 0, 1, 0};

inline constexpr const char* kActionNames[kNumActions] = {
    "N", "NE", "E", "SE", "S", "SW", "W", "NW", "stay"};

inline std::string_view action_name(Action a) { return kActionNames[static_cast<int>(a)]; }

/// Probability-weighted successor cells of one (state, action) pair.
/// Entries are merged per cell and sorted by cell index, so the
/// representation of a distribution is unique.
struct TransitionDistribution {
  struct Entry {
    Cell cell;
    double prob;
  };
  std::vector<Entry> entries;

  double total() const {
    double s = 0.0;
    for (const auto& e : entries) s += e.prob;
    return s;
  }
};

/// Finite grid MDP: bounded rectangle of cells, some of them obstacles,
/// a unique start cell, and slip dynamics on the eight movement actions.
class GridWorld {
 public:
  GridWorld() = default;

  GridWorld(int width, int height, Cell start, std::vector<Cell> obstacles, double p_slip)
      : width_(width), height_(height), start_(start), p_slip_(p_slip) {
    if (width_ <= 0 || height_ <= 0) throw std::invalid_argument("grid dimensions must be positive");
    if (p_slip_ < 0.0 || p_slip_ > 1.0) throw std::invalid_argument("p_slip must lie in [0,1]");
    blocked_.assign(static_cast<std::size_t>(width_) * height_, false);
    for (Cell c : obstacles) {
      if (!in_bounds(c)) throw std::invalid_argument("obstacle out of bounds");
      blocked_[index(c)] = true;
    }
    if (!in_bounds(start_)) throw std::invalid_argument("start out of bounds");
    if (blocked_[index(start_)]) throw std::invalid_argument("start placed on an obstacle");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  Cell start() const { return start_; }
  double p_slip() const { return p_slip_; }
  int n_cells() const { return width_ * height_; }

  bool in_bounds(Cell c) const { return c.x >= 0 && c.x < width_ && c.y >= 0 && c.y < height_; }
  bool is_obstacle(Cell c) const { return in_bounds(c) && blocked_[index(c)]; }
  bool is_free(Cell c) const { return in_bounds(c) && !blocked_[index(c)]; }

  std::size_t index(Cell c) const {
    return static_cast<std::size_t>(c.y) * width_ + static_cast<std::size_t>(c.x);
  }
  Cell cell_at(std::size_t index) const {
    return Cell{static_cast<int>(index % width_), static_cast<int>(index / width_)};
  }

  /// Domain over variables x, y matching the grid bounds.
  Domain domain() const {
    return Domain({{"x", 0, width_ - 1}, {"y", 0, height_ - 1}});
  }

 private:
  int width_ = 1;
  int height_ = 1;
  Cell start_{};
  double p_slip_ = 0.0;
  std::vector<bool> blocked_;
};

inline Valuation valuation_of(Cell s) { return Valuation{s.x, s.y}; }

namespace detail {

// Moving toward a wall or an obstacle keeps the agent in place.
inline Cell resolve_move(const GridWorld& g, Cell s, int action_index) {
  Cell t{s.x + kActionDx[action_index], s.y + kActionDy[action_index]};
  return g.is_free(t) ? t : s;
}

}  // namespace detail

/// Exact successor distribution: the intended direction with probability
/// 1 - p_slip and the two 45-degree-adjacent directions with 0.5 * p_slip
/// each. The stay action never slips. Blocked outcomes fold their mass
/// onto the current cell.
inline TransitionDistribution transition_dist(const GridWorld& g, Cell s, Action a) {
  if (!g.in_bounds(s)) throw std::invalid_argument("state out of bounds");
  if (g.is_obstacle(s)) throw std::invalid_argument("state is an obstacle");

  std::vector<std::pair<Cell, double>> raw;
  if (a == Action::stay) {
    raw.emplace_back(s, 1.0);
  } else {
    int d = static_cast<int>(a);
    double p = g.p_slip();
    if (1.0 - p > 0.0) raw.emplace_back(detail::resolve_move(g, s, d), 1.0 - p);
    if (p > 0.0) {
      raw.emplace_back(detail::resolve_move(g, s, (d + 7) % 8), 0.5 * p);
      raw.emplace_back(detail::resolve_move(g, s, (d + 1) % 8), 0.5 * p);
    }
  }

  TransitionDistribution dist;
  for (const auto& [cell, prob] : raw) {
    auto it = std::find_if(dist.entries.begin(), dist.entries.end(),
                           [&](const auto& e) { return e.cell == cell; });
    if (it == dist.entries.end())
      dist.entries.push_back({cell, prob});
    else
      it->prob += prob;
  }
  std::sort(dist.entries.begin(), dist.entries.end(),
            [&](const auto& l, const auto& r) { return g.index(l.cell) < g.index(r.cell); });
  return dist;
}

/// Samples one successor cell. Deterministic given the stream state.
inline Cell sample_step(const GridWorld& g, Cell s, Action a, std::mt19937_64& rng) {
  TransitionDistribution dist = transition_dist(g, s, a);
  double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  for (const auto& e : dist.entries) {
    acc += e.prob;
    if (u < acc) return e.cell;
  }
  return dist.entries.back().cell;
}

// ---------------------------------------------------------------------------
// Map file format
// ---------------------------------------------------------------------------
//
// Header lines `width=W`, `height=H`, `p_slip=P` (p_slip may be omitted and
// defaults to 0.1), followed by H rows of W characters, top row first
// (y increases upward): '.' free, '#' obstacle, 'S' the unique start cell.

inline GridWorld load_map(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;

  int width = -1, height = -1;
  double p_slip = 0.1;
  std::vector<std::string> rows;

  while (std::getline(in, line)) {
    std::string_view t = util::trim(line);
    if (t.empty()) {
      if (!rows.empty()) break;
      continue;
    }
    auto eq = t.find('=');
    if (rows.empty() && eq != std::string_view::npos) {
      std::string_view key = util::trim(t.substr(0, eq));
      std::string_view val = util::trim(t.substr(eq + 1));
      long long n = 0;
      if (key == "width") {
        if (!util::parse_int(val, n) || n <= 0) throw ParseError("map: invalid width");
        width = static_cast<int>(n);
      } else if (key == "height") {
        if (!util::parse_int(val, n) || n <= 0) throw ParseError("map: invalid height");
        height = static_cast<int>(n);
      } else if (key == "p_slip") {
        try {
          p_slip = std::stod(std::string(val));
        } catch (const std::exception&) {
          throw ParseError("map: invalid p_slip");
        }
      } else {
        throw ParseError("map: unknown header key '" + std::string(key) + "'");
      }
      continue;
    }
    rows.emplace_back(t);
  }

  if (width < 0 || height < 0) throw ParseError("map: missing width/height header");
  if (static_cast<int>(rows.size()) != height)
    throw ParseError("map: expected " + std::to_string(height) + " rows, got " +
                     std::to_string(rows.size()));

  std::vector<Cell> obstacles;
  Cell start{-1, -1};
  bool have_start = false;
  for (int r = 0; r < height; ++r) {
    const std::string& row = rows[static_cast<std::size_t>(r)];
    if (static_cast<int>(row.size()) != width)
      throw ParseError("map: row " + std::to_string(r + 1) + " has width " +
                       std::to_string(row.size()) + ", expected " + std::to_string(width));
    int y = height - 1 - r;  // top row of text is the highest y
    for (int x = 0; x < width; ++x) {
      char c = row[static_cast<std::size_t>(x)];
      if (c == '.') continue;
      if (c == '#') {
        obstacles.push_back(Cell{x, y});
      } else if (c == 'S') {
        if (have_start) throw ParseError("map: multiple start cells");
        start = Cell{x, y};
        have_start = true;
      } else {
        throw ParseError(std::string("map: unexpected character '") + c + "'");
      }
    }
  }
  if (!have_start) throw ParseError("map: missing start cell 'S'");

  return GridWorld(width, height, start, std::move(obstacles), p_slip);
}

}  // namespace sash
