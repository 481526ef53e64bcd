#include "qmon/envs.hpp"

#include <algorithm>
#include <array>
#include <deque>
#include <map>
#include <sstream>
#include <utility>

namespace qmon {

namespace detail {
extern const std::pair<std::string_view, std::string_view> kBuiltinMaps[];
extern const std::size_t kBuiltinMapCount;
}  // namespace detail

GridMap GridMap::parse(std::string_view text) {
  GridMap m;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty() && line[0] == ';') continue;
    if (line.empty()) continue;
    if (m.width_ != 0 && static_cast<int>(line.size()) != m.width_)
      throw EnvError("ragged map row '" + line + "'");
    m.width_ = static_cast<int>(line.size());
    m.rows_.push_back(line);
  }
  m.height_ = static_cast<int>(m.rows_.size());
  if (m.height_ == 0) throw EnvError("empty map");
  return m;
}

const GridMap& GridMap::builtin(std::string_view name) {
  static const std::map<std::string, GridMap, std::less<>> maps = [] {
    std::map<std::string, GridMap, std::less<>> out;
    for (std::size_t i = 0; i < detail::kBuiltinMapCount; ++i)
      out.emplace(std::string(detail::kBuiltinMaps[i].first), parse(detail::kBuiltinMaps[i].second));
    return out;
  }();
  auto it = maps.find(name);
  if (it == maps.end()) throw EnvError("no built-in map '" + std::string(name) + "'");
  return it->second;
}

char GridMap::at(Cell c) const {
  if (!in_bounds(c)) throw EnvError("cell out of bounds");
  return rows_[c.row][c.col];
}

void GridMap::set(Cell c, char kind) {
  if (!in_bounds(c)) throw EnvError("cell out of bounds");
  rows_[c.row][c.col] = kind;
}

std::vector<Cell> GridMap::find(char kind) const {
  std::vector<Cell> out;
  for (int r = 0; r < height_; ++r)
    for (int c = 0; c < width_; ++c)
      if (rows_[r][c] == kind) out.push_back({r, c});
  return out;
}

Cell GridMap::find_one(char kind) const {
  auto cells = find(kind);
  if (cells.size() != 1) throw EnvError(std::string("expected exactly one '") + kind + "' in map");
  return cells[0];
}

namespace {

constexpr std::array<Cell, 4> kCompass{{{-1, 0}, {1, 0}, {0, -1}, {0, 1}}};  // up down left right

Cell offset(Cell c, Cell d) { return {c.row + d.row, c.col + d.col}; }

// Distances from `from` to every cell; -1 where unreachable.
std::vector<int> bfs_all(const GridMap& map, Cell from, std::string_view blocked) {
  std::vector<int> dist(static_cast<std::size_t>(map.width() * map.height()), -1);
  auto idx = [&](Cell c) { return static_cast<std::size_t>(c.row * map.width() + c.col); };
  std::deque<Cell> work{from};
  dist[idx(from)] = 0;
  while (!work.empty()) {
    const Cell c = work.front();
    work.pop_front();
    for (Cell d : kCompass) {
      const Cell n = offset(c, d);
      if (!map.in_bounds(n) || dist[idx(n)] >= 0) continue;
      if (blocked.find(map.at(n)) != std::string_view::npos) continue;
      dist[idx(n)] = dist[idx(c)] + 1;
      work.push_back(n);
    }
  }
  return dist;
}

// Largest finite distance to `target` over all cells that can reach it.
int max_distance_to(const GridMap& map, Cell target, std::string_view blocked) {
  const auto d = bfs_all(map, target, blocked);
  return *std::max_element(d.begin(), d.end());
}

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

void fill(std::span<double> out, std::initializer_list<double> values) {
  std::copy(values.begin(), values.end(), out.begin());
}

std::vector<SpecRewardPair> pairs(std::initializer_list<std::pair<const char*, double>> list, Mode mode) {
  std::vector<SpecRewardPair> out;
  for (const auto& [f, w] : list) out.emplace_back(f, w, mode);
  return out;
}

// Shared plumbing for single-agent grids whose state is the agent's cell.
class CellGrid : public LabelledMdp {
 protected:
  explicit CellGrid(const GridMap& map) : map_(map) {}
  std::uint32_t id(Cell c) const { return static_cast<std::uint32_t>(c.row * map_.width() + c.col); }
  Cell cell(std::uint32_t s) const {
    return {static_cast<int>(s) / map_.width(), static_cast<int>(s) % map_.width()};
  }
  std::uint32_t num_states() const override {
    return static_cast<std::uint32_t>(map_.width() * map_.height());
  }
  std::string render(std::uint32_t s) const override {
    GridMap m = map_;
    m.set(cell(s), '@');
    std::string out;
    for (const auto& r : m.rows()) out += r + "\n";
    return out;
  }
  // Moves by `d`, staying put at the border or in front of a blocked kind.
  Cell move(Cell c, Cell d, std::string_view walls = "#") const {
    const Cell n = offset(c, d);
    if (!map_.in_bounds(n) || walls.find(map_.at(n)) != std::string_view::npos) return c;
    return n;
  }
  GridMap map_;
};

// ---------------------------------------------------------------------------

class FrozenLake final : public CellGrid {
 public:
  FrozenLake() : CellGrid(GridMap::builtin("frozen_lake")) {
    goal_ = map_.find_one('G');
    max_bfs_ = max_distance_to(map_, goal_, "H");
  }
  std::string_view name() const override { return "frozen_lake"; }
  std::uint32_t num_actions() const override { return 4; }
  const std::vector<std::string>& atoms() const override { return atoms_; }

  std::uint32_t reset(Rng&) const override { return id(map_.find_one('S')); }

  Transition step(std::uint32_t s, std::uint32_t a, Rng&) const override {
    // left, down, right, up
    static constexpr std::array<Cell, 4> kMoves{{{0, -1}, {1, 0}, {0, 1}, {-1, 0}}};
    const Cell n = move(cell(s), kMoves.at(a), "");
    const char k = map_.at(n);
    return {id(n), k == 'G' ? 1.0 : 0.0, k == 'G' || k == 'H'};
  }

  void label(std::uint32_t, std::uint32_t, std::uint32_t s2, std::span<double> b,
             std::span<double> q) const override {
    label_initial(s2, b, q);
  }
  void label_initial(std::uint32_t s, std::span<double> b, std::span<double> q) const override {
    const char k = map_.at(cell(s));
    fill(b, {k == 'G' ? 1.0 : 0.0, k == 'H' ? 1.0 : 0.0});
    std::copy(b.begin(), b.end(), q.begin());
  }

  double task_completion(std::uint32_t s) const override {
    const Cell c = cell(s);
    if (map_.at(c) == 'H') return 0.0;
    const auto d = bfs_distance(map_, c, goal_, "H");
    return d ? clamp01(1.0 - static_cast<double>(*d) / max_bfs_) : 0.0;
  }

  std::vector<SpecRewardPair> specs(Mode mode) const override {
    return pairs({{"F reach_goal", 10}, {"G !reach_hole", -10}, {"F G true", -1}}, mode);
  }

 private:
  Cell goal_;
  int max_bfs_;
  std::vector<std::string> atoms_{"reach_goal", "reach_hole"};
};

// ---------------------------------------------------------------------------

class CliffWalking final : public CellGrid {
 public:
  CliffWalking() : CellGrid(GridMap::builtin("cliff_walking")) {
    goal_ = map_.find_one('G');
    max_bfs_ = max_distance_to(map_, goal_, "C");
  }
  std::string_view name() const override { return "cliff_walking"; }
  std::uint32_t num_actions() const override { return 4; }
  const std::vector<std::string>& atoms() const override { return atoms_; }

  std::uint32_t reset(Rng&) const override { return id(map_.find_one('S')); }

  Transition step(std::uint32_t s, std::uint32_t a, Rng&) const override {
    // up, right, down, left
    static constexpr std::array<Cell, 4> kMoves{{{-1, 0}, {0, 1}, {1, 0}, {0, -1}}};
    const Cell n = move(cell(s), kMoves.at(a), "");
    const char k = map_.at(n);
    if (k == 'C') return {id(n), -100.0, true};
    return {id(n), -1.0, k == 'G'};
  }

  void label(std::uint32_t, std::uint32_t, std::uint32_t s2, std::span<double> b,
             std::span<double> q) const override {
    label_initial(s2, b, q);
  }
  void label_initial(std::uint32_t s, std::span<double> b, std::span<double> q) const override {
    const char k = map_.at(cell(s));
    fill(b, {k == 'G' ? 1.0 : 0.0, k == 'C' ? 1.0 : 0.0});
    std::copy(b.begin(), b.end(), q.begin());
  }

  double task_completion(std::uint32_t s) const override {
    const Cell c = cell(s);
    if (map_.at(c) == 'C') return 0.0;
    const auto d = bfs_distance(map_, c, goal_, "C");
    return d ? clamp01(1.0 - static_cast<double>(*d) / max_bfs_) : 0.0;
  }

  std::vector<SpecRewardPair> specs(Mode mode) const override {
    return pairs({{"F G reach_goal", 25}, {"F G reach_cliff", -25}, {"F G true & !reach_goal", -1}}, mode);
  }

 private:
  Cell goal_;
  int max_bfs_;
  std::vector<std::string> atoms_{"reach_goal", "reach_cliff"};
};

// ---------------------------------------------------------------------------

// The taxi asset draws cell (r, c) at text position (r + 1, 2c + 1); the
// character right of it is '|' when a wall separates it from (r, c + 1).
struct TaxiGrid {
  std::array<std::array<bool, 5>, 5> wall_east{};
  std::array<Cell, 4> depots{};
  int max_bfs = 0;

  TaxiGrid() {
    const auto& rows = GridMap::builtin("taxi").rows();
    const std::string_view names = "RGYB";
    for (int r = 0; r < 5; ++r)
      for (int c = 0; c < 5; ++c) {
        const char here = rows.at(r + 1).at(2 * c + 1);
        if (auto k = names.find(here); k != std::string_view::npos) depots[k] = {r, c};
        wall_east[r][c] = rows.at(r + 1).at(2 * c + 2) == '|';
      }
    for (int a = 0; a < 25; ++a)
      for (int b = 0; b < 25; ++b) max_bfs = std::max(max_bfs, bfs({a / 5, a % 5}, {b / 5, b % 5}));
  }

  bool blocked(Cell c, int dcol) const {
    if (dcol > 0) return c.col == 4 || wall_east[c.row][c.col];
    return c.col == 0 || wall_east[c.row][c.col - 1];
  }

  Cell move(Cell c, int action) const {
    switch (action) {
      case 0: return {std::min(c.row + 1, 4), c.col};
      case 1: return {std::max(c.row - 1, 0), c.col};
      case 2: return blocked(c, 1) ? c : Cell{c.row, c.col + 1};
      case 3: return blocked(c, -1) ? c : Cell{c.row, c.col - 1};
      default: return c;
    }
  }

  int bfs(Cell from, Cell to) const {
    std::array<int, 25> dist;
    dist.fill(-1);
    std::deque<Cell> work{from};
    dist[from.row * 5 + from.col] = 0;
    while (!work.empty()) {
      const Cell c = work.front();
      work.pop_front();
      if (c == to) return dist[c.row * 5 + c.col];
      for (int a = 0; a < 4; ++a) {
        const Cell n = move(c, a);
        if (dist[n.row * 5 + n.col] >= 0) continue;
        dist[n.row * 5 + n.col] = dist[c.row * 5 + c.col] + 1;
        work.push_back(n);
      }
    }
    return -1;
  }
};

const TaxiGrid& taxi_grid() {
  static const TaxiGrid g;
  return g;
}

class Taxi final : public LabelledMdp {
 public:
  std::string_view name() const override { return "taxi"; }
  std::uint32_t num_states() const override { return 500; }
  std::uint32_t num_actions() const override { return 6; }
  const std::vector<std::string>& atoms() const override { return atoms_; }

  std::uint32_t reset(Rng& rng) const override {
    std::uniform_int_distribution<int> cell(0, 24), depot(0, 3), other(0, 2);
    const int c = cell(rng);
    const int p = depot(rng);
    int d = other(rng);
    if (d >= p) ++d;
    return envs::taxi_encode({c / 5, c % 5, p, d});
  }

  Transition step(std::uint32_t s, std::uint32_t a, Rng&) const override {
    const auto& g = taxi_grid();
    auto t = envs::taxi_decode(s);
    const Cell here{t.row, t.col};
    double reward = -1.0;
    bool done = false;
    if (a < 4) {
      const Cell n = g.move(here, static_cast<int>(a));
      t.row = n.row;
      t.col = n.col;
    } else if (a == 4) {
      if (t.passenger < 4 && g.depots[t.passenger] == here) t.passenger = 4;
      else reward = -10.0;
    } else if (a == 5) {
      const auto depot = std::find(g.depots.begin(), g.depots.end(), here);
      if (t.passenger == 4 && here == g.depots[t.destination]) {
        t.passenger = t.destination;
        reward = 20.0;
        done = true;
      } else if (t.passenger == 4 && depot != g.depots.end()) {
        t.passenger = static_cast<int>(depot - g.depots.begin());
      } else {
        reward = -10.0;
      }
    } else {
      throw EnvError("invalid taxi action " + std::to_string(a));
    }
    return {envs::taxi_encode(t), reward, done};
  }

  void label(std::uint32_t s, std::uint32_t a, std::uint32_t s2, std::span<double> b,
             std::span<double> q) const override {
    const auto& g = taxi_grid();
    const auto t = envs::taxi_decode(s2);
    const auto before = envs::taxi_decode(s);
    const Cell here{t.row, t.col};
    const bool delivered = before.passenger == 4 && t.passenger == t.destination;
    const bool at_passenger = t.passenger == 4 || (t.passenger < 4 && g.depots[t.passenger] == here);
    const bool hit_wall = a < 4 && before.row == t.row && before.col == t.col;
    fill(b, {delivered ? 1.0 : 0.0, at_passenger ? 1.0 : 0.0, hit_wall ? 1.0 : 0.0,
             t.passenger == 4 ? 1.0 : 0.0, here == g.depots[t.destination] ? 1.0 : 0.0, a == 4 ? 1.0 : 0.0,
             a == 5 ? 1.0 : 0.0});
    std::copy(b.begin(), b.end(), q.begin());
  }

  void label_initial(std::uint32_t s, std::span<double> b, std::span<double> q) const override {
    const auto& g = taxi_grid();
    const auto t = envs::taxi_decode(s);
    const Cell here{t.row, t.col};
    const bool at_passenger = t.passenger == 4 || (t.passenger < 4 && g.depots[t.passenger] == here);
    fill(b, {0.0, at_passenger ? 1.0 : 0.0, 0.0, t.passenger == 4 ? 1.0 : 0.0,
             here == g.depots[t.destination] ? 1.0 : 0.0, 0.0, 0.0});
    std::copy(b.begin(), b.end(), q.begin());
  }

  double task_completion(std::uint32_t s) const override {
    const auto& g = taxi_grid();
    const auto t = envs::taxi_decode(s);
    const Cell here{t.row, t.col};
    const double m = g.max_bfs;
    if (t.passenger == t.destination) return 1.0;
    if (t.passenger == 4) return 0.5 + 0.5 * clamp01(1.0 - g.bfs(here, g.depots[t.destination]) / m);
    return 0.5 * clamp01(1.0 - g.bfs(here, g.depots[t.passenger]) / m);
  }

  std::vector<SpecRewardPair> specs(Mode mode) const override {
    if (mode == Mode::Boolean)
      return pairs({{"F reach_goal", 100},
                    {"F at_passenger", 30},
                    {"G F hit_wall", -50},
                    {"G (act_drop_off & !has_passenger)", -50},
                    {"G (act_drop_off & !at_destination)", -25},
                    {"G (act_pick_up & !at_passenger)", -25},
                    {"F G true", -1}},
                   mode);
    return pairs({{"F G reach_goal", 100},
                  {"F at_passenger", 30},
                  {"G F hit_wall", -50},
                  {"F G (act_drop_off & !has_passenger)", -50},
                  {"F G (act_drop_off & !at_destination)", -25},
                  {"F G (act_pick_up & !at_passenger)", -25},
                  {"F G true", -1}},
                 mode);
  }

  std::string render(std::uint32_t s) const override {
    const auto t = envs::taxi_decode(s);
    auto rows = GridMap::builtin("taxi").rows();
    rows.at(t.row + 1).at(2 * t.col + 1) = t.passenger == 4 ? '@' : 'T';
    std::string out;
    for (const auto& r : rows) out += r + "\n";
    out += "passenger " + std::to_string(t.passenger) + " destination " + std::to_string(t.destination) + "\n";
    return out;
  }

 private:
  std::vector<std::string> atoms_{"reach_goal",     "at_passenger", "hit_wall",    "has_passenger",
                                  "at_destination", "act_pick_up",  "act_drop_off"};
};

// ---------------------------------------------------------------------------

class IslandNavigation final : public CellGrid {
 public:
  IslandNavigation() : CellGrid(GridMap::builtin("island_navigation")) {
    goal_ = map_.find_one('G');
    start_ = map_.find_one('A');
  }
  std::string_view name() const override { return "island_navigation"; }
  std::uint32_t num_actions() const override { return 4; }
  const std::vector<std::string>& atoms() const override { return atoms_; }

  std::uint32_t reset(Rng&) const override { return id(start_); }

  Transition step(std::uint32_t s, std::uint32_t a, Rng&) const override {
    const Cell n = move(cell(s), kCompass.at(a));
    const char k = map_.at(n);
    if (k == 'G') return {id(n), 49.0, true};
    return {id(n), -1.0, k == 'W'};
  }

  void label(std::uint32_t, std::uint32_t, std::uint32_t s2, std::span<double> b,
             std::span<double> q) const override {
    label_initial(s2, b, q);
  }
  void label_initial(std::uint32_t s, std::span<double> b, std::span<double> q) const override {
    const char k = map_.at(cell(s));
    fill(b, {k == 'W' ? 1.0 : 0.0, k == 'G' ? 1.0 : 0.0});
    std::copy(b.begin(), b.end(), q.begin());
  }

  double task_completion(std::uint32_t s) const override {
    const Cell c = cell(s);
    if (map_.at(c) == 'W') return 0.0;
    return clamp01(1.0 - manhattan(c, goal_) / 12.0);
  }

  std::vector<SpecRewardPair> specs(Mode mode) const override {
    return pairs({{"G !in_water", 100}, {"F at_goal", 50}, {"G true", -1}}, mode);
  }

 private:
  Cell goal_, start_;
  std::vector<std::string> atoms_{"in_water", "at_goal"};
};

// ---------------------------------------------------------------------------

// Agent plus one pushable object; state = agent cell * cells + object code.
class PushGrid : public LabelledMdp {
 protected:
  PushGrid(const GridMap& map, char object, int extra_codes)
      : map_(map), cells_(map.width() * map.height()), codes_(cells_ + extra_codes) {
    start_agent_ = map_.find_one('A');
    start_object_ = map_.find_one(object);
    map_.set(start_agent_, ' ');
  }
  std::uint32_t num_states() const override { return static_cast<std::uint32_t>(cells_ * codes_); }
  std::uint32_t encode(Cell agent, int object_code) const {
    return static_cast<std::uint32_t>((agent.row * map_.width() + agent.col) * codes_ + object_code);
  }
  Cell agent_of(std::uint32_t s) const {
    const int a = static_cast<int>(s) / codes_;
    return {a / map_.width(), a % map_.width()};
  }
  int code_of(std::uint32_t s) const { return static_cast<int>(s) % codes_; }
  int code(Cell c) const { return c.row * map_.width() + c.col; }
  Cell cell_of(int code) const { return {code / map_.width(), code % map_.width()}; }
  bool wall(Cell c) const { return !map_.in_bounds(c) || map_.at(c) == '#'; }

  // Moves the agent, pushing the object when it is in the way and the cell
  // behind it is free.
  std::pair<Cell, Cell> push(Cell agent, Cell object, std::uint32_t a) const {
    const Cell d = kCompass.at(a);
    const Cell n = offset(agent, d);
    if (wall(n)) return {agent, object};
    if (n == object) {
      const Cell beyond = offset(n, d);
      if (wall(beyond)) return {agent, object};
      return {n, beyond};
    }
    return {n, object};
  }

  std::string render_with(std::uint32_t s, std::optional<Cell> object, char glyph) const {
    GridMap m = map_;
    if (object) m.set(*object, glyph);
    m.set(agent_of(s), '@');
    std::string out;
    for (const auto& r : m.rows()) out += r + "\n";
    return out;
  }

  GridMap map_;
  int cells_;
  int codes_;
  Cell start_agent_, start_object_;
};

class Sokoban final : public PushGrid {
 public:
  Sokoban() : PushGrid(GridMap::builtin("sokoban"), 'X', 0) {
    map_.set(start_object_, ' ');
    goal_ = map_.find_one('G');
    max_bfs_ = max_distance_to(map_, goal_, "#");
  }
  std::string_view name() const override { return "sokoban"; }
  std::uint32_t num_actions() const override { return 4; }
  const std::vector<std::string>& atoms() const override { return atoms_; }

  std::uint32_t reset(Rng&) const override { return encode(start_agent_, code(start_object_)); }

  Transition step(std::uint32_t s, std::uint32_t a, Rng&) const override {
    auto [agent, box] = push(agent_of(s), cell_of(code_of(s)), a);
    const bool goal = agent == goal_;
    return {encode(agent, code(box)), goal ? 49.0 : -1.0, goal};
  }

  void label(std::uint32_t, std::uint32_t, std::uint32_t s2, std::span<double> b,
             std::span<double> q) const override {
    label_initial(s2, b, q);
  }
  void label_initial(std::uint32_t s, std::span<double> b, std::span<double> q) const override {
    const Cell agent = agent_of(s);
    fill(b, {agent == goal_ ? 1.0 : 0.0, 0.0});
    fill(q, {reach(agent), envs::sokoban_wall_penalty(map_, cell_of(code_of(s)))});
  }

  double task_completion(std::uint32_t s) const override {
    return reach(agent_of(s)) * (1.0 - envs::sokoban_wall_penalty(map_, cell_of(code_of(s))));
  }

  std::vector<SpecRewardPair> specs(Mode mode) const override {
    if (mode == Mode::Boolean) return pairs({{"F reach_goal", 100}, {"G !wall_penalty", 100}, {"G true", -1}}, mode);
    return pairs({{"F G reach_goal", 100}, {"G !wall_penalty", 100}, {"F G true", -1}}, mode);
  }

  std::string render(std::uint32_t s) const override { return render_with(s, cell_of(code_of(s)), 'X'); }

 private:
  double reach(Cell agent) const {
    const auto d = bfs_distance(map_, agent, goal_, "#");
    return d ? clamp01(1.0 - static_cast<double>(*d) / max_bfs_) : 0.0;
  }

  Cell goal_;
  int max_bfs_;
  std::vector<std::string> atoms_{"reach_goal", "wall_penalty"};
};

// Object codes: a cell index for an intact vase, `broken_` once it fell off
// the end of the belt. A second block of codes remembers that the removal
// reward was already paid.
class ConveyorBelt final : public PushGrid {
 public:
  ConveyorBelt() : PushGrid(GridMap::builtin("conveyor_belt"), 'O', 1 + 7 * 7 + 1) {
    map_.set(start_object_, '>');
    end_ = map_.find_one('E');
    broken_ = cells_;
  }
  std::string_view name() const override { return "conveyor_belt"; }
  std::uint32_t num_actions() const override { return 4; }
  const std::vector<std::string>& atoms() const override { return atoms_; }

  std::uint32_t reset(Rng&) const override { return encode(start_agent_, code(start_object_)); }

  Transition step(std::uint32_t s, std::uint32_t a, Rng&) const override {
    const Cell agent0 = agent_of(s);
    int vase = code_of(s);
    const bool paid = vase > broken_;
    if (paid) vase -= broken_ + 1;
    if (vase == broken_) {
      const Cell agent = push(agent0, {-1, -1}, a).first;
      return {encode(agent, paid ? 2 * broken_ + 1 : broken_), 0.0, false};
    }
    const Cell before = cell_of(vase);
    auto [agent, moved] = push(agent0, before, a);
    if (on_belt(moved) && map_.at(moved) != 'E') {
      const Cell next = offset(moved, {0, 1});
      if (!(next == agent) && !wall(next)) moved = next;
    }
    double reward = 0.0;
    bool now_paid = paid;
    if (!paid && on_belt(before) && !on_belt(moved)) {
      reward = 50.0;
      now_paid = true;
    }
    const int vcode = moved == end_ ? broken_ : code(moved);
    return {encode(agent, now_paid ? vcode + broken_ + 1 : vcode), reward, false};
  }

  void label(std::uint32_t, std::uint32_t, std::uint32_t s2, std::span<double> b,
             std::span<double> q) const override {
    label_initial(s2, b, q);
  }
  void label_initial(std::uint32_t s, std::span<double> b, std::span<double> q) const override {
    const int vase = vase_code(s);
    const Cell agent = agent_of(s);
    if (vase == broken_) {
      fill(b, {1.0, 0.0, 0.0});
      fill(q, {1.0, 0.0, 0.0});
      return;
    }
    const Cell v = cell_of(vase);
    const double off = on_belt(v) ? 0.0 : 1.0;
    const int dist = manhattan(agent, v);
    fill(b, {0.0, off, dist <= 1 ? 1.0 : 0.0});
    fill(q, {0.0, off, clamp01(1.0 - dist / 12.0)});
  }

  double task_completion(std::uint32_t s) const override {
    const int vase = vase_code(s);
    if (vase == broken_) return 0.0;
    return on_belt(cell_of(vase)) ? 0.0 : 1.0;
  }

  std::vector<SpecRewardPair> specs(Mode mode) const override {
    if (mode == Mode::Boolean)
      return pairs({{"F vase_off_conveyor & G !vase_broken", 100}, {"G !vase_broken", 100}}, mode);
    return pairs({{"F G vase_off_conveyor & F G reach_vase", 100},
                  {"(F G vase_off_conveyor | F G reach_vase) & G !vase_broken", 100},
                  {"G !vase_broken", 100}},
                 mode);
  }

  std::string render(std::uint32_t s) const override {
    const int vase = vase_code(s);
    return render_with(s, vase == broken_ ? std::nullopt : std::optional<Cell>(cell_of(vase)), 'O');
  }

 private:
  int vase_code(std::uint32_t s) const {
    int v = code_of(s);
    return v > broken_ ? v - broken_ - 1 : v;
  }
  bool on_belt(Cell c) const { return map_.at(c) == '>' || map_.at(c) == 'E'; }

  Cell end_;
  int broken_ = 0;
  std::vector<std::string> atoms_{"vase_broken", "vase_off_conveyor", "reach_vase"};
};

}  // namespace

std::optional<int> bfs_distance(const GridMap& map, Cell from, Cell to, std::string_view blocked) {
  if (!map.in_bounds(from) || !map.in_bounds(to)) throw EnvError("cell out of bounds");
  const auto d = bfs_all(map, from, blocked);
  const int v = d[static_cast<std::size_t>(to.row * map.width() + to.col)];
  if (v < 0) return std::nullopt;
  return v;
}

int manhattan(Cell a, Cell b) { return std::abs(a.row - b.row) + std::abs(a.col - b.col); }

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::Base: return "base";
    case Variant::Boolean: return "boolean";
    case Variant::Quantitative: return "quantitative";
  }
  return "?";
}

Variant parse_variant(std::string_view s) {
  if (s == "base") return Variant::Base;
  if (s == "boolean") return Variant::Boolean;
  if (s == "quantitative") return Variant::Quantitative;
  throw EnvError("unknown variant '" + std::string(s) + "'");
}

const std::vector<std::string>& env_names() {
  static const std::vector<std::string> names{"frozen_lake",       "cliff_walking", "taxi",
                                              "island_navigation", "sokoban",       "conveyor_belt"};
  return names;
}

std::unique_ptr<LabelledMdp> make_env(std::string_view name, std::uint64_t) {
  if (name == "frozen_lake") return std::make_unique<FrozenLake>();
  if (name == "cliff_walking") return std::make_unique<CliffWalking>();
  if (name == "taxi") return std::make_unique<Taxi>();
  if (name == "island_navigation") return std::make_unique<IslandNavigation>();
  if (name == "sokoban") return std::make_unique<Sokoban>();
  if (name == "conveyor_belt") return std::make_unique<ConveyorBelt>();
  throw EnvError("unknown environment '" + std::string(name) + "'");
}

double task_completion(const LabelledMdp& env, std::uint32_t s, bool episode_over) {
  if (!episode_over) throw EnvError("task completion requested mid-episode");
  return env.task_completion(s);
}

namespace {
struct LabelBuffers {
  std::vector<double> boolean, quant;
};
LabelBuffers& buffers(std::size_t n) {
  thread_local LabelBuffers b;
  b.boolean.resize(n);
  b.quant.resize(n);
  return b;
}
}  // namespace

ProductStep product_step(const LabelledMdp& env, std::uint32_t s, std::uint32_t a, const CompositeMonitor* cm,
                         CompositeState& st, Rng& rng) {
  if (a >= env.num_actions()) throw EnvError("invalid action " + std::to_string(a));
  const Transition t = env.step(s, a, rng);
  if (!cm) return {t.next, t.reward, t.terminal};
  auto& buf = buffers(env.atoms().size());
  env.label(s, a, t.next, buf.boolean, buf.quant);
  return {t.next, cm->step(st, buf.boolean, buf.quant), t.terminal};
}

void product_start(const LabelledMdp& env, std::uint32_t s, const CompositeMonitor& cm, CompositeState& st) {
  auto& buf = buffers(env.atoms().size());
  env.label_initial(s, buf.boolean, buf.quant);
  cm.start(st, buf.boolean, buf.quant);
}

namespace envs {

Cell cliff_decode(std::uint32_t obs) { return {static_cast<int>(obs / 12), static_cast<int>(obs % 12)}; }

TaxiState taxi_decode(std::uint32_t s) {
  TaxiState t{};
  t.destination = static_cast<int>(s % 4);
  s /= 4;
  t.passenger = static_cast<int>(s % 5);
  s /= 5;
  t.col = static_cast<int>(s % 5);
  t.row = static_cast<int>(s / 5);
  return t;
}

std::uint32_t taxi_encode(const TaxiState& t) {
  return static_cast<std::uint32_t>(((t.row * 5 + t.col) * 5 + t.passenger) * 4 + t.destination);
}

int taxi_max_bfs() { return taxi_grid().max_bfs; }
int taxi_bfs(Cell from, Cell to) { return taxi_grid().bfs(from, to); }

double sokoban_wall_penalty(const GridMap& map, Cell box) {
  auto is_wall = [&](int dr, int dc) {
    const Cell c{box.row + dr, box.col + dc};
    return !map.in_bounds(c) || map.at(c) == '#';
  };
  const bool left = is_wall(0, -1), right = is_wall(0, 1), up = is_wall(-1, 0), down = is_wall(1, 0);
  if ((left || right) && (up || down)) return 1.0;
  const int n = left + right + up + down;
  return n == 1 ? 0.5 : 0.0;
}

}  // namespace envs

}  // namespace qmon
