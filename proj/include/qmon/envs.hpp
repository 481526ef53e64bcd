#pragma once

// Labelled gridworld MDPs with Boolean and quantitative fluents and a hidden
// terminal task-completion score.

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "qmon/compose.hpp"

namespace qmon {

using Rng = std::mt19937_64;

struct Cell {
  int row = 0;
  int col = 0;
  bool operator==(const Cell&) const = default;
};

class GridMap {
 public:
  // Lines starting with ';' are legend comments; the rest is the grid.
  static GridMap parse(std::string_view text);
  // One of the maps shipped with the library (see assets/maps).
  static const GridMap& builtin(std::string_view name);

  int width() const { return width_; }
  int height() const { return height_; }
  bool in_bounds(Cell c) const { return c.row >= 0 && c.col >= 0 && c.row < height_ && c.col < width_; }
  char at(Cell c) const;
  void set(Cell c, char kind);
  std::vector<Cell> find(char kind) const;
  Cell find_one(char kind) const;
  const std::vector<std::string>& rows() const { return rows_; }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::string> rows_;
};

class EnvError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Shortest 4-connected path length, or nullopt when `to` is unreachable.
// Cells whose kind appears in `blocked` cannot be entered (nor left, except
// from `from` itself). Throws EnvError for out-of-bounds cells.
std::optional<int> bfs_distance(const GridMap& map, Cell from, Cell to, std::string_view blocked = "#HWC");
int manhattan(Cell a, Cell b);

enum class Variant : std::uint8_t { Base, Boolean, Quantitative };
std::string_view variant_name(Variant v);
Variant parse_variant(std::string_view s);

struct Transition {
  std::uint32_t next;
  double reward;  // the environment's own reward
  bool terminal;
};

class LabelledMdp {
 public:
  virtual ~LabelledMdp() = default;

  virtual std::string_view name() const = 0;
  // State ids are dense in [0, num_states()).
  virtual std::uint32_t num_states() const = 0;
  virtual std::uint32_t num_actions() const = 0;
  virtual const std::vector<std::string>& atoms() const = 0;
  virtual std::size_t horizon() const { return 100; }

  virtual std::uint32_t reset(Rng& rng) const = 0;
  virtual Transition step(std::uint32_t s, std::uint32_t a, Rng& rng) const = 0;

  // Labels of the transition (s, a, s2), index-aligned with atoms().
  // Boolean labels are crisp.
  virtual void label(std::uint32_t s, std::uint32_t a, std::uint32_t s2, std::span<double> boolean,
                     std::span<double> quant) const = 0;
  // Labels of an initial state (no action taken yet).
  virtual void label_initial(std::uint32_t s, std::span<double> boolean, std::span<double> quant) const = 0;

  // Hidden performance score of the state an episode ended in.
  virtual double task_completion(std::uint32_t s) const = 0;

  // Specification list used by the monitor variants.
  virtual std::vector<SpecRewardPair> specs(Mode mode) const = 0;

  virtual std::string render(std::uint32_t s) const = 0;
};

const std::vector<std::string>& env_names();
// Throws EnvError for an unknown name. The seed only matters for
// environments with randomized layouts; all of the built-in ones are fixed.
std::unique_ptr<LabelledMdp> make_env(std::string_view name, std::uint64_t seed = 0);

// Task completion must only be read once an episode is over.
double task_completion(const LabelledMdp& env, std::uint32_t s, bool episode_over);

struct ProductStep {
  std::uint32_t next;
  double reward;
  bool done;  // terminal (not truncation)
};

// One step of the environment/monitor product: the environment moves, the
// bundle reads the labels of the transition, and the bundle reward (or the
// environment's reward when cm is null) is returned.
ProductStep product_step(const LabelledMdp& env, std::uint32_t s, std::uint32_t a, const CompositeMonitor* cm,
                         CompositeState& st, Rng& rng);
// Starts the bundle on the labels of an initial state.
void product_start(const LabelledMdp& env, std::uint32_t s, const CompositeMonitor& cm, CompositeState& st);

// Concrete environments, exposed for tests.
namespace envs {

// Decoded state of the cliff walking grid (obs = row * 12 + col).
Cell cliff_decode(std::uint32_t obs);

struct TaxiState {
  int row, col;
  int passenger;  // depot index 0-3, or 4 when in the taxi
  int destination;
};
TaxiState taxi_decode(std::uint32_t s);
std::uint32_t taxi_encode(const TaxiState& t);
// Largest shortest-path distance between two cells of the taxi grid.
int taxi_max_bfs();
int taxi_bfs(Cell from, Cell to);

// 1 in a corner, 0.5 with exactly one wall neighbour, 0 otherwise.
double sokoban_wall_penalty(const GridMap& map, Cell box);

}  // namespace envs

}  // namespace qmon
