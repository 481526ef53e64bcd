#include <doctest.h>

#include <memory>
#include <random>

#include "qmon/batch.hpp"
#include "qmon/fuzz.hpp"

using namespace qmon;

namespace {

// Steps `lanes` scalar monitors and one batch per kernel over the same
// random letters and compares every register bit for bit.
void compare_kernels(const Formula& f, std::size_t lanes, std::mt19937_64& rng) {
  auto m = std::make_shared<const Qrm>(synth(f));
  std::vector<LaneBatch> batches;
  for (auto k : {LaneKernel::Scalar, LaneKernel::Avx2})
    if (kernel_available(k)) batches.emplace_back(m, lanes, k);
  std::vector<MonitorState> scalar(lanes);
  std::uniform_int_distribution<int> grid(0, 4);
  const std::size_t A = m->atoms.size();
  for (std::size_t i = 0; i < 9; ++i) {
    std::vector<double> labels(A * lanes);
    for (auto& v : labels) v = grid(rng) / 4.0;
    for (std::size_t l = 0; l < lanes; ++l) {
      std::vector<double> row(A);
      for (std::size_t a = 0; a < A; ++a) row[a] = labels[a * lanes + l];
      if (i == 0)
        scalar[l] = init(*m, row);
      else
        step(*m, scalar[l], row);
    }
    for (auto& b : batches) {
      b.step(labels);
      CHECK(b.state() == scalar[0].q);
      for (std::size_t l = 0; l < lanes; ++l)
        for (std::uint32_t r = 0; r < m->registers.size(); ++r) CHECK(b.value(r, l) == scalar[l].values[r]);
    }
  }
}

}  // namespace

TEST_CASE("lane kernels match the scalar runtime exactly") {
  std::mt19937_64 rng(31);
  FormulaGen gen;
  for (int k = 0; k < 150; ++k) compare_kernels(random_formula(rng, gen), 1 + k % 11, rng);
}

TEST_CASE("kernel selection") {
  CHECK(kernel_available(LaneKernel::Scalar));
  CHECK(kernel_available(best_kernel()));
  auto m = std::make_shared<const Qrm>(synth(parse("a")));
  CHECK_THROWS(LaneBatch(m, 0));
  LaneBatch b(m, 3, LaneKernel::Scalar);
  CHECK(b.stride() == 4);
  CHECK_THROWS_AS(b.step(std::vector<double>{1.0}), MissingLabel);
  b.step(std::vector<double>{0.1, 0.2, 0.3});
  CHECK(b.reward_value(2) == 0.3);
  b.reset();
  CHECK(b.steps() == 0);
}
