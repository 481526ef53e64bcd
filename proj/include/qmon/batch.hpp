#pragma once

// Many instances of one quantitative monitor stepped in lockstep.
//
// A Qrm's control is input-free, so after k letters every instance sits in
// the same state and runs the same instruction list; only register contents
// differ. Registers and labels are stored lane-major per row (row r, lane l at
// r * stride + l) and each instruction is evaluated for all lanes at once.

#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "qmon/monitor.hpp"

namespace qmon {

enum class LaneKernel : std::uint8_t { Scalar, Avx2 };

std::string_view kernel_name(LaneKernel k);
// Compiled in and supported by the running CPU.
bool kernel_available(LaneKernel k);
LaneKernel best_kernel();

class LaneBatch {
 public:
  // Throws std::invalid_argument for an unavailable kernel or zero lanes.
  LaneBatch(std::shared_ptr<const Qrm> m, std::size_t lanes, LaneKernel kernel = best_kernel());

  const Qrm& monitor() const { return *m_; }
  std::size_t lanes() const { return lanes_; }
  std::size_t stride() const { return stride_; }
  LaneKernel kernel() const { return kernel_; }
  std::uint32_t state() const { return q_; }
  std::size_t steps() const { return steps_; }

  // Reads one letter per lane. `labels` is atom-major:
  // labels[a * lanes() + lane] is atom a (in monitor().atoms order) for lane.
  void step(std::span<const double> labels);

  double value(std::uint32_t reg, std::size_t lane) const { return values_[reg * stride_ + lane]; }
  double reward_value(std::size_t lane) const { return value(m_->reward_register, lane); }

  // Back to the pre-init configuration.
  void reset();

 private:
  std::shared_ptr<const Qrm> m_;
  std::size_t lanes_;
  std::size_t stride_;
  LaneKernel kernel_;
  std::uint32_t q_ = 0;
  std::size_t steps_ = 0;
  std::vector<double> values_;
  std::vector<double> labels_;
  std::vector<double> stack_;
};

namespace detail {

// Kernel entry points; stride is a multiple of 4.
void run_lanes_scalar(const std::vector<Instruction>& program, const double* labels, double* values,
                      double* stack, std::size_t stride);
void run_lanes_avx2(const std::vector<Instruction>& program, const double* labels, double* values,
                    double* stack, std::size_t stride);

}  // namespace detail

}  // namespace qmon
