#include "qmon/batch.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace qmon {

namespace {

std::size_t stack_depth(const Qrm& m) {
  std::size_t need = 1;
  for (const auto& prog : m.program)
    for (const auto& ins : prog) {
      std::size_t sp = 0;
      for (const auto& n : ins.expr) {
        switch (n.op) {
          case ExprOp::Const:
          case ExprOp::Label:
          case ExprOp::Reg: ++sp; break;
          case ExprOp::Complement: break;
          case ExprOp::Min:
          case ExprOp::Max: --sp; break;
        }
        need = std::max(need, sp);
      }
    }
  return need;
}

}  // namespace

std::string_view kernel_name(LaneKernel k) { return k == LaneKernel::Avx2 ? "avx2" : "scalar"; }

bool kernel_available(LaneKernel k) {
  if (k == LaneKernel::Scalar) return true;
#if defined(QMON_HAVE_AVX2)
  static const bool ok = __builtin_cpu_supports("avx2");
  return ok;
#else
  return false;
#endif
}

LaneKernel best_kernel() { return kernel_available(LaneKernel::Avx2) ? LaneKernel::Avx2 : LaneKernel::Scalar; }

namespace detail {

void run_lanes_scalar(const std::vector<Instruction>& program, const double* labels, double* values,
                      double* stack, std::size_t stride) {
  for (const auto& ins : program) {
    double* top = stack;  // one past the top row
    for (const auto& n : ins.expr) {
      switch (n.op) {
        case ExprOp::Const:
          std::fill(top, top + stride, n.value);
          top += stride;
          break;
        case ExprOp::Label:
          std::copy_n(labels + n.index * stride, stride, top);
          top += stride;
          break;
        case ExprOp::Reg:
          std::copy_n(values + n.index * stride, stride, top);
          top += stride;
          break;
        case ExprOp::Complement:
          for (std::size_t l = 0; l < stride; ++l) top[l - stride] = 1.0 - top[l - stride];
          break;
        case ExprOp::Min:
          top -= stride;
          for (std::size_t l = 0; l < stride; ++l) top[l - stride] = std::min(top[l - stride], top[l]);
          break;
        case ExprOp::Max:
          top -= stride;
          for (std::size_t l = 0; l < stride; ++l) top[l - stride] = std::max(top[l - stride], top[l]);
          break;
      }
    }
    std::copy_n(stack, stride, values + ins.target * stride);
  }
}

#if !defined(QMON_HAVE_AVX2)
void run_lanes_avx2(const std::vector<Instruction>&, const double*, double*, double*, std::size_t) {
  throw std::logic_error("avx2 kernel not compiled in");
}
#endif

}  // namespace detail

LaneBatch::LaneBatch(std::shared_ptr<const Qrm> m, std::size_t lanes, LaneKernel kernel)
    : m_(std::move(m)), lanes_(lanes), stride_((lanes + 3) / 4 * 4), kernel_(kernel) {
  if (!m_) throw std::invalid_argument("null monitor");
  if (lanes_ == 0) throw std::invalid_argument("a batch needs at least one lane");
  if (!kernel_available(kernel_))
    throw std::invalid_argument("kernel " + std::string(kernel_name(kernel_)) + " is not available");
  labels_.assign(m_->atoms.size() * stride_, 0.0);
  stack_.assign(stack_depth(*m_) * stride_, 0.0);
  reset();
}

void LaneBatch::reset() {
  q_ = m_->initial_state;
  steps_ = 0;
  values_.resize(m_->registers.size() * stride_);
  for (std::size_t r = 0; r < m_->registers.size(); ++r)
    std::fill_n(values_.begin() + r * stride_, stride_, m_->registers[r].initial);
}

void LaneBatch::step(std::span<const double> labels) {
  if (labels.size() != m_->atoms.size() * lanes_)
    throw MissingLabel("expected " + std::to_string(m_->atoms.size() * lanes_) + " labels, got " +
                       std::to_string(labels.size()));
  // Padding lanes repeat lane 0 so they stay in [0,1].
  for (std::size_t a = 0; a < m_->atoms.size(); ++a) {
    double* row = labels_.data() + a * stride_;
    std::copy_n(labels.data() + a * lanes_, lanes_, row);
    std::fill(row + lanes_, row + stride_, row[0]);
  }
  const auto& prog = m_->program[q_];
  if (kernel_ == LaneKernel::Avx2)
    detail::run_lanes_avx2(prog, labels_.data(), values_.data(), stack_.data(), stride_);
  else
    detail::run_lanes_scalar(prog, labels_.data(), values_.data(), stack_.data(), stride_);
  q_ = m_->successor[q_];
  ++steps_;
}

}  // namespace qmon
