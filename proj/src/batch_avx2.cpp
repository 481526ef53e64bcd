// Built with -mavx2; only reached when the CPU reports AVX2.
#include <immintrin.h>

#include "qmon/batch.hpp"

namespace qmon::detail {

void run_lanes_avx2(const std::vector<Instruction>& program, const double* labels, double* values,
                    double* stack, std::size_t stride) {
  const __m256d one = _mm256_set1_pd(1.0);
  for (const auto& ins : program) {
    double* top = stack;
    for (const auto& n : ins.expr) {
      switch (n.op) {
        case ExprOp::Const: {
          const __m256d c = _mm256_set1_pd(n.value);
          for (std::size_t l = 0; l < stride; l += 4) _mm256_storeu_pd(top + l, c);
          top += stride;
          break;
        }
        case ExprOp::Label:
        case ExprOp::Reg: {
          const double* src = (n.op == ExprOp::Label ? labels : values) + n.index * stride;
          for (std::size_t l = 0; l < stride; l += 4) _mm256_storeu_pd(top + l, _mm256_loadu_pd(src + l));
          top += stride;
          break;
        }
        case ExprOp::Complement: {
          double* x = top - stride;
          for (std::size_t l = 0; l < stride; l += 4)
            _mm256_storeu_pd(x + l, _mm256_sub_pd(one, _mm256_loadu_pd(x + l)));
          break;
        }
        case ExprOp::Min:
        case ExprOp::Max: {
          top -= stride;
          double* x = top - stride;
          const bool is_min = n.op == ExprOp::Min;
          for (std::size_t l = 0; l < stride; l += 4) {
            const __m256d a = _mm256_loadu_pd(x + l);
            const __m256d b = _mm256_loadu_pd(top + l);
            _mm256_storeu_pd(x + l, is_min ? _mm256_min_pd(a, b) : _mm256_max_pd(a, b));
          }
          break;
        }
      }
    }
    double* dst = values + ins.target * stride;
    for (std::size_t l = 0; l < stride; l += 4) _mm256_storeu_pd(dst + l, _mm256_loadu_pd(stack + l));
  }
}

}  // namespace qmon::detail
