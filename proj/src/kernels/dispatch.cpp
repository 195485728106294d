#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <string>

#include "arbor/error.hpp"
#include "arbor/kernels.hpp"

namespace arbor::kernels {

namespace {

Isa detect() {
  if (const char* env = std::getenv("ARBOR_SIMD"); env && std::string(env) == "scalar") {
    return Isa::Scalar;
  }
  return cpu_supports(Isa::Avx2) ? Isa::Avx2 : Isa::Scalar;
}

std::atomic<Isa>& active() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

void check_sizes(std::size_t a, std::size_t b) {
  if (a != b) {
    throw Error(ErrorKind::DimensionMismatch,
                "vector sizes differ: " + std::to_string(a) + " vs " + std::to_string(b));
  }
}

}  // namespace

std::string_view to_string(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

bool cpu_supports(Isa isa) {
  if (isa == Isa::Scalar) return true;
#if defined(ARBOR_HAVE_AVX2_KERNELS) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa active_isa() { return active().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
  if (!cpu_supports(isa)) {
    throw Error(ErrorKind::InvalidArgument, "CPU does not support " + std::string(to_string(isa)));
  }
  active().store(isa, std::memory_order_relaxed);
}

double dot(std::span<const double> a, std::span<const double> b) {
  check_sizes(a.size(), b.size());
#if defined(ARBOR_HAVE_AVX2_KERNELS)
  if (active_isa() == Isa::Avx2) return avx2::dot(a.data(), b.data(), a.size());
#endif
  return scalar::dot(a.data(), b.data(), a.size());
}

double squared_l2(std::span<const double> a, std::span<const double> b) {
  check_sizes(a.size(), b.size());
#if defined(ARBOR_HAVE_AVX2_KERNELS)
  if (active_isa() == Isa::Avx2) return avx2::squared_l2(a.data(), b.data(), a.size());
#endif
  return scalar::squared_l2(a.data(), b.data(), a.size());
}

void scale_inplace(std::span<double> x, double factor) {
#if defined(ARBOR_HAVE_AVX2_KERNELS)
  if (active_isa() == Isa::Avx2) return avx2::scale_inplace(x.data(), x.size(), factor);
#endif
  scalar::scale_inplace(x.data(), x.size(), factor);
}

void add_inplace(std::span<double> acc, std::span<const double> x) {
  check_sizes(acc.size(), x.size());
#if defined(ARBOR_HAVE_AVX2_KERNELS)
  if (active_isa() == Isa::Avx2) return avx2::add_inplace(acc.data(), x.data(), x.size());
#endif
  scalar::add_inplace(acc.data(), x.data(), x.size());
}

std::vector<double> cosine_distance_matrix(std::span<const std::vector<double>> rows) {
  const std::size_t n = rows.size();
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    check_sizes(rows[i].size(), rows[0].size());
    norms[i] = std::sqrt(dot(rows[i], rows[i]));
  }
  std::vector<double> out(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double denom = norms[i] * norms[j];
      const double cosine = denom > 0.0 ? dot(rows[i], rows[j]) / denom : 0.0;
      const double d = std::clamp(1.0 - cosine, 0.0, 2.0);
      out[i * n + j] = d;
      out[j * n + i] = d;
    }
  }
  return out;
}

}  // namespace arbor::kernels
