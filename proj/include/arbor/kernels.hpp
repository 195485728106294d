#pragma once
// Vector kernels used by the embedding, clustering and k-means paths.
//
// Every kernel has a scalar reference in kernels::scalar and, on x86-64, an
// AVX2+FMA variant in kernels::avx2 (compiled in its own translation unit with
// the ISA flags). The unqualified entry points dispatch once at runtime on CPU
// support; ARBOR_SIMD=scalar in the environment pins the reference path.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace arbor::kernels {

enum class Isa { Scalar, Avx2 };

std::string_view to_string(Isa isa);
bool cpu_supports(Isa isa);
Isa active_isa();
// Test hook. Throws InvalidArgument when the CPU lacks the ISA.
void set_active_isa(Isa isa);

double dot(std::span<const double> a, std::span<const double> b);
double squared_l2(std::span<const double> a, std::span<const double> b);
void scale_inplace(std::span<double> x, double factor);
void add_inplace(std::span<double> acc, std::span<const double> x);

// Row-major n x n matrix of 1 - cos(a_i, a_j), clamped to [0, 2], zero diagonal.
std::vector<double> cosine_distance_matrix(std::span<const std::vector<double>> rows);

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
double squared_l2(const double* a, const double* b, std::size_t n);
void scale_inplace(double* x, std::size_t n, double factor);
void add_inplace(double* acc, const double* x, std::size_t n);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
#define ARBOR_HAVE_AVX2_KERNELS 1
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
double squared_l2(const double* a, const double* b, std::size_t n);
void scale_inplace(double* x, std::size_t n, double factor);
void add_inplace(double* acc, const double* x, std::size_t n);
}  // namespace avx2
#endif

}  // namespace arbor::kernels
