#pragma once

// Inner-loop kernels with a scalar reference and vectorized variants. The
// variant is chosen once per process from the CPU features, or forced with
// the OWR_ISA environment variable (scalar | avx2 | neon).

#include <cstddef>
#include <span>
#include <string_view>

namespace owr::simd {

enum class Isa { kScalar, kAvx2, kNeon };

struct KernelTable {
  Isa isa;
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // out = a - b
  void (*subtract)(const double* a, const double* b, double* out, std::size_t n);
};

bool isa_supported(Isa isa);
std::string_view isa_name(Isa isa);

/// Table for a specific ISA. Throws owr::Error when the ISA is not compiled in
/// or not supported by this CPU.
const KernelTable& kernels_for(Isa isa);

/// The process-wide dispatched table.
const KernelTable& kernels();

inline double dot(std::span<const double> a, std::span<const double> b) {
  return kernels().dot(a.data(), b.data(), a.size());
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  return kernels().squared_distance(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  kernels().axpy(alpha, x.data(), y.data(), x.size());
}

inline void subtract(std::span<const double> a, std::span<const double> b, std::span<double> out) {
  kernels().subtract(a.data(), b.data(), out.data(), a.size());
}

}  // namespace owr::simd
