#pragma once

#include <cmath>
#include <random>

namespace owr::risk {

template <typename Rng>
void sample_in_ball(Rng& rng, std::span<const double> center, double radius, std::span<double> out) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  double norm2 = 0.0;
  while (norm2 == 0.0) {
    norm2 = 0.0;
    for (double& v : out) {
      v = normal(rng);
      norm2 += v * v;
    }
  }
  const double rho = radius * std::pow(uniform(rng), 1.0 / static_cast<double>(out.size()));
  const double scale = rho / std::sqrt(norm2);
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = center[j] + scale * out[j];
}

}  // namespace owr::risk
