#pragma once

// Test-only reference implementations. They deliberately avoid the library's
// kernels and evaluation order so they can serve as independent oracles.

#include <boost/multiprecision/cpp_bin_float.hpp>

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "owr/class_means.hpp"
#include "owr/dataset.hpp"
#include "owr/matrix.hpp"

namespace owr::testing {

using HighPrec = boost::multiprecision::cpp_bin_float_50;

struct Instance {
  Matrix w;
  LabeledDataset batch;
  ClassMeans means;
};

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = normal(rng);
  return m;
}

/// Random batch over classes 1..k with means drawn independently of the
/// batch (so the loss is not at a special point).
inline Instance random_instance(std::uint64_t seed, std::size_t k, std::size_t d, std::size_t m,
                                std::size_t n, double w_scale = 0.5) {
  std::mt19937_64 rng(seed);
  Matrix w = random_matrix(m, d, rng, w_scale);
  ClassMeans means;
  for (std::size_t c = 0; c < k; ++c) means.ids.push_back(static_cast<Label>(c + 1));
  means.means = random_matrix(k, d, rng, 1.5);
  std::uniform_int_distribution<std::size_t> pick(0, k - 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix x(n, d);
  std::vector<Label> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i < k ? i : pick(rng);
    labels[i] = static_cast<Label>(c + 1);
    for (std::size_t j = 0; j < d; ++j) x(i, j) = means.means(c, j) + normal(rng);
  }
  return {std::move(w), LabeledDataset(std::move(x), std::move(labels)), std::move(means)};
}

/// ||W (x - mu)||^2 in 50-digit arithmetic.
inline HighPrec projected_sq_distance(const Matrix& w, std::span<const double> x, std::span<const double> mu) {
  HighPrec total = 0;
  for (std::size_t r = 0; r < w.rows(); ++r) {
    HighPrec acc = 0;
    for (std::size_t j = 0; j < w.cols(); ++j) acc += HighPrec(w(r, j)) * (HighPrec(x[j]) - HighPrec(mu[j]));
    total += acc * acc;
  }
  return total;
}

/// Straight transcription of the NCM posterior, no stabilisation.
inline std::vector<HighPrec> posterior(const Matrix& w, std::span<const double> x, const ClassMeans& means) {
  std::vector<HighPrec> p(means.size());
  HighPrec z = 0;
  for (std::size_t c = 0; c < means.size(); ++c) {
    p[c] = boost::multiprecision::exp(-projected_sq_distance(w, x, means.means.row(c)) / 2);
    z += p[c];
  }
  for (auto& v : p) v /= z;
  return p;
}

inline double loss(const Matrix& w, const LabeledDataset& batch, const ClassMeans& means) {
  HighPrec total = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto p = posterior(w, batch.row(i), means);
    total -= boost::multiprecision::log(p[means.index_of(batch.label(i))]);
  }
  return static_cast<double>(total / batch.size());
}

/// Modified Gram-Schmidt on a Gaussian matrix.
inline Matrix random_orthogonal(std::size_t n, std::mt19937_64& rng) {
  Matrix q = random_matrix(n, n, rng);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      double dot = 0;
      for (std::size_t k = 0; k < n; ++k) dot += q(i, k) * q(j, k);
      for (std::size_t k = 0; k < n; ++k) q(i, k) -= dot * q(j, k);
    }
    double norm = 0;
    for (std::size_t k = 0; k < n; ++k) norm += q(i, k) * q(i, k);
    norm = std::sqrt(norm);
    for (std::size_t k = 0; k < n; ++k) q(i, k) /= norm;
  }
  return q;
}

/// Index of the closest mean under ||W x - W mu||^2 by exhaustive scan, ties
/// to the lowest index.
inline std::size_t brute_nearest(const Matrix& w, std::span<const double> x, const ClassMeans& means,
                                 double* best_sq = nullptr) {
  std::size_t best = 0;
  double best_d = 0;
  for (std::size_t c = 0; c < means.size(); ++c) {
    const double dist = static_cast<double>(projected_sq_distance(w, x, means.means.row(c)));
    if (c == 0 || dist < best_d) {
      best = c;
      best_d = dist;
    }
  }
  if (best_sq) *best_sq = best_d;
  return best;
}

}  // namespace owr::testing
