#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "owr/class_means.hpp"
#include "owr/dataset.hpp"
#include "owr/matrix.hpp"

namespace owr {

/// Low-rank projection W (m x d) inducing d_W(x, y) = ||W x - W y||^2.
class MetricModel {
 public:
  /// Throws unless every entry is finite and 1 <= m <= d.
  explicit MetricModel(Matrix weights);

  const Matrix& weights() const { return weights_; }
  std::size_t projected_dim() const { return weights_.rows(); }
  std::size_t input_dim() const { return weights_.cols(); }

  void project(std::span<const double> x, std::span<double> out) const;
  std::vector<double> project(std::span<const double> x) const;

  friend bool operator==(const MetricModel&, const MetricModel&) = default;

 private:
  Matrix weights_;
};

namespace metric {

struct SgdConfig {
  double learning_rate = 0.05;
  std::size_t iterations = 50'000;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  double init_scale = 1e-2;
};

/// Mean negative log-likelihood of the NCM posterior
///   p(c|x) = exp(-d_W(x, mu_c) / 2) / sum_c' exp(-d_W(x, mu_c') / 2)
/// over the batch.
double ncm_loss(const Matrix& w, const LabeledDataset& batch, const ClassMeans& means);

/// Gradient of ncm_loss with respect to W:
///   (1/n) sum_i sum_c ([c = y_i] - p(c|x_i)) W (x_i - mu_c)(x_i - mu_c)^T
Matrix ncm_loss_grad(const Matrix& w, const LabeledDataset& batch, const ClassMeans& means);

/// Loss and gradient in one pass over `rows` of `ds` (rows may repeat).
double ncm_loss_and_grad(const Matrix& w, const LabeledDataset& ds, std::span<const std::size_t> rows,
                         const ClassMeans& means, Matrix* grad);

/// Max over entries of |fd - g| / (|g| + 1e-12), with fd the central
/// difference of ncm_loss at step h.
double finite_diff_check(const Matrix& w, const LabeledDataset& batch, const ClassMeans& means,
                         double h);

struct TrainTrace {
  double initial_monitor_loss = 0.0;
  double final_monitor_loss = 0.0;
  std::size_t monitor_size = 0;
};

/// Mini-batch SGD on ncm_loss with class means fixed from `ds`.
MetricModel train_metric(const LabeledDataset& ds, std::size_t m, const SgdConfig& cfg,
                         TrainTrace* trace = nullptr);

}  // namespace metric
}  // namespace owr
