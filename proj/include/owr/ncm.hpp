#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "owr/class_means.hpp"
#include "owr/dataset.hpp"
#include "owr/metric.hpp"

namespace owr::ncm {

/// Nearest Class Mean classifier under a learned metric. Immutable; adding a
/// class returns a new model.
class NcmModel {
 public:
  NcmModel(MetricModel metric, ClassMeans means);

  const MetricModel& metric() const { return metric_; }
  std::span<const Label> class_ids() const { return means_.ids; }
  const ClassMeans& class_means() const { return means_; }
  const Matrix& means() const { return means_.means; }
  const Matrix& projected_means() const { return projected_means_; }
  std::size_t num_classes() const { return means_.ids.size(); }
  std::size_t input_dim() const { return metric_.input_dim(); }
  std::size_t projected_dim() const { return metric_.projected_dim(); }

  /// ||W x - W mu_i||^2
  double dist_w(std::span<const double> x, std::size_t class_index) const;

  /// Squared projected distance from x to every class mean.
  std::vector<double> projected_distances(std::span<const double> x) const;

  /// Index of the nearest mean (ties to the smallest id) and its squared
  /// projected distance.
  std::pair<std::size_t, double> nearest(std::span<const double> x) const;

  std::vector<double> softmax_probs(std::span<const double> x) const;

  Label predict_closed(std::span<const double> x) const;

  /// predict_closed(x) if max_c p(c|x) >= theta, otherwise 0.
  Label predict_softmax_threshold(std::span<const double> x, double theta) const;

  /// Copy with `id` added at its sorted position.
  NcmModel with_class(Label id, std::span<const double> mean) const;

 private:
  void check_dim(std::span<const double> x) const;

  MetricModel metric_;
  ClassMeans means_;
  Matrix projected_means_;
};

/// Softmax over -d/2 with min-subtraction.
std::vector<double> softmax_from_distances(std::span<const double> squared_distances);

}  // namespace owr::ncm
