#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "owr/dataset.hpp"
#include "owr/metric.hpp"
#include "owr/ncm.hpp"

namespace owr::nno {

/// Gamma(m/2 + 1) / (pi^(m/2) tau^m): the inverse volume of the m-ball of
/// radius tau.
double ball_normalizer(std::size_t m, double tau);

/// Nearest Non-Outlier model: NCM plus a rejection radius tau in projected
/// space. Each class scores
///   f_i(x) = C * max(0, 1 - ||W x - W mu_i|| / tau)
/// and x is labelled unknown (0) when every score is zero.
class NnoModel {
 public:
  /// Throws when tau is not positive or the normalizer is not a positive
  /// normal double.
  NnoModel(ncm::NcmModel ncm, double tau);

  const ncm::NcmModel& ncm() const { return ncm_; }
  double tau() const { return tau_; }
  double norm_const() const { return norm_const_; }

  double score(std::span<const double> x, std::size_t class_index) const;
  std::vector<double> scores(std::span<const double> x) const;

  /// argmax of the scores (ties to the smallest id), or 0 when the winning
  /// score is zero. Rejects iff the nearest projected mean is at distance
  /// >= tau.
  Label recognize(std::span<const double> x) const;

  /// Appends the mean of `new_class` (a single label not yet registered).
  NnoModel increment_learn(const LabeledDataset& new_class) const;

 private:
  ncm::NcmModel ncm_;
  double tau_;
  double norm_const_;
};

/// Classification-with-rejection F1. `truth` uses 0 for samples of unknown
/// categories. A prediction is a true positive when it is non-zero and equals
/// a non-zero truth.
double f1_at_tau(std::span<const Label> predictions, std::span<const Label> truth);

struct TauSearchConfig {
  std::vector<double> grid;  // strictly increasing, positive
  std::size_t fold_count = 3;
  std::uint64_t seed = 0;
};

/// 40 (by default) log-spaced radii from the 1st percentile of within-class
/// projected distances to twice the 99th percentile of projected gaps between
/// class means, over known and unknown classes.
std::vector<double> default_tau_grid(const LabeledDataset& known, const LabeledDataset& unknown,
                                     const MetricModel& metric, std::size_t count = 40);

/// Per fold: means from the fold's training side, every grid value scored by
/// F1 on the validation side plus the unknown set, best value kept (ties to
/// the smaller tau). Returns the mean of the per-fold winners.
double estimate_tau(const LabeledDataset& known, const LabeledDataset& unknown,
                    const MetricModel& metric, const TauSearchConfig& cfg);

struct ThetaSearchConfig {
  std::vector<double> grid;  // strictly increasing, within [0, 1]
  std::size_t fold_count = 3;
  std::uint64_t seed = 0;
};

/// {0.10, 0.15, ..., 0.90, 0.99}
std::vector<double> default_theta_grid();

/// Same fold procedure as estimate_tau for the softmax-threshold baseline.
/// Ties go to the larger theta (more rejection).
double estimate_theta(const LabeledDataset& known, const LabeledDataset& unknown,
                      const MetricModel& metric, const ThetaSearchConfig& cfg);

}  // namespace owr::nno
