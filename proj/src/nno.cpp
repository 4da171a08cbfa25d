#include "owr/nno.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "owr/error.hpp"
#include "owr/simd.hpp"

namespace owr::nno {

double ball_normalizer(std::size_t m, double tau) {
  if (!(tau > 0.0)) throw Error("tau must be positive");
  const double half = 0.5 * static_cast<double>(m);
  const double log_c = std::lgamma(half + 1.0) - half * std::log(std::numbers::pi) -
                       static_cast<double>(m) * std::log(tau);
  return std::exp(log_c);
}

NnoModel::NnoModel(ncm::NcmModel ncm, double tau)
    : ncm_(std::move(ncm)), tau_(tau), norm_const_(0.0) {
  if (!(tau_ > 0.0) || !std::isfinite(tau_)) throw Error("nno: tau must be a positive finite value");
  norm_const_ = ball_normalizer(ncm_.projected_dim(), tau_);
  if (!std::isnormal(norm_const_)) {
    throw Error("nno: normalizing constant for m=" + std::to_string(ncm_.projected_dim()) +
                " and tau=" + std::to_string(tau_) + " is outside the double range");
  }
}

double NnoModel::score(std::span<const double> x, std::size_t class_index) const {
  const double dist = std::sqrt(ncm_.dist_w(x, class_index));
  return norm_const_ * std::max(0.0, 1.0 - dist / tau_);
}

std::vector<double> NnoModel::scores(std::span<const double> x) const {
  auto dist = ncm_.projected_distances(x);
  for (double& d : dist) d = norm_const_ * std::max(0.0, 1.0 - std::sqrt(d) / tau_);
  return dist;
}

Label NnoModel::recognize(std::span<const double> x) const {
  const auto [best, squared] = ncm_.nearest(x);
  return std::sqrt(squared) < tau_ ? ncm_.class_ids()[best] : kUnknownLabel;
}

NnoModel NnoModel::increment_learn(const LabeledDataset& new_class) const {
  const auto ids = new_class.class_ids();
  if (ids.size() != 1) {
    throw Error("increment: expected data for exactly one class, got " + std::to_string(ids.size()));
  }
  const ClassMeans mean = ncm::class_means(new_class);
  return NnoModel(ncm_.with_class(ids.front(), mean.means.row(0)), tau_);
}

double f1_at_tau(std::span<const Label> predictions, std::span<const Label> truth) {
  if (predictions.size() != truth.size()) throw Error("f1: predictions and truth differ in length");
  std::size_t accepted = 0;
  std::size_t known = 0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (predictions[i] != kUnknownLabel) ++accepted;
    if (truth[i] != kUnknownLabel) {
      ++known;
      if (predictions[i] == truth[i]) ++correct;
    }
  }
  if (accepted == 0 || known == 0 || correct == 0) return 0.0;
  const double precision = static_cast<double>(correct) / static_cast<double>(accepted);
  const double recall = static_cast<double>(correct) / static_cast<double>(known);
  return 2.0 * precision * recall / (precision + recall);
}

namespace {

double percentile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

void check_grid(std::span<const double> grid, double lower, double upper, const char* what) {
  if (grid.empty()) throw Error(std::string(what) + ": empty search grid");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > lower && grid[i] <= upper)) throw Error(std::string(what) + ": grid value out of range");
    if (i > 0 && !(grid[i] > grid[i - 1])) throw Error(std::string(what) + ": grid must be strictly increasing");
  }
}

// Scores every grid value per fold and averages the fold winners.
// `predict(model, x, value)` is the thresholded classifier under test.
template <typename Predict>
double search_threshold(const LabeledDataset& known, const LabeledDataset& unknown,
                        const MetricModel& metric, std::span<const double> grid, std::size_t folds,
                        std::uint64_t seed, bool prefer_larger, Predict predict) {
  if (unknown.size() == 0) throw Error("threshold search: unknown set is empty");
  const auto split = data::make_folds(known, folds, seed);
  double sum = 0.0;
  for (const auto& fold : split) {
    const ncm::NcmModel model(metric, ncm::class_means(fold.train));
    std::vector<Label> truth(fold.validation.labels().begin(), fold.validation.labels().end());
    truth.resize(truth.size() + unknown.size(), kUnknownLabel);
    std::vector<Label> predictions(truth.size());
    double best_value = grid.front();
    double best_f1 = -1.0;
    for (double value : grid) {
      for (std::size_t i = 0; i < fold.validation.size(); ++i) {
        predictions[i] = predict(model, fold.validation.row(i), value);
      }
      for (std::size_t i = 0; i < unknown.size(); ++i) {
        predictions[fold.validation.size() + i] = predict(model, unknown.row(i), value);
      }
      const double f1 = f1_at_tau(predictions, truth);
      if (f1 > best_f1 || (prefer_larger && f1 == best_f1)) {
        best_f1 = f1;
        best_value = value;
      }
    }
    sum += best_value;
  }
  return sum / static_cast<double>(split.size());
}

}  // namespace

std::vector<double> default_tau_grid(const LabeledDataset& known, const LabeledDataset& unknown,
                                     const MetricModel& metric, std::size_t count) {
  if (count < 2) throw Error("tau grid needs at least 2 points");
  const ncm::NcmModel model(metric, ncm::class_means(known));
  std::vector<double> within;
  within.reserve(known.size());
  for (std::size_t i = 0; i < known.size(); ++i) {
    within.push_back(std::sqrt(model.dist_w(known.row(i), model.class_means().index_of(known.label(i)))));
  }

  const auto all = ncm::class_means(LabeledDataset::concat(known, unknown));
  Matrix projected(all.size(), metric.projected_dim());
  for (std::size_t c = 0; c < all.size(); ++c) metric.project(all.means.row(c), projected.row(c));
  std::vector<double> gaps;
  for (std::size_t a = 0; a < all.size(); ++a) {
    for (std::size_t b = a + 1; b < all.size(); ++b) {
      gaps.push_back(std::sqrt(simd::squared_distance(projected.row(a), projected.row(b))));
    }
  }

  double hi = gaps.empty() ? 0.0 : 2.0 * percentile(gaps, 0.99);
  double lo = percentile(within, 0.01);
  if (!(lo > 0.0)) {
    double smallest = 0.0;
    for (double v : within) {
      if (v > 0.0 && (smallest == 0.0 || v < smallest)) smallest = v;
    }
    lo = smallest > 0.0 ? smallest : (hi > 0.0 ? hi * 1e-6 : 1e-6);
  }
  if (!(hi > lo)) hi = 2.0 * lo;

  std::vector<double> grid(count);
  const double step = std::log(hi / lo) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) grid[i] = lo * std::exp(step * static_cast<double>(i));
  grid.back() = hi;
  return grid;
}

double estimate_tau(const LabeledDataset& known, const LabeledDataset& unknown,
                    const MetricModel& metric, const TauSearchConfig& cfg) {
  check_grid(cfg.grid, 0.0, std::numeric_limits<double>::infinity(), "tau search");
  if (known.dim() != unknown.dim()) throw DimensionError("tau search: known/unknown dimension mismatch");
  // The decision depends only on the nearest projected mean, so the rule is
  // evaluated directly rather than building an NnoModel per candidate.
  return search_threshold(known, unknown, metric, cfg.grid, cfg.fold_count, cfg.seed, false,
                          [](const ncm::NcmModel& model, std::span<const double> x, double tau) {
                            const auto [best, squared] = model.nearest(x);
                            return std::sqrt(squared) < tau ? model.class_ids()[best] : kUnknownLabel;
                          });
}

std::vector<double> default_theta_grid() {
  std::vector<double> grid;
  for (int i = 0; i <= 16; ++i) grid.push_back(static_cast<double>(10 + 5 * i) / 100.0);
  grid.push_back(0.99);
  return grid;
}

double estimate_theta(const LabeledDataset& known, const LabeledDataset& unknown,
                      const MetricModel& metric, const ThetaSearchConfig& cfg) {
  check_grid(cfg.grid, -1e-300, 1.0, "theta search");
  if (known.dim() != unknown.dim()) throw DimensionError("theta search: known/unknown dimension mismatch");
  return search_threshold(known, unknown, metric, cfg.grid, cfg.fold_count, cfg.seed, true,
                          [](const ncm::NcmModel& model, std::span<const double> x, double theta) {
                            return model.predict_softmax_threshold(x, theta);
                          });
}

}  // namespace owr::nno
