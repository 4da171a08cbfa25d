#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "owr/matrix.hpp"

namespace owr {

/// Class identifier. Ground-truth labels are >= 1; predictions use 0 for
/// "unknown".
using Label = std::uint32_t;
inline constexpr Label kUnknownLabel = 0;

/// n feature rows of dimension d with strictly positive labels.
class LabeledDataset {
 public:
  /// Validates every invariant and throws owr::Error naming the offending row.
  LabeledDataset(Matrix features, std::vector<Label> labels);

  std::size_t size() const { return labels_.size(); }
  std::size_t dim() const { return features_.cols(); }

  std::span<const double> row(std::size_t i) const { return features_.row(i); }
  Label label(std::size_t i) const { return labels_[i]; }

  const Matrix& features() const { return features_; }
  std::span<const Label> labels() const { return labels_; }

  /// Sorted distinct labels.
  std::vector<Label> class_ids() const;

  /// Rows at the given indices, in the given order.
  LabeledDataset subset(std::span<const std::size_t> indices) const;

  /// Rows of `a` followed by rows of `b`.
  static LabeledDataset concat(const LabeledDataset& a, const LabeledDataset& b);

 private:
  Matrix features_;
  std::vector<Label> labels_;
};

namespace data {

enum class FileFormat { kCsv, kBinary };

/// `.csv` selects CSV, anything else the OWR1 binary layout.
FileFormat format_from_path(const std::filesystem::path& path);

LabeledDataset load_features(const std::filesystem::path& path, FileFormat format);
void save_features(const LabeledDataset& ds, const std::filesystem::path& path, FileFormat format);

struct WhitenStats {
  std::vector<double> mean;
  std::vector<double> std;
};

/// Per-column mean and population standard deviation. Zero deviations are
/// replaced by 1.
WhitenStats compute_whitening(const LabeledDataset& ds);

/// x[i][j] <- (x[i][j] - mean[j]) / std[j]
LabeledDataset apply_whitening(const WhitenStats& stats, const LabeledDataset& ds);

/// x[i][j] <- x[i][j] * std[j] + mean[j]
LabeledDataset invert_whitening(const WhitenStats& stats, const LabeledDataset& ds);

struct SplitConfig {
  std::vector<Label> known_class_ids;
  std::vector<Label> unknown_class_ids;
  std::size_t fold_count = 3;
  std::uint64_t seed = 0;
};

struct KnownUnknownSplit {
  LabeledDataset known;
  LabeledDataset unknown;
};

/// Row filter by class id. Row order within each side follows the input.
KnownUnknownSplit split_known_unknown(const LabeledDataset& ds, const SplitConfig& cfg);

struct Fold {
  LabeledDataset train;
  LabeledDataset validation;
};

/// Index-level fold assignment; `validation[f]` lists the rows held out in
/// fold f. Each class is shuffled with `seed` and dealt round-robin.
std::vector<std::vector<std::size_t>> stratified_fold_indices(const LabeledDataset& ds,
                                                              std::size_t k, std::uint64_t seed);

std::vector<Fold> make_folds(const LabeledDataset& ds, std::size_t k, std::uint64_t seed);

struct SyntheticConfig {
  std::size_t classes = 2;
  std::size_t dim = 2;
  std::size_t per_class = 10;
  double separation = 10.0;
  double spread = 1.0;
  std::uint64_t seed = 0;
};

/// Isotropic Gaussian blobs. Class c (label c, 1-based) is centred on a point
/// drawn uniformly from the sphere of radius `separation`. Rows are grouped by
/// class.
LabeledDataset gen_synthetic(const SyntheticConfig& cfg);

/// Centres used by gen_synthetic for the same cfg, one row per class.
Matrix synthetic_centers(const SyntheticConfig& cfg);

}  // namespace data
}  // namespace owr
