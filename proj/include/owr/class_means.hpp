#pragma once

#include <cstddef>
#include <vector>

#include "owr/dataset.hpp"
#include "owr/matrix.hpp"

namespace owr {

/// Per-class centroids; `ids` ascending, row i of `means` belongs to ids[i].
struct ClassMeans {
  std::vector<Label> ids;
  Matrix means;

  std::size_t size() const { return ids.size(); }
  /// Throws owr::Error when `id` has no mean.
  std::size_t index_of(Label id) const;
};

namespace ncm {

/// Arithmetic mean of each label's rows, ids ascending.
ClassMeans class_means(const LabeledDataset& ds);

}  // namespace ncm
}  // namespace owr
