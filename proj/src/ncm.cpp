#include "owr/ncm.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "owr/error.hpp"
#include "owr/simd.hpp"

namespace owr {

std::size_t ClassMeans::index_of(Label id) const {
  const auto it = std::lower_bound(ids.begin(), ids.end(), id);
  if (it == ids.end() || *it != id) {
    throw Error("class " + std::to_string(id) + " has no registered mean");
  }
  return static_cast<std::size_t>(it - ids.begin());
}

namespace ncm {

ClassMeans class_means(const LabeledDataset& ds) {
  ClassMeans out;
  out.ids = ds.class_ids();
  out.means = Matrix(out.ids.size(), ds.dim());
  std::vector<std::size_t> counts(out.ids.size(), 0);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const std::size_t c = out.index_of(ds.label(i));
    simd::axpy(1.0, ds.row(i), out.means.row(c));
    ++counts[c];
  }
  for (std::size_t c = 0; c < out.ids.size(); ++c) {
    const double inv = 1.0 / static_cast<double>(counts[c]);
    for (double& v : out.means.row(c)) v *= inv;
  }
  return out;
}

std::vector<double> softmax_from_distances(std::span<const double> squared_distances) {
  const double dmin = *std::min_element(squared_distances.begin(), squared_distances.end());
  std::vector<double> p(squared_distances.size());
  double z = 0.0;
  for (std::size_t c = 0; c < p.size(); ++c) {
    p[c] = std::exp(-0.5 * (squared_distances[c] - dmin));
    z += p[c];
  }
  for (double& v : p) v /= z;
  return p;
}

NcmModel::NcmModel(MetricModel metric, ClassMeans means)
    : metric_(std::move(metric)), means_(std::move(means)) {
  if (means_.ids.empty()) throw Error("ncm: model needs at least one class");
  if (means_.means.rows() != means_.ids.size()) throw Error("ncm: one mean per class id required");
  if (means_.means.cols() != metric_.input_dim()) {
    throw DimensionError("ncm: means have dimension " + std::to_string(means_.means.cols()) +
                         ", metric expects " + std::to_string(metric_.input_dim()));
  }
  for (std::size_t i = 0; i < means_.ids.size(); ++i) {
    if (means_.ids[i] == kUnknownLabel) throw Error("ncm: class id 0 is reserved");
    if (i > 0 && means_.ids[i] <= means_.ids[i - 1]) {
      throw Error("ncm: class ids must be strictly increasing");
    }
  }
  if (!means_.means.all_finite()) throw Error("ncm: non-finite class mean");
  projected_means_ = Matrix(means_.ids.size(), metric_.projected_dim());
  for (std::size_t c = 0; c < means_.ids.size(); ++c) {
    metric_.project(means_.means.row(c), projected_means_.row(c));
  }
}

void NcmModel::check_dim(std::span<const double> x) const {
  if (x.size() != input_dim()) {
    throw DimensionError("ncm: input has dimension " + std::to_string(x.size()) + ", expected " +
                         std::to_string(input_dim()));
  }
}

double NcmModel::dist_w(std::span<const double> x, std::size_t class_index) const {
  check_dim(x);
  if (class_index >= num_classes()) {
    throw Error("ncm: class index " + std::to_string(class_index) + " out of range");
  }
  const auto px = metric_.project(x);
  return simd::squared_distance(px, projected_means_.row(class_index));
}

std::vector<double> NcmModel::projected_distances(std::span<const double> x) const {
  check_dim(x);
  const auto px = metric_.project(x);
  const auto& kern = simd::kernels();
  std::vector<double> out(num_classes());
  for (std::size_t c = 0; c < out.size(); ++c) {
    out[c] = kern.squared_distance(px.data(), projected_means_.row(c).data(), px.size());
  }
  return out;
}

std::pair<std::size_t, double> NcmModel::nearest(std::span<const double> x) const {
  const auto dist = projected_distances(x);
  // ids are ascending, so the first minimum is the smallest id.
  const auto it = std::min_element(dist.begin(), dist.end());
  return {static_cast<std::size_t>(it - dist.begin()), *it};
}

std::vector<double> NcmModel::softmax_probs(std::span<const double> x) const {
  return softmax_from_distances(projected_distances(x));
}

Label NcmModel::predict_closed(std::span<const double> x) const {
  return means_.ids[nearest(x).first];
}

Label NcmModel::predict_softmax_threshold(std::span<const double> x, double theta) const {
  if (!(theta >= 0.0 && theta <= 1.0)) throw Error("softmax threshold must lie in [0, 1]");
  const auto dist = projected_distances(x);
  const auto best = static_cast<std::size_t>(std::min_element(dist.begin(), dist.end()) - dist.begin());
  const auto p = softmax_from_distances(dist);
  return p[best] >= theta ? means_.ids[best] : kUnknownLabel;
}

NcmModel NcmModel::with_class(Label id, std::span<const double> mean) const {
  if (id == kUnknownLabel) throw Error("ncm: class id 0 is reserved");
  if (mean.size() != input_dim()) throw DimensionError("ncm: new mean has the wrong dimension");
  const auto pos = std::lower_bound(means_.ids.begin(), means_.ids.end(), id);
  if (pos != means_.ids.end() && *pos == id) {
    throw Error("ncm: class " + std::to_string(id) + " is already registered");
  }
  const auto at = static_cast<std::size_t>(pos - means_.ids.begin());
  ClassMeans next;
  next.ids = means_.ids;
  next.ids.insert(next.ids.begin() + static_cast<std::ptrdiff_t>(at), id);
  next.means = Matrix(next.ids.size(), input_dim());
  for (std::size_t c = 0, src = 0; c < next.ids.size(); ++c) {
    const auto from = c == at ? mean : means_.means.row(src++);
    std::copy(from.begin(), from.end(), next.means.row(c).begin());
  }
  return NcmModel(metric_, std::move(next));
}

}  // namespace ncm
}  // namespace owr
