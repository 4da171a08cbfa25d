#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <string>

#include "owr/binary_io.hpp"
#include "owr/dataset.hpp"
#include "owr/error.hpp"

namespace owr {

LabeledDataset::LabeledDataset(Matrix features, std::vector<Label> labels)
    : features_(std::move(features)), labels_(std::move(labels)) {
  if (labels_.empty()) throw Error("dataset must contain at least one row");
  if (features_.cols() == 0) throw Error("dataset dimension must be at least 1");
  if (features_.rows() != labels_.size()) {
    throw DimensionError("dataset has " + std::to_string(features_.rows()) + " feature rows but " +
                         std::to_string(labels_.size()) + " labels");
  }
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] == kUnknownLabel) {
      throw Error("row " + std::to_string(i) + ": reserved label 0 is not a valid class id");
    }
    for (double v : features_.row(i)) {
      if (!std::isfinite(v)) throw Error("row " + std::to_string(i) + ": non-finite feature value");
    }
  }
}

std::vector<Label> LabeledDataset::class_ids() const {
  std::vector<Label> ids(labels_.begin(), labels_.end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> indices) const {
  Matrix features(indices.size(), dim());
  std::vector<Label> labels(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= size()) throw Error("subset index out of range");
    std::copy_n(row(indices[i]).begin(), dim(), features.row(i).begin());
    labels[i] = labels_[indices[i]];
  }
  return LabeledDataset(std::move(features), std::move(labels));
}

LabeledDataset LabeledDataset::concat(const LabeledDataset& a, const LabeledDataset& b) {
  if (a.dim() != b.dim()) throw DimensionError("concat: datasets differ in dimension");
  Matrix features(a.size() + b.size(), a.dim());
  std::vector<Label> labels;
  labels.reserve(a.size() + b.size());
  auto out = features.data().begin();
  out = std::copy(a.features().data().begin(), a.features().data().end(), out);
  std::copy(b.features().data().begin(), b.features().data().end(), out);
  labels.insert(labels.end(), a.labels().begin(), a.labels().end());
  labels.insert(labels.end(), b.labels().begin(), b.labels().end());
  return LabeledDataset(std::move(features), std::move(labels));
}

namespace data {
namespace {

constexpr std::string_view kDatasetMagic = "OWR1";

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

LabeledDataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<double> values;
  std::vector<Label> labels;
  std::size_t dim = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view rest = trim(line);
    if (rest.empty()) continue;
    const std::size_t row = labels.size();
    const std::string where = "row " + std::to_string(row) + " (line " + std::to_string(line_no) + ")";
    std::vector<std::string_view> fields;
    for (std::size_t pos = 0;;) {
      const std::size_t comma = rest.find(',', pos);
      fields.push_back(trim(rest.substr(pos, comma == std::string_view::npos ? rest.npos : comma - pos)));
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
    if (fields.size() < 2) throw FormatError(where + ": expected a label and at least one feature");

    long long label = 0;
    auto [lend, lerr] = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), label);
    if (lerr != std::errc() || lend != fields[0].data() + fields[0].size()) {
      throw FormatError(where + ": malformed label '" + std::string(fields[0]) + "'");
    }
    if (label == 0) throw FormatError(where + ": reserved label 0 is not a valid class id");
    if (label < 0 || label > std::numeric_limits<Label>::max()) {
      throw FormatError(where + ": label out of range");
    }

    const std::size_t row_dim = fields.size() - 1;
    if (row == 0) {
      dim = row_dim;
    } else if (row_dim != dim) {
      throw FormatError(where + ": has " + std::to_string(row_dim) + " features, expected " +
                        std::to_string(dim));
    }
    for (std::size_t j = 1; j < fields.size(); ++j) {
      double v = 0.0;
      const auto f = fields[j];
      auto [end, err] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (err != std::errc() || end != f.data() + f.size()) {
        throw FormatError(where + ": malformed value '" + std::string(f) + "'");
      }
      if (!std::isfinite(v)) throw FormatError(where + ": non-finite feature value");
      values.push_back(v);
    }
    labels.push_back(static_cast<Label>(label));
  }
  if (labels.empty()) throw FormatError(path.string() + ": no data rows");
  const std::size_t n = labels.size();
  return LabeledDataset(Matrix(n, dim, std::move(values)), std::move(labels));
}

LabeledDataset load_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  io::expect_magic(in, kDatasetMagic, "dataset header");
  const std::uint32_t n = io::read_u32(in, "row count");
  const std::uint32_t d = io::read_u32(in, "dimension");
  if (n == 0 || d == 0) throw FormatError("dataset header: n and d must be positive");
  std::vector<Label> labels(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    labels[i] = io::read_u32(in, "labels");
    if (labels[i] == kUnknownLabel) {
      throw FormatError("row " + std::to_string(i) + ": reserved label 0 is not a valid class id");
    }
  }
  Matrix features(n, d);
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint32_t j = 0; j < d; ++j) {
      const float v = io::read_f32(in, "features");
      if (!std::isfinite(v)) throw FormatError("row " + std::to_string(i) + ": non-finite feature value");
      features(i, j) = v;
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("dataset: trailing bytes after features");
  return LabeledDataset(std::move(features), std::move(labels));
}

}  // namespace

FileFormat format_from_path(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? FileFormat::kCsv : FileFormat::kBinary;
}

LabeledDataset load_features(const std::filesystem::path& path, FileFormat format) {
  return format == FileFormat::kCsv ? load_csv(path) : load_binary(path);
}

void save_features(const LabeledDataset& ds, const std::filesystem::path& path, FileFormat format) {
  if (format == FileFormat::kCsv) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    char buf[32];
    for (std::size_t i = 0; i < ds.size(); ++i) {
      out << ds.label(i);
      for (double v : ds.row(i)) {
        auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
        out << ',' << std::string_view(buf, static_cast<std::size_t>(end - buf));
      }
      out << '\n';
    }
    if (!out) throw Error("write failed: " + path.string());
    return;
  }
  if (ds.size() > std::numeric_limits<std::uint32_t>::max() ||
      ds.dim() > std::numeric_limits<std::uint32_t>::max()) {
    throw Error("dataset too large for the binary format");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  io::write_magic(out, kDatasetMagic);
  io::write_u32(out, static_cast<std::uint32_t>(ds.size()));
  io::write_u32(out, static_cast<std::uint32_t>(ds.dim()));
  for (Label l : ds.labels()) io::write_u32(out, l);
  for (double v : ds.features().data()) io::write_f32(out, static_cast<float>(v));
}

WhitenStats compute_whitening(const LabeledDataset& ds) {
  const std::size_t n = ds.size();
  const std::size_t d = ds.dim();
  WhitenStats stats{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) stats.mean[j] += ds.row(i)[j];
  }
  for (double& m : stats.mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double c = ds.row(i)[j] - stats.mean[j];
      stats.std[j] += c * c;
    }
  }
  for (double& s : stats.std) {
    s = std::sqrt(s / static_cast<double>(n));
    if (s == 0.0) s = 1.0;
  }
  return stats;
}

LabeledDataset apply_whitening(const WhitenStats& stats, const LabeledDataset& ds) {
  if (stats.mean.size() != ds.dim() || stats.std.size() != ds.dim()) {
    throw DimensionError("whitening statistics have dimension " + std::to_string(stats.mean.size()) +
                         ", dataset has " + std::to_string(ds.dim()));
  }
  Matrix out = ds.features();
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] = (r[j] - stats.mean[j]) / stats.std[j];
  }
  return LabeledDataset(std::move(out), std::vector<Label>(ds.labels().begin(), ds.labels().end()));
}

LabeledDataset invert_whitening(const WhitenStats& stats, const LabeledDataset& ds) {
  if (stats.mean.size() != ds.dim() || stats.std.size() != ds.dim()) {
    throw DimensionError("whitening statistics do not match dataset dimension");
  }
  Matrix out = ds.features();
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] = r[j] * stats.std[j] + stats.mean[j];
  }
  return LabeledDataset(std::move(out), std::vector<Label>(ds.labels().begin(), ds.labels().end()));
}

KnownUnknownSplit split_known_unknown(const LabeledDataset& ds, const SplitConfig& cfg) {
  const std::set<Label> known(cfg.known_class_ids.begin(), cfg.known_class_ids.end());
  const std::set<Label> unknown(cfg.unknown_class_ids.begin(), cfg.unknown_class_ids.end());
  if (known.empty() || unknown.empty()) throw Error("split: known and unknown id sets must be non-empty");
  for (Label id : known) {
    if (unknown.count(id)) throw Error("split: class " + std::to_string(id) + " is both known and unknown");
  }
  const auto present = ds.class_ids();
  for (const auto* ids : {&known, &unknown}) {
    for (Label id : *ids) {
      if (!std::binary_search(present.begin(), present.end(), id)) {
        throw Error("split: class " + std::to_string(id) + " does not appear in the dataset");
      }
    }
  }
  std::vector<std::size_t> known_rows;
  std::vector<std::size_t> unknown_rows;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (known.count(ds.label(i))) known_rows.push_back(i);
    else if (unknown.count(ds.label(i))) unknown_rows.push_back(i);
  }
  return {ds.subset(known_rows), ds.subset(unknown_rows)};
}

std::vector<std::vector<std::size_t>> stratified_fold_indices(const LabeledDataset& ds,
                                                              std::size_t k, std::uint64_t seed) {
  if (k < 2) throw Error("fold count must be at least 2");
  std::mt19937_64 rng(seed);
  std::vector<std::vector<std::size_t>> folds(k);
  for (Label id : ds.class_ids()) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (ds.label(i) == id) rows.push_back(i);
    }
    if (rows.size() < k) {
      throw Error("class " + std::to_string(id) + " has " + std::to_string(rows.size()) +
                  " samples, fewer than the fold count " + std::to_string(k));
    }
    std::shuffle(rows.begin(), rows.end(), rng);
    for (std::size_t r = 0; r < rows.size(); ++r) folds[r % k].push_back(rows[r]);
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

std::vector<Fold> make_folds(const LabeledDataset& ds, std::size_t k, std::uint64_t seed) {
  const auto validation = stratified_fold_indices(ds, k, seed);
  std::vector<Fold> folds;
  folds.reserve(k);
  for (std::size_t f = 0; f < k; ++f) {
    std::vector<std::size_t> train;
    for (std::size_t g = 0; g < k; ++g) {
      if (g != f) train.insert(train.end(), validation[g].begin(), validation[g].end());
    }
    std::sort(train.begin(), train.end());
    folds.push_back({ds.subset(train), ds.subset(validation[f])});
  }
  return folds;
}

namespace {

void check_synthetic(const SyntheticConfig& cfg) {
  if (cfg.classes < 1 || cfg.dim < 1 || cfg.per_class < 1) {
    throw Error("synthetic: classes, dim and per_class must be positive");
  }
  if (!(cfg.separation > 0.0) || !(cfg.spread > 0.0)) {
    throw Error("synthetic: separation and spread must be positive");
  }
}

Matrix draw_centers(const SyntheticConfig& cfg, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix centers(cfg.classes, cfg.dim);
  for (std::size_t c = 0; c < cfg.classes; ++c) {
    auto row = centers.row(c);
    double norm2 = 0.0;
    while (norm2 == 0.0) {
      for (double& v : row) v = normal(rng);
      norm2 = std::inner_product(row.begin(), row.end(), row.begin(), 0.0);
    }
    const double scale = cfg.separation / std::sqrt(norm2);
    for (double& v : row) v *= scale;
  }
  return centers;
}

}  // namespace

Matrix synthetic_centers(const SyntheticConfig& cfg) {
  check_synthetic(cfg);
  std::mt19937_64 rng(cfg.seed);
  return draw_centers(cfg, rng);
}

LabeledDataset gen_synthetic(const SyntheticConfig& cfg) {
  check_synthetic(cfg);
  std::mt19937_64 rng(cfg.seed);
  const Matrix centers = draw_centers(cfg, rng);
  std::normal_distribution<double> normal(0.0, cfg.spread);
  const std::size_t n = cfg.classes * cfg.per_class;
  Matrix features(n, cfg.dim);
  std::vector<Label> labels(n);
  for (std::size_t c = 0; c < cfg.classes; ++c) {
    for (std::size_t s = 0; s < cfg.per_class; ++s) {
      const std::size_t i = c * cfg.per_class + s;
      labels[i] = static_cast<Label>(c + 1);
      auto row = features.row(i);
      for (std::size_t j = 0; j < cfg.dim; ++j) row[j] = centers(c, j) + normal(rng);
    }
  }
  return LabeledDataset(std::move(features), std::move(labels));
}

}  // namespace data
}  // namespace owr
