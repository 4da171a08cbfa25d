#include "owr/model_io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <string>

#include "owr/binary_io.hpp"
#include "owr/error.hpp"

namespace owr::io {
namespace {

constexpr std::string_view kMetricMagic = "OWRW";

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > std::numeric_limits<std::uint32_t>::max()) throw Error(std::string(what) + " too large to serialize");
  return static_cast<std::uint32_t>(v);
}

void expect_eof(std::istream& in, const std::filesystem::path& path) {
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError(path.string() + ": trailing bytes after model");
  }
}

}  // namespace

void write_metric(std::ostream& out, const MetricModel& model) {
  write_magic(out, kMetricMagic);
  write_u32(out, checked_u32(model.projected_dim(), "m"));
  write_u32(out, checked_u32(model.input_dim(), "d"));
  for (double v : model.weights().data()) write_f64(out, v);
}

MetricModel read_metric(std::istream& in) {
  expect_magic(in, kMetricMagic, "metric model");
  const std::uint32_t m = read_u32(in, "metric m");
  const std::uint32_t d = read_u32(in, "metric d");
  if (m == 0 || d == 0 || m > d) throw FormatError("metric model: invalid shape");
  Matrix w(m, d);
  for (double& v : w.data()) v = read_f64(in, "metric weights");
  return MetricModel(std::move(w));
}

void write_ncm(std::ostream& out, const ncm::NcmModel& model) {
  write_metric(out, model.metric());
  write_u32(out, checked_u32(model.num_classes(), "class count"));
  for (Label id : model.class_ids()) write_u32(out, id);
  for (double v : model.means().data()) write_f64(out, v);
}

ncm::NcmModel read_ncm(std::istream& in) {
  MetricModel metric = read_metric(in);
  const std::uint32_t k = read_u32(in, "class count");
  if (k == 0) throw FormatError("ncm model: no classes");
  ClassMeans means;
  means.ids.resize(k);
  for (auto& id : means.ids) id = read_u32(in, "class ids");
  means.means = Matrix(k, metric.input_dim());
  for (double& v : means.means.data()) v = read_f64(in, "class means");
  return ncm::NcmModel(std::move(metric), std::move(means));
}

void write_nno(std::ostream& out, const nno::NnoModel& model) {
  write_ncm(out, model.ncm());
  write_f64(out, model.tau());
}

nno::NnoModel read_nno(std::istream& in) {
  ncm::NcmModel ncm = read_ncm(in);
  const double tau = read_f64(in, "tau");
  nno::NnoModel model(std::move(ncm), tau);
  const double expected = nno::ball_normalizer(model.ncm().projected_dim(), tau);
  if (std::abs(model.norm_const() - expected) > 1e-12 * expected) {
    throw FormatError("nno model: normalizing constant does not match its formula");
  }
  return model;
}

void save_metric(const MetricModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_metric(out, model);
}

MetricModel load_metric(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  auto model = read_metric(in);
  expect_eof(in, path);
  return model;
}

void save_nno(const nno::NnoModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_nno(out, model);
}

nno::NnoModel load_nno(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  auto model = read_nno(in);
  expect_eof(in, path);
  return model;
}

}  // namespace owr::io
