#pragma once

#include <filesystem>
#include <iosfwd>

#include "owr/metric.hpp"
#include "owr/ncm.hpp"
#include "owr/nno.hpp"

namespace owr::io {

// Little-endian layouts, each nesting the previous one:
//   metric: "OWRW" u32 m, u32 d, m*d f64 (row-major W)
//   ncm:    metric block, u32 K, K u32 class ids, K*d f64 means
//   nno:    ncm block, f64 tau

void write_metric(std::ostream& out, const MetricModel& model);
MetricModel read_metric(std::istream& in);

void write_ncm(std::ostream& out, const ncm::NcmModel& model);
ncm::NcmModel read_ncm(std::istream& in);

void write_nno(std::ostream& out, const nno::NnoModel& model);
/// The normalizing constant is recomputed and checked on load.
nno::NnoModel read_nno(std::istream& in);

void save_metric(const MetricModel& model, const std::filesystem::path& path);
MetricModel load_metric(const std::filesystem::path& path);
void save_nno(const nno::NnoModel& model, const std::filesystem::path& path);
nno::NnoModel load_nno(const std::filesystem::path& path);

}  // namespace owr::io
