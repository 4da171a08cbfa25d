#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "owr/dataset.hpp"
#include "owr/metric.hpp"

namespace owr::protocol {

struct ProtocolConfig {
  std::size_t initial_known = 5;
  std::size_t increment_size = 5;
  std::size_t stage_count = 3;
  std::size_t unknown_count = 10;
  std::size_t fold_count = 3;
  std::uint64_t seed = 0;
  metric::SgdConfig sgd;
  std::size_t m = 8;
  /// Explicit tau candidates; the data-driven default grid when unset.
  std::optional<std::vector<double>> tau_grid;
  std::size_t tau_grid_size = 40;
  /// Fraction of each class's rows held out for testing.
  double test_fraction = 0.2;
};

struct StageResult {
  std::size_t known_classes = 0;
  double cs_ncm_top1 = 0;
  double os_ncm_top1 = 0;
  double cs_nno_top1 = 0;
  double os_nno_top1 = 0;
  double os_ncm_sth_top1 = 0;
  double eps_k = 0;   // NNO multi-class error on known test rows
  double eps_ow = 0;  // NNO open-world error
  double seconds = 0;

  /// Metric columns only; timing is excluded.
  bool same_metrics(const StageResult& other) const;
};

/// Row-level bookkeeping (indices into the input dataset).
struct RowAccounting {
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> threshold_rows;  // rows used to pick tau and theta
  std::vector<std::size_t> test_rows;
};

struct EvalReport {
  ProtocolConfig config;
  std::vector<Label> initial_classes;
  std::vector<Label> incremental_classes;
  std::vector<Label> unknown_classes;
  double tau = 0;
  double theta = 0;
  std::vector<StageResult> stages;
  RowAccounting rows;
  double metric_learning_seconds = 0;
  double threshold_seconds = 0;
};

/// Fraction of exact matches (0 matches 0).
double top1_accuracy(std::span<const Label> predictions, std::span<const Label> truth);

/// Fraction of mismatches; truth must not contain 0.
double multiclass_error(std::span<const Label> predictions, std::span<const Label> truth);

/// multiclass_error on known samples plus the fraction of unknown-category
/// samples not predicted 0 (zero when there are none).
double open_world_error(std::span<const Label> known_predictions, std::span<const Label> known_truth,
                        std::span<const Label> unknown_predictions);

/// Runs metric learning, threshold estimation and the incremental stages.
EvalReport run_open_world_protocol(const LabeledDataset& ds, const ProtocolConfig& cfg);

inline constexpr const char* kStagesHeader =
    "known_classes,cs_ncm,os_ncm,cs_nno,os_nno,os_ncm_sth,eps_k,eps_ow";

/// Writes <dir>/stages.csv and <dir>/config.txt.
void emit_report(const EvalReport& report, const std::filesystem::path& dir);

/// Parses a stages.csv written by emit_report.
std::vector<StageResult> read_stages_csv(const std::filesystem::path& path);

}  // namespace owr::protocol
