#include "owr/protocol.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "owr/error.hpp"
#include "owr/ncm.hpp"
#include "owr/nno.hpp"

namespace owr::protocol {

bool StageResult::same_metrics(const StageResult& o) const {
  return known_classes == o.known_classes && cs_ncm_top1 == o.cs_ncm_top1 &&
         os_ncm_top1 == o.os_ncm_top1 && cs_nno_top1 == o.cs_nno_top1 &&
         os_nno_top1 == o.os_nno_top1 && os_ncm_sth_top1 == o.os_ncm_sth_top1 && eps_k == o.eps_k &&
         eps_ow == o.eps_ow;
}

double top1_accuracy(std::span<const Label> predictions, std::span<const Label> truth) {
  if (predictions.size() != truth.size()) throw Error("top-1: predictions and truth differ in length");
  if (truth.empty()) throw Error("top-1: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predictions[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double multiclass_error(std::span<const Label> predictions, std::span<const Label> truth) {
  if (predictions.size() != truth.size()) throw Error("multi-class error: length mismatch");
  if (truth.empty()) throw Error("multi-class error: empty input");
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == kUnknownLabel) throw Error("multi-class error: truth contains the unknown label 0");
    wrong += predictions[i] != truth[i];
  }
  return static_cast<double>(wrong) / static_cast<double>(truth.size());
}

double open_world_error(std::span<const Label> known_predictions, std::span<const Label> known_truth,
                        std::span<const Label> unknown_predictions) {
  const double eps_k = multiclass_error(known_predictions, known_truth);
  if (unknown_predictions.empty()) return eps_k;
  const auto accepted = std::count_if(unknown_predictions.begin(), unknown_predictions.end(),
                                      [](Label l) { return l != kUnknownLabel; });
  return eps_k + static_cast<double>(accepted) / static_cast<double>(unknown_predictions.size());
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Independent seeds for the protocol's random streams.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void check_config(const ProtocolConfig& cfg, std::size_t available) {
  if (cfg.initial_known < 2) throw Error("protocol: initial_known must be at least 2");
  if (cfg.stage_count > 0 && cfg.increment_size == 0) throw Error("protocol: increment_size must be positive");
  if (cfg.fold_count < 2) throw Error("protocol: fold_count must be at least 2");
  if (cfg.m == 0) throw Error("protocol: m must be positive");
  if (!(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0)) {
    throw Error("protocol: test_fraction must lie in (0, 1)");
  }
  const std::size_t needed = cfg.initial_known + cfg.increment_size * cfg.stage_count + cfg.unknown_count;
  if (needed > available) {
    throw Error("protocol: class budget " + std::to_string(cfg.initial_known) + " initial + " +
                std::to_string(cfg.stage_count) + "x" + std::to_string(cfg.increment_size) +
                " incremental + " + std::to_string(cfg.unknown_count) + " unknown = " +
                std::to_string(needed) + " exceeds the " + std::to_string(available) +
                " classes in the dataset");
  }
}

struct ClassRows {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

std::vector<std::size_t> gather(const std::map<Label, ClassRows>& rows, std::span<const Label> classes,
                                bool test) {
  std::vector<std::size_t> out;
  for (Label c : classes) {
    const auto& r = rows.at(c);
    const auto& src = test ? r.test : r.train;
    out.insert(out.end(), src.begin(), src.end());
  }
  return out;
}

std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

std::string join(std::span<const Label> ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(ids[i]);
  }
  return out;
}

}  // namespace

EvalReport run_open_world_protocol(const LabeledDataset& ds, const ProtocolConfig& cfg) {
  const auto all_classes = ds.class_ids();
  check_config(cfg, all_classes.size());
  if (cfg.m > ds.dim()) throw Error("protocol: m exceeds the feature dimension");

  EvalReport report;
  report.config = cfg;

  std::mt19937_64 class_rng(derive_seed(cfg.seed, 0));
  std::vector<Label> shuffled = all_classes;
  std::shuffle(shuffled.begin(), shuffled.end(), class_rng);
  auto take = [&, pos = std::size_t{0}](std::size_t count) mutable {
    std::vector<Label> out(shuffled.begin() + static_cast<std::ptrdiff_t>(pos),
                           shuffled.begin() + static_cast<std::ptrdiff_t>(pos + count));
    pos += count;
    return out;
  };
  report.initial_classes = take(cfg.initial_known);
  std::sort(report.initial_classes.begin(), report.initial_classes.end());
  report.incremental_classes = take(cfg.increment_size * cfg.stage_count);
  report.unknown_classes = take(cfg.unknown_count);
  std::sort(report.unknown_classes.begin(), report.unknown_classes.end());

  // Per-class train/test split over the classes this run uses.
  std::map<Label, ClassRows> rows;
  {
    std::vector<Label> used = report.initial_classes;
    used.insert(used.end(), report.incremental_classes.begin(), report.incremental_classes.end());
    used.insert(used.end(), report.unknown_classes.begin(), report.unknown_classes.end());
    std::sort(used.begin(), used.end());
    std::map<Label, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < ds.size(); ++i) by_class[ds.label(i)].push_back(i);
    std::mt19937_64 row_rng(derive_seed(cfg.seed, 1));
    for (Label c : used) {
      auto members = by_class.at(c);
      std::shuffle(members.begin(), members.end(), row_rng);
      const auto n = members.size();
      const auto n_test = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(cfg.test_fraction * n)));
      if (n_test >= n) {
        throw Error("protocol: class " + std::to_string(c) + " has too few rows for a train/test split");
      }
      ClassRows cr;
      cr.test.assign(members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_test));
      cr.train.assign(members.begin() + static_cast<std::ptrdiff_t>(n_test), members.end());
      std::sort(cr.test.begin(), cr.test.end());
      std::sort(cr.train.begin(), cr.train.end());
      rows.emplace(c, std::move(cr));
    }
  }

  // Whitening statistics come from the initial training rows only.
  const auto initial_train_rows = gather(rows, report.initial_classes, false);
  const auto stats = data::compute_whitening(ds.subset(initial_train_rows));
  const LabeledDataset white = data::apply_whitening(stats, ds);
  const LabeledDataset initial_train = white.subset(initial_train_rows);

  auto t0 = Clock::now();
  metric::SgdConfig sgd = cfg.sgd;
  sgd.seed = derive_seed(cfg.seed, 2);
  const MetricModel metric = metric::train_metric(initial_train, cfg.m, sgd);
  report.metric_learning_seconds = seconds_since(t0);

  // Thresholds: initial classes split again into pseudo-known and
  // pseudo-unknown, using training rows only.
  t0 = Clock::now();
  {
    std::vector<Label> pseudo = report.initial_classes;
    std::mt19937_64 split_rng(derive_seed(cfg.seed, 3));
    std::shuffle(pseudo.begin(), pseudo.end(), split_rng);
    const std::size_t n_unknown = (pseudo.size() + 2) / 3;
    std::vector<Label> pseudo_unknown(pseudo.begin(), pseudo.begin() + static_cast<std::ptrdiff_t>(n_unknown));
    std::vector<Label> pseudo_known(pseudo.begin() + static_cast<std::ptrdiff_t>(n_unknown), pseudo.end());
    const auto split = data::split_known_unknown(
        initial_train, {pseudo_known, pseudo_unknown, cfg.fold_count, derive_seed(cfg.seed, 4)});

    nno::TauSearchConfig tau_cfg;
    tau_cfg.grid = cfg.tau_grid ? *cfg.tau_grid
                                : nno::default_tau_grid(split.known, split.unknown, metric, cfg.tau_grid_size);
    tau_cfg.fold_count = cfg.fold_count;
    tau_cfg.seed = derive_seed(cfg.seed, 5);
    report.tau = nno::estimate_tau(split.known, split.unknown, metric, tau_cfg);

    nno::ThetaSearchConfig theta_cfg{nno::default_theta_grid(), cfg.fold_count, derive_seed(cfg.seed, 6)};
    report.theta = nno::estimate_theta(split.known, split.unknown, metric, theta_cfg);
  }
  report.threshold_seconds = seconds_since(t0);
  report.rows.threshold_rows = initial_train_rows;

  nno::NnoModel model(ncm::NcmModel(metric, ncm::class_means(initial_train)), report.tau);

  const auto unknown_rows = gather(rows, report.unknown_classes, true);
  const LabeledDataset* unknown_test = nullptr;
  std::optional<LabeledDataset> unknown_storage;
  if (!unknown_rows.empty()) {
    unknown_storage.emplace(white.subset(unknown_rows));
    unknown_test = &*unknown_storage;
  }

  report.rows.train_rows = initial_train_rows;
  std::vector<Label> known = report.initial_classes;
  std::size_t next_increment = 0;
  for (std::size_t stage = 0; stage <= cfg.stage_count; ++stage) {
    const auto stage_start = Clock::now();
    if (stage > 0) {
      for (std::size_t k = 0; k < cfg.increment_size; ++k) {
        const Label c = report.incremental_classes[next_increment++];
        const auto& train = rows.at(c).train;
        model = model.increment_learn(white.subset(train));
        report.rows.train_rows.insert(report.rows.train_rows.end(), train.begin(), train.end());
        known.insert(std::upper_bound(known.begin(), known.end(), c), c);
      }
    }

    const auto known_rows = gather(rows, known, true);
    const LabeledDataset known_test = white.subset(known_rows);
    const auto& ncm_model = model.ncm();
    std::vector<Label> truth(known_test.labels().begin(), known_test.labels().end());
    std::vector<Label> ncm_known(known_test.size()), nno_known(known_test.size()), sth_known(known_test.size());
    for (std::size_t i = 0; i < known_test.size(); ++i) {
      ncm_known[i] = ncm_model.predict_closed(known_test.row(i));
      nno_known[i] = model.recognize(known_test.row(i));
      sth_known[i] = ncm_model.predict_softmax_threshold(known_test.row(i), report.theta);
    }
    std::vector<Label> ncm_open = ncm_known, nno_open = nno_known, sth_open = sth_known;
    std::vector<Label> open_truth = truth;
    std::vector<Label> nno_unknown;
    if (unknown_test) {
      for (std::size_t i = 0; i < unknown_test->size(); ++i) {
        const auto x = unknown_test->row(i);
        ncm_open.push_back(ncm_model.predict_closed(x));
        nno_unknown.push_back(model.recognize(x));
        sth_open.push_back(ncm_model.predict_softmax_threshold(x, report.theta));
        open_truth.push_back(kUnknownLabel);
      }
      nno_open.insert(nno_open.end(), nno_unknown.begin(), nno_unknown.end());
    }

    StageResult r;
    r.known_classes = known.size();
    r.cs_ncm_top1 = top1_accuracy(ncm_known, truth);
    r.os_ncm_top1 = top1_accuracy(ncm_open, open_truth);
    r.cs_nno_top1 = top1_accuracy(nno_known, truth);
    r.os_nno_top1 = top1_accuracy(nno_open, open_truth);
    r.os_ncm_sth_top1 = top1_accuracy(sth_open, open_truth);
    r.eps_k = multiclass_error(nno_known, truth);
    r.eps_ow = open_world_error(nno_known, truth, nno_unknown);
    r.seconds = seconds_since(stage_start);
    report.stages.push_back(r);

    report.rows.test_rows.insert(report.rows.test_rows.end(), known_rows.begin(), known_rows.end());
  }
  report.rows.test_rows.insert(report.rows.test_rows.end(), unknown_rows.begin(), unknown_rows.end());
  std::sort(report.rows.test_rows.begin(), report.rows.test_rows.end());
  report.rows.test_rows.erase(std::unique(report.rows.test_rows.begin(), report.rows.test_rows.end()),
                              report.rows.test_rows.end());
  std::sort(report.rows.train_rows.begin(), report.rows.train_rows.end());
  return report;
}

void emit_report(const EvalReport& report, const std::filesystem::path& dir) {
  if (report.stages.empty()) throw Error("report: no stages to write");
  if (report.stages.size() != report.config.stage_count + 1) {
    throw Error("report: expected " + std::to_string(report.config.stage_count + 1) + " stages, got " +
                std::to_string(report.stages.size()));
  }
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("report: cannot create " + dir.string() + ": " + ec.message());

  {
    std::ofstream out(dir / "stages.csv");
    if (!out) throw Error("report: cannot write " + (dir / "stages.csv").string());
    out << kStagesHeader << '\n';
    for (const auto& s : report.stages) {
      out << s.known_classes;
      for (double v : {s.cs_ncm_top1, s.os_ncm_top1, s.cs_nno_top1, s.os_nno_top1, s.os_ncm_sth_top1,
                       s.eps_k, s.eps_ow}) {
        out << ',' << format_double(v);
      }
      out << '\n';
    }
    if (!out) throw Error("report: write failed for stages.csv");
  }

  std::ofstream out(dir / "config.txt");
  if (!out) throw Error("report: cannot write " + (dir / "config.txt").string());
  const auto& c = report.config;
  out << "initial_known=" << c.initial_known << '\n'
      << "increment_size=" << c.increment_size << '\n'
      << "stage_count=" << c.stage_count << '\n'
      << "unknown_count=" << c.unknown_count << '\n'
      << "fold_count=" << c.fold_count << '\n'
      << "seed=" << c.seed << '\n'
      << "m=" << c.m << '\n'
      << "test_fraction=" << format_double(c.test_fraction) << '\n'
      << "sgd.learning_rate=" << format_double(c.sgd.learning_rate) << '\n'
      << "sgd.iterations=" << c.sgd.iterations << '\n'
      << "sgd.batch_size=" << c.sgd.batch_size << '\n'
      << "sgd.init_scale=" << format_double(c.sgd.init_scale) << '\n'
      << "tau_grid=" << (c.tau_grid ? "explicit" : "auto") << '\n'
      << "tau_grid_size=" << (c.tau_grid ? c.tau_grid->size() : c.tau_grid_size) << '\n'
      << "initial_classes=" << join(report.initial_classes) << '\n'
      << "incremental_classes=" << join(report.incremental_classes) << '\n'
      << "unknown_classes=" << join(report.unknown_classes) << '\n'
      << "tau=" << format_double(report.tau) << '\n'
      << "theta=" << format_double(report.theta) << '\n'
      << "time.metric_learning_s=" << report.metric_learning_seconds << '\n'
      << "time.threshold_estimation_s=" << report.threshold_seconds << '\n';
  for (std::size_t i = 0; i < report.stages.size(); ++i) {
    out << "time.stage" << i << "_s=" << report.stages[i].seconds << '\n';
  }
  if (!out) throw Error("report: write failed for config.txt");
}

std::vector<StageResult> read_stages_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kStagesHeader) throw FormatError("stages.csv: unexpected header");
  std::vector<StageResult> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 8) throw FormatError("stages.csv: expected 8 columns");
    StageResult r;
    r.known_classes = std::stoul(fields[0]);
    double* targets[] = {&r.cs_ncm_top1, &r.os_ncm_top1, &r.cs_nno_top1, &r.os_nno_top1,
                         &r.os_ncm_sth_top1, &r.eps_k, &r.eps_ow};
    for (std::size_t i = 0; i < 7; ++i) {
      const auto& f = fields[i + 1];
      auto [end, ec] = std::from_chars(f.data(), f.data() + f.size(), *targets[i]);
      if (ec != std::errc() || end != f.data() + f.size()) throw FormatError("stages.csv: bad number '" + f + "'");
    }
    out.push_back(r);
  }
  return out;
}

}  // namespace owr::protocol
