#include "owr/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>

#include "owr/dataset.hpp"
#include "owr/error.hpp"
#include "owr/metric.hpp"
#include "owr/model_io.hpp"
#include "owr/ncm.hpp"
#include "owr/nno.hpp"
#include "owr/protocol.hpp"
#include "owr/risk.hpp"

namespace owr::cli {
namespace {

constexpr int kOk = 0;
constexpr int kDomainError = 1;
constexpr int kUsageError = 2;

data::FileFormat resolve_format(const std::string& flag, const std::string& path) {
  if (flag == "csv") return data::FileFormat::kCsv;
  if (flag == "binary") return data::FileFormat::kBinary;
  return data::format_from_path(path);
}

const std::map<std::string, std::string> kFormats{{"auto", "auto"}, {"csv", "csv"}, {"binary", "binary"}};

struct Options {
  // shared
  std::string data, out, format = "auto", model, metric;
  std::uint64_t seed = 0;
  // gen-synth
  std::size_t classes = 0, dim = 0, per_class = 0;
  double separation = 0, spread = 0;
  // whiten
  std::string stats_from, stats_out;
  // train-metric / eval
  std::size_t m = 8;
  metric::SgdConfig sgd;
  // estimate-tau
  std::string known, unknown;
  std::size_t folds = 3, grid_size = 40;
  std::vector<double> grid;
  // eval
  std::size_t initial = 0, increment = 0, stages = 0, unknown_count = 0;
  double test_fraction = 0.2;
  // risk-audit
  std::size_t samples = 1'000'000;
};

void add_sgd_flags(CLI::App* sub, Options& o) {
  sub->add_option("--lr", o.sgd.learning_rate, "SGD learning rate")->capture_default_str();
  sub->add_option("--iterations", o.sgd.iterations, "SGD iterations")->capture_default_str();
  sub->add_option("--batch-size", o.sgd.batch_size, "SGD mini-batch size")->capture_default_str();
  sub->add_option("--init-scale", o.sgd.init_scale, "std of the Gaussian W initialisation")
      ->capture_default_str();
}

void cmd_gen_synth(const Options& o, std::ostream& out) {
  const auto ds = data::gen_synthetic({o.classes, o.dim, o.per_class, o.separation, o.spread, o.seed});
  data::save_features(ds, o.out, resolve_format(o.format, o.out));
  out << "wrote " << ds.size() << " rows (" << o.classes << " classes, d=" << o.dim << ") to " << o.out << '\n';
}

void cmd_whiten(const Options& o, std::ostream& out) {
  const auto ds = data::load_features(o.data, resolve_format(o.format, o.data));
  const auto stats = data::compute_whitening(
      o.stats_from.empty() ? ds : data::load_features(o.stats_from, data::format_from_path(o.stats_from)));
  data::save_features(data::apply_whitening(stats, ds), o.out, resolve_format(o.format, o.out));
  if (!o.stats_out.empty()) {
    std::ofstream s(o.stats_out);
    if (!s) throw Error("cannot write " + o.stats_out);
    s.precision(17);
    s << "mean,std\n";
    for (std::size_t j = 0; j < stats.mean.size(); ++j) s << stats.mean[j] << ',' << stats.std[j] << '\n';
  }
  out << "whitened " << ds.size() << " rows to " << o.out << '\n';
}

void cmd_train_metric(const Options& o, std::ostream& out) {
  const auto ds = data::load_features(o.data, resolve_format(o.format, o.data));
  auto cfg = o.sgd;
  cfg.seed = o.seed;
  metric::TrainTrace trace;
  const auto model = metric::train_metric(ds, o.m, cfg, &trace);
  io::save_metric(model, o.out);
  out << "monitor loss " << trace.initial_monitor_loss << " -> " << trace.final_monitor_loss << '\n';
  out << "wrote metric (m=" << model.projected_dim() << ", d=" << model.input_dim() << ") to " << o.out << '\n';
}

void cmd_estimate_tau(const Options& o, std::ostream& out) {
  const auto known = data::load_features(o.known, data::format_from_path(o.known));
  const auto unknown = data::load_features(o.unknown, data::format_from_path(o.unknown));
  const auto metric = io::load_metric(o.metric);
  nno::TauSearchConfig cfg;
  cfg.grid = o.grid.empty() ? nno::default_tau_grid(known, unknown, metric, o.grid_size) : o.grid;
  cfg.fold_count = o.folds;
  cfg.seed = o.seed;
  const double tau = nno::estimate_tau(known, unknown, metric, cfg);
  out.precision(17);
  out << tau << '\n';
  if (!o.out.empty()) {
    io::save_nno(nno::NnoModel(ncm::NcmModel(metric, ncm::class_means(known)), tau), o.out);
  }
}

void cmd_add_classes(const Options& o, std::ostream& out) {
  auto model = io::load_nno(o.model);
  const auto ds = data::load_features(o.data, resolve_format(o.format, o.data));
  for (Label id : ds.class_ids()) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (ds.label(i) == id) rows.push_back(i);
    }
    model = model.increment_learn(ds.subset(rows));
    out << "added class " << id << " (" << rows.size() << " rows)\n";
  }
  io::save_nno(model, o.out);
}

void cmd_recognize(const Options& o, std::ostream& out) {
  const auto model = io::load_nno(o.model);
  const auto ds = data::load_features(o.data, resolve_format(o.format, o.data));
  for (std::size_t i = 0; i < ds.size(); ++i) out << model.recognize(ds.row(i)) << '\n';
}

void cmd_eval(const Options& o, std::ostream& out) {
  const auto ds = data::load_features(o.data, resolve_format(o.format, o.data));
  protocol::ProtocolConfig cfg;
  cfg.initial_known = o.initial;
  cfg.increment_size = o.increment;
  cfg.stage_count = o.stages;
  cfg.unknown_count = o.unknown_count;
  cfg.fold_count = o.folds;
  cfg.seed = o.seed;
  cfg.sgd = o.sgd;
  cfg.m = o.m;
  cfg.test_fraction = o.test_fraction;
  cfg.tau_grid_size = o.grid_size;
  if (!o.grid.empty()) cfg.tau_grid = o.grid;
  const auto report = protocol::run_open_world_protocol(ds, cfg);
  protocol::emit_report(report, o.out);
  out << protocol::kStagesHeader << '\n';
  for (const auto& s : report.stages) {
    out << s.known_classes << ',' << s.cs_ncm_top1 << ',' << s.os_ncm_top1 << ',' << s.cs_nno_top1 << ','
        << s.os_nno_top1 << ',' << s.os_ncm_sth_top1 << ',' << s.eps_k << ',' << s.eps_ow << '\n';
  }
  out << "tau=" << report.tau << " theta=" << report.theta << "; report written to " << o.out << '\n';
}

void cmd_risk_audit(const Options& o, std::ostream& out) {
  const auto rows = risk::standard_audits(o.samples, o.seed);
  if (o.out.empty()) {
    risk::write_audit_csv(rows, out);
    return;
  }
  std::ofstream f(o.out);
  if (!f) throw Error("cannot write " + o.out);
  risk::write_audit_csv(rows, f);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Open-world recognition with Nearest Non-Outlier classifiers", "owr"};
  app.require_subcommand(1);
  Options o;

  auto* gen = app.add_subcommand("gen-synth", "Generate a synthetic Gaussian-blob dataset");
  gen->add_option("--classes", o.classes, "number of classes")->required();
  gen->add_option("--dim", o.dim, "feature dimension")->required();
  gen->add_option("--per-class", o.per_class, "samples per class")->required();
  gen->add_option("--separation", o.separation, "radius of the sphere holding class centres")->required();
  gen->add_option("--spread", o.spread, "per-coordinate standard deviation")->required();
  gen->add_option("--seed", o.seed, "random seed")->required();
  gen->add_option("--out", o.out, "output dataset")->required();
  gen->add_option("--format", o.format, "auto|csv|binary")->transform(CLI::IsMember(kFormats));

  auto* whiten = app.add_subcommand("whiten", "Standardise features by column mean and std");
  whiten->add_option("--data", o.data, "input dataset")->required();
  whiten->add_option("--out", o.out, "output dataset")->required();
  whiten->add_option("--stats-from", o.stats_from, "dataset to take statistics from (default: --data)");
  whiten->add_option("--stats-out", o.stats_out, "write mean,std per column as CSV");
  whiten->add_option("--format", o.format, "auto|csv|binary")->transform(CLI::IsMember(kFormats));

  auto* train = app.add_subcommand("train-metric", "Learn the NCM projection by SGD");
  train->add_option("--data", o.data, "training dataset")->required();
  train->add_option("--m", o.m, "projected dimension")->required();
  train->add_option("--seed", o.seed, "random seed")->required();
  train->add_option("--out", o.out, "output metric model")->required();
  train->add_option("--format", o.format, "auto|csv|binary")->transform(CLI::IsMember(kFormats));
  add_sgd_flags(train, o);

  auto* tau = app.add_subcommand("estimate-tau", "Pick the NNO rejection radius by cross-validated F1");
  tau->add_option("--known", o.known, "rows of known classes")->required();
  tau->add_option("--unknown", o.unknown, "rows of classes treated as unknown")->required();
  tau->add_option("--metric", o.metric, "metric model")->required();
  tau->add_option("--seed", o.seed, "random seed")->required();
  tau->add_option("--folds", o.folds, "stratified folds")->capture_default_str();
  tau->add_option("--grid-size", o.grid_size, "points in the automatic tau grid")->capture_default_str();
  tau->add_option("--grid", o.grid, "explicit tau candidates (overrides --grid-size)");
  tau->add_option("--out", o.out, "write an NNO model built from the known means");

  auto* add = app.add_subcommand("add-classes", "Append class means to an NNO model");
  add->add_option("--model", o.model, "input NNO model")->required();
  add->add_option("--data", o.data, "rows of the new classes")->required();
  add->add_option("--out", o.out, "output NNO model")->required();
  add->add_option("--format", o.format, "auto|csv|binary")->transform(CLI::IsMember(kFormats));

  auto* rec = app.add_subcommand("recognize", "Print one label per row (0 = unknown)");
  rec->add_option("--model", o.model, "NNO model")->required();
  rec->add_option("--data", o.data, "feature rows")->required();
  rec->add_option("--format", o.format, "auto|csv|binary")->transform(CLI::IsMember(kFormats));

  auto* eval = app.add_subcommand("eval", "Run the open-world evaluation protocol");
  eval->add_option("--data", o.data, "full dataset")->required();
  eval->add_option("--initial", o.initial, "classes in the metric-learning phase")->required();
  eval->add_option("--increment", o.increment, "classes added per stage")->required();
  eval->add_option("--stages", o.stages, "incremental stages")->required();
  eval->add_option("--unknown", o.unknown_count, "classes held out as unknown")->required();
  eval->add_option("--m", o.m, "projected dimension")->required();
  eval->add_option("--seed", o.seed, "random seed")->required();
  eval->add_option("--out", o.out, "report directory")->required();
  eval->add_option("--folds", o.folds, "folds for threshold estimation")->capture_default_str();
  eval->add_option("--grid-size", o.grid_size, "points in the automatic tau grid")->capture_default_str();
  eval->add_option("--grid", o.grid, "explicit tau candidates");
  eval->add_option("--test-fraction", o.test_fraction, "per-class test share")->capture_default_str();
  eval->add_option("--format", o.format, "auto|csv|binary")->transform(CLI::IsMember(kFormats));
  add_sgd_flags(eval, o);

  auto* audit = app.add_subcommand("risk-audit", "Monte Carlo open-space risk audits (CSV)");
  audit->add_option("--seed", o.seed, "random seed")->required();
  audit->add_option("--samples", o.samples, "Monte Carlo samples per audit")->capture_default_str();
  audit->add_option("--out", o.out, "CSV output (default: stdout)");

  try {
    std::vector<std::string> rest(args.begin() + (args.empty() ? 0 : 1), args.end());
    std::reverse(rest.begin(), rest.end());
    app.parse(rest);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code == static_cast<int>(CLI::ExitCodes::Success)) return kOk;
    err << app.help();
    return kUsageError;
  }

  try {
    if (*gen) cmd_gen_synth(o, out);
    else if (*whiten) cmd_whiten(o, out);
    else if (*train) cmd_train_metric(o, out);
    else if (*tau) cmd_estimate_tau(o, out);
    else if (*add) cmd_add_classes(o, out);
    else if (*rec) cmd_recognize(o, out);
    else if (*eval) cmd_eval(o, out);
    else if (*audit) cmd_risk_audit(o, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kDomainError;
  }
  return kOk;
}

}  // namespace owr::cli
