// Acceptance checks. Usage: owr_acceptance <path-to-owr-cli> <work-dir>
// Prints one PASS/FAIL line per criterion; exit status is the failure count.

#include <boost/math/constants/constants.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "owr/metric.hpp"
#include "owr/ncm.hpp"
#include "owr/nno.hpp"
#include "owr/protocol.hpp"
#include "owr/risk.hpp"
#include "support/oracles.hpp"

namespace fs = std::filesystem;
using namespace owr;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Outcome gradient_check() {
  const auto start = Clock::now();
  double worst = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(1000 + seed);
    const std::size_t k = 2 + rng() % 4;
    const std::size_t d = 2 + rng() % 7;
    const std::size_t m = 1 + rng() % std::min<std::size_t>(4, d);
    const std::size_t n = k + rng() % (33 - k);
    auto inst = testing::random_instance(1000 + seed, k, d, m, n);
    worst = std::max(worst, metric::finite_diff_check(inst.w, inst.batch, inst.means, 1e-5));
  }
  const double t = seconds_since(start);
  return {worst <= 1e-4 && t < 10.0, fmt("max relative error %.3e over 20 instances, %.2f s", worst, t)};
}

Outcome loss_oracle() {
  double loss_err = 0, prob_err = 0, sum_err = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(5000 + seed);
    const std::size_t k = 2 + rng() % 6;
    const std::size_t d = 2 + rng() % 8;
    const std::size_t m = 1 + rng() % d;
    auto inst = testing::random_instance(5000 + seed, k, d, m, k + rng() % 30);
    loss_err = std::max(loss_err, std::abs(metric::ncm_loss(inst.w, inst.batch, inst.means) -
                                           testing::loss(inst.w, inst.batch, inst.means)));
    const ncm::NcmModel model(MetricModel(inst.w), inst.means);
    for (std::size_t i = 0; i < inst.batch.size(); ++i) {
      const auto p = model.softmax_probs(inst.batch.row(i));
      const auto hp = testing::posterior(inst.w, inst.batch.row(i), inst.means);
      for (std::size_t c = 0; c < k; ++c) prob_err = std::max(prob_err, std::abs(p[c] - static_cast<double>(hp[c])));
      sum_err = std::max(sum_err, std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0));
    }
  }
  return {loss_err <= 1e-10 && prob_err <= 1e-10 && sum_err <= 1e-9,
          fmt("loss err %.2e, prob err %.2e, sum err %.2e over 100 instances", loss_err, prob_err, sum_err)};
}

Outcome cone_values() {
  using testing::HighPrec;
  double worst = 0;
  bool support_ok = true, monotone = true;
  std::mt19937_64 rng(77);
  std::normal_distribution<double> normal;
  for (std::size_t m : {1u, 2u, 3u, 8u}) {
    for (double tau : {0.5, 1.0, 3.0}) {
      ClassMeans cm{{1}, testing::random_matrix(1, m, rng)};
      const nno::NnoModel model(ncm::NcmModel(MetricModel(Matrix::identity(m)), cm), tau);
      const HighPrec half = HighPrec(m) / 2;
      const double expected = static_cast<double>(boost::math::tgamma(half + 1) /
                                                  (pow(boost::math::constants::pi<HighPrec>(), half) *
                                                   pow(HighPrec(tau), m)));
      worst = std::max(worst, std::abs(model.score(cm.means.row(0), 0) - expected) / expected);

      for (int ray = 0; ray < 100; ++ray) {
        std::vector<double> dir(m);
        double norm = 0;
        for (double& v : dir) {
          v = normal(rng);
          norm += v * v;
        }
        norm = std::sqrt(norm);
        double previous = INFINITY;
        for (int step = 0; step <= 60; ++step) {
          const double t = tau * step / 40.0;
          std::vector<double> x(m);
          for (std::size_t j = 0; j < m; ++j) x[j] = cm.means(0, j) + t * dir[j] / norm;
          const double s = model.score(x, 0);
          if (s > previous) monotone = false;
          const double dist = std::sqrt(model.ncm().dist_w(x, 0));
          if (dist >= tau && s != 0.0) support_ok = false;
          previous = s;
        }
      }
      // exactly at the boundary along a coordinate axis
      std::vector<double> edge(cm.means.row(0).begin(), cm.means.row(0).end());
      edge[0] += tau;
      if (std::abs(std::sqrt(model.ncm().dist_w(edge, 0)) - tau) == 0 && model.score(edge, 0) != 0.0) {
        support_ok = false;
      }
    }
  }
  return {worst <= 1e-12 && support_ok && monotone,
          fmt("max relative normalizer error %.2e, zero beyond tau: %s, monotone on rays: %s", worst,
              support_ok ? "yes" : "no", monotone ? "yes" : "no")};
}

Outcome incremental_equals_batch() {
  const auto ds = data::gen_synthetic({20, 12, 25, 10.0, 2.0, 31});
  const auto batch = ncm::class_means(ds);
  const MetricModel metric(testing::random_instance(4, 2, 12, 6, 2).w);
  std::vector<Label> order(20);
  std::iota(order.begin(), order.end(), 1);
  std::mt19937_64 rng(8);
  double worst = 0;
  bool ids_ok = true;
  for (int round = 0; round < 10; ++round) {
    std::shuffle(order.begin(), order.end(), rng);
    auto rows_of = [&](Label id) {
      std::vector<std::size_t> r;
      for (std::size_t i = 0; i < ds.size(); ++i) {
        if (ds.label(i) == id) r.push_back(i);
      }
      return ds.subset(r);
    };
    nno::NnoModel model(ncm::NcmModel(metric, ncm::class_means(rows_of(order[0]))), 1.0);
    for (std::size_t i = 1; i < order.size(); ++i) model = model.increment_learn(rows_of(order[i]));
    ids_ok = ids_ok && model.ncm().class_means().ids == batch.ids;
    for (std::size_t i = 0; i < batch.means.data().size(); ++i) {
      worst = std::max(worst, std::abs(model.ncm().means().data()[i] - batch.means.data()[i]));
    }
  }
  return {ids_ok && worst <= 1e-12, fmt("20 classes, 10 insertion orders, max mean deviation %.2e", worst)};
}

Outcome analytic_risk() {
  const auto start = Clock::now();
  const std::vector<double> origin{0.0, 0.0};
  const double tau = 1.0;
  risk::RiskProblem cone{risk::cone_score(origin, tau), Matrix(1, 2), tau / 2, 2.0, origin};
  const auto a = risk::estimate_open_space_risk(cone, 1'000'000, 11);
  const double t = seconds_since(start);
  const double r = 0.5, r_o = 1.0;
  risk::RiskProblem disk{[](std::span<const double>) { return 1.0; }, Matrix(1, 2), r, r_o, origin};
  const auto b = risk::estimate_open_space_risk(disk, 1'000'000, 12);
  const double disk_ref = 1 - (r / r_o) * (r / r_o);
  return {std::abs(a.risk - 0.5) <= 0.02 && t < 30.0 && std::abs(b.risk - disk_ref) <= 0.02,
          fmt("cone %.4f (ref 0.5, %.2f s), disk %.4f (ref %.4f)", a.risk, t, b.risk, disk_ref)};
}

Outcome combination_audit() {
  const std::vector<double> origin{0.0, 0.0};
  risk::RiskProblem p{nullptr, Matrix(3, 2, {-1.0, 0.0, 1.0, 0.0, 0.0, 1.5}), 0.5, 3.0, origin};
  std::vector<risk::CompactModel> models{{risk::cone_score({-1.0, 0.0}, 0.5), {-1.0, 0.0}, 0.5},
                                         {risk::cone_score({1.1, 0.0}, 0.3), {1.1, 0.0}, 0.3},
                                         {risk::cone_score({0.0, 1.3}, 0.25), {0.0, 1.3}, 0.25}};
  const auto good = risk::audit_combination_threshold(models, std::vector<double>{0.7, 0.4, 1.0}, p, 1'000'000, 21);
  risk::RiskProblem q{nullptr, Matrix(1, 2), 0.5, 2.0, origin};
  std::vector<risk::CompactModel> broken{{risk::cone_score(origin, 1.0), origin, 1.0}};
  const auto bad = risk::audit_combination_threshold(broken, std::vector<double>{1.0}, q, 1'000'000, 22,
                                                     risk::PreconditionCheck::kSkip);
  return {good.risk <= 3 * good.std_error && bad.risk > 0.1,
          fmt("inside balls %.2e (3 se %.2e), tau = 2r %.4f", good.risk, 3 * good.std_error, bad.risk)};
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

int shell(const std::string& cmd) {
  const int rc = std::system(cmd.c_str());
  return rc;
}

struct CurveRun {
  int rc = -1;
  double seconds = 0;
};

const char* kEvalArgs =
    " eval --initial 5 --increment 5 --stages 3 --unknown 10 --m 8 --seed 7";

CurveRun run_eval(const std::string& cli, const fs::path& data, const fs::path& out) {
  const auto start = Clock::now();
  const std::string cmd = "\"" + cli + "\"" + kEvalArgs + " --data \"" + data.string() + "\" --out \"" +
                          out.string() + "\" > \"" + (out.string() + ".log") + "\" 2>&1";
  CurveRun r;
  r.rc = shell(cmd);
  r.seconds = seconds_since(start);
  return r;
}

Outcome open_world_curves(const std::string& cli, const fs::path& work) {
  const auto start = Clock::now();
  const auto data = work / "synthetic30.bin";
  const std::string gen = "\"" + cli + "\" gen-synth --classes 30 --dim 16 --per-class 100 --separation 100 "
                          "--spread 1 --seed 7 --out \"" + data.string() + "\" > /dev/null";
  if (shell(gen) != 0) return {false, "gen-synth failed"};
  const auto run = run_eval(cli, data, work / "run1");
  if (run.rc != 0) return {false, "eval failed, see " + (work / "run1.log").string()};
  const double t = seconds_since(start);
  const auto stages = protocol::read_stages_csv(work / "run1" / "stages.csv");
  bool ok = stages.size() == 4 && t < 300.0;
  double min_margin = INFINITY, max_cs_gap = 0, min_sth_gap = INFINITY;
  for (const auto& s : stages) {
    min_margin = std::min(min_margin, s.os_nno_top1 - s.os_ncm_top1);
    max_cs_gap = std::max(max_cs_gap, std::abs(s.cs_nno_top1 - s.cs_ncm_top1));
    min_sth_gap = std::min(min_sth_gap, s.os_nno_top1 - s.os_ncm_sth_top1);
  }
  ok = ok && min_margin >= 0.30 && max_cs_gap <= 0.05 && min_sth_gap >= 0.0;
  std::ostringstream detail;
  detail << fmt("%zu stages, min(os_nno - os_ncm) %.3f, max|cs_nno - cs_ncm| %.3f, min(os_nno - os_sth) %.3f, %.1f s",
                stages.size(), min_margin, max_cs_gap, min_sth_gap, t);
  for (const auto& s : stages) {
    detail << fmt("\n      K=%zu cs_ncm %.3f os_ncm %.3f cs_nno %.3f os_nno %.3f os_sth %.3f", s.known_classes,
                  s.cs_ncm_top1, s.os_ncm_top1, s.cs_nno_top1, s.os_nno_top1, s.os_ncm_sth_top1);
  }
  return {ok, detail.str()};
}

Outcome softmax_far_point() {
  ClassMeans cm{{1, 2}, Matrix(2, 2, {0.0, 0.0, 1.0, 0.0})};
  const ncm::NcmModel ncm(MetricModel(Matrix::identity(2)), cm);
  const nno::NnoModel model(ncm, 1.0);
  const std::vector<double> far{1e6 + 1.0, 0.0};
  const double dist = std::sqrt(ncm.dist_w(far, 1));
  const Label sth = ncm.predict_softmax_threshold(far, 0.99);
  const Label nno_label = model.recognize(far);
  return {dist == 1e6 && sth == 2 && nno_label == 0,
          fmt("projected distance %.0f: softmax threshold -> %u, NNO -> %u", dist, sth, nno_label)};
}

Outcome open_world_error_checks() {
  const std::vector<Label> truth{1, 2, 3, 4};
  const double hand = protocol::open_world_error(std::vector<Label>{1, 2, 3, 1}, truth, std::vector<Label>{0, 3});
  const std::vector<Label> pred{1, 3, 3, 0};
  const bool no_unknown = protocol::open_world_error(pred, truth, std::vector<Label>{}) ==
                          protocol::multiclass_error(pred, truth);
  std::mt19937_64 rng(91);
  bool dominates = true;
  for (int t = 0; t < 50; ++t) {
    std::vector<Label> tr(1 + rng() % 40), pr(tr.size()), un(rng() % 40);
    for (auto& v : tr) v = static_cast<Label>(1 + rng() % 6);
    for (auto& v : pr) v = static_cast<Label>(rng() % 7);
    for (auto& v : un) v = static_cast<Label>(rng() % 7);
    dominates = dominates && protocol::open_world_error(pr, tr, un) >= protocol::multiclass_error(pr, tr);
  }
  return {hand == 0.75 && no_unknown && dominates,
          fmt("hand case %.17g, no-unknown equality %s, dominance on 50 instances %s", hand,
              no_unknown ? "yes" : "no", dominates ? "yes" : "no")};
}

Outcome determinism(const std::string& cli, const fs::path& work) {
  const auto run = run_eval(cli, work / "synthetic30.bin", work / "run2");
  if (run.rc != 0) return {false, "second eval failed"};
  const auto a = read_bytes(work / "run1" / "stages.csv");
  const auto b = read_bytes(work / "run2" / "stages.csv");
  return {!a.empty() && a == b, fmt("stages.csv %zu bytes, identical: %s", a.size(), a == b ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 3) {
    std::cerr << "usage: owr_acceptance <owr-cli> <work-dir>\n";
    return 2;
  }
  const std::string cli = argv[1];
  const fs::path work = argv[2];
  fs::remove_all(work);
  fs::create_directories(work);

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"1  gradient matches finite differences", gradient_check},
      {"2  loss and posterior match 50-digit oracle", loss_oracle},
      {"3  cone score normalizer, support and monotonicity", cone_values},
      {"4  incremental means equal batch means", incremental_equals_batch},
      {"5  analytic open-space risk", analytic_risk},
      {"6  CAP combination audit", combination_audit},
      {"7  open-world curves on 30-class synthetic data", [&] { return open_world_curves(cli, work); }},
      {"8  softmax threshold accepts far point, NNO rejects", softmax_far_point},
      {"9  open-world error decomposition", open_world_error_checks},
      {"10 repeated eval gives identical stages.csv", [&] { return determinism(cli, work); }},
  };

  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  std::cout << (10 - failures) << "/10 criteria passed" << std::endl;
  return failures;
}
