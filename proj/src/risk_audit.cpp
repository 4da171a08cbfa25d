#include <algorithm>
#include <cstdio>
#include <exception>
#include <ostream>
#include <cmath>
#include <random>
#include <string>
#include <thread>

#include "owr/error.hpp"
#include "owr/nno.hpp"
#include "owr/risk.hpp"
#include "owr/simd.hpp"

namespace owr::risk {

void RiskProblem::validate() const {
  if (!score) throw Error("risk: score function is empty");
  if (center_o.empty()) throw Error("risk: S_o centre has no dimensions");
  if (!(r > 0.0)) throw Error("risk: ball radius r must be positive");
  if (!(r_o > r)) throw Error("risk: enclosing radius r_o must exceed r");
  if (!training_points.empty() && training_points.cols() != dim()) {
    throw DimensionError("risk: training points and S_o centre differ in dimension");
  }
  for (std::size_t i = 0; i < training_points.rows(); ++i) {
    if (simd::squared_distance(training_points.row(i), center_o) > r_o * r_o) {
      throw Error("risk: training point " + std::to_string(i) + " lies outside S_o");
    }
  }
}

bool RiskProblem::in_open_space(std::span<const double> x) const {
  const double r2 = r * r;
  for (std::size_t i = 0; i < training_points.rows(); ++i) {
    if (simd::squared_distance(training_points.row(i), x) <= r2) return false;
  }
  return true;
}

namespace {

constexpr std::size_t kChunk = 1 << 16;

struct Sums {
  double a = 0, b = 0, aa = 0, bb = 0, ab = 0;
};

Sums sample_chunk(const RiskProblem& p, const ScoreFn& f, std::size_t count, std::uint64_t seed,
                  std::size_t chunk) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(chunk), static_cast<std::uint32_t>(chunk >> 32)};
  std::mt19937_64 rng(seq);
  std::vector<double> x(p.dim());
  Sums s;
  for (std::size_t i = 0; i < count; ++i) {
    sample_in_ball(rng, p.center_o, p.r_o, x);
    const double b = f(x);
    if (b < 0.0 || !std::isfinite(b)) throw Error("risk: score function returned a negative or non-finite value");
    if (b == 0.0) continue;
    const double a = p.in_open_space(x) ? b : 0.0;
    s.a += a;
    s.b += b;
    s.aa += a * a;
    s.bb += b * b;
    s.ab += a * b;
  }
  return s;
}

// Chunks are seeded by index and reduced in index order, so the result does
// not depend on the number of threads.
RiskEstimate estimate_with(const RiskProblem& p, const ScoreFn& f, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw Error("risk: sample count must be positive");
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  std::vector<Sums> partial(chunks);
  std::vector<std::exception_ptr> errors(chunks);
  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(chunks, std::thread::hardware_concurrency()));
  auto work = [&](std::size_t w) {
    for (std::size_t c = w; c < chunks; c += workers) {
      try {
        partial[c] = sample_chunk(p, f, std::min(kChunk, n - c * kChunk), seed, c);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  Sums s;
  for (const auto& c : partial) {
    s.a += c.a;
    s.b += c.b;
    s.aa += c.aa;
    s.bb += c.bb;
    s.ab += c.ab;
  }
  if (s.b == 0.0) throw Error("risk: no positive labeled region (score is zero on every sample)");

  const double nd = static_cast<double>(n);
  const double ma = s.a / nd;
  const double mb = s.b / nd;
  const double risk = s.a / s.b;
  const double var_a = s.aa / nd - ma * ma;
  const double var_b = s.bb / nd - mb * mb;
  const double cov = s.ab / nd - ma * mb;
  const double var = (var_a - 2.0 * risk * cov + risk * risk * var_b) / (nd * mb * mb);
  return {risk, std::sqrt(std::max(0.0, var)), n};
}

}  // namespace

RiskEstimate estimate_open_space_risk(const RiskProblem& p, std::size_t n_samples, std::uint64_t seed) {
  p.validate();
  return estimate_with(p, p.score, n_samples, seed);
}

ScoreFn combine_cap_models(std::span<const double> weights, std::vector<ScoreFn> models) {
  if (models.empty() || weights.size() != models.size()) {
    throw Error("combine: need one weight per model and at least one model");
  }
  for (double c : weights) {
    if (!(c >= 0.0 && c <= 1.0)) throw Error("combine: weights must lie in [0, 1]");
  }
  return [w = std::vector<double>(weights.begin(), weights.end()),
          ms = std::move(models)](std::span<const double> x) {
    double sum = 0.0;
    for (std::size_t j = 0; j < ms.size(); ++j) {
      if (w[j] != 0.0) sum += w[j] * ms[j](x);
    }
    return sum;
  };
}

ScoreFn cone_score(std::vector<double> center, double tau) {
  const double c = nno::ball_normalizer(center.size(), tau);
  return [center = std::move(center), tau, c](std::span<const double> x) {
    if (x.size() != center.size()) throw DimensionError("cone score: dimension mismatch");
    const double dist = std::sqrt(simd::squared_distance(x, center));
    return c * std::max(0.0, 1.0 - dist / tau);
  };
}

RiskEstimate audit_combination_threshold(const std::vector<CompactModel>& models,
                                         std::span<const double> weights,
                                         const RiskProblem& problem, std::size_t n_samples,
                                         std::uint64_t seed, PreconditionCheck check) {
  RiskProblem p = problem;
  std::vector<ScoreFn> fns;
  for (const auto& m : models) {
    if (m.center.size() != problem.dim()) throw DimensionError("audit: model centre dimension mismatch");
    fns.push_back(m.score);
  }
  auto combined = combine_cap_models(weights, std::move(fns));
  p.score = [combined](std::span<const double> x) { return combined(x) > 0.0 ? 1.0 : 0.0; };
  p.validate();

  if (check == PreconditionCheck::kEnforce) {
    for (std::size_t j = 0; j < models.size(); ++j) {
      bool contained = false;
      for (std::size_t i = 0; i < p.training_points.rows() && !contained; ++i) {
        const double gap = std::sqrt(simd::squared_distance(models[j].center, p.training_points.row(i)));
        contained = gap + models[j].support_radius <= p.r * (1.0 + 1e-12);
      }
      if (!contained) {
        throw Error("audit: support of model " + std::to_string(j) +
                    " is not contained in any training ball of radius r");
      }
    }
  }
  return estimate_with(p, p.score, n_samples, seed);
}

TransformAudit audit_transform(const ScoreFn& score_lowdim, const Matrix& transform,
                               const RiskProblem& problem, std::size_t n_samples,
                               std::uint64_t seed) {
  const std::size_t m = transform.rows();
  const std::size_t d = transform.cols();
  if (m == 0 || m > d) throw DimensionError("transform audit: need 1 <= m <= d");
  if (problem.dim() != d) throw DimensionError("transform audit: problem dimension differs from T");

  RiskProblem high = problem;
  high.score = [score_lowdim, &transform](std::span<const double> x) {
    std::vector<double> y(transform.rows());
    matvec(transform, x, y);
    return score_lowdim(y);
  };

  RiskProblem low;
  low.score = score_lowdim;
  low.r = problem.r;
  low.r_o = problem.r_o;
  low.center_o.resize(m);
  matvec(transform, problem.center_o, low.center_o);
  low.training_points = Matrix(problem.training_points.rows(), m);
  for (std::size_t i = 0; i < problem.training_points.rows(); ++i) {
    matvec(transform, problem.training_points.row(i), low.training_points.row(i));
  }

  TransformAudit out;
  out.low = estimate_open_space_risk(low, n_samples, seed);
  out.high = estimate_open_space_risk(high, n_samples, seed);
  return out;
}

}  // namespace owr::risk

namespace owr::risk {

std::vector<AuditRow> standard_audits(std::size_t n, std::uint64_t seed) {
  std::vector<AuditRow> rows;
  const std::vector<double> origin2{0.0, 0.0};

  {
    const double tau = 1.0;
    RiskProblem p{cone_score(origin2, tau), Matrix(1, 2, origin2), tau / 2, 2.0, origin2};
    rows.push_back({"cone_annulus_2d", 2, estimate_open_space_risk(p, n, seed), seed});
  }
  {
    RiskProblem p{[](std::span<const double>) { return 1.0; }, Matrix(1, 2, origin2), 0.5, 1.0, origin2};
    rows.push_back({"constant_disk_2d", 2, estimate_open_space_risk(p, n, seed), seed});
  }
  {
    const double r = 0.5;
    RiskProblem p{nullptr, Matrix(2, 2, {-1.0, 0.0, 1.0, 0.0}), r, 3.0, origin2};
    std::vector<CompactModel> models{{cone_score({-1.0, 0.0}, 0.5), {-1.0, 0.0}, 0.5},
                                     {cone_score({1.1, 0.0}, 0.3), {1.1, 0.0}, 0.3}};
    const std::vector<double> weights{0.7, 0.4};
    rows.push_back({"cap_inside_balls_2d", 2, audit_combination_threshold(models, weights, p, n, seed), seed});
  }
  {
    const double r = 0.5;
    RiskProblem p{nullptr, Matrix(1, 2, origin2), r, 2.0, origin2};
    std::vector<CompactModel> models{{cone_score(origin2, 2 * r), origin2, 2 * r}};
    const std::vector<double> weights{1.0};
    rows.push_back({"cap_broken_2d", 2,
                    audit_combination_threshold(models, weights, p, n, seed, PreconditionCheck::kSkip),
                    seed});
  }
  {
    const double c = std::cos(0.7), s = std::sin(0.7);
    const Matrix rotation(3, 3, {c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0});
    const std::vector<double> origin3{0.0, 0.0, 0.0};
    RiskProblem p{nullptr, Matrix(1, 3, {0.3, 0.0, 0.0}), 0.5, 2.0, origin3};
    std::vector<double> centre(3);
    matvec(rotation, std::vector<double>{0.3, 0.0, 0.0}, centre);
    const auto audit = audit_transform(cone_score(centre, 1.0), rotation, p, n, seed);
    rows.push_back({"transform_rotation_3d_low", 3, audit.low, seed});
    rows.push_back({"transform_rotation_3d_high", 3, audit.high, seed});
  }
  {
    const Matrix projection(1, 2, {1.0, 0.0});
    RiskProblem p{nullptr, Matrix(1, 2, origin2), 0.5, 2.0, origin2};
    const auto audit = audit_transform(cone_score({0.0}, 0.5), projection, p, n, seed);
    rows.push_back({"transform_slab_low", 1, audit.low, seed});
    rows.push_back({"transform_slab_high", 2, audit.high, seed});
  }
  return rows;
}

void write_audit_csv(std::span<const AuditRow> rows, std::ostream& out) {
  out << "audit_name,dims,n_samples,risk,std_error,seed\n";
  char risk[32], se[32];
  for (const auto& r : rows) {
    std::snprintf(risk, sizeof risk, "%.6f", r.estimate.risk);
    std::snprintf(se, sizeof se, "%.6f", r.estimate.std_error);
    out << r.name << ',' << r.dims << ',' << r.estimate.samples << ',' << risk << ',' << se << ','
        << r.seed << '\n';
  }
}

}  // namespace owr::risk
