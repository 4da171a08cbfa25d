#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <span>
#include <vector>

#include "owr/matrix.hpp"

namespace owr::risk {

/// Non-negative recognition score over feature vectors.
using ScoreFn = std::function<double(std::span<const double>)>;

/// Open space is the part of the ball S_o (centre `center_o`, radius `r_o`)
/// farther than `r` from every training point.
struct RiskProblem {
  ScoreFn score;
  Matrix training_points;  // one point per row
  double r = 0.0;
  double r_o = 0.0;
  std::vector<double> center_o;

  std::size_t dim() const { return center_o.size(); }
  /// Throws unless r > 0, r_o > r and every training point lies in S_o.
  void validate() const;
  bool in_open_space(std::span<const double> x) const;
};

struct RiskEstimate {
  double risk = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
};

/// Monte Carlo ratio estimate of
///   int_O f / int_{S_o} f
/// from uniform draws in S_o, with a delta-method standard error. Throws when
/// f vanishes on every draw.
RiskEstimate estimate_open_space_risk(const RiskProblem& p, std::size_t n_samples, std::uint64_t seed);

/// Uniform draw in the ball (center, radius) using a Gaussian direction and
/// radius * U^(1/d).
template <typename Rng>
void sample_in_ball(Rng& rng, std::span<const double> center, double radius, std::span<double> out);

/// x -> sum_j weights[j] * models[j](x); weights must lie in [0, 1].
ScoreFn combine_cap_models(std::span<const double> weights, std::vector<ScoreFn> models);

/// Cone score C_m(tau) * max(0, 1 - ||x - center|| / tau) with the same
/// normalizer as the NNO recognizer (m = dimension of x).
ScoreFn cone_score(std::vector<double> center, double tau);

/// Compact-support score whose positive region is the open ball of
/// `support_radius` around `center`.
struct CompactModel {
  ScoreFn score;
  std::vector<double> center;
  double support_radius = 0.0;
};

enum class PreconditionCheck { kEnforce, kSkip };

/// Risk of the thresholded combination x -> [sum_j c_j M_j(x) > 0] on the
/// problem's open space (the problem's own score is ignored). With every
/// support inside a training ball the estimate must vanish up to noise.
/// kEnforce throws when some support is not contained in a ball B_r(x_i).
RiskEstimate audit_combination_threshold(const std::vector<CompactModel>& models,
                                         std::span<const double> weights,
                                         const RiskProblem& problem, std::size_t n_samples,
                                         std::uint64_t seed,
                                         PreconditionCheck check = PreconditionCheck::kEnforce);

struct TransformAudit {
  RiskEstimate low;   // score on the projected problem
  RiskEstimate high;  // x -> score(T x) on the original problem
};

/// Compares open-space risk before and after a linear map T (m x d). The
/// projected problem uses the projected training points and centre with the
/// same r and r_o.
TransformAudit audit_transform(const ScoreFn& score_lowdim, const Matrix& transform,
                               const RiskProblem& problem, std::size_t n_samples,
                               std::uint64_t seed);

struct AuditRow {
  std::string name;
  std::size_t dims = 0;
  RiskEstimate estimate;
  std::uint64_t seed = 0;
};

/// Fixed suite of low-dimensional audits with analytic reference values:
///   cone_annulus_2d        single cone, r = tau/2             (risk 0.5)
///   constant_disk_2d       f = 1, r = r_o/2                   (risk 0.75)
///   cap_inside_balls_2d    two cones with tau_j <= r          (risk 0)
///   cap_broken_2d          cone with tau = 2r                 (risk 0.75)
///   transform_rotation_3d  cone under a rotation, low/high    (equal)
///   transform_slab_2d      1-D cone pulled back through a projection
std::vector<AuditRow> standard_audits(std::size_t n_samples, std::uint64_t seed);

/// CSV with header audit_name,dims,n_samples,risk,std_error,seed.
void write_audit_csv(std::span<const AuditRow> rows, std::ostream& out);

}  // namespace owr::risk

#include "owr/risk_sampling.inl"
