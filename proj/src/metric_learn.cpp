#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "owr/error.hpp"
#include "owr/metric.hpp"
#include "owr/simd.hpp"

namespace owr {

MetricModel::MetricModel(Matrix weights) : weights_(std::move(weights)) {
  if (weights_.rows() < 1 || weights_.rows() > weights_.cols()) {
    throw Error("metric: projected dimension m=" + std::to_string(weights_.rows()) +
                " must satisfy 1 <= m <= d=" + std::to_string(weights_.cols()));
  }
  if (!weights_.all_finite()) throw Error("metric: non-finite weight");
}

void MetricModel::project(std::span<const double> x, std::span<double> out) const {
  if (x.size() != input_dim()) {
    throw DimensionError("metric: input has dimension " + std::to_string(x.size()) + ", expected " +
                         std::to_string(input_dim()));
  }
  matvec(weights_, x, out);
}

std::vector<double> MetricModel::project(std::span<const double> x) const {
  std::vector<double> out(projected_dim());
  project(x, out);
  return out;
}

namespace metric {
namespace {

void check_shapes(const Matrix& w, const LabeledDataset& ds, const ClassMeans& means) {
  if (w.cols() != ds.dim() || means.means.cols() != ds.dim()) {
    throw DimensionError("ncm loss: W, batch and means must share the input dimension");
  }
  if (means.size() == 0) throw Error("ncm loss: no class means");
}

}  // namespace

double ncm_loss_and_grad(const Matrix& w, const LabeledDataset& ds, std::span<const std::size_t> rows,
                         const ClassMeans& means, Matrix* grad) {
  check_shapes(w, ds, means);
  const std::size_t m = w.rows();
  const std::size_t d = w.cols();
  const std::size_t k = means.size();
  const auto& kern = simd::kernels();

  Matrix projected_means(k, m);
  for (std::size_t c = 0; c < k; ++c) matvec(w, means.means.row(c), projected_means.row(c));

  if (grad) *grad = Matrix(m, d);
  std::vector<double> px(m);
  Matrix wdiff(k, m);
  std::vector<double> dist(k);
  std::vector<double> diff(d);
  double total = 0.0;

  for (std::size_t row : rows) {
    const auto x = ds.row(row);
    const std::size_t y = means.index_of(ds.label(row));
    matvec(w, x, px);
    double dmin = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      kern.subtract(px.data(), projected_means.row(c).data(), wdiff.row(c).data(), m);
      dist[c] = kern.dot(wdiff.row(c).data(), wdiff.row(c).data(), m);
      dmin = c == 0 ? dist[c] : std::min(dmin, dist[c]);
    }
    double z = 0.0;
    for (std::size_t c = 0; c < k; ++c) z += std::exp(-0.5 * (dist[c] - dmin));
    total += 0.5 * (dist[y] - dmin) + std::log(z);

    if (!grad) continue;
    for (std::size_t c = 0; c < k; ++c) {
      const double p = std::exp(-0.5 * (dist[c] - dmin)) / z;
      const double coef = (c == y ? 1.0 : 0.0) - p;
      if (coef == 0.0) continue;
      kern.subtract(x.data(), means.means.row(c).data(), diff.data(), d);
      for (std::size_t r = 0; r < m; ++r) {
        kern.axpy(coef * wdiff(c, r), diff.data(), grad->row(r).data(), d);
      }
    }
  }

  const double inv_n = 1.0 / static_cast<double>(rows.size());
  if (grad) {
    for (double& g : grad->data()) g *= inv_n;
  }
  return total * inv_n;
}

double ncm_loss(const Matrix& w, const LabeledDataset& batch, const ClassMeans& means) {
  std::vector<std::size_t> rows(batch.size());
  std::iota(rows.begin(), rows.end(), 0);
  return ncm_loss_and_grad(w, batch, rows, means, nullptr);
}

Matrix ncm_loss_grad(const Matrix& w, const LabeledDataset& batch, const ClassMeans& means) {
  std::vector<std::size_t> rows(batch.size());
  std::iota(rows.begin(), rows.end(), 0);
  Matrix grad;
  ncm_loss_and_grad(w, batch, rows, means, &grad);
  return grad;
}

double finite_diff_check(const Matrix& w, const LabeledDataset& batch, const ClassMeans& means,
                         double h) {
  if (!(h > 0.0)) throw Error("finite difference step must be positive");
  const Matrix g = ncm_loss_grad(w, batch, means);
  Matrix probe = w;
  double worst = 0.0;
  for (std::size_t i = 0; i < probe.data().size(); ++i) {
    const double original = probe.data()[i];
    probe.data()[i] = original + h;
    const double up = ncm_loss(probe, batch, means);
    probe.data()[i] = original - h;
    const double down = ncm_loss(probe, batch, means);
    probe.data()[i] = original;
    const double fd = (up - down) / (2.0 * h);
    const double analytic = g.data()[i];
    worst = std::max(worst, std::abs(fd - analytic) / (std::abs(analytic) + 1e-12));
  }
  return worst;
}

MetricModel train_metric(const LabeledDataset& ds, std::size_t m, const SgdConfig& cfg,
                         TrainTrace* trace) {
  if (!(cfg.learning_rate > 0.0) || cfg.iterations == 0 || cfg.batch_size == 0 ||
      !(cfg.init_scale > 0.0)) {
    throw Error("sgd config: learning rate, iterations, batch size and init scale must be positive");
  }
  const ClassMeans means = ncm::class_means(ds);
  if (means.size() < 2) throw Error("metric learning needs at least 2 classes");
  if (m < 1 || m > ds.dim()) {
    throw Error("projected dimension m=" + std::to_string(m) + " must satisfy 1 <= m <= d=" +
                std::to_string(ds.dim()));
  }

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> init(0.0, cfg.init_scale);
  Matrix w(m, ds.dim());
  for (double& v : w.data()) v = init(rng);

  std::uniform_int_distribution<std::size_t> pick(0, ds.size() - 1);
  std::vector<std::size_t> monitor(std::min<std::size_t>(ds.size(), 256));
  {
    std::mt19937_64 monitor_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    for (auto& r : monitor) r = pick(monitor_rng);
  }
  const double initial_loss = ncm_loss_and_grad(w, ds, monitor, means, nullptr);

  std::vector<std::size_t> batch(cfg.batch_size);
  Matrix grad;
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    for (auto& r : batch) r = pick(rng);
    const double loss = ncm_loss_and_grad(w, ds, batch, means, &grad);
    if (!std::isfinite(loss) || !grad.all_finite()) {
      throw Error("metric learning diverged: non-finite loss at iteration " + std::to_string(it));
    }
    simd::axpy(-cfg.learning_rate, grad.data(), w.data());
  }

  if (trace) {
    trace->initial_monitor_loss = initial_loss;
    trace->final_monitor_loss = ncm_loss_and_grad(w, ds, monitor, means, nullptr);
    trace->monitor_size = monitor.size();
  }
  return MetricModel(std::move(w));
}

}  // namespace metric
}  // namespace owr
