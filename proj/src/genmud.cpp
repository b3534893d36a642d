#include "noma/genmud.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "noma/errors.hpp"

namespace noma {

MeasurementOp MeasurementOp::make(const CMat& y, const CMat& h) {
  if (y.rows() != h.rows()) {
    throw ShapeMismatchError("MeasurementOp: Y has " +
                             std::to_string(y.rows()) + " rows, H has " +
                             std::to_string(h.rows()));
  }
  MeasurementOp op;
  op.h_r = linalg::real_embed_matrix(h);
  op.y_r = linalg::real_embed_stack(y);
  return op;
}

namespace {

void check_latent(const GeneratorHyper& hyper, const RMat& z) {
  if (z.rows() != static_cast<Eigen::Index>(hyper.K) ||
      z.cols() != static_cast<Eigen::Index>(hyper.in_channels())) {
    throw ShapeMismatchError(
        "latent: z is " + std::to_string(z.rows()) + "x" +
        std::to_string(z.cols()) + ", expected " + std::to_string(hyper.K) +
        "x" + std::to_string(hyper.in_channels()));
  }
}

void check_op(const GeneratorHyper& hyper, const MeasurementOp& op) {
  if (op.h_r.cols() != static_cast<Eigen::Index>(2 * hyper.K) ||
      op.h_r.rows() != op.y_r.rows() ||
      op.y_r.cols() != static_cast<Eigen::Index>(hyper.J)) {
    throw ShapeMismatchError(
        "measurement: H_R " + std::to_string(op.h_r.rows()) + "x" +
        std::to_string(op.h_r.cols()) + " / Y_R " +
        std::to_string(op.y_r.rows()) + "x" + std::to_string(op.y_r.cols()) +
        " inconsistent with K=" + std::to_string(hyper.K) +
        ", J=" + std::to_string(hyper.J));
  }
}

}  // namespace

double measurement_loss(const GeneratorModel& m, const RMat& z,
                        const MeasurementOp& op, BnMode mode) {
  check_latent(m.hyper, z);
  check_op(m.hyper, op);
  const RMat out = generator_forward(m, z, 1, mode);
  const RMat residual = op.y_r - op.h_r * out_to_stack(out);
  return residual.squaredNorm();
}

double measurement_loss_grad(const GeneratorModel& m, const RMat& z,
                             const MeasurementOp& op, BnMode mode,
                             RMat& grad_z) {
  check_latent(m.hyper, z);
  check_op(m.hyper, op);
  ForwardCache cache;
  const RMat out = generator_forward(m, z, 1, mode, &cache);
  const RMat residual = op.y_r - op.h_r * out_to_stack(out);
  const RMat d_stack = -2.0 * (op.h_r.transpose() * residual);
  grad_z = generator_backward(m, cache, stack_to_out(d_stack));
  return residual.squaredNorm();
}

RMat standardize_latent(RMat z) {
  const double mean = z.mean();
  z.array() -= mean;
  const double var = z.array().square().mean();
  if (var > 0.0) z /= std::sqrt(var);
  return z;
}

RMat sample_latent(const GeneratorHyper& hyper, rng::Stream& rng) {
  RMat z(hyper.K, hyper.in_channels());
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
      z(r, c) = rng.normal();
    }
  }
  return standardize_latent(std::move(z));
}

RMat latent_descent(const GeneratorModel& m, const MeasurementOp& op,
                    std::size_t t, BnMode mode, rng::Stream& rng) {
  RMat z = sample_latent(m.hyper, rng);
  RMat grad;
  for (std::size_t step = 0; step < t; ++step) {
    measurement_loss_grad(m, z, op, mode, grad);
    z -= m.params.alpha * grad;
  }
  return z;
}

double rip_loss(const RMat& h_r, const std::array<SignalPair, 3>& pairs) {
  double total = 0.0;
  for (const auto& pair : pairs) {
    if (pair.a.rows() != pair.b.rows() || pair.a.cols() != pair.b.cols() ||
        pair.a.rows() != h_r.cols()) {
      throw ShapeMismatchError(
          "rip_loss: pair " + std::to_string(pair.a.rows()) + "x" +
          std::to_string(pair.a.cols()) + " / " +
          std::to_string(pair.b.rows()) + "x" + std::to_string(pair.b.cols()) +
          " vs H_R with " + std::to_string(h_r.cols()) + " columns");
    }
    const RMat d = pair.a - pair.b;
    const double t = (h_r * d).norm() - d.norm();
    total += t * t;
  }
  return total / 3.0;
}

double rip_loss(const RMat& h_r, const RMat& x_true, const RMat& x_before,
                const RMat& x_after) {
  return rip_loss(h_r, std::array<SignalPair, 3>{
                           SignalPair{x_true, x_before},
                           SignalPair{x_true, x_after},
                           SignalPair{x_before, x_after}});
}

double rip_loss_grad(const RMat& h_r, const RMat& x_true,
                     const RMat& x_before, const RMat& x_after,
                     RMat* d_before, RMat* d_after) {
  if (d_before) *d_before = RMat::Zero(x_before.rows(), x_before.cols());
  if (d_after) *d_after = RMat::Zero(x_after.rows(), x_after.cols());

  // Gradient of one pair term with respect to d = a - b:
  //   2 t (H^T H d / ||H d|| - d / ||d||),  t = ||H d|| - ||d||.
  auto accumulate = [&](const RMat& a, const RMat& b, RMat* da, RMat* db,
                        double& loss_sum) {
    const RMat d = a - b;
    const RMat hd = h_r * d;
    const double nhd = hd.norm();
    const double nd = d.norm();
    const double t = nhd - nd;
    loss_sum += t * t;
    if (!da && !db) return;
    if (nd == 0.0) return;  // term is ||Hd||^2 = 0 too; flat point
    RMat g = RMat::Zero(d.rows(), d.cols());
    if (nhd > 0.0) g += (h_r.transpose() * hd) / nhd;
    g -= d / nd;
    g *= 2.0 * t / 3.0;  // pair average
    if (da) *da += g;
    if (db) *db -= g;
  };

  double loss_sum = 0.0;
  accumulate(x_true, x_before, nullptr, d_before, loss_sum);
  accumulate(x_true, x_after, nullptr, d_after, loss_sum);
  accumulate(x_before, x_after, d_before, d_after, loss_sum);
  return loss_sum / 3.0;
}

Frame select_and_map(const CMat& x_tilde, std::size_t s, SelectionMode mode) {
  const auto K = x_tilde.rows();
  const auto J = x_tilde.cols();
  if (s == 0 || s > static_cast<std::size_t>(K)) {
    throw ConfigError("select_and_map: need 0 < S <= K, got " +
                      std::to_string(s));
  }

  Frame f;
  f.symbols = CMat::Zero(K, J);

  auto top_s = [&](const std::vector<double>& scores) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    // stable sort + strict comparison: equal scores keep index order, so
    // the lower user index wins ties.
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) {
                       return scores[a] > scores[b];
                     });
    order.resize(s);
    return order;
  };

  if (!mode.per_slot) {
    std::vector<double> energy(static_cast<std::size_t>(K));
    for (Eigen::Index k = 0; k < K; ++k) {
      energy[static_cast<std::size_t>(k)] = x_tilde.row(k).squaredNorm();
    }
    f.support = top_s(energy);
    std::sort(f.support.begin(), f.support.end());
    for (std::size_t k : f.support) {
      for (Eigen::Index j = 0; j < J; ++j) {
        f.symbols(static_cast<Eigen::Index>(k), j) =
            nearest_qpsk(x_tilde(static_cast<Eigen::Index>(k), j));
      }
    }
    return f;
  }

  std::set<std::size_t> union_support;
  for (Eigen::Index j = 0; j < J; ++j) {
    std::vector<double> energy(static_cast<std::size_t>(K));
    for (Eigen::Index k = 0; k < K; ++k) {
      energy[static_cast<std::size_t>(k)] = std::norm(x_tilde(k, j));
    }
    for (std::size_t k : top_s(energy)) {
      f.symbols(static_cast<Eigen::Index>(k), j) =
          nearest_qpsk(x_tilde(static_cast<Eigen::Index>(k), j));
      union_support.insert(k);
    }
  }
  f.support.assign(union_support.begin(), union_support.end());
  return f;
}

Frame genmud_detect(const GeneratorModel& m, const CMat& y, const CMat& h,
                    std::size_t s, std::size_t t, rng::Stream& rng,
                    SelectionMode mode) {
  require_model_shape(m, static_cast<std::size_t>(h.cols()),
                      static_cast<std::size_t>(y.cols()));
  const MeasurementOp op = MeasurementOp::make(y, h);
  const RMat z = latent_descent(m, op, t, BnMode::kEval, rng);
  const RMat out = generator_forward(m, z, 1, BnMode::kEval);
  return select_and_map(out_to_complex(out), s, mode);
}

void TrainConfig::validate() const {
  // inner_steps = 0 is legal: the outer loss is then evaluated at the raw
  // latent (no adaptation), which is also where the two MAML modes coincide.
  if (batch == 0) throw ConfigError("train: batch must be >= 1");
  if (max_steps == 0) throw ConfigError("train: max_steps must be >= 1");
  if (!(outer_lr >= 0.0)) throw ConfigError("train: outer_lr must be >= 0");
  if (!(alpha0 > 0.0)) throw ConfigError("train: alpha0 must be > 0");
  if (!(alpha_lr >= 0.0)) throw ConfigError("train: alpha_lr must be >= 0");
}

TaskSource simulated_task_source(const SystemConfig& cfg,
                                 std::size_t dataset_size) {
  cfg.validate();
  return [cfg, dataset_size](std::size_t index) {
    const std::size_t effective =
        dataset_size > 0 ? index % dataset_size : index;
    const Instance inst =
        sample_instance(cfg, rng::trial_seed(cfg.seed, 0, effective));
    Task task;
    task.h = inst.channel.effective;
    task.x = inst.frame.symbols;
    task.y = inst.rx.Y;
    return task;
  };
}

TrainResult train(const TaskSource& source, const GeneratorHyper& hyper,
                  const TrainConfig& cfg) {
  hyper.validate();
  cfg.validate();
  switch (cfg.maml_mode) {
    case TrainConfig::MamlMode::kFirstOrder:
      return detail::train_first_order(source, hyper, cfg);
    case TrainConfig::MamlMode::kFullUnroll:
      return detail::train_full_unroll(source, hyper, cfg);
  }
  throw ConfigError("train: unknown maml_mode");
}

void require_model_shape(const GeneratorModel& m, std::size_t k,
                         std::size_t j) {
  if (m.hyper.K != k || m.hyper.J != j) {
    throw VersionMismatchError(
        "model built for K=" + std::to_string(m.hyper.K) +
        ", J=" + std::to_string(m.hyper.J) + " but the instance needs K=" +
        std::to_string(k) + ", J=" + std::to_string(j));
  }
}

}  // namespace noma
