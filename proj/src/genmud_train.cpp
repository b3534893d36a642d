#include <cmath>
#include <string>
#include <vector>

#include "noma/errors.hpp"
#include "noma/genmud.hpp"
#include "train_internal.hpp"

namespace noma::detail {

TrainResult train_first_order(const TaskSource& source,
                              const GeneratorHyper& hyper,
                              const TrainConfig& cfg) {
  const auto K = static_cast<Eigen::Index>(hyper.K);
  const auto J = static_cast<Eigen::Index>(hyper.J);
  const auto B = static_cast<Eigen::Index>(cfg.batch);
  const auto in_ch = static_cast<Eigen::Index>(hyper.in_channels());

  TrainResult result;
  result.model = init_generator(hyper, cfg.seed, cfg.alpha0);
  GeneratorModel& model = result.model;

  auto latent_rng = rng::derive_stream(cfg.seed, rng::StreamTag::kLatent);
  AdamState adam(hyper);

  std::vector<MeasurementOp> ops(cfg.batch);
  std::vector<RMat> x_true(cfg.batch);

  for (std::size_t step = 0; step < cfg.max_steps; ++step) {
    for (std::size_t i = 0; i < cfg.batch; ++i) {
      const Task task = source(step * cfg.batch + i);
      if (task.h.cols() != K || task.x.rows() != K || task.x.cols() != J ||
          task.y.cols() != J) {
        throw ShapeMismatchError(
            "train: task shapes do not match the generator (K=" +
            std::to_string(hyper.K) + ", J=" + std::to_string(hyper.J) + ")");
      }
      ops[i] = MeasurementOp::make(task.y, task.h);
      x_true[i] = linalg::real_embed_stack(task.x);
    }

    // Fresh standardized latents, one block per task, drawn in task order.
    RMat z0(B * K, in_ch);
    for (Eigen::Index i = 0; i < B; ++i) {
      z0.middleRows(i * K, K) = sample_latent(hyper, latent_rng);
    }

    // Inner latent descent, stacked over the batch. Gradients here flow to
    // z only; the trajectory is a constant for the outer update except for
    // the two generator applications differentiated below.
    RMat z = z0;
    RMat g_last;
    ForwardCache cache;
    RMat d_out(B * K, 2 * J);
    for (std::size_t t = 0; t < cfg.inner_steps; ++t) {
      generator_forward(model, z, B, BnMode::kTrain, &cache);
      for (Eigen::Index i = 0; i < B; ++i) {
        const RMat stack = out_to_stack(cache.out.middleRows(i * K, K));
        const RMat residual = ops[i].y_r - ops[i].h_r * stack;
        d_out.middleRows(i * K, K) =
            stack_to_out(-2.0 * (ops[i].h_r.transpose() * residual));
      }
      RMat dz = generator_backward(model, cache, d_out);
      if (t + 1 == cfg.inner_steps) g_last = dz;
      z -= model.params.alpha * dz;
    }

    // Outer losses and gradients at the endpoints of the descent.
    ForwardCache cache0, cache_t;
    generator_forward(model, z0, B, BnMode::kTrain, &cache0);
    generator_forward(model, z, B, BnMode::kTrain, &cache_t);

    const double inv_b = 1.0 / static_cast<double>(B);
    double loss_g = 0.0;
    double loss_h = 0.0;
    RMat d_out0(B * K, 2 * J);
    RMat d_out_t(B * K, 2 * J);
    for (Eigen::Index i = 0; i < B; ++i) {
      const RMat stack0 = out_to_stack(cache0.out.middleRows(i * K, K));
      const RMat stack_t = out_to_stack(cache_t.out.middleRows(i * K, K));

      const RMat residual = ops[i].y_r - ops[i].h_r * stack_t;
      loss_g += residual.squaredNorm();
      RMat d_stack_t = -2.0 * (ops[i].h_r.transpose() * residual);

      RMat d_before, d_after;
      loss_h += rip_loss_grad(ops[i].h_r, x_true[i], stack0, stack_t,
                              &d_before, &d_after);
      d_stack_t += d_after;

      d_out_t.middleRows(i * K, K) = stack_to_out(d_stack_t * inv_b);
      d_out0.middleRows(i * K, K) = stack_to_out(d_before * inv_b);
    }
    loss_g *= inv_b;
    loss_h *= inv_b;
    if (!std::isfinite(loss_g) || !std::isfinite(loss_h)) {
      throw DivergedTrainingError(
          "train: non-finite loss at outer step " + std::to_string(step) +
          " (L_G=" + std::to_string(loss_g) +
          ", L_H=" + std::to_string(loss_h) + ")");
    }

    GeneratorGrads grads = GeneratorGrads::zero(hyper);
    const RMat dz_total = generator_backward(model, cache_t, d_out_t, &grads);
    generator_backward(model, cache0, d_out0, &grads);

    // d(total)/d(alpha) through the last inner step only:
    // z_T = z_{T-1} - alpha * g_last, so the first-order term is
    // -<dL/dz_T, g_last>. With no inner steps the loss never sees alpha.
    const double alpha_grad =
        cfg.inner_steps == 0
            ? 0.0
            : -(dz_total.array() * g_last.array()).sum();

    update_running_stats(model, cache_t);
    const double alpha_lr = cfg.alpha_lr > 0.0 ? cfg.alpha_lr : cfg.outer_lr;
    adam_step(model, grads, alpha_grad, cfg.outer_lr, alpha_lr, adam);

    result.log.push_back({loss_g, loss_h, model.params.alpha});
  }
  return result;
}

}  // namespace noma::detail
