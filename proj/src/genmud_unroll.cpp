#include <cmath>
#include <string>
#include <vector>

#include "noma/autodiff.hpp"
#include "noma/errors.hpp"
#include "noma/genmud.hpp"
#include "train_internal.hpp"

namespace noma::detail {

namespace {

using ad::Tape;

/// Tape handles of the trainable leaves.
struct ThetaIds {
  Tape::Id w1, b1, gamma1, beta1;
  Tape::Id w2, b2, gamma2, beta2;
  Tape::Id w3, b3;
  Tape::Id alpha;

  std::vector<Tape::Id> list() const {
    return {w1, b1, gamma1, beta1, w2, b2, gamma2, beta2, w3, b3, alpha};
  }
};

ThetaIds push_theta(Tape& tape, const GeneratorModel& m) {
  const auto& p = m.params;
  ThetaIds ids;
  ids.w1 = tape.input(p.W1);
  ids.b1 = tape.input(p.b1);
  ids.gamma1 = tape.input(p.gamma1);
  ids.beta1 = tape.input(p.beta1);
  ids.w2 = tape.input(p.W2);
  ids.b2 = tape.input(p.b2);
  ids.gamma2 = tape.input(p.gamma2);
  ids.beta2 = tape.input(p.beta2);
  ids.w3 = tape.input(p.W3);
  ids.b3 = tape.input(p.b3);
  ad::Mat a(1, 1);
  a(0, 0) = p.alpha;
  ids.alpha = tape.input(a);
  return ids;
}

/// Linear -> LeakyReLU -> train-mode batch norm, on tape, one instance.
Tape::Id layer_on_tape(Tape& tape, Tape::Id x, Tape::Id w, Tape::Id b,
                       Tape::Id gamma, Tape::Id beta, double slope,
                       double eps, Eigen::Index k) {
  const Tape::Id a = tape.add(tape.matmul(x, w), tape.broadcast_row(b, k));
  const Tape::Id l = tape.leaky_relu(a, slope);
  const Tape::Id mean = tape.mean_rows(l);
  const Tape::Id centered = tape.sub(l, tape.broadcast_row(mean, k));
  const Tape::Id var = tape.mean_rows(tape.square(centered));
  const Tape::Id istd = tape.inv_sqrt_eps(var, eps);
  const Tape::Id n = tape.mul(centered, tape.broadcast_row(istd, k));
  return tape.add(tape.mul(n, tape.broadcast_row(gamma, k)),
                  tape.broadcast_row(beta, k));
}

Tape::Id forward_on_tape(Tape& tape, const GeneratorHyper& hyper,
                         const ThetaIds& th, Tape::Id z) {
  const auto k = static_cast<Eigen::Index>(hyper.K);
  const Tape::Id o1 = layer_on_tape(tape, z, th.w1, th.b1, th.gamma1,
                                    th.beta1, hyper.leaky_slope,
                                    hyper.bn_eps, k);
  const Tape::Id o2 = layer_on_tape(tape, o1, th.w2, th.b2, th.gamma2,
                                    th.beta2, hyper.leaky_slope,
                                    hyper.bn_eps, k);
  const Tape::Id a3 =
      tape.add(tape.matmul(o2, th.w3), tape.broadcast_row(th.b3, k));
  return tape.tanh(a3);
}

/// K x 2J output rows -> [Re; Im] stack of shape 2K x J.
Tape::Id stack_on_tape(Tape& tape, Tape::Id out, Eigen::Index j) {
  return tape.vstack(tape.cols_block(out, 0, j),
                     tape.cols_block(out, j, j));
}

Tape::Id measurement_loss_on_tape(Tape& tape, Tape::Id y_r, Tape::Id h_r,
                                  Tape::Id stack) {
  const Tape::Id residual = tape.sub(y_r, tape.matmul(h_r, stack));
  return tape.sum_all(tape.square(residual));
}

}  // namespace

UnrollEval unroll_batch(const GeneratorModel& model,
                        const std::vector<Task>& tasks,
                        const std::vector<RMat>& z0, std::size_t t) {
  if (tasks.empty() || tasks.size() != z0.size()) {
    throw ConfigError("unroll_batch: need matching non-empty tasks and z0");
  }
  const auto& hyper = model.hyper;
  const auto j = static_cast<Eigen::Index>(hyper.J);

  UnrollEval eval;
  eval.grads = GeneratorGrads::zero(hyper);
  const double inv_b = 1.0 / static_cast<double>(tasks.size());

  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const MeasurementOp op = MeasurementOp::make(tasks[i].y, tasks[i].h);

    Tape tape;
    const ThetaIds th = push_theta(tape, model);
    const Tape::Id y_r = tape.constant(op.y_r);
    const Tape::Id h_r = tape.constant(op.h_r);
    const Tape::Id x_true =
        tape.constant(linalg::real_embed_stack(tasks[i].x));

    // z0 enters as a differentiable leaf so the inner backward sweeps have
    // a path to differentiate, even though z0 itself is never updated.
    Tape::Id z = tape.input(z0[i]);
    const Tape::Id z_first = z;
    Tape::Id stack0 = Tape::kNone;

    for (std::size_t step = 0; step < t; ++step) {
      const Tape::Id out = forward_on_tape(tape, hyper, th, z);
      const Tape::Id stack = stack_on_tape(tape, out, j);
      if (step == 0) stack0 = stack;
      const Tape::Id loss = measurement_loss_on_tape(tape, y_r, h_r, stack);
      const Tape::Id gz = tape.backward(loss, {z})[0];
      z = tape.sub(z, tape.scale(gz, th.alpha));
    }
    if (stack0 == Tape::kNone) {
      // t = 0: the "before" snapshot is just G(z0).
      stack0 = stack_on_tape(tape, forward_on_tape(tape, hyper, th, z_first),
                             j);
    }

    const Tape::Id out_t = forward_on_tape(tape, hyper, th, z);
    const Tape::Id stack_t = stack_on_tape(tape, out_t, j);
    const Tape::Id loss_g = measurement_loss_on_tape(tape, y_r, h_r, stack_t);

    auto pair_term = [&](Tape::Id a, Tape::Id b) {
      const Tape::Id d = tape.sub(a, b);
      if (tape.value(d).isZero(0.0)) {
        // Identical signals (t = 0 leaves before == after): the term is a
        // flat zero and sqrt has no derivative there, so contribute a
        // constant instead of tracing a 0/0 through the norm.
        return tape.scalar_const(0.0);
      }
      const Tape::Id gap =
          tape.sub(tape.frob_norm(tape.matmul(h_r, d)), tape.frob_norm(d));
      return tape.square(gap);
    };
    const Tape::Id loss_h = tape.scale_const(
        tape.add(tape.add(pair_term(x_true, stack0), pair_term(x_true, stack_t)),
                 pair_term(stack0, stack_t)),
        1.0 / 3.0);

    const Tape::Id total = tape.add(loss_g, loss_h);
    const std::vector<Tape::Id> wrt = th.list();
    const std::vector<Tape::Id> grad_ids = tape.backward(total, wrt);

    eval.loss_g += tape.value(loss_g)(0, 0) * inv_b;
    eval.loss_h += tape.value(loss_h)(0, 0) * inv_b;
    eval.grads.W1 += tape.value(grad_ids[0]) * inv_b;
    eval.grads.b1 += tape.value(grad_ids[1]).row(0) * inv_b;
    eval.grads.gamma1 += tape.value(grad_ids[2]).row(0) * inv_b;
    eval.grads.beta1 += tape.value(grad_ids[3]).row(0) * inv_b;
    eval.grads.W2 += tape.value(grad_ids[4]) * inv_b;
    eval.grads.b2 += tape.value(grad_ids[5]).row(0) * inv_b;
    eval.grads.gamma2 += tape.value(grad_ids[6]).row(0) * inv_b;
    eval.grads.beta2 += tape.value(grad_ids[7]).row(0) * inv_b;
    eval.grads.W3 += tape.value(grad_ids[8]) * inv_b;
    eval.grads.b3 += tape.value(grad_ids[9]).row(0) * inv_b;
    eval.alpha_grad += tape.value(grad_ids[10])(0, 0) * inv_b;
    eval.z_final.push_back(tape.value(z));
  }
  return eval;
}

TrainResult train_full_unroll(const TaskSource& source,
                              const GeneratorHyper& hyper,
                              const TrainConfig& cfg) {
  const auto K = static_cast<Eigen::Index>(hyper.K);
  const auto B = static_cast<Eigen::Index>(cfg.batch);

  TrainResult result;
  result.model = init_generator(hyper, cfg.seed, cfg.alpha0);
  GeneratorModel& model = result.model;

  auto latent_rng = rng::derive_stream(cfg.seed, rng::StreamTag::kLatent);
  AdamState adam(hyper);

  for (std::size_t step = 0; step < cfg.max_steps; ++step) {
    std::vector<Task> tasks(cfg.batch);
    std::vector<RMat> z0(cfg.batch);
    for (std::size_t i = 0; i < cfg.batch; ++i) {
      tasks[i] = source(step * cfg.batch + i);
      if (tasks[i].h.cols() != K) {
        throw ShapeMismatchError(
            "train: task channel has K=" + std::to_string(tasks[i].h.cols()) +
            ", generator has K=" + std::to_string(hyper.K));
      }
      z0[i] = sample_latent(hyper, latent_rng);
    }

    UnrollEval eval = unroll_batch(model, tasks, z0, cfg.inner_steps);
    if (!std::isfinite(eval.loss_g) || !std::isfinite(eval.loss_h)) {
      throw DivergedTrainingError(
          "train: non-finite loss at outer step " + std::to_string(step) +
          " (L_G=" + std::to_string(eval.loss_g) +
          ", L_H=" + std::to_string(eval.loss_h) + ")");
    }

    // Running statistics from the adapted latents, pooled over the batch in
    // instance order, matching the first-order trainer exactly.
    RMat z_stack(B * K, static_cast<Eigen::Index>(hyper.in_channels()));
    for (Eigen::Index i = 0; i < B; ++i) {
      z_stack.middleRows(i * K, K) = eval.z_final[static_cast<std::size_t>(i)];
    }
    ForwardCache cache;
    generator_forward(model, z_stack, B, BnMode::kTrain, &cache);
    update_running_stats(model, cache);

    const double alpha_lr = cfg.alpha_lr > 0.0 ? cfg.alpha_lr : cfg.outer_lr;
    adam_step(model, eval.grads, eval.alpha_grad, cfg.outer_lr, alpha_lr, adam);
    result.log.push_back({eval.loss_g, eval.loss_h, model.params.alpha});
  }
  return result;
}

}  // namespace noma::detail
