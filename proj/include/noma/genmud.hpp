#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "noma/generator.hpp"
#include "noma/system_model.hpp"

namespace noma {

/// One detection instance in the real embedding: minimizing
/// ||Y_R - H_R * X_R||_F^2 over X_R is exactly the complex measurement
/// residual of Y = H X.
struct MeasurementOp {
  RMat h_r;  // 2M x 2K
  RMat y_r;  // 2M x J

  static MeasurementOp make(const CMat& y, const CMat& h);
};

/// ||Y_R - H_R * stack(G(z))||_F^2 at latent z (K x 4J).
double measurement_loss(const GeneratorModel& m, const RMat& z,
                        const MeasurementOp& op, BnMode mode);

/// Same value, plus the reverse-mode gradient with respect to z.
double measurement_loss_grad(const GeneratorModel& m, const RMat& z,
                             const MeasurementOp& op, BnMode mode,
                             RMat& grad_z);

/// K x 4J standard-normal draw, standardized to zero mean / unit variance
/// over all entries before use.
RMat sample_latent(const GeneratorHyper& hyper, rng::Stream& rng);

RMat standardize_latent(RMat z);

/// t gradient-descent steps on the measurement loss from a fresh
/// standardized latent, step size model.alpha. t = 0 returns z0 unchanged.
RMat latent_descent(const GeneratorModel& m, const MeasurementOp& op,
                    std::size_t t, BnMode mode, rng::Stream& rng);

/// Restricted-isometry training penalty. Signals are real stacks (2K x J);
/// each pair contributes (||H_R(a - b)||_F - ||a - b||_F)^2, averaged.
struct SignalPair {
  RMat a, b;
};
double rip_loss(const RMat& h_r, const std::array<SignalPair, 3>& pairs);

/// Canonical pairing: {(true, before), (true, after), (before, after)} where
/// before/after are the generated stacks around the latent descent.
double rip_loss(const RMat& h_r, const RMat& x_true, const RMat& x_before,
                const RMat& x_after);

/// rip_loss plus gradients with respect to the two generated stacks.
double rip_loss_grad(const RMat& h_r, const RMat& x_true,
                     const RMat& x_before, const RMat& x_after,
                     RMat* d_before, RMat* d_after);

struct SelectionMode {
  /// false: one support for the whole frame, ranked by the summed slot
  /// energy per user. true: independent top-S per slot (the support field
  /// then reports the union).
  bool per_slot = false;
};

/// Hard detection stage: keep the s largest-magnitude users of the soft
/// reconstruction, map their entries to the nearest constellation symbol,
/// zero everything else. Magnitude ties resolve toward the lower index.
Frame select_and_map(const CMat& x_tilde, std::size_t s,
                     SelectionMode mode = {});

/// Full detector: latent descent (eval-mode batch norm), soft
/// reconstruction, then select_and_map.
Frame genmud_detect(const GeneratorModel& m, const CMat& y, const CMat& h,
                    std::size_t s, std::size_t t, rng::Stream& rng,
                    SelectionMode mode = {});

/// Meta-training configuration.
struct TrainConfig {
  enum class MamlMode { kFirstOrder, kFullUnroll };

  std::size_t dataset_size = 0;  // 0 streams fresh tasks forever
  std::size_t inner_steps = 20;  // T
  std::size_t batch = 32;
  double outer_lr = 1e-4;
  std::size_t max_steps = 1000;
  MamlMode maml_mode = MamlMode::kFirstOrder;
  double train_snr_db = 20.0;
  std::uint64_t seed = 0;
  double alpha0 = 0.01;
  double alpha_lr = 0.0;  // Adam rate for the step size; 0 reuses outer_lr

  void validate() const;
};

/// One training task: effective channel, true symbols, received frame.
struct Task {
  CMat h;  // M x K
  CMat x;  // K x J
  CMat y;  // M x J
};

using TaskSource = std::function<Task(std::size_t)>;

/// Tasks drawn from the simulation model at cfg.snr_db, seeded by cfg.seed.
/// dataset_size > 0 cycles through that many fixed tasks (index mod size);
/// 0 streams a fresh task per index.
TaskSource simulated_task_source(const SystemConfig& cfg,
                                 std::size_t dataset_size);

struct TrainStepLog {
  double loss_g = 0.0;
  double loss_h = 0.0;
  double alpha = 0.0;
};

struct TrainResult {
  GeneratorModel model;
  std::vector<TrainStepLog> log;
};

/// Meta-training loop: per outer step, draw a batch of tasks, run T latent
/// descent steps per task, evaluate the measurement loss at the adapted
/// latent plus the isometry penalty, and update weights and alpha with
/// bias-corrected adaptive moments. first_order differentiates only the
/// final generator applications; full_unroll backpropagates through the
/// whole descent (exact, small problems only). Throws DivergedTrainingError
/// when a loss turns non-finite.
TrainResult train(const TaskSource& source, const GeneratorHyper& hyper,
                  const TrainConfig& cfg);

namespace detail {
TrainResult train_first_order(const TaskSource& source,
                              const GeneratorHyper& hyper,
                              const TrainConfig& cfg);
TrainResult train_full_unroll(const TaskSource& source,
                              const GeneratorHyper& hyper,
                              const TrainConfig& cfg);

/// One exactly differentiated outer evaluation: unrolls t inner steps per
/// task on an autodiff tape and returns batch-mean losses together with the
/// full gradients (including second-order terms through the descent).
/// Exposed for finite-difference verification.
struct UnrollEval {
  double loss_g = 0.0;
  double loss_h = 0.0;
  GeneratorGrads grads;
  double alpha_grad = 0.0;
  std::vector<RMat> z_final;
};
UnrollEval unroll_batch(const GeneratorModel& model,
                        const std::vector<Task>& tasks,
                        const std::vector<RMat>& z0, std::size_t t);
}  // namespace detail

/// Binary model container: versioned header, little-endian float64 blocks,
/// trailing checksum. Round trips are bit exact.
void save_model(const GeneratorModel& m, const std::string& path);
GeneratorModel load_model(const std::string& path);

/// Throws VersionMismatchError naming both shapes when the model was built
/// for a different K or J.
void require_model_shape(const GeneratorModel& m, std::size_t k,
                         std::size_t j);

}  // namespace noma
