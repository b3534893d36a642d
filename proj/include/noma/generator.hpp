#pragma once

#include <cstdint>

#include "noma/linalg.hpp"
#include "noma/rng.hpp"

namespace noma {

using linalg::RMat;
using Row = Eigen::RowVectorXd;

/// Architecture constants of the kernel-1 convolutional generator. Kernel
/// size 1 means every user position runs the same per-position network, so
/// the whole stack is three shared linear layers over the channel axis.
struct GeneratorHyper {
  std::size_t K = 200;
  std::size_t J = 7;
  std::size_t C1 = 64;
  std::size_t C2 = 64;
  double leaky_slope = 0.2;
  double bn_eps = 1e-5;
  double bn_momentum = 0.1;  // weight of the new batch in the running stats

  void validate() const;
  std::size_t in_channels() const { return 4 * J; }
  std::size_t out_channels() const { return 2 * J; }
};

/// Trainable state. Weight matrices are stored input-major (in x out) so a
/// stacked batch of row vectors multiplies from the left. Layers 1 and 2
/// carry batch-norm parameters; alpha is the latent descent step size,
/// meta-learned together with the weights.
struct GeneratorParams {
  RMat W1, W2, W3;
  Row b1, b2, b3;
  Row gamma1, beta1, rmean1, rvar1;
  Row gamma2, beta2, rmean2, rvar2;
  double alpha = 0.01;
};

struct GeneratorModel {
  GeneratorHyper hyper;
  GeneratorParams params;

  /// Shapes consistent with hyper, all values finite, running variances > 0,
  /// alpha > 0. Throws ConfigError.
  void validate() const;
};

/// Seeded initialization: variance-scaled Gaussian weights (fan-in scaling
/// adjusted for the LeakyReLU slope, plain 1/fan_in for the Tanh output
/// layer), zero biases, identity batch norm, alpha = alpha0.
GeneratorModel init_generator(const GeneratorHyper& hyper, std::uint64_t seed,
                              double alpha0 = 0.01);

enum class BnMode {
  kTrain,  // per-instance batch statistics (pooled over the K positions)
  kEval,   // frozen running statistics
};

/// Per-layer batch-norm statistics of one stacked forward pass, one row per
/// batch instance.
struct BnStats {
  RMat mean;     // B x C
  RMat var;      // B x C, population variance over the K positions
  RMat inv_std;  // B x C
};

/// Intermediate activations needed by the backward pass. z holds the input.
struct ForwardCache {
  Eigen::Index batch = 0;
  Eigen::Index k = 0;
  BnMode mode = BnMode::kTrain;
  RMat z;                  // (B*K) x 4J
  RMat a1, l1, n1, o1;     // (B*K) x C1
  RMat a2, l2, n2, o2;     // (B*K) x C2
  RMat out;                // (B*K) x 2J, = tanh(a3); a3 itself is not needed
  BnStats s1, s2;
};

/// Forward pass over a stacked batch: z_stacked holds `batch` instances of K
/// rows each, (B*K) x 4J in total. Returns the (B*K) x 2J output; fills
/// *cache when non-null. Instances never mix: in train mode the batch-norm
/// statistics are computed per instance block, in eval mode no statistics
/// are computed at all, so results are independent of batching.
RMat generator_forward(const GeneratorModel& m, const RMat& z_stacked,
                       Eigen::Index batch, BnMode mode,
                       ForwardCache* cache = nullptr);

/// Parameter gradients, accumulated across calls until reset.
struct GeneratorGrads {
  RMat W1, W2, W3;
  Row b1, b2, b3;
  Row gamma1, beta1, gamma2, beta2;

  static GeneratorGrads zero(const GeneratorHyper& hyper);
  void add_scaled(const GeneratorGrads& other, double c);
};

/// Reverse pass matching generator_forward. d_out is (B*K) x 2J; returns
/// d_z of shape (B*K) x 4J. When grads is non-null the parameter gradients
/// are accumulated into it (+=). Train-mode batch norm backpropagates
/// through the per-instance statistics; eval mode treats them as constants.
RMat generator_backward(const GeneratorModel& m, const ForwardCache& cache,
                        const RMat& d_out, GeneratorGrads* grads = nullptr);

/// Exponential-moving-average update of the running statistics from the
/// cached per-instance statistics of a train-mode forward pass, pooled over
/// the whole (batch x K) block in instance order.
void update_running_stats(GeneratorModel& m, const ForwardCache& cache);

/// Output-layout converters. A generator output row k holds
/// [Re x_k(1..J), Im x_k(1..J)]; the stacked real form is [Re X; Im X]
/// (2K x J); the complex form is K x J.
RMat out_to_stack(const RMat& out);
RMat stack_to_out(const RMat& stack);
linalg::CMat out_to_complex(const RMat& out);
RMat complex_to_out(const linalg::CMat& x);

}  // namespace noma
