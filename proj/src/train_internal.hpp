#pragma once

#include <cmath>

#include "noma/generator.hpp"

namespace noma::detail {

inline constexpr double kBeta1 = 0.9;
inline constexpr double kBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;
inline constexpr double kAlphaFloor = 1e-6;

/// Bias-corrected adaptive-moment optimizer state for the generator
/// parameters plus the latent step size.
struct AdamState {
  GeneratorGrads m, v;
  double m_alpha = 0.0;
  double v_alpha = 0.0;
  std::size_t t = 0;

  explicit AdamState(const GeneratorHyper& hyper)
      : m(GeneratorGrads::zero(hyper)), v(GeneratorGrads::zero(hyper)) {}
};

template <typename T>
void adam_tensor(T& param, const T& grad, T& m, T& v, double lr, double bc1,
                 double bc2) {
  m = kBeta1 * m + (1.0 - kBeta1) * grad;
  v = (kBeta2 * v.array() + (1.0 - kBeta2) * grad.array().square()).matrix();
  param.array() -=
      lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + kAdamEps);
}

inline void adam_step(GeneratorModel& model, const GeneratorGrads& grads,
                      double alpha_grad, double lr, double alpha_lr,
                      AdamState& st) {
  ++st.t;
  const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(st.t));
  const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(st.t));
  auto& p = model.params;
  adam_tensor(p.W1, grads.W1, st.m.W1, st.v.W1, lr, bc1, bc2);
  adam_tensor(p.W2, grads.W2, st.m.W2, st.v.W2, lr, bc1, bc2);
  adam_tensor(p.W3, grads.W3, st.m.W3, st.v.W3, lr, bc1, bc2);
  adam_tensor(p.b1, grads.b1, st.m.b1, st.v.b1, lr, bc1, bc2);
  adam_tensor(p.b2, grads.b2, st.m.b2, st.v.b2, lr, bc1, bc2);
  adam_tensor(p.b3, grads.b3, st.m.b3, st.v.b3, lr, bc1, bc2);
  adam_tensor(p.gamma1, grads.gamma1, st.m.gamma1, st.v.gamma1, lr, bc1, bc2);
  adam_tensor(p.beta1, grads.beta1, st.m.beta1, st.v.beta1, lr, bc1, bc2);
  adam_tensor(p.gamma2, grads.gamma2, st.m.gamma2, st.v.gamma2, lr, bc1, bc2);
  adam_tensor(p.beta2, grads.beta2, st.m.beta2, st.v.beta2, lr, bc1, bc2);

  st.m_alpha = kBeta1 * st.m_alpha + (1.0 - kBeta1) * alpha_grad;
  st.v_alpha = kBeta2 * st.v_alpha + (1.0 - kBeta2) * alpha_grad * alpha_grad;
  p.alpha -=
      alpha_lr * (st.m_alpha / bc1) / (std::sqrt(st.v_alpha / bc2) + kAdamEps);
  // Positivity projection keeps the inner update a descent direction.
  p.alpha = std::max(p.alpha, kAlphaFloor);
}

}  // namespace noma::detail
