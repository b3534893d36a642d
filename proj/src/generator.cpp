#include "noma/generator.hpp"

#include <cmath>
#include <string>

#include "noma/errors.hpp"

namespace noma {

namespace {

void check_row(const Row& r, Eigen::Index c, const char* what) {
  if (r.size() != c) {
    throw ConfigError(std::string("generator: ") + what + " has " +
                      std::to_string(r.size()) + " entries, expected " +
                      std::to_string(c));
  }
  if (!r.allFinite()) {
    throw ConfigError(std::string("generator: ") + what + " is not finite");
  }
}

void check_mat(const RMat& m, Eigen::Index r, Eigen::Index c,
               const char* what) {
  if (m.rows() != r || m.cols() != c) {
    throw ConfigError(std::string("generator: ") + what + " is " +
                      std::to_string(m.rows()) + "x" +
                      std::to_string(m.cols()) + ", expected " +
                      std::to_string(r) + "x" + std::to_string(c));
  }
  if (!m.allFinite()) {
    throw ConfigError(std::string("generator: ") + what + " is not finite");
  }
}

RMat gaussian(Eigen::Index r, Eigen::Index c, double sd, rng::Stream& rng) {
  RMat m(r, c);
  for (Eigen::Index j = 0; j < c; ++j) {
    for (Eigen::Index i = 0; i < r; ++i) {
      m(i, j) = sd * rng.normal();
    }
  }
  return m;
}

}  // namespace

void GeneratorHyper::validate() const {
  if (K == 0 || J == 0 || C1 == 0 || C2 == 0) {
    throw ConfigError("generator: K, J, C1, C2 must all be >= 1");
  }
  if (!(leaky_slope >= 0.0) || !(bn_eps > 0.0) || !(bn_momentum > 0.0) ||
      !(bn_momentum <= 1.0)) {
    throw ConfigError("generator: bad hyperparameters (slope >= 0, eps > 0, "
                      "momentum in (0, 1])");
  }
}

void GeneratorModel::validate() const {
  hyper.validate();
  const auto in = static_cast<Eigen::Index>(hyper.in_channels());
  const auto c1 = static_cast<Eigen::Index>(hyper.C1);
  const auto c2 = static_cast<Eigen::Index>(hyper.C2);
  const auto out = static_cast<Eigen::Index>(hyper.out_channels());
  check_mat(params.W1, in, c1, "W1");
  check_mat(params.W2, c1, c2, "W2");
  check_mat(params.W3, c2, out, "W3");
  check_row(params.b1, c1, "b1");
  check_row(params.b2, c2, "b2");
  check_row(params.b3, out, "b3");
  check_row(params.gamma1, c1, "gamma1");
  check_row(params.beta1, c1, "beta1");
  check_row(params.rmean1, c1, "rmean1");
  check_row(params.rvar1, c1, "rvar1");
  check_row(params.gamma2, c2, "gamma2");
  check_row(params.beta2, c2, "beta2");
  check_row(params.rmean2, c2, "rmean2");
  check_row(params.rvar2, c2, "rvar2");
  if ((params.rvar1.array() <= 0.0).any() ||
      (params.rvar2.array() <= 0.0).any()) {
    throw ConfigError("generator: running variances must be > 0");
  }
  if (!(params.alpha > 0.0) || !std::isfinite(params.alpha)) {
    throw ConfigError("generator: alpha must be finite and > 0");
  }
}

GeneratorModel init_generator(const GeneratorHyper& hyper, std::uint64_t seed,
                              double alpha0) {
  hyper.validate();
  if (!(alpha0 > 0.0)) throw ConfigError("generator: alpha0 must be > 0");
  const auto in = static_cast<Eigen::Index>(hyper.in_channels());
  const auto c1 = static_cast<Eigen::Index>(hyper.C1);
  const auto c2 = static_cast<Eigen::Index>(hyper.C2);
  const auto out = static_cast<Eigen::Index>(hyper.out_channels());

  auto rng = rng::derive_stream(seed, rng::StreamTag::kLatent);
  const double gain = 2.0 / (1.0 + hyper.leaky_slope * hyper.leaky_slope);

  GeneratorModel m;
  m.hyper = hyper;
  auto& p = m.params;
  p.W1 = gaussian(in, c1, std::sqrt(gain / static_cast<double>(in)), rng);
  p.W2 = gaussian(c1, c2, std::sqrt(gain / static_cast<double>(c1)), rng);
  p.W3 = gaussian(c2, out, std::sqrt(1.0 / static_cast<double>(c2)), rng);
  p.b1 = Row::Zero(c1);
  p.b2 = Row::Zero(c2);
  p.b3 = Row::Zero(out);
  p.gamma1 = Row::Ones(c1);
  p.beta1 = Row::Zero(c1);
  p.rmean1 = Row::Zero(c1);
  p.rvar1 = Row::Ones(c1);
  p.gamma2 = Row::Ones(c2);
  p.beta2 = Row::Zero(c2);
  p.rmean2 = Row::Zero(c2);
  p.rvar2 = Row::Ones(c2);
  p.alpha = alpha0;
  return m;
}

namespace {

struct BnLayerParams {
  const Row& gamma;
  const Row& beta;
  const Row& rmean;
  const Row& rvar;
};

/// Linear -> LeakyReLU -> BN for one layer over the stacked batch.
void layer_forward(const RMat& x, const RMat& w, const Row& b,
                   const BnLayerParams& bn, double slope, double eps,
                   BnMode mode, Eigen::Index batch, Eigen::Index k,
                   RMat& a, RMat& l, RMat& n, RMat& o, BnStats& stats) {
  a.noalias() = x * w;
  a.rowwise() += b;
  l = (a.array().max(0.0) + slope * a.array().min(0.0)).matrix();

  const auto c = w.cols();
  n.resize(l.rows(), c);
  o.resize(l.rows(), c);
  if (mode == BnMode::kEval) {
    const Row istd = (bn.rvar.array() + eps).rsqrt().matrix();
    n = l.rowwise() - bn.rmean;
    n.array().rowwise() *= istd.array();
    o = (n.array().rowwise() * bn.gamma.array()).matrix();
    o.rowwise() += bn.beta;
    stats.mean.resize(0, 0);
    stats.var.resize(0, 0);
    stats.inv_std.resize(0, 0);
    return;
  }

  stats.mean.resize(batch, c);
  stats.var.resize(batch, c);
  stats.inv_std.resize(batch, c);
  for (Eigen::Index i = 0; i < batch; ++i) {
    auto lb = l.middleRows(i * k, k);
    const Row mean = lb.colwise().mean();
    RMat centered = lb.rowwise() - mean;
    const Row var = centered.array().square().colwise().mean().matrix();
    const Row istd = (var.array() + eps).rsqrt().matrix();
    stats.mean.row(i) = mean;
    stats.var.row(i) = var;
    stats.inv_std.row(i) = istd;
    centered.array().rowwise() *= istd.array();
    n.middleRows(i * k, k) = centered;
  }
  o = (n.array().rowwise() * bn.gamma.array()).matrix();
  o.rowwise() += bn.beta;
}

/// Matching reverse pass; returns d_l. dgamma/dbeta accumulate when given.
RMat layer_backward_bn(const RMat& n, const BnStats& stats, const Row& gamma,
                       const Row& rvar, double eps, BnMode mode,
                       Eigen::Index batch, Eigen::Index k, const RMat& d_o,
                       Row* dgamma, Row* dbeta) {
  if (dgamma) *dgamma += (d_o.array() * n.array()).colwise().sum().matrix();
  if (dbeta) *dbeta += d_o.colwise().sum();

  RMat d_n = (d_o.array().rowwise() * gamma.array()).matrix();
  if (mode == BnMode::kEval) {
    const Row istd = (rvar.array() + eps).rsqrt().matrix();
    d_n.array().rowwise() *= istd.array();
    return d_n;
  }

  // Per-instance batch-norm backward through mean and variance:
  // d_l = istd/K * (K*d_n - sum(d_n) - n .* sum(d_n .* n)).
  RMat d_l(d_n.rows(), d_n.cols());
  const double kd = static_cast<double>(k);
  for (Eigen::Index i = 0; i < batch; ++i) {
    auto dnb = d_n.middleRows(i * k, k);
    auto nb = n.middleRows(i * k, k);
    const Row sum_dn = dnb.colwise().sum();
    const Row sum_dn_n = (dnb.array() * nb.array()).colwise().sum().matrix();
    RMat t = dnb * kd;
    t.rowwise() -= sum_dn;
    t -= (nb.array().rowwise() * sum_dn_n.array()).matrix();
    t.array().rowwise() *= stats.inv_std.row(i).array() / kd;
    d_l.middleRows(i * k, k) = t;
  }
  return d_l;
}

}  // namespace

RMat generator_forward(const GeneratorModel& m, const RMat& z_stacked,
                       Eigen::Index batch, BnMode mode, ForwardCache* cache) {
  const auto k = static_cast<Eigen::Index>(m.hyper.K);
  const auto in = static_cast<Eigen::Index>(m.hyper.in_channels());
  if (batch < 1 || z_stacked.rows() != batch * k || z_stacked.cols() != in) {
    throw ShapeMismatchError(
        "generator_forward: z is " + std::to_string(z_stacked.rows()) + "x" +
        std::to_string(z_stacked.cols()) + ", expected (" +
        std::to_string(batch) + "*" + std::to_string(k) + ")x" +
        std::to_string(in));
  }
  const auto& p = m.params;
  const double slope = m.hyper.leaky_slope;
  const double eps = m.hyper.bn_eps;

  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  c.batch = batch;
  c.k = k;
  c.mode = mode;
  c.z = z_stacked;

  layer_forward(c.z, p.W1, p.b1, {p.gamma1, p.beta1, p.rmean1, p.rvar1},
                slope, eps, mode, batch, k, c.a1, c.l1, c.n1, c.o1, c.s1);
  layer_forward(c.o1, p.W2, p.b2, {p.gamma2, p.beta2, p.rmean2, p.rvar2},
                slope, eps, mode, batch, k, c.a2, c.l2, c.n2, c.o2, c.s2);

  RMat a3 = c.o2 * p.W3;
  a3.rowwise() += p.b3;
  c.out = a3.array().tanh().matrix();
  return c.out;
}

GeneratorGrads GeneratorGrads::zero(const GeneratorHyper& hyper) {
  const auto in = static_cast<Eigen::Index>(hyper.in_channels());
  const auto c1 = static_cast<Eigen::Index>(hyper.C1);
  const auto c2 = static_cast<Eigen::Index>(hyper.C2);
  const auto out = static_cast<Eigen::Index>(hyper.out_channels());
  GeneratorGrads g;
  g.W1 = RMat::Zero(in, c1);
  g.W2 = RMat::Zero(c1, c2);
  g.W3 = RMat::Zero(c2, out);
  g.b1 = Row::Zero(c1);
  g.b2 = Row::Zero(c2);
  g.b3 = Row::Zero(out);
  g.gamma1 = Row::Zero(c1);
  g.beta1 = Row::Zero(c1);
  g.gamma2 = Row::Zero(c2);
  g.beta2 = Row::Zero(c2);
  return g;
}

void GeneratorGrads::add_scaled(const GeneratorGrads& other, double c) {
  W1 += c * other.W1;
  W2 += c * other.W2;
  W3 += c * other.W3;
  b1 += c * other.b1;
  b2 += c * other.b2;
  b3 += c * other.b3;
  gamma1 += c * other.gamma1;
  beta1 += c * other.beta1;
  gamma2 += c * other.gamma2;
  beta2 += c * other.beta2;
}

RMat generator_backward(const GeneratorModel& m, const ForwardCache& c,
                        const RMat& d_out, GeneratorGrads* grads) {
  if (d_out.rows() != c.out.rows() || d_out.cols() != c.out.cols()) {
    throw ShapeMismatchError("generator_backward: d_out is " +
                             std::to_string(d_out.rows()) + "x" +
                             std::to_string(d_out.cols()) + ", cache has " +
                             std::to_string(c.out.rows()) + "x" +
                             std::to_string(c.out.cols()));
  }
  const auto& p = m.params;
  const double slope = m.hyper.leaky_slope;
  const double eps = m.hyper.bn_eps;

  // Tanh output layer.
  const RMat d_a3 =
      (d_out.array() * (1.0 - c.out.array().square())).matrix();
  if (grads) {
    grads->W3.noalias() += c.o2.transpose() * d_a3;
    grads->b3 += d_a3.colwise().sum();
  }
  RMat d_o2 = d_a3 * p.W3.transpose();

  // Layer 2: BN -> LeakyReLU -> linear.
  RMat d_l2 = layer_backward_bn(c.n2, c.s2, p.gamma2, p.rvar2, eps, c.mode,
                                c.batch, c.k, d_o2,
                                grads ? &grads->gamma2 : nullptr,
                                grads ? &grads->beta2 : nullptr);
  const RMat mask2 = c.a2.unaryExpr(
      [slope](double x) { return x >= 0.0 ? 1.0 : slope; });
  const RMat d_a2 = (d_l2.array() * mask2.array()).matrix();
  if (grads) {
    grads->W2.noalias() += c.o1.transpose() * d_a2;
    grads->b2 += d_a2.colwise().sum();
  }
  RMat d_o1 = d_a2 * p.W2.transpose();

  // Layer 1.
  RMat d_l1 = layer_backward_bn(c.n1, c.s1, p.gamma1, p.rvar1, eps, c.mode,
                                c.batch, c.k, d_o1,
                                grads ? &grads->gamma1 : nullptr,
                                grads ? &grads->beta1 : nullptr);
  const RMat mask1 = c.a1.unaryExpr(
      [slope](double x) { return x >= 0.0 ? 1.0 : slope; });
  const RMat d_a1 = (d_l1.array() * mask1.array()).matrix();
  if (grads) {
    grads->W1.noalias() += c.z.transpose() * d_a1;
    grads->b1 += d_a1.colwise().sum();
  }
  return d_a1 * p.W1.transpose();
}

void update_running_stats(GeneratorModel& m, const ForwardCache& c) {
  if (c.mode != BnMode::kTrain || c.s1.mean.rows() == 0) {
    throw ConfigError(
        "update_running_stats: cache must come from a train-mode forward");
  }
  const double mom = m.hyper.bn_momentum;
  auto pool_and_blend = [&](const BnStats& s, Row& rmean, Row& rvar) {
    // Exact pooled statistics over the batch*K rows: every instance block
    // has the same size, so the pooled mean is the mean of means and the
    // pooled variance follows from E[v] = E[v_i + mu_i^2] - mu_bar^2.
    const Row mu = s.mean.colwise().mean();
    const Row second =
        (s.var.array() + s.mean.array().square()).colwise().mean().matrix();
    const Row var = (second.array() - mu.array().square()).max(0.0).matrix();
    rmean = (1.0 - mom) * rmean + mom * mu;
    rvar = (1.0 - mom) * rvar + mom * var;
  };
  pool_and_blend(c.s1, m.params.rmean1, m.params.rvar1);
  pool_and_blend(c.s2, m.params.rmean2, m.params.rvar2);
}

RMat out_to_stack(const RMat& out) {
  const auto k = out.rows();
  if (out.cols() % 2 != 0) {
    throw ShapeMismatchError("out_to_stack: odd channel count " +
                             std::to_string(out.cols()));
  }
  const auto j = out.cols() / 2;
  RMat stack(2 * k, j);
  stack.topRows(k) = out.leftCols(j);
  stack.bottomRows(k) = out.rightCols(j);
  return stack;
}

RMat stack_to_out(const RMat& stack) {
  if (stack.rows() % 2 != 0) {
    throw ShapeMismatchError("stack_to_out: odd row count " +
                             std::to_string(stack.rows()));
  }
  const auto k = stack.rows() / 2;
  const auto j = stack.cols();
  RMat out(k, 2 * j);
  out.leftCols(j) = stack.topRows(k);
  out.rightCols(j) = stack.bottomRows(k);
  return out;
}

linalg::CMat out_to_complex(const RMat& out) {
  if (out.cols() % 2 != 0) {
    throw ShapeMismatchError("out_to_complex: odd channel count " +
                             std::to_string(out.cols()));
  }
  const auto k = out.rows();
  const auto j = out.cols() / 2;
  linalg::CMat x(k, j);
  x.real() = out.leftCols(j);
  x.imag() = out.rightCols(j);
  return x;
}

RMat complex_to_out(const linalg::CMat& x) {
  RMat out(x.rows(), 2 * x.cols());
  out.leftCols(x.cols()) = x.real();
  out.rightCols(x.cols()) = x.imag();
  return out;
}

}  // namespace noma
