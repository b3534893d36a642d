#include "noma/autodiff.hpp"

#include <cmath>
#include <string>
#include <unordered_map>

#include "noma/errors.hpp"

namespace noma::ad {

namespace {

std::string shape_of(const Mat& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

Tape::Id Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<Id>(nodes_.size() - 1);
}

const Tape::Node& Tape::node(Id id) const {
  check(id);
  return nodes_[static_cast<std::size_t>(id)];
}

void Tape::check(Id id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) {
    throw Error("autodiff: invalid node id " + std::to_string(id));
  }
}

const Mat& Tape::value(Id id) const { return node(id).value; }

Tape::Id Tape::input(Mat v) {
  Node n;
  n.op = Op::kInput;
  n.value = std::move(v);
  n.diff = true;
  return push(std::move(n));
}

Tape::Id Tape::constant(Mat v) {
  Node n;
  n.op = Op::kConst;
  n.value = std::move(v);
  return push(std::move(n));
}

Tape::Id Tape::scalar_const(double v) {
  Mat m(1, 1);
  m(0, 0) = v;
  return constant(std::move(m));
}

Tape::Id Tape::add(Id a, Id b) {
  const auto& na = node(a);
  const auto& nb = node(b);
  if (na.value.rows() != nb.value.rows() ||
      na.value.cols() != nb.value.cols()) {
    throw ShapeMismatchError("autodiff add: " + shape_of(na.value) + " vs " +
                             shape_of(nb.value));
  }
  Node n;
  n.op = Op::kAdd;
  n.a = a;
  n.b = b;
  n.value = na.value + nb.value;
  n.diff = na.diff || nb.diff;
  return push(std::move(n));
}

Tape::Id Tape::sub(Id a, Id b) {
  const auto& na = node(a);
  const auto& nb = node(b);
  if (na.value.rows() != nb.value.rows() ||
      na.value.cols() != nb.value.cols()) {
    throw ShapeMismatchError("autodiff sub: " + shape_of(na.value) + " vs " +
                             shape_of(nb.value));
  }
  Node n;
  n.op = Op::kSub;
  n.a = a;
  n.b = b;
  n.value = na.value - nb.value;
  n.diff = na.diff || nb.diff;
  return push(std::move(n));
}

Tape::Id Tape::neg(Id a) {
  const auto& na = node(a);
  Node n;
  n.op = Op::kNeg;
  n.a = a;
  n.value = -na.value;
  n.diff = na.diff;
  return push(std::move(n));
}

Tape::Id Tape::mul(Id a, Id b) {
  const auto& na = node(a);
  const auto& nb = node(b);
  if (na.value.rows() != nb.value.rows() ||
      na.value.cols() != nb.value.cols()) {
    throw ShapeMismatchError("autodiff mul: " + shape_of(na.value) + " vs " +
                             shape_of(nb.value));
  }
  Node n;
  n.op = Op::kMul;
  n.a = a;
  n.b = b;
  n.value = na.value.cwiseProduct(nb.value);
  n.diff = na.diff || nb.diff;
  return push(std::move(n));
}

Tape::Id Tape::matmul(Id a, Id b) {
  const auto& na = node(a);
  const auto& nb = node(b);
  if (na.value.cols() != nb.value.rows()) {
    throw ShapeMismatchError("autodiff matmul: " + shape_of(na.value) +
                             " vs " + shape_of(nb.value));
  }
  Node n;
  n.op = Op::kMatmul;
  n.a = a;
  n.b = b;
  n.value = na.value * nb.value;
  n.diff = na.diff || nb.diff;
  return push(std::move(n));
}

Tape::Id Tape::transpose(Id a) {
  const auto& na = node(a);
  Node n;
  n.op = Op::kTranspose;
  n.a = a;
  n.value = na.value.transpose();
  n.diff = na.diff;
  return push(std::move(n));
}

Tape::Id Tape::scale_const(Id a, double c) {
  const auto& na = node(a);
  Node n;
  n.op = Op::kScaleConst;
  n.a = a;
  n.c = c;
  n.value = na.value * c;
  n.diff = na.diff;
  return push(std::move(n));
}

Tape::Id Tape::add_const(Id a, double c) {
  const auto& na = node(a);
  Node n;
  n.op = Op::kAddConst;
  n.a = a;
  n.c = c;
  n.value = (na.value.array() + c).matrix();
  n.diff = na.diff;
  return push(std::move(n));
}

Tape::Id Tape::scale(Id a, Id s) {
  const auto& na = node(a);
  const auto& ns = node(s);
  if (ns.value.rows() != 1 || ns.value.cols() != 1) {
    throw ShapeMismatchError("autodiff scale: scalar operand is " +
                             shape_of(ns.value));
  }
  Node n;
  n.op = Op::kScale;
  n.a = a;
  n.b = s;
  n.value = na.value * ns.value(0, 0);
  n.diff = na.diff || ns.diff;
  return push(std::move(n));
}

Tape::Id Tape::broadcast_row(Id a, Eigen::Index rows) {
  const auto& na = node(a);
  if (na.value.rows() != 1) {
    throw ShapeMismatchError("autodiff broadcast_row: operand is " +
                             shape_of(na.value));
  }
  Node n;
  n.op = Op::kBroadcastRow;
  n.a = a;
  n.c = static_cast<double>(rows);
  n.value = na.value.replicate(rows, 1);
  n.diff = na.diff;
  return push(std::move(n));
}

Tape::Id Tape::sum_rows(Id a) {
  const auto& na = node(a);
  Node n;
  n.op = Op::kSumRows;
  n.a = a;
  n.value = na.value.colwise().sum();
  n.diff = na.diff;
  return push(std::move(n));
}

Tape::Id Tape::mean_rows(Id a) {
  const auto& na = node(a);
  Node n;
  n.op = Op::kMeanRows;
  n.a = a;
  n.value = na.value.colwise().mean();
  n.diff = na.diff;
  return push(std::move(n));
}

Tape::Id Tape::sum_all(Id a) {
  const auto& na = node(a);
  Node n;
  n.op = Op::kSumAll;
  n.a = a;
  n.value = Mat(1, 1);
  n.value(0, 0) = na.value.sum();
  n.diff = na.diff;
  return push(std::move(n));
}

Tape::Id Tape::rows_block(Id a, Eigen::Index r0, Eigen::Index nr) {
  const auto& na = node(a);
  if (r0 < 0 || nr < 0 || r0 + nr > na.value.rows()) {
    throw ShapeMismatchError("autodiff rows_block: [" + std::to_string(r0) +
                             ", " + std::to_string(r0 + nr) + ") of " +
                             shape_of(na.value));
  }
  Node n;
  n.op = Op::kRowsBlock;
  n.a = a;
  n.c = static_cast<double>(r0);
  n.c2 = static_cast<double>(na.value.rows());
  n.value = na.value.middleRows(r0, nr);
  n.diff = na.diff;
  return push(std::move(n));
}

Tape::Id Tape::pad_rows(Id a, Eigen::Index r0, Eigen::Index total) {
  const auto& na = node(a);
  if (r0 < 0 || r0 + na.value.rows() > total) {
    throw ShapeMismatchError("autodiff pad_rows: block " + shape_of(na.value) +
                             " at row " + std::to_string(r0) + " of " +
                             std::to_string(total));
  }
  Node n;
  n.op = Op::kPadRows;
  n.a = a;
  n.c = static_cast<double>(r0);
  n.value = Mat::Zero(total, na.value.cols());
  n.value.middleRows(r0, na.value.rows()) = na.value;
  n.diff = na.diff;
  return push(std::move(n));
}

Tape::Id Tape::vstack(Id a, Id b) {
  const auto& na = node(a);
  const auto& nb = node(b);
  if (na.value.cols() != nb.value.cols()) {
    throw ShapeMismatchError("autodiff vstack: " + shape_of(na.value) +
                             " vs " + shape_of(nb.value));
  }
  Node n;
  n.op = Op::kVstack;
  n.a = a;
  n.b = b;
  n.c = static_cast<double>(na.value.rows());
  n.value = Mat(na.value.rows() + nb.value.rows(), na.value.cols());
  n.value.topRows(na.value.rows()) = na.value;
  n.value.bottomRows(nb.value.rows()) = nb.value;
  n.diff = na.diff || nb.diff;
  return push(std::move(n));
}

Tape::Id Tape::tanh(Id a) {
  const auto& na = node(a);
  Node n;
  n.op = Op::kTanh;
  n.a = a;
  n.value = na.value.array().tanh().matrix();
  n.diff = na.diff;
  return push(std::move(n));
}

Tape::Id Tape::leaky_relu(Id a, double slope) {
  const auto& na = node(a);
  Node n;
  n.op = Op::kLeakyRelu;
  n.a = a;
  n.c = slope;
  n.value = (na.value.array().max(0.0) + slope * na.value.array().min(0.0))
                .matrix();
  n.diff = na.diff;
  return push(std::move(n));
}

Tape::Id Tape::square(Id a) {
  const auto& na = node(a);
  Node n;
  n.op = Op::kSquare;
  n.a = a;
  n.value = na.value.array().square().matrix();
  n.diff = na.diff;
  return push(std::move(n));
}

Tape::Id Tape::inv_sqrt_eps(Id a, double eps) {
  const auto& na = node(a);
  if (eps < 0.0) throw ConfigError("autodiff inv_sqrt_eps: eps must be >= 0");
  Node n;
  n.op = Op::kInvSqrtEps;
  n.a = a;
  n.c = eps;
  n.value = (na.value.array() + eps).rsqrt().matrix();
  n.diff = na.diff;
  return push(std::move(n));
}

Tape::Id Tape::sqrt(Id a) {
  const auto& na = node(a);
  Node n;
  n.op = Op::kSqrt;
  n.a = a;
  n.value = na.value.array().sqrt().matrix();
  n.diff = na.diff;
  return push(std::move(n));
}

Tape::Id Tape::cols_block(Id a, Eigen::Index c0, Eigen::Index nc) {
  return transpose(rows_block(transpose(a), c0, nc));
}

Tape::Id Tape::frob_norm(Id a) {
  return sqrt(sum_all(square(a)));
}

std::vector<Tape::Id> Tape::backward(Id root, const std::vector<Id>& wrt) {
  const auto& rn = node(root);
  if (rn.value.rows() != 1 || rn.value.cols() != 1) {
    throw ShapeMismatchError("autodiff backward: root is " +
                             shape_of(rn.value) + ", expected 1x1");
  }
  for (Id w : wrt) check(w);

  // Gradient accumulator per node; kNone means "no contribution yet".
  // Only ids <= root existed at entry, but the map also picks up backward
  // nodes of earlier backward() calls when differentiating them again.
  std::unordered_map<Id, Id> grad;
  grad[root] = scalar_const(1.0);

  auto accumulate = [&](Id target, Id g) {
    if (!node(target).diff) return;  // constants absorb gradients
    auto it = grad.find(target);
    if (it == grad.end()) {
      grad[target] = g;
    } else {
      it->second = add(it->second, g);
    }
  };

  // Reverse topological sweep. Nodes appended during the sweep (gradient
  // subgraph) have ids greater than `root` and are skipped by construction.
  for (Id id = root; id >= 0; --id) {
    const auto it = grad.find(id);
    if (it == grad.end()) continue;
    const Id g = it->second;
    // Copy the node header: `nodes_` may reallocate while emitting.
    const Node cur = nodes_[static_cast<std::size_t>(id)];
    if (!cur.diff) continue;
    switch (cur.op) {
      case Op::kInput:
      case Op::kConst:
        break;
      case Op::kAdd:
        accumulate(cur.a, g);
        accumulate(cur.b, g);
        break;
      case Op::kSub:
        accumulate(cur.a, g);
        accumulate(cur.b, neg(g));
        break;
      case Op::kNeg:
        accumulate(cur.a, neg(g));
        break;
      case Op::kMul:
        accumulate(cur.a, mul(g, cur.b));
        accumulate(cur.b, mul(g, cur.a));
        break;
      case Op::kMatmul:
        accumulate(cur.a, matmul(g, transpose(cur.b)));
        accumulate(cur.b, matmul(transpose(cur.a), g));
        break;
      case Op::kTranspose:
        accumulate(cur.a, transpose(g));
        break;
      case Op::kScaleConst:
        accumulate(cur.a, scale_const(g, cur.c));
        break;
      case Op::kAddConst:
        accumulate(cur.a, g);
        break;
      case Op::kScale:
        accumulate(cur.a, scale(g, cur.b));
        accumulate(cur.b, sum_all(mul(g, cur.a)));
        break;
      case Op::kBroadcastRow:
        accumulate(cur.a, sum_rows(g));
        break;
      case Op::kSumRows:
        accumulate(cur.a, broadcast_row(
                              g, node(cur.a).value.rows()));
        break;
      case Op::kMeanRows: {
        const auto nr = node(cur.a).value.rows();
        accumulate(cur.a, scale_const(broadcast_row(g, nr),
                                      1.0 / static_cast<double>(nr)));
        break;
      }
      case Op::kSumAll: {
        const auto& av = node(cur.a).value;
        accumulate(cur.a, scale(constant(Mat::Ones(av.rows(), av.cols())), g));
        break;
      }
      case Op::kRowsBlock:
        accumulate(cur.a,
                   pad_rows(g, static_cast<Eigen::Index>(cur.c),
                            static_cast<Eigen::Index>(cur.c2)));
        break;
      case Op::kPadRows:
        accumulate(cur.a,
                   rows_block(g, static_cast<Eigen::Index>(cur.c),
                              node(cur.a).value.rows()));
        break;
      case Op::kVstack: {
        const auto top = static_cast<Eigen::Index>(cur.c);
        accumulate(cur.a, rows_block(g, 0, top));
        accumulate(cur.b, rows_block(g, top, cur.value.rows() - top));
        break;
      }
      case Op::kTanh: {
        // d tanh = 1 - tanh^2, written against the output node so the rule
        // stays differentiable for second-order sweeps.
        const Id one_minus = add_const(neg(square(id)), 1.0);
        accumulate(cur.a, mul(g, one_minus));
        break;
      }
      case Op::kLeakyRelu: {
        const auto& av = node(cur.a).value;
        Mat mask = av.unaryExpr(
            [s = cur.c](double x) { return x >= 0.0 ? 1.0 : s; });
        accumulate(cur.a, mul(g, constant(std::move(mask))));
        break;
      }
      case Op::kSquare:
        accumulate(cur.a, mul(g, scale_const(cur.a, 2.0)));
        break;
      case Op::kInvSqrtEps: {
        // d/dx (x+eps)^(-1/2) = -1/2 (x+eps)^(-3/2) = -1/2 out^3.
        const Id cubed = mul(id, square(id));
        accumulate(cur.a, mul(g, scale_const(cubed, -0.5)));
        break;
      }
      case Op::kSqrt: {
        // d sqrt = 1/(2 sqrt(x)); reuses the inverse-root primitive.
        accumulate(cur.a, mul(g, scale_const(inv_sqrt_eps(cur.a, 0.0), 0.5)));
        break;
      }
    }
  }

  std::vector<Id> out;
  out.reserve(wrt.size());
  for (Id w : wrt) {
    const auto it = grad.find(w);
    if (it != grad.end()) {
      out.push_back(it->second);
    } else {
      const auto& wv = node(w).value;
      out.push_back(constant(Mat::Zero(wv.rows(), wv.cols())));
    }
  }
  return out;
}

}  // namespace noma::ad
