#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace noma::ad {

using Mat = Eigen::MatrixXd;

/// Reverse-mode autodiff on real matrices with eager forward evaluation.
///
/// backward() emits the gradient computation as new tape nodes instead of
/// plain matrices, so gradients are themselves differentiable: calling
/// backward() on a scalar built from first-order gradients yields exact
/// second-order derivatives. That is what the fully unrolled meta-training
/// mode relies on; the fast first-order trainer never touches this class.
///
/// Node ids are indices into the tape and always reference earlier nodes,
/// so id order is a valid topological order.
class Tape {
 public:
  using Id = std::int32_t;
  static constexpr Id kNone = -1;

  /// Differentiable leaf.
  Id input(Mat v);
  /// Non-differentiable leaf (gradient is treated as zero).
  Id constant(Mat v);
  Id scalar_const(double v);

  Id add(Id a, Id b);
  Id sub(Id a, Id b);
  Id neg(Id a);
  /// Elementwise product.
  Id mul(Id a, Id b);
  Id matmul(Id a, Id b);
  Id transpose(Id a);
  Id scale_const(Id a, double c);
  Id add_const(Id a, double c);
  /// Product with a 1x1 tape scalar.
  Id scale(Id a, Id s);
  /// 1xC row replicated to n rows.
  Id broadcast_row(Id a, Eigen::Index n);
  Id sum_rows(Id a);
  Id mean_rows(Id a);
  Id sum_all(Id a);
  /// Rows [r0, r0+nr) as a new matrix.
  Id rows_block(Id a, Eigen::Index r0, Eigen::Index nr);
  /// Embeds a at row r0 of an otherwise-zero (total x cols) matrix.
  Id pad_rows(Id a, Eigen::Index r0, Eigen::Index total);
  Id vstack(Id a, Id b);
  Id tanh(Id a);
  Id leaky_relu(Id a, double slope);
  Id square(Id a);
  /// Elementwise (x + eps)^(-1/2); eps >= 0.
  Id inv_sqrt_eps(Id a, double eps);
  /// Elementwise sqrt(x); caller guarantees x > 0 wherever a gradient is
  /// needed.
  Id sqrt(Id a);

  /// Columns [c0, c0+nc); composed from transpose + rows_block.
  Id cols_block(Id a, Eigen::Index c0, Eigen::Index nc);
  /// Frobenius norm as a 1x1 scalar.
  Id frob_norm(Id a);

  const Mat& value(Id id) const;
  std::size_t size() const { return nodes_.size(); }

  /// Gradients of the 1x1 scalar `root` with respect to each id in `wrt`,
  /// as new tape nodes. Entries with no path to root come back as zero
  /// constants of the operand's shape.
  std::vector<Id> backward(Id root, const std::vector<Id>& wrt);

 private:
  enum class Op : std::uint8_t {
    kInput, kConst, kAdd, kSub, kNeg, kMul, kMatmul, kTranspose,
    kScaleConst, kAddConst, kScale, kBroadcastRow, kSumRows, kMeanRows,
    kSumAll, kRowsBlock, kPadRows, kVstack, kTanh, kLeakyRelu, kSquare,
    kInvSqrtEps, kSqrt,
  };

  struct Node {
    Op op;
    Id a = kNone;
    Id b = kNone;
    double c = 0.0;       // op-specific constant (slope, eps, scalar, r0...)
    double c2 = 0.0;      // second constant where needed
    Mat value;
    bool diff = false;    // reachable from an input leaf
  };

  Id push(Node n);
  const Node& node(Id id) const;
  void check(Id id) const;

  std::vector<Node> nodes_;
};

}  // namespace noma::ad
