#pragma once

// Reverse-mode differentiation over dense rank<=2 tensors.
//
// A Tape records every forward op in creation order, which is already a
// topological order. backward() walks the records once in reverse and
// accumulates adjoints. Values enter the tape either as parameters (which
// receive gradients) or as constants (which never do).
//
//   Tape tape;
//   Var w = tape.parameter(Tensor::scalar(0.0));
//   Var x = tape.constant(Tensor::scalar(1.0));
//   Gradients g = tape.backward(sigmoid(w * x));
//   g.of(w).item();  // 0.25
//
// Broadcasting is limited to scalar-tensor pairs. Row-wise bias addition is
// its own op (add_row).

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "dpa/tensor.hpp"

namespace dpa::ad {

inline constexpr double kEpsLog = 1e-7;

enum class OpKind : std::uint8_t {
  kParameter,
  kConstant,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kNeg,
  kMatMul,
  kAddRow,
  kSum,
  kMean,
  kSumRows,
  kMeanRows,
  kSigmoid,
  kSoftplus,
  kTanh,
  kLog,
  kLogProb,
  kLog1m,
  kPow,
  kAbs,
  kSqrt,
  kL2NormRows,
  kSelectRows,
  kConcatRows,
  kSoftmaxXent,
  kGrl,
  kDetach,
};

const char* op_name(OpKind kind);

using NodeId = std::uint32_t;

class Tape;

// Lightweight handle to a node on a tape. Copyable; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, NodeId id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  Shape shape() const { return value().shape(); }
  double item() const { return value().item(); }
  NodeId id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }
  bool requires_grad() const;

 private:
  Tape* tape_ = nullptr;
  NodeId id_ = 0;
};

// d loss / d parameter for every parameter reachable from the loss.
class Gradients {
 public:
  // Zero tensor of the parameter's shape when the parameter did not
  // influence the loss.
  Tensor of(const Var& param) const;
  bool contains(const Var& param) const { return grads_.contains(param.id()); }
  std::size_t size() const { return grads_.size(); }

 private:
  friend class Tape;
  const Tape* tape_ = nullptr;
  std::unordered_map<NodeId, Tensor> grads_;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var parameter(Tensor value);
  Var constant(Tensor value);
  Var constant(double value) { return constant(Tensor::scalar(value)); }

  // Loss must be 1x1.
  Gradients backward(const Var& loss) const;

  std::size_t size() const { return nodes_.size(); }
  const Tensor& value(NodeId id) const { return nodes_[id].value; }
  bool requires_grad(NodeId id) const { return nodes_[id].requires_grad; }
  OpKind kind(NodeId id) const { return nodes_[id].kind; }

  struct Node {
    OpKind kind;
    NodeId a = 0;
    NodeId b = 0;
    Tensor value;
    double attr = 0.0;
    std::vector<std::size_t> index;  // selected rows / class labels / concat split
    Tensor saved;                    // op-specific cache (softmax probabilities)
    bool requires_grad = false;
  };

  // Used by the op functions; not part of the user-facing surface.
  Var push(Node node);
  void check_same(const Var& a, const Var& b, const char* op) const;

 private:
  void accumulate(std::vector<Tensor>& adj, std::vector<bool>& has, NodeId id,
                  const Tensor& g) const;

  std::vector<Node> nodes_;
};

// Elementwise arithmetic; one side may be 1x1 and is broadcast.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var neg(const Var& a);

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator-(const Var& a);
Var operator+(double a, const Var& b);
Var operator+(const Var& a, double b);
Var operator-(double a, const Var& b);
Var operator-(const Var& a, double b);
Var operator*(double a, const Var& b);
Var operator*(const Var& a, double b);

Var matmul(const Var& a, const Var& b);
// m x n plus a 1 x n row added to every row.
Var add_row(const Var& m, const Var& row);

Var sum(const Var& a);
Var mean(const Var& a);
// Reduce over rows: n x c -> 1 x c.
Var sum_rows(const Var& a);
Var mean_rows(const Var& a);

Var sigmoid(const Var& a);
Var softplus(const Var& a);
Var tanh(const Var& a);
// log(max(x, eps_log)).
Var log(const Var& a);
// log(clamp(x, eps_log, 1 - eps_log)) for probabilities.
Var log_prob(const Var& a);
// log(1 - clamp(x, eps_log, 1 - eps_log)).
Var log1m(const Var& a);
Var pow(const Var& a, double exponent);
Var abs(const Var& a);
Var sqrt(const Var& a);
// Euclidean norm of each row: n x c -> n x 1.
Var l2_norm_rows(const Var& a);

Var select_rows(const Var& a, std::span<const std::size_t> rows);
Var concat_rows(const Var& top, const Var& bottom);

// Mean cross-entropy of row-wise softmax(logits) against integer labels.
Var softmax_cross_entropy(const Var& logits, std::span<const std::size_t> labels);

// Identity forward; backward multiplies the incoming gradient by -lambda.
Var grl(const Var& a, double lambda = 1.0);
// Identity forward; blocks all gradient to a's producers.
Var detach(const Var& a);

}  // namespace dpa::ad
