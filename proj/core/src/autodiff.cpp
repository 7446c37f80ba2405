#include "dpa/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dpa/errors.hpp"

namespace dpa::ad {

namespace {

bool is_one(Shape s) { return s.rows == 1 && s.cols == 1; }

Shape broadcast_shape(const char* op, Shape a, Shape b) {
  if (a == b) return a;
  if (is_one(a)) return b;
  if (is_one(b)) return a;
  throw ShapeError(op, a, b);
}

// Element i of t when t is broadcast to n elements.
double at(const Tensor& t, std::size_t i) { return t.size() == 1 ? t[0] : t[i]; }

// Folds a full-shape gradient back onto a possibly-broadcast operand.
Tensor reduce_to(const Tensor& g, Shape target) {
  if (g.shape() == target) return g;
  double s = 0.0;
  for (double v : g.values()) s += v;
  return Tensor::scalar(s);
}

template <typename F>
Tensor map(const Tensor& x, F f) {
  Tensor out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return out;
}

template <typename F>
Tensor zip(const char* op, const Tensor& a, const Tensor& b, F f) {
  const Shape s = broadcast_shape(op, a.shape(), b.shape());
  Tensor out(s.rows, s.cols);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(at(a, i), at(b, i));
  return out;
}

double clamp_prob(double x) { return std::clamp(x, kEpsLog, 1.0 - kEpsLog); }
bool interior_prob(double x) { return x >= kEpsLog && x <= 1.0 - kEpsLog; }

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

Tape* tape_of(const Var& a) {
  if (!a.valid()) throw std::invalid_argument("autodiff: use of an unbound Var");
  return a.tape();
}

Var unary(OpKind kind, const Var& a, Tensor value, double attr = 0.0) {
  Tape::Node n{kind, a.id(), 0, std::move(value), attr, {}, {}, a.requires_grad()};
  return tape_of(a)->push(std::move(n));
}

Var binary(OpKind kind, const Var& a, const Var& b, Tensor value) {
  tape_of(a)->check_same(a, b, op_name(kind));
  Tape::Node n{kind, a.id(), b.id(), std::move(value), 0.0, {}, {},
               a.requires_grad() || b.requires_grad()};
  return tape_of(a)->push(std::move(n));
}

Tensor transpose_matmul_lhs(const Tensor& a, const Tensor& g) {
  // a^T g : (k x m)(m x n) -> k x n
  Tensor out(a.cols(), g.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t p = 0; p < a.cols(); ++p) {
      const double av = a(i, p);
      if (av == 0.0) continue;
      for (std::size_t j = 0; j < g.cols(); ++j) out(p, j) += av * g(i, j);
    }
  }
  return out;
}

Tensor matmul_transpose_rhs(const Tensor& g, const Tensor& b) {
  // g b^T : (m x n)(n x k) -> m x k
  Tensor out(g.rows(), b.rows());
  for (std::size_t i = 0; i < g.rows(); ++i) {
    for (std::size_t p = 0; p < b.rows(); ++p) {
      double s = 0.0;
      for (std::size_t j = 0; j < g.cols(); ++j) s += g(i, j) * b(p, j);
      out(i, p) = s;
    }
  }
  return out;
}

}  // namespace

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kParameter: return "parameter";
    case OpKind::kConstant: return "constant";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kDiv: return "div";
    case OpKind::kNeg: return "neg";
    case OpKind::kMatMul: return "matmul";
    case OpKind::kAddRow: return "add_row";
    case OpKind::kSum: return "sum";
    case OpKind::kMean: return "mean";
    case OpKind::kSumRows: return "sum_rows";
    case OpKind::kMeanRows: return "mean_rows";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kSoftplus: return "softplus";
    case OpKind::kTanh: return "tanh";
    case OpKind::kLog: return "log";
    case OpKind::kLogProb: return "log_prob";
    case OpKind::kLog1m: return "log1m";
    case OpKind::kPow: return "pow";
    case OpKind::kAbs: return "abs";
    case OpKind::kSqrt: return "sqrt";
    case OpKind::kL2NormRows: return "l2_norm_rows";
    case OpKind::kSelectRows: return "select_rows";
    case OpKind::kConcatRows: return "concat_rows";
    case OpKind::kSoftmaxXent: return "softmax_cross_entropy";
    case OpKind::kGrl: return "grl";
    case OpKind::kDetach: return "detach";
  }
  return "unknown";
}

const Tensor& Var::value() const { return tape_of(*this)->value(id_); }
bool Var::requires_grad() const { return tape_of(*this)->requires_grad(id_); }

Tensor Gradients::of(const Var& param) const {
  if (auto it = grads_.find(param.id()); it != grads_.end()) return it->second;
  const Shape s = param.shape();
  return Tensor(s.rows, s.cols);
}

Var Tape::parameter(Tensor value) {
  return push(Node{OpKind::kParameter, 0, 0, std::move(value), 0.0, {}, {}, true});
}

Var Tape::constant(Tensor value) {
  return push(Node{OpKind::kConstant, 0, 0, std::move(value), 0.0, {}, {}, false});
}

Var Tape::push(Node node) {
  if (!node.value.all_finite()) {
    throw NumericError(std::string(op_name(node.kind)) + ": non-finite forward value");
  }
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<NodeId>(nodes_.size() - 1));
}

void Tape::check_same(const Var& a, const Var& b, const char* op) const {
  if (a.tape() != this || b.tape() != this) {
    throw std::invalid_argument(std::string(op) + ": operands live on different tapes");
  }
}

void Tape::accumulate(std::vector<Tensor>& adj, std::vector<bool>& has, NodeId id,
                      const Tensor& g) const {
  if (!nodes_[id].requires_grad) return;
  if (has[id]) {
    adj[id] += g;
  } else {
    adj[id] = g;
    has[id] = true;
  }
}

Gradients Tape::backward(const Var& loss) const {
  if (loss.tape() != this) throw std::invalid_argument("backward: loss belongs to another tape");
  if (nodes_.empty()) throw std::invalid_argument("backward: empty tape");
  if (!loss.value().is_scalar()) {
    throw ShapeError("backward: loss must be (1x1), got " + loss.shape().str());
  }

  std::vector<Tensor> adj(loss.id() + 1);
  std::vector<bool> has(loss.id() + 1, false);
  Gradients out;
  out.tape_ = this;
  if (!nodes_[loss.id()].requires_grad) return out;
  adj[loss.id()] = Tensor::scalar(1.0);
  has[loss.id()] = true;

  for (std::size_t k = loss.id() + 1; k-- > 0;) {
    if (!has[k]) continue;
    const Node& n = nodes_[k];
    const Tensor& g = adj[k];
    const Tensor& y = n.value;
    const Tensor& a = nodes_[n.a].value;
    const Tensor& b = nodes_[n.b].value;

    switch (n.kind) {
      case OpKind::kParameter:
        out.grads_.emplace(static_cast<NodeId>(k), g);
        break;
      case OpKind::kConstant:
      case OpKind::kDetach:
        break;
      case OpKind::kAdd:
        accumulate(adj, has, n.a, reduce_to(g, a.shape()));
        accumulate(adj, has, n.b, reduce_to(g, b.shape()));
        break;
      case OpKind::kSub:
        accumulate(adj, has, n.a, reduce_to(g, a.shape()));
        accumulate(adj, has, n.b, reduce_to(map(g, [](double v) { return -v; }), b.shape()));
        break;
      case OpKind::kMul: {
        Tensor ga(g.rows(), g.cols()), gb(g.rows(), g.cols());
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga[i] = g[i] * at(b, i);
          gb[i] = g[i] * at(a, i);
        }
        accumulate(adj, has, n.a, reduce_to(ga, a.shape()));
        accumulate(adj, has, n.b, reduce_to(gb, b.shape()));
        break;
      }
      case OpKind::kDiv: {
        Tensor ga(g.rows(), g.cols()), gb(g.rows(), g.cols());
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double bv = at(b, i);
          ga[i] = g[i] / bv;
          gb[i] = -g[i] * at(a, i) / (bv * bv);
        }
        accumulate(adj, has, n.a, reduce_to(ga, a.shape()));
        accumulate(adj, has, n.b, reduce_to(gb, b.shape()));
        break;
      }
      case OpKind::kNeg:
        accumulate(adj, has, n.a, map(g, [](double v) { return -v; }));
        break;
      case OpKind::kMatMul:
        if (nodes_[n.a].requires_grad) accumulate(adj, has, n.a, matmul_transpose_rhs(g, b));
        if (nodes_[n.b].requires_grad) accumulate(adj, has, n.b, transpose_matmul_lhs(a, g));
        break;
      case OpKind::kAddRow: {
        accumulate(adj, has, n.a, g);
        Tensor gr(1, g.cols());
        for (std::size_t r = 0; r < g.rows(); ++r) {
          for (std::size_t c = 0; c < g.cols(); ++c) gr(0, c) += g(r, c);
        }
        accumulate(adj, has, n.b, gr);
        break;
      }
      case OpKind::kSum:
      case OpKind::kMean: {
        const double scale = n.kind == OpKind::kMean ? 1.0 / static_cast<double>(a.size()) : 1.0;
        accumulate(adj, has, n.a, Tensor(a.rows(), a.cols(), g.item() * scale));
        break;
      }
      case OpKind::kSumRows:
      case OpKind::kMeanRows: {
        const double scale =
            n.kind == OpKind::kMeanRows ? 1.0 / static_cast<double>(a.rows()) : 1.0;
        Tensor ga(a.rows(), a.cols());
        for (std::size_t r = 0; r < a.rows(); ++r) {
          for (std::size_t c = 0; c < a.cols(); ++c) ga(r, c) = g(0, c) * scale;
        }
        accumulate(adj, has, n.a, ga);
        break;
      }
      case OpKind::kSigmoid: {
        Tensor ga(g.rows(), g.cols());
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] = g[i] * y[i] * (1.0 - y[i]);
        accumulate(adj, has, n.a, ga);
        break;
      }
      case OpKind::kSoftplus: {
        Tensor ga(g.rows(), g.cols());
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] = g[i] * stable_sigmoid(a[i]);
        accumulate(adj, has, n.a, ga);
        break;
      }
      case OpKind::kTanh: {
        Tensor ga(g.rows(), g.cols());
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] = g[i] * (1.0 - y[i] * y[i]);
        accumulate(adj, has, n.a, ga);
        break;
      }
      case OpKind::kLog: {
        Tensor ga(g.rows(), g.cols());
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] = a[i] >= kEpsLog ? g[i] / a[i] : 0.0;
        accumulate(adj, has, n.a, ga);
        break;
      }
      case OpKind::kLogProb: {
        Tensor ga(g.rows(), g.cols());
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga[i] = interior_prob(a[i]) ? g[i] / a[i] : 0.0;
        }
        accumulate(adj, has, n.a, ga);
        break;
      }
      case OpKind::kLog1m: {
        Tensor ga(g.rows(), g.cols());
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga[i] = interior_prob(a[i]) ? -g[i] / (1.0 - a[i]) : 0.0;
        }
        accumulate(adj, has, n.a, ga);
        break;
      }
      case OpKind::kPow: {
        Tensor ga(g.rows(), g.cols());
        const double e = n.attr;
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga[i] = (a[i] == 0.0 && e > 1.0) ? 0.0 : g[i] * e * std::pow(a[i], e - 1.0);
        }
        accumulate(adj, has, n.a, ga);
        break;
      }
      case OpKind::kAbs: {
        Tensor ga(g.rows(), g.cols());
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga[i] = a[i] > 0.0 ? g[i] : (a[i] < 0.0 ? -g[i] : 0.0);
        }
        accumulate(adj, has, n.a, ga);
        break;
      }
      case OpKind::kSqrt: {
        Tensor ga(g.rows(), g.cols());
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] = y[i] > 0.0 ? g[i] / (2.0 * y[i]) : 0.0;
        accumulate(adj, has, n.a, ga);
        break;
      }
      case OpKind::kL2NormRows: {
        Tensor ga(a.rows(), a.cols());
        for (std::size_t r = 0; r < a.rows(); ++r) {
          if (y(r, 0) <= 0.0) continue;
          const double s = g(r, 0) / y(r, 0);
          for (std::size_t c = 0; c < a.cols(); ++c) ga(r, c) = s * a(r, c);
        }
        accumulate(adj, has, n.a, ga);
        break;
      }
      case OpKind::kSelectRows: {
        Tensor ga(a.rows(), a.cols());
        for (std::size_t r = 0; r < n.index.size(); ++r) {
          for (std::size_t c = 0; c < a.cols(); ++c) ga(n.index[r], c) += g(r, c);
        }
        accumulate(adj, has, n.a, ga);
        break;
      }
      case OpKind::kConcatRows: {
        const std::size_t split = a.rows();
        Tensor ga(a.rows(), a.cols()), gb(b.rows(), b.cols());
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] = g[i];
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] = g[split * a.cols() + i];
        accumulate(adj, has, n.a, ga);
        accumulate(adj, has, n.b, gb);
        break;
      }
      case OpKind::kSoftmaxXent: {
        const Tensor& probs = n.saved;
        const double scale = g.item() / static_cast<double>(probs.rows());
        Tensor ga(probs.rows(), probs.cols());
        for (std::size_t r = 0; r < probs.rows(); ++r) {
          for (std::size_t c = 0; c < probs.cols(); ++c) {
            ga(r, c) = scale * (probs(r, c) - (n.index[r] == c ? 1.0 : 0.0));
          }
        }
        accumulate(adj, has, n.a, ga);
        break;
      }
      case OpKind::kGrl: {
        const double lambda = n.attr;
        accumulate(adj, has, n.a, map(g, [lambda](double v) { return -lambda * v; }));
        break;
      }
    }
  }
  return out;
}

Var add(const Var& a, const Var& b) {
  return binary(OpKind::kAdd, a, b,
                zip("add", a.value(), b.value(), [](double x, double y) { return x + y; }));
}

Var sub(const Var& a, const Var& b) {
  return binary(OpKind::kSub, a, b,
                zip("sub", a.value(), b.value(), [](double x, double y) { return x - y; }));
}

Var mul(const Var& a, const Var& b) {
  return binary(OpKind::kMul, a, b,
                zip("mul", a.value(), b.value(), [](double x, double y) { return x * y; }));
}

Var div(const Var& a, const Var& b) {
  return binary(OpKind::kDiv, a, b,
                zip("div", a.value(), b.value(), [](double x, double y) { return x / y; }));
}

Var neg(const Var& a) { return unary(OpKind::kNeg, a, map(a.value(), [](double v) { return -v; })); }

Var operator+(const Var& a, const Var& b) { return add(a, b); }
Var operator-(const Var& a, const Var& b) { return sub(a, b); }
Var operator*(const Var& a, const Var& b) { return mul(a, b); }
Var operator/(const Var& a, const Var& b) { return div(a, b); }
Var operator-(const Var& a) { return neg(a); }
Var operator+(double a, const Var& b) { return add(tape_of(b)->constant(a), b); }
Var operator+(const Var& a, double b) { return add(a, tape_of(a)->constant(b)); }
Var operator-(double a, const Var& b) { return sub(tape_of(b)->constant(a), b); }
Var operator-(const Var& a, double b) { return sub(a, tape_of(a)->constant(b)); }
Var operator*(double a, const Var& b) { return mul(tape_of(b)->constant(a), b); }
Var operator*(const Var& a, double b) { return mul(a, tape_of(a)->constant(b)); }

Var matmul(const Var& a, const Var& b) {
  const Tensor& x = a.value();
  const Tensor& w = b.value();
  if (x.cols() != w.rows()) throw ShapeError("matmul", x.shape(), w.shape());
  Tensor out(x.rows(), w.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t p = 0; p < x.cols(); ++p) {
      const double xv = x(i, p);
      for (std::size_t j = 0; j < w.cols(); ++j) out(i, j) += xv * w(p, j);
    }
  }
  return binary(OpKind::kMatMul, a, b, std::move(out));
}

Var add_row(const Var& m, const Var& row) {
  const Tensor& x = m.value();
  const Tensor& r = row.value();
  if (r.rows() != 1 || r.cols() != x.cols()) throw ShapeError("add_row", x.shape(), r.shape());
  Tensor out = x;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) += r(0, j);
  }
  return binary(OpKind::kAddRow, m, row, std::move(out));
}

Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return unary(OpKind::kSum, a, Tensor::scalar(s));
}

Var mean(const Var& a) {
  const Tensor& x = a.value();
  if (x.size() == 0) throw ShapeError("mean: empty tensor");
  double s = 0.0;
  for (double v : x.values()) s += v;
  return unary(OpKind::kMean, a, Tensor::scalar(s / static_cast<double>(x.size())));
}

Var sum_rows(const Var& a) {
  const Tensor& x = a.value();
  Tensor out(1, x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) out(0, c) += x(r, c);
  }
  return unary(OpKind::kSumRows, a, std::move(out));
}

Var mean_rows(const Var& a) {
  const Tensor& x = a.value();
  if (x.rows() == 0) throw ShapeError("mean_rows: empty tensor");
  Tensor out(1, x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) out(0, c) += x(r, c);
  }
  for (double& v : out.values()) v /= static_cast<double>(x.rows());
  return unary(OpKind::kMeanRows, a, std::move(out));
}

Var sigmoid(const Var& a) { return unary(OpKind::kSigmoid, a, map(a.value(), stable_sigmoid)); }
Var softplus(const Var& a) { return unary(OpKind::kSoftplus, a, map(a.value(), stable_softplus)); }
Var tanh(const Var& a) {
  return unary(OpKind::kTanh, a, map(a.value(), [](double v) { return std::tanh(v); }));
}

Var log(const Var& a) {
  return unary(OpKind::kLog, a,
               map(a.value(), [](double v) { return std::log(std::max(v, kEpsLog)); }));
}

Var log_prob(const Var& a) {
  return unary(OpKind::kLogProb, a, map(a.value(), [](double v) { return std::log(clamp_prob(v)); }));
}

Var log1m(const Var& a) {
  return unary(OpKind::kLog1m, a,
               map(a.value(), [](double v) { return std::log1p(-clamp_prob(v)); }));
}

Var pow(const Var& a, double exponent) {
  return unary(OpKind::kPow, a,
               map(a.value(), [exponent](double v) { return std::pow(v, exponent); }), exponent);
}

Var abs(const Var& a) {
  return unary(OpKind::kAbs, a, map(a.value(), [](double v) { return std::abs(v); }));
}

Var sqrt(const Var& a) {
  return unary(OpKind::kSqrt, a, map(a.value(), [](double v) { return std::sqrt(v); }));
}

Var l2_norm_rows(const Var& a) {
  const Tensor& x = a.value();
  Tensor out(x.rows(), 1);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double s = 0.0;
    for (double v : x.row_span(r)) s += v * v;
    out(r, 0) = std::sqrt(s);
  }
  return unary(OpKind::kL2NormRows, a, std::move(out));
}

Var select_rows(const Var& a, std::span<const std::size_t> rows) {
  const Tensor& x = a.value();
  Tensor out(rows.size(), x.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= x.rows()) {
      throw ShapeError("select_rows: row " + std::to_string(rows[r]) + " out of range for " +
                       x.shape().str());
    }
    for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) = x(rows[r], c);
  }
  Tape::Node n{OpKind::kSelectRows, a.id(), 0, std::move(out), 0.0,
               std::vector<std::size_t>(rows.begin(), rows.end()), {}, a.requires_grad()};
  return tape_of(a)->push(std::move(n));
}

Var concat_rows(const Var& top, const Var& bottom) {
  const Tensor& x = top.value();
  const Tensor& y = bottom.value();
  if (x.cols() != y.cols()) throw ShapeError("concat_rows", x.shape(), y.shape());
  std::vector<double> data(x.values().begin(), x.values().end());
  data.insert(data.end(), y.values().begin(), y.values().end());
  return binary(OpKind::kConcatRows, top, bottom,
                Tensor(x.rows() + y.rows(), x.cols(), std::move(data)));
}

Var softmax_cross_entropy(const Var& logits, std::span<const std::size_t> labels) {
  const Tensor& z = logits.value();
  if (labels.size() != z.rows() || z.rows() == 0) {
    throw ShapeError("softmax_cross_entropy", z.shape(), Shape{labels.size(), 1});
  }
  Tensor probs(z.rows(), z.cols());
  double loss = 0.0;
  for (std::size_t r = 0; r < z.rows(); ++r) {
    if (labels[r] >= z.cols()) {
      throw ShapeError("softmax_cross_entropy: label " + std::to_string(labels[r]) +
                       " out of range for " + z.shape().str());
    }
    const auto row = z.row_span(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double s = 0.0;
    for (std::size_t c = 0; c < z.cols(); ++c) s += std::exp(row[c] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t c = 0; c < z.cols(); ++c) probs(r, c) = std::exp(row[c] - lse);
    loss += lse - row[labels[r]];
  }
  Tape::Node n{OpKind::kSoftmaxXent,
               logits.id(),
               0,
               Tensor::scalar(loss / static_cast<double>(z.rows())),
               0.0,
               std::vector<std::size_t>(labels.begin(), labels.end()),
               std::move(probs),
               logits.requires_grad()};
  return tape_of(logits)->push(std::move(n));
}

Var grl(const Var& a, double lambda) {
  if (lambda < 0.0) throw std::invalid_argument("grl: lambda must be nonnegative");
  return unary(OpKind::kGrl, a, a.value(), lambda);
}

Var detach(const Var& a) {
  Tape::Node n{OpKind::kDetach, a.id(), 0, a.value(), 0.0, {}, {}, false};
  return tape_of(a)->push(std::move(n));
}

}  // namespace dpa::ad
