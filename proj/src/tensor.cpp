#include "dhnn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>
#include <utility>

namespace dhnn::neural {

namespace detail {

struct TensorNode {
  Eigen::MatrixXd value;
  Eigen::MatrixXd grad;  // empty until allocated
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void()> pull;

  void ensure_grad() {
    if (grad.rows() != value.rows() || grad.cols() != value.cols()) {
      grad.setZero(value.rows(), value.cols());
    }
  }
};

}  // namespace detail

using detail::TensorNode;
using NodePtr = std::shared_ptr<TensorNode>;

namespace {

[[noreturn]] void shape_error(const char* op, const Tensor& a) {
  throw std::invalid_argument(std::string(op) + ": bad shape " + std::to_string(a.rows()) +
                              "x" + std::to_string(a.cols()));
}

[[noreturn]] void shape_error2(const char* op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " +
                              std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                              " and " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
}

void require_defined(const char* op, const Tensor& t) {
  if (!t.defined()) throw std::invalid_argument(std::string(op) + ": undefined tensor");
}

}  // namespace

struct TensorOps {
  static const NodePtr& node(const Tensor& t) { return t.node_; }

  static Tensor wrap(NodePtr n) { return Tensor(std::move(n)); }

  static NodePtr fresh(Eigen::MatrixXd value, std::vector<NodePtr> parents) {
    auto n = std::make_shared<TensorNode>();
    n->value = std::move(value);
    for (const auto& p : parents) {
      if (p->requires_grad) {
        n->requires_grad = true;
        break;
      }
    }
    if (n->requires_grad) n->parents = std::move(parents);
    return n;
  }

  static void accumulate(const NodePtr& parent, const Eigen::MatrixXd& delta) {
    if (!parent->requires_grad) return;
    parent->ensure_grad();
    parent->grad += delta;
  }

  // Builds a unary/binary/n-ary op: if no parent needs gradients the result
  // is a plain constant and the closure is dropped.
  static Tensor make(Eigen::MatrixXd value, std::vector<NodePtr> parents,
                     std::function<void(TensorNode&)> pull) {
    NodePtr n = fresh(std::move(value), std::move(parents));
    if (n->requires_grad && pull) {
      TensorNode* raw = n.get();
      n->pull = [raw, fn = std::move(pull)]() { fn(*raw); };
    }
    return wrap(n);
  }
};

Tensor Tensor::constant(Eigen::MatrixXd value) {
  auto n = std::make_shared<TensorNode>();
  n->value = std::move(value);
  n->requires_grad = false;
  return Tensor(std::move(n));
}

Tensor Tensor::parameter(Eigen::MatrixXd value) {
  auto n = std::make_shared<TensorNode>();
  n->value = std::move(value);
  n->requires_grad = true;
  return Tensor(std::move(n));
}

Tensor Tensor::zeros(Eigen::Index rows, Eigen::Index cols) {
  return constant(Eigen::MatrixXd::Zero(rows, cols));
}

Eigen::Index Tensor::rows() const { return node_ ? node_->value.rows() : 0; }
Eigen::Index Tensor::cols() const { return node_ ? node_->value.cols() : 0; }

const Eigen::MatrixXd& Tensor::value() const {
  if (!node_) throw std::invalid_argument("value() on undefined tensor");
  return node_->value;
}

const Eigen::MatrixXd& Tensor::grad() const {
  if (!node_) throw std::invalid_argument("grad() on undefined tensor");
  node_->ensure_grad();
  return node_->grad;
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_value(const Eigen::MatrixXd& v) const {
  if (!node_) throw std::invalid_argument("set_value() on undefined tensor");
  if (v.rows() != node_->value.rows() || v.cols() != node_->value.cols()) {
    throw std::invalid_argument("set_value() must preserve shape");
  }
  node_->value = v;
}

void Tensor::zero_grad() const {
  if (!node_) return;
  node_->grad.setZero(node_->value.rows(), node_->value.cols());
}

void backward(const Tensor& root) {
  require_defined("backward", root);
  if (root.rows() != 1 || root.cols() != 1) {
    throw std::invalid_argument("backward() needs a 1x1 scalar root");
  }
  if (!root.requires_grad()) {
    throw std::invalid_argument("backward() root does not depend on any parameter");
  }

  TensorNode* root_node = TensorOps::node(root).get();
  struct Frame {
    TensorNode* n;
    std::size_t next = 0;
  };
  std::vector<TensorNode*> topo;
  std::unordered_set<const TensorNode*> seen;
  std::vector<Frame> stack;
  stack.push_back({root_node});
  seen.insert(root_node);
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next < f.n->parents.size()) {
      TensorNode* p = f.n->parents[f.next++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.push_back({p});
      }
    } else {
      topo.push_back(f.n);
      stack.pop_back();
    }
  }

  for (TensorNode* n : topo) n->grad.setZero(n->value.rows(), n->value.cols());
  root_node->grad(0, 0) = 1.0;
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    if ((*it)->pull) (*it)->pull();
  }
}

Tensor operator+(const Tensor& a, const Tensor& b) {
  require_defined("add", a);
  require_defined("add", b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error2("add", a, b);
  auto pa = TensorOps::node(a);
  auto pb = TensorOps::node(b);
  return TensorOps::make(pa->value + pb->value, {pa, pb}, [pa, pb](TensorNode& self) {
    TensorOps::accumulate(pa, self.grad);
    TensorOps::accumulate(pb, self.grad);
  });
}

Tensor operator-(const Tensor& a, const Tensor& b) {
  require_defined("sub", a);
  require_defined("sub", b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error2("sub", a, b);
  auto pa = TensorOps::node(a);
  auto pb = TensorOps::node(b);
  return TensorOps::make(pa->value - pb->value, {pa, pb}, [pa, pb](TensorNode& self) {
    TensorOps::accumulate(pa, self.grad);
    TensorOps::accumulate(pb, -self.grad);
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_defined("matmul", a);
  require_defined("matmul", b);
  if (a.cols() != b.rows()) shape_error2("matmul", a, b);
  auto pa = TensorOps::node(a);
  auto pb = TensorOps::node(b);
  return TensorOps::make(pa->value * pb->value, {pa, pb}, [pa, pb](TensorNode& self) {
    if (pa->requires_grad) {
      pa->ensure_grad();
      pa->grad.noalias() += self.grad * pb->value.transpose();
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      pb->grad.noalias() += pa->value.transpose() * self.grad;
    }
  });
}

Tensor cmul(const Tensor& a, const Tensor& b) {
  require_defined("cmul", a);
  require_defined("cmul", b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error2("cmul", a, b);
  auto pa = TensorOps::node(a);
  auto pb = TensorOps::node(b);
  return TensorOps::make(pa->value.cwiseProduct(pb->value), {pa, pb}, [pa, pb](TensorNode& self) {
    TensorOps::accumulate(pa, self.grad.cwiseProduct(pb->value));
    TensorOps::accumulate(pb, self.grad.cwiseProduct(pa->value));
  });
}

Tensor scale(const Tensor& a, double s) {
  require_defined("scale", a);
  auto pa = TensorOps::node(a);
  return TensorOps::make(s * pa->value, {pa}, [pa, s](TensorNode& self) {
    TensorOps::accumulate(pa, s * self.grad);
  });
}

Tensor add_rows(const Tensor& m, const Tensor& row) {
  require_defined("add_rows", m);
  require_defined("add_rows", row);
  if (row.rows() != 1 || row.cols() != m.cols()) shape_error2("add_rows", m, row);
  auto pm = TensorOps::node(m);
  auto pr = TensorOps::node(row);
  Eigen::MatrixXd out = pm->value;
  out.rowwise() += pr->value.row(0);
  return TensorOps::make(std::move(out), {pm, pr}, [pm, pr](TensorNode& self) {
    TensorOps::accumulate(pm, self.grad);
    TensorOps::accumulate(pr, self.grad.colwise().sum());
  });
}

Tensor transpose(const Tensor& a) {
  require_defined("transpose", a);
  auto pa = TensorOps::node(a);
  return TensorOps::make(pa->value.transpose(), {pa}, [pa](TensorNode& self) {
    TensorOps::accumulate(pa, self.grad.transpose());
  });
}

Tensor sigmoid(const Tensor& a) {
  require_defined("sigmoid", a);
  auto pa = TensorOps::node(a);
  Eigen::MatrixXd y = pa->value.unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
  return TensorOps::make(std::move(y), {pa}, [pa](TensorNode& self) {
    TensorOps::accumulate(
        pa, self.grad.cwiseProduct(self.value.cwiseProduct((1.0 - self.value.array()).matrix())));
  });
}

Tensor tanh(const Tensor& a) {
  require_defined("tanh", a);
  auto pa = TensorOps::node(a);
  Eigen::MatrixXd y = pa->value.unaryExpr([](double x) { return std::tanh(x); });
  return TensorOps::make(std::move(y), {pa}, [pa](TensorNode& self) {
    TensorOps::accumulate(pa,
                          self.grad.cwiseProduct((1.0 - self.value.array().square()).matrix()));
  });
}

Tensor elu(const Tensor& a, double alpha) {
  require_defined("elu", a);
  if (!(alpha > 0.0)) throw std::invalid_argument("elu: alpha must be > 0");
  auto pa = TensorOps::node(a);
  Eigen::MatrixXd y =
      pa->value.unaryExpr([alpha](double x) { return x > 0.0 ? x : alpha * std::expm1(x); });
  return TensorOps::make(std::move(y), {pa}, [pa, alpha](TensorNode& self) {
    // d/dx = 1 on the positive branch, alpha*e^x = y + alpha otherwise
    // (the x = 0 derivative is the negative-branch limit alpha).
    Eigen::MatrixXd dydx(self.value.rows(), self.value.cols());
    for (Eigen::Index i = 0; i < self.value.rows(); ++i) {
      for (Eigen::Index j = 0; j < self.value.cols(); ++j) {
        dydx(i, j) = pa->value(i, j) > 0.0 ? 1.0 : self.value(i, j) + alpha;
      }
    }
    TensorOps::accumulate(pa, self.grad.cwiseProduct(dydx));
  });
}

Tensor abs(const Tensor& a) {
  require_defined("abs", a);
  auto pa = TensorOps::node(a);
  return TensorOps::make(pa->value.cwiseAbs(), {pa}, [pa](TensorNode& self) {
    Eigen::MatrixXd sign = pa->value.unaryExpr(
        [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
    TensorOps::accumulate(pa, self.grad.cwiseProduct(sign));
  });
}

Tensor softmax_rows(const Tensor& a) {
  require_defined("softmax_rows", a);
  auto pa = TensorOps::node(a);
  Eigen::MatrixXd y(pa->value.rows(), pa->value.cols());
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    const double mx = pa->value.row(i).maxCoeff();
    Eigen::RowVectorXd e = (pa->value.row(i).array() - mx).exp().matrix();
    y.row(i) = e / e.sum();
  }
  return TensorOps::make(std::move(y), {pa}, [pa](TensorNode& self) {
    Eigen::MatrixXd dx(self.value.rows(), self.value.cols());
    for (Eigen::Index i = 0; i < dx.rows(); ++i) {
      const double dot = self.grad.row(i).dot(self.value.row(i));
      dx.row(i) = self.value.row(i).cwiseProduct(
          (self.grad.row(i).array() - dot).matrix());
    }
    TensorOps::accumulate(pa, dx);
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no parts");
  Eigen::Index total = 0;
  const Eigen::Index c = parts.front().cols();
  std::vector<NodePtr> parents;
  parents.reserve(parts.size());
  for (const auto& p : parts) {
    require_defined("concat_rows", p);
    if (p.cols() != c) shape_error("concat_rows", p);
    total += p.rows();
    parents.push_back(TensorOps::node(p));
  }
  Eigen::MatrixXd out(total, c);
  Eigen::Index at = 0;
  for (const auto& p : parents) {
    out.middleRows(at, p->value.rows()) = p->value;
    at += p->value.rows();
  }
  return TensorOps::make(std::move(out), parents, [parents](TensorNode& self) {
    Eigen::Index at = 0;
    for (const auto& p : parents) {
      TensorOps::accumulate(p, self.grad.middleRows(at, p->value.rows()));
      at += p->value.rows();
    }
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no parts");
  Eigen::Index total = 0;
  const Eigen::Index r = parts.front().rows();
  std::vector<NodePtr> parents;
  parents.reserve(parts.size());
  for (const auto& p : parts) {
    require_defined("concat_cols", p);
    if (p.rows() != r) shape_error("concat_cols", p);
    total += p.cols();
    parents.push_back(TensorOps::node(p));
  }
  Eigen::MatrixXd out(r, total);
  Eigen::Index at = 0;
  for (const auto& p : parents) {
    out.middleCols(at, p->value.cols()) = p->value;
    at += p->value.cols();
  }
  return TensorOps::make(std::move(out), parents, [parents](TensorNode& self) {
    Eigen::Index at = 0;
    for (const auto& p : parents) {
      TensorOps::accumulate(p, self.grad.middleCols(at, p->value.cols()));
      at += p->value.cols();
    }
  });
}

Tensor slice_rows(const Tensor& a, Eigen::Index start, Eigen::Index count) {
  require_defined("slice_rows", a);
  if (start < 0 || count < 1 || start + count > a.rows()) shape_error("slice_rows", a);
  auto pa = TensorOps::node(a);
  return TensorOps::make(pa->value.middleRows(start, count), {pa},
                         [pa, start, count](TensorNode& self) {
                           if (!pa->requires_grad) return;
                           pa->ensure_grad();
                           pa->grad.middleRows(start, count) += self.grad;
                         });
}

Tensor slice_cols(const Tensor& a, Eigen::Index start, Eigen::Index count) {
  require_defined("slice_cols", a);
  if (start < 0 || count < 1 || start + count > a.cols()) shape_error("slice_cols", a);
  auto pa = TensorOps::node(a);
  return TensorOps::make(pa->value.middleCols(start, count), {pa},
                         [pa, start, count](TensorNode& self) {
                           if (!pa->requires_grad) return;
                           pa->ensure_grad();
                           pa->grad.middleCols(start, count) += self.grad;
                         });
}

namespace {

// Row-major element copy between shapes of equal size.
Eigen::MatrixXd remap_rowmajor(const Eigen::MatrixXd& src, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd out(rows, cols);
  const Eigen::Index sc = src.cols();
  for (Eigen::Index k = 0; k < rows * cols; ++k) {
    out(k / cols, k % cols) = src(k / sc, k % sc);
  }
  return out;
}

}  // namespace

Tensor reshape(const Tensor& a, Eigen::Index rows, Eigen::Index cols) {
  require_defined("reshape", a);
  if (rows * cols != a.size()) shape_error("reshape", a);
  auto pa = TensorOps::node(a);
  return TensorOps::make(remap_rowmajor(pa->value, rows, cols), {pa}, [pa](TensorNode& self) {
    TensorOps::accumulate(pa, remap_rowmajor(self.grad, pa->value.rows(), pa->value.cols()));
  });
}

Tensor sum_all(const Tensor& a) {
  require_defined("sum_all", a);
  auto pa = TensorOps::node(a);
  Eigen::MatrixXd out(1, 1);
  out(0, 0) = pa->value.sum();
  return TensorOps::make(std::move(out), {pa}, [pa](TensorNode& self) {
    TensorOps::accumulate(pa, Eigen::MatrixXd::Constant(pa->value.rows(), pa->value.cols(),
                                                        self.grad(0, 0)));
  });
}

Tensor mean_all(const Tensor& a) {
  require_defined("mean_all", a);
  return scale(sum_all(a), 1.0 / static_cast<double>(a.size()));
}

Tensor scale_rows(const Tensor& m, const Tensor& col) {
  require_defined("scale_rows", m);
  require_defined("scale_rows", col);
  if (col.cols() != 1 || col.rows() != m.rows()) shape_error2("scale_rows", m, col);
  auto pm = TensorOps::node(m);
  auto pc = TensorOps::node(col);
  Eigen::MatrixXd out = pc->value.col(0).asDiagonal() * pm->value;
  return TensorOps::make(std::move(out), {pm, pc}, [pm, pc](TensorNode& self) {
    if (pm->requires_grad) {
      pm->ensure_grad();
      pm->grad += pc->value.col(0).asDiagonal() * self.grad;
    }
    if (pc->requires_grad) {
      pc->ensure_grad();
      for (Eigen::Index i = 0; i < pm->value.rows(); ++i) {
        pc->grad(i, 0) += self.grad.row(i).dot(pm->value.row(i));
      }
    }
  });
}

Tensor rsqrt(const Tensor& a) {
  require_defined("rsqrt", a);
  auto pa = TensorOps::node(a);
  for (Eigen::Index i = 0; i < pa->value.rows(); ++i) {
    for (Eigen::Index j = 0; j < pa->value.cols(); ++j) {
      if (!(pa->value(i, j) > 0.0)) {
        throw NumericError("rsqrt: nonpositive entry at (" + std::to_string(i) + "," +
                           std::to_string(j) + ")");
      }
    }
  }
  Eigen::MatrixXd y = pa->value.unaryExpr([](double x) { return 1.0 / std::sqrt(x); });
  return TensorOps::make(std::move(y), {pa}, [pa](TensorNode& self) {
    Eigen::MatrixXd cube = self.value.array().cube().matrix();
    TensorOps::accumulate(pa, (-0.5) * self.grad.cwiseProduct(cube));
  });
}

Tensor clamp_min(const Tensor& a, double floor) {
  require_defined("clamp_min", a);
  auto pa = TensorOps::node(a);
  Eigen::MatrixXd y = pa->value.cwiseMax(floor);
  return TensorOps::make(std::move(y), {pa}, [pa, floor](TensorNode& self) {
    Eigen::MatrixXd mask = pa->value.unaryExpr(
        [floor](double x) { return x > floor ? 1.0 : 0.0; });
    TensorOps::accumulate(pa, self.grad.cwiseProduct(mask));
  });
}

Tensor dropout(const Tensor& a, double rate, std::mt19937_64& rng) {
  require_defined("dropout", a);
  if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout: rate must be in [0, 1)");
  if (rate == 0.0) return a;
  std::bernoulli_distribution keep(1.0 - rate);
  Eigen::MatrixXd mask(a.rows(), a.cols());
  const double boost = 1.0 / (1.0 - rate);
  for (Eigen::Index i = 0; i < mask.rows(); ++i) {
    for (Eigen::Index j = 0; j < mask.cols(); ++j) {
      mask(i, j) = keep(rng) ? boost : 0.0;
    }
  }
  return cmul(a, Tensor::constant(std::move(mask)));
}

}  // namespace dhnn::neural
