#include "lht/diffcore.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace lht {

namespace {

void require(bool ok, ErrorCode code, const std::string& what) {
  if (!ok) throw Error(code, what);
}

std::string shape_str(const Tensor& t) {
  return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

double clamped_log(double p) { return std::log(std::max(p, kLogClamp)); }

void softmax_into(const double* z, double* out, std::size_t n, std::size_t stride) {
  double peak = z[0];
  for (std::size_t i = 1; i < n; ++i) peak = std::max(peak, z[i * stride]);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i * stride] = std::exp(z[i * stride] - peak);
    total += out[i * stride];
  }
  for (std::size_t i = 0; i < n; ++i) out[i * stride] /= total;
}

// gz = y * (gy - <gy, y>) along one strided line.
void softmax_vjp(const double* y, const double* gy, double* gz, std::size_t n,
                 std::size_t stride) {
  double dot = 0.0;
  for (std::size_t i = 0; i < n; ++i) dot += gy[i * stride] * y[i * stride];
  for (std::size_t i = 0; i < n; ++i) gz[i * stride] += y[i * stride] * (gy[i * stride] - dot);
}

}  // namespace

// ---------------------------------------------------------------------------

Tensor affine(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require(x.is_vector() && bias.is_vector() && weight.cols() == x.rows() &&
              weight.rows() == bias.rows(),
          ErrorCode::ShapeMismatch,
          "affine: W " + shape_str(weight) + ", x " + shape_str(x) + ", b " + shape_str(bias));
  Tensor y = bias;
  for (std::size_t r = 0; r < weight.rows(); ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < weight.cols(); ++c) acc += weight(r, c) * x[c];
    y[r] += acc;
  }
  require_finite(y, "affine");
  return y;
}

Tensor relu(const Tensor& x) {
  Tensor y = x;
  for (auto& v : y.values()) v = v > 0.0 ? v : 0.0;
  return y;
}

Tensor softmax(const Tensor& z) {
  require(z.is_vector() && z.size() > 0, ErrorCode::ShapeMismatch, "softmax: " + shape_str(z));
  require_finite(z, "softmax input");
  Tensor y(z.rows(), 1);
  softmax_into(z.values().data(), y.values().data(), z.size(), 1);
  return y;
}

Tensor column_softmax(const Tensor& z) {
  require(z.size() > 0, ErrorCode::ShapeMismatch, "column_softmax: empty");
  require_finite(z, "column_softmax input");
  Tensor y(z.rows(), z.cols());
  for (std::size_t c = 0; c < z.cols(); ++c) {
    softmax_into(z.values().data() + c, y.values().data() + c, z.rows(), z.cols());
  }
  return y;
}

Tensor matvec(const Tensor& m, const Tensor& v) {
  require(v.is_vector() && m.cols() == v.rows(), ErrorCode::ShapeMismatch,
          "matvec: " + shape_str(m) + " * " + shape_str(v));
  Tensor y(m.rows(), 1);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < m.cols(); ++c) acc += m(r, c) * v[c];
    y[r] = acc;
  }
  return y;
}

bool on_simplex(const Tensor& p, double tol) {
  if (!p.is_vector() || p.size() == 0) return false;
  double total = 0.0;
  for (double v : p.values()) {
    if (!std::isfinite(v) || v < -tol) return false;
    total += v;
  }
  return std::abs(total - 1.0) <= tol;
}

Tensor one_hot(std::size_t n, ClassIndex index) {
  require(index < n, ErrorCode::IndexOutOfRange,
          "one_hot index " + std::to_string(index) + " >= " + std::to_string(n));
  Tensor y(n, 1);
  y[index] = 1.0;
  return y;
}

double cross_entropy(const Tensor& p, ClassIndex label) {
  require(on_simplex(p), ErrorCode::NotOnSimplex, "cross_entropy prediction");
  require(label < p.size(), ErrorCode::IndexOutOfRange, "cross_entropy label");
  return -clamped_log(p[label]);
}

double cross_entropy(const Tensor& p, const Tensor& one_hot_label) {
  require(one_hot_label.same_shape(p), ErrorCode::ShapeMismatch,
          "cross_entropy: p " + shape_str(p) + ", y " + shape_str(one_hot_label));
  std::size_t ones = 0;
  ClassIndex label = 0;
  for (std::size_t i = 0; i < one_hot_label.size(); ++i) {
    if (one_hot_label[i] == 1.0) {
      ++ones;
      label = i;
    } else if (one_hot_label[i] != 0.0) {
      ones = 2;
    }
  }
  require(ones == 1, ErrorCode::NotOneHot, "cross_entropy target");
  return cross_entropy(p, label);
}

double neg_entropy(const Tensor& p) {
  require(on_simplex(p), ErrorCode::NotOnSimplex, "neg_entropy input");
  double acc = 0.0;
  for (double v : p.values()) acc += v * clamped_log(v);
  return acc;
}

void require_finite(const Tensor& t, const char* op) {
  for (double v : t.values()) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NumericalError, std::string(op) + " produced a non-finite value");
  }
}

// ---------------------------------------------------------------------------

ParamId ParameterSet::add(std::string name, ParamGroup group, Tensor value) {
  params_.push_back(Parameter{std::move(name), group, std::move(value)});
  return params_.size() - 1;
}

std::size_t ParameterSet::num_scalars() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

bool ParameterSet::operator==(const ParameterSet& other) const {
  if (params_.size() != other.params_.size()) return false;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& a = params_[i];
    const auto& b = other.params_[i];
    if (a.name != b.name || a.group != b.group || !(a.value == b.value)) return false;
  }
  return true;
}

Gradients::Gradients(const ParameterSet& params) {
  grads_.reserve(params.size());
  for (const auto& p : params) grads_.emplace_back(p.value.rows(), p.value.cols());
}

void Gradients::zero() {
  for (auto& g : grads_) g.fill(0.0);
}

// ---------------------------------------------------------------------------

Var Tape::push(Node n, const char* op_name) {
  if (n.op != Op::Param) require_finite(n.value, op_name);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

const Tape::Node& Tape::node(Var v) const {
  require(v.id < nodes_.size(), ErrorCode::IndexOutOfRange, "tape variable");
  return nodes_[v.id];
}

const Tensor& Tape::value(Var v) const {
  const Node& n = node(v);
  return n.op == Op::Param ? (*params_)[n.param].value : n.value;
}

double Tape::scalar(Var v) const {
  const Tensor& t = value(v);
  require(t.size() == 1, ErrorCode::ShapeMismatch, "scalar of " + shape_str(t));
  return t[0];
}

const Tensor& Tape::grad(Var v) const { return node(v).grad; }

Var Tape::constant(Tensor value) {
  Node n;
  n.op = Op::Constant;
  n.value = std::move(value);
  return push(std::move(n), "constant");
}

Var Tape::parameter(ParamId id) {
  require(params_ != nullptr && id < params_->size(), ErrorCode::IndexOutOfRange,
          "parameter id " + std::to_string(id));
  Node n;
  n.op = Op::Param;
  n.param = id;
  n.needs_grad = true;
  return push(std::move(n), "parameter");
}

Var Tape::affine(Var x, Var weight, Var bias) {
  Node n;
  n.op = Op::Affine;
  n.in[0] = x.id;
  n.in[1] = weight.id;
  n.in[2] = bias.id;
  n.value = lht::affine(value(x), value(weight), value(bias));
  n.needs_grad = node(x).needs_grad || node(weight).needs_grad || node(bias).needs_grad;
  return push(std::move(n), "affine");
}

Var Tape::relu(Var x) {
  Node n;
  n.op = Op::Relu;
  n.in[0] = x.id;
  n.value = lht::relu(value(x));
  n.needs_grad = node(x).needs_grad;
  return push(std::move(n), "relu");
}

Var Tape::softmax(Var z) {
  Node n;
  n.op = Op::Softmax;
  n.in[0] = z.id;
  n.value = lht::softmax(value(z));
  n.needs_grad = node(z).needs_grad;
  return push(std::move(n), "softmax");
}

Var Tape::column_softmax(Var z) {
  Node n;
  n.op = Op::ColumnSoftmax;
  n.in[0] = z.id;
  n.value = lht::column_softmax(value(z));
  n.needs_grad = node(z).needs_grad;
  return push(std::move(n), "column_softmax");
}

Var Tape::reshape(Var x, std::size_t rows, std::size_t cols) {
  const Tensor& src = value(x);
  require(src.size() == rows * cols, ErrorCode::ShapeMismatch,
          "reshape " + shape_str(src) + " to " + std::to_string(rows) + "x" + std::to_string(cols));
  Node n;
  n.op = Op::Reshape;
  n.in[0] = x.id;
  n.value = Tensor::matrix(rows, cols, src.storage());
  n.needs_grad = node(x).needs_grad;
  return push(std::move(n), "reshape");
}

Var Tape::slice(Var x, std::size_t offset, std::size_t length) {
  const Tensor& src = value(x);
  require(src.is_vector() && offset + length <= src.size(), ErrorCode::ShapeMismatch,
          "slice [" + std::to_string(offset) + ", " + std::to_string(offset + length) + ") of " +
              shape_str(src));
  Node n;
  n.op = Op::Slice;
  n.in[0] = x.id;
  n.aux = offset;
  n.value = Tensor::vector(std::vector<double>(src.values().begin() + offset,
                                               src.values().begin() + offset + length));
  n.needs_grad = node(x).needs_grad;
  return push(std::move(n), "slice");
}

Var Tape::matvec(Var m, Var v) {
  Node n;
  n.op = Op::MatVec;
  n.in[0] = m.id;
  n.in[1] = v.id;
  n.value = lht::matvec(value(m), value(v));
  n.needs_grad = node(m).needs_grad || node(v).needs_grad;
  return push(std::move(n), "matvec");
}

Var Tape::column(Var m, std::size_t j) {
  const Tensor& src = value(m);
  require(j < src.cols(), ErrorCode::IndexOutOfRange, "column " + std::to_string(j));
  Node n;
  n.op = Op::Column;
  n.in[0] = m.id;
  n.aux = j;
  n.value = Tensor(src.rows(), 1);
  for (std::size_t r = 0; r < src.rows(); ++r) n.value[r] = src(r, j);
  n.needs_grad = node(m).needs_grad;
  return push(std::move(n), "column");
}

Var Tape::cross_entropy(Var p, ClassIndex label) {
  const Tensor& probs = value(p);
  require(probs.is_vector() && label < probs.size(), ErrorCode::IndexOutOfRange,
          "cross_entropy label " + std::to_string(label));
  Node n;
  n.op = Op::CrossEntropy;
  n.in[0] = p.id;
  n.aux = label;
  n.value = Tensor::vector({-clamped_log(probs[label])});
  n.needs_grad = node(p).needs_grad;
  return push(std::move(n), "cross_entropy");
}

Var Tape::neg_entropy(Var p) {
  const Tensor& probs = value(p);
  double acc = 0.0;
  for (double v : probs.values()) acc += v * clamped_log(v);
  Node n;
  n.op = Op::NegEntropy;
  n.in[0] = p.id;
  n.value = Tensor::vector({acc});
  n.needs_grad = node(p).needs_grad;
  return push(std::move(n), "neg_entropy");
}

Var Tape::add(Var a, Var b) {
  const Tensor& lhs = value(a);
  const Tensor& rhs = value(b);
  require(lhs.same_shape(rhs), ErrorCode::ShapeMismatch,
          "add " + shape_str(lhs) + " + " + shape_str(rhs));
  Node n;
  n.op = Op::Add;
  n.in[0] = a.id;
  n.in[1] = b.id;
  n.value = lhs;
  for (std::size_t i = 0; i < rhs.size(); ++i) n.value[i] += rhs[i];
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  return push(std::move(n), "add");
}

Var Tape::scale(Var a, double factor) {
  Node n;
  n.op = Op::Scale;
  n.in[0] = a.id;
  n.factor = factor;
  n.value = value(a);
  for (auto& v : n.value.values()) v *= factor;
  n.needs_grad = node(a).needs_grad;
  return push(std::move(n), "scale");
}

Tensor& Tape::grad_slot(std::size_t id, Gradients& grads) {
  Node& n = nodes_[id];
  return n.op == Op::Param ? grads[n.param] : n.grad;
}

void Tape::backward(Var root, Gradients& grads, double seed) {
  require(root.id < nodes_.size(), ErrorCode::IndexOutOfRange, "backward root");
  require(nodes_[root.id].value.size() == 1, ErrorCode::ShapeMismatch, "backward root not scalar");
  for (std::size_t i = 0; i <= root.id; ++i) {
    Node& n = nodes_[i];
    if (n.op != Op::Param) n.grad = Tensor(n.value.rows(), n.value.cols());
  }
  if (!nodes_[root.id].needs_grad) return;
  nodes_[root.id].grad[0] = seed;

  for (std::size_t id = root.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.needs_grad || n.op == Op::Param || n.op == Op::Constant) continue;
    const Tensor& gy = n.grad;
    auto wants = [&](std::size_t k) { return nodes_[n.in[k]].needs_grad; };

    switch (n.op) {
      case Op::Affine: {
        const Tensor& x = value(Var{n.in[0]});
        const Tensor& w = value(Var{n.in[1]});
        if (wants(0)) {
          Tensor& gx = grad_slot(n.in[0], grads);
          for (std::size_t r = 0; r < w.rows(); ++r) {
            const double g = gy[r];
            if (g == 0.0) continue;
            for (std::size_t c = 0; c < w.cols(); ++c) gx[c] += w(r, c) * g;
          }
        }
        if (wants(1)) {
          Tensor& gw = grad_slot(n.in[1], grads);
          for (std::size_t r = 0; r < w.rows(); ++r) {
            const double g = gy[r];
            if (g == 0.0) continue;
            for (std::size_t c = 0; c < w.cols(); ++c) gw(r, c) += g * x[c];
          }
        }
        if (wants(2)) {
          Tensor& gb = grad_slot(n.in[2], grads);
          for (std::size_t r = 0; r < gy.size(); ++r) gb[r] += gy[r];
        }
        break;
      }
      case Op::Relu: {
        const Tensor& x = value(Var{n.in[0]});
        Tensor& gx = grad_slot(n.in[0], grads);
        for (std::size_t i = 0; i < x.size(); ++i) {
          if (x[i] > 0.0) gx[i] += gy[i];
        }
        break;
      }
      case Op::Softmax: {
        Tensor& gz = grad_slot(n.in[0], grads);
        softmax_vjp(n.value.values().data(), gy.values().data(), gz.values().data(),
                    n.value.size(), 1);
        break;
      }
      case Op::ColumnSoftmax: {
        Tensor& gz = grad_slot(n.in[0], grads);
        const std::size_t cols = n.value.cols();
        for (std::size_t c = 0; c < cols; ++c) {
          softmax_vjp(n.value.values().data() + c, gy.values().data() + c,
                      gz.values().data() + c, n.value.rows(), cols);
        }
        break;
      }
      case Op::Reshape: {
        Tensor& gx = grad_slot(n.in[0], grads);
        for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i];
        break;
      }
      case Op::Slice: {
        Tensor& gx = grad_slot(n.in[0], grads);
        for (std::size_t i = 0; i < gy.size(); ++i) gx[n.aux + i] += gy[i];
        break;
      }
      case Op::MatVec: {
        const Tensor& m = value(Var{n.in[0]});
        const Tensor& v = value(Var{n.in[1]});
        if (wants(0)) {
          Tensor& gm = grad_slot(n.in[0], grads);
          for (std::size_t r = 0; r < m.rows(); ++r) {
            for (std::size_t c = 0; c < m.cols(); ++c) gm(r, c) += gy[r] * v[c];
          }
        }
        if (wants(1)) {
          Tensor& gv = grad_slot(n.in[1], grads);
          for (std::size_t r = 0; r < m.rows(); ++r) {
            for (std::size_t c = 0; c < m.cols(); ++c) gv[c] += m(r, c) * gy[r];
          }
        }
        break;
      }
      case Op::Column: {
        Tensor& gm = grad_slot(n.in[0], grads);
        for (std::size_t r = 0; r < gy.size(); ++r) gm(r, n.aux) += gy[r];
        break;
      }
      case Op::CrossEntropy: {
        const Tensor& p = value(Var{n.in[0]});
        const double py = p[n.aux];
        // The clamp is flat below eps, so no gradient flows there.
        if (py > kLogClamp) grad_slot(n.in[0], grads)[n.aux] += -gy[0] / py;
        break;
      }
      case Op::NegEntropy: {
        const Tensor& p = value(Var{n.in[0]});
        Tensor& gp = grad_slot(n.in[0], grads);
        for (std::size_t i = 0; i < p.size(); ++i) {
          const double d = p[i] > kLogClamp ? std::log(p[i]) + 1.0 : std::log(kLogClamp);
          gp[i] += gy[0] * d;
        }
        break;
      }
      case Op::Add: {
        for (int k = 0; k < 2; ++k) {
          if (!wants(k)) continue;
          Tensor& g = grad_slot(n.in[k], grads);
          for (std::size_t i = 0; i < gy.size(); ++i) g[i] += gy[i];
        }
        break;
      }
      case Op::Scale: {
        Tensor& g = grad_slot(n.in[0], grads);
        for (std::size_t i = 0; i < gy.size(); ++i) g[i] += n.factor * gy[i];
        break;
      }
      case Op::Constant:
      case Op::Param:
        break;
    }
  }
}

}  // namespace lht
