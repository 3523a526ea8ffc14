#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "lht/hierarchy.hpp"
#include "lht/tensor.hpp"

namespace lht {

/// Floor applied inside every log of a probability.
inline constexpr double kLogClamp = 1e-12;
/// Tolerance for "sums to one" on inputs that claim to be distributions.
inline constexpr double kSimplexTol = 1e-6;

// ---------------------------------------------------------------------------
// Value-level primitives. These are the reference definitions; the tape
// below records the same computations with their vector-Jacobian products.

Tensor affine(const Tensor& x, const Tensor& weight, const Tensor& bias);
Tensor relu(const Tensor& x);
/// Max-shifted softmax of a vector. NumericalError on non-finite input.
Tensor softmax(const Tensor& z);
/// Softmax applied to every column independently.
Tensor column_softmax(const Tensor& z);
Tensor matvec(const Tensor& m, const Tensor& v);

/// -log max(p[argmax y], eps). NotOnSimplex / NotOneHot on bad inputs.
double cross_entropy(const Tensor& p, const Tensor& one_hot);
/// Same as above with the label given as an index.
double cross_entropy(const Tensor& p, ClassIndex label);
/// sum_i p_i log p_i with 0 log 0 = 0. NotOnSimplex on bad input.
double neg_entropy(const Tensor& p);

Tensor one_hot(std::size_t n, ClassIndex index);
bool on_simplex(const Tensor& p, double tol = kSimplexTol);
/// Throws NumericalError naming `op` if any entry is NaN or infinite.
void require_finite(const Tensor& t, const char* op);

// ---------------------------------------------------------------------------
// Parameters.

enum class ParamGroup { Backbone, Head };

struct Parameter {
  std::string name;
  ParamGroup group = ParamGroup::Backbone;
  Tensor value;
};

using ParamId = std::size_t;

class ParameterSet {
 public:
  ParamId add(std::string name, ParamGroup group, Tensor value);

  std::size_t size() const noexcept { return params_.size(); }
  Parameter& operator[](ParamId id) { return params_[id]; }
  const Parameter& operator[](ParamId id) const { return params_[id]; }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }

  /// Total number of scalar coordinates across all parameters.
  std::size_t num_scalars() const;

  bool operator==(const ParameterSet& other) const;

 private:
  std::vector<Parameter> params_;
};

/// Gradient buffers shaped like a ParameterSet.
class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(const ParameterSet& params);

  Tensor& operator[](ParamId id) { return grads_[id]; }
  const Tensor& operator[](ParamId id) const { return grads_[id]; }
  std::size_t size() const noexcept { return grads_.size(); }
  void zero();

 private:
  std::vector<Tensor> grads_;
};

// ---------------------------------------------------------------------------
// Reverse-mode tape.

struct Var {
  std::size_t id = std::numeric_limits<std::size_t>::max();
};

/// Records primitive applications on tensors and replays them backwards.
///
/// A tape reads parameter values from a ParameterSet it does not own; the set
/// must outlive the tape and stay unmodified while the tape is in use.
/// Gradients are accumulated into a caller-provided Gradients object, so
/// several tapes may share one ParameterSet.
class Tape {
 public:
  explicit Tape(const ParameterSet* params = nullptr) : params_(params) {}

  Var constant(Tensor value);
  Var parameter(ParamId id);

  Var affine(Var x, Var weight, Var bias);
  Var relu(Var x);
  Var softmax(Var z);
  Var column_softmax(Var z);
  /// Reinterprets a row-major buffer with the given shape.
  Var reshape(Var x, std::size_t rows, std::size_t cols);
  /// Entries [offset, offset + length) of a vector.
  Var slice(Var x, std::size_t offset, std::size_t length);
  Var matvec(Var m, Var v);
  /// Column `j` of a matrix, as a vector.
  Var column(Var m, std::size_t j);
  /// Scalar -log max(p[label], eps).
  Var cross_entropy(Var p, ClassIndex label);
  /// Scalar sum_i p_i log max(p_i, eps).
  Var neg_entropy(Var p);
  Var add(Var a, Var b);
  Var scale(Var a, double factor);

  const Tensor& value(Var v) const;
  double scalar(Var v) const;
  std::size_t num_nodes() const noexcept { return nodes_.size(); }

  /// Back-propagates d(seed * root)/d(parameters) and adds it into `grads`.
  /// `root` must be a scalar node.
  void backward(Var root, Gradients& grads, double seed = 1.0);

  /// Gradient of the last backward() with respect to a non-parameter node.
  const Tensor& grad(Var v) const;

  void clear() { nodes_.clear(); }

 private:
  enum class Op {
    Constant, Param, Affine, Relu, Softmax, ColumnSoftmax, Reshape, Slice,
    MatVec, Column, CrossEntropy, NegEntropy, Add, Scale,
  };

  struct Node {
    Op op = Op::Constant;
    std::size_t in[3] = {0, 0, 0};
    Tensor value;
    Tensor grad;
    std::size_t aux = 0;
    double factor = 0.0;
    ParamId param = 0;
    bool needs_grad = false;
  };

  Var push(Node node, const char* op_name);
  const Node& node(Var v) const;
  Tensor& grad_slot(std::size_t id, Gradients& grads);

  const ParameterSet* params_;
  std::vector<Node> nodes_;
};

}  // namespace lht
