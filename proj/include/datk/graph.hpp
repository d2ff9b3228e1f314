#pragma once

// Tape-based reverse-mode differentiation over Tensor values.
//
// A Graph records every operation applied to its Vars. backward() walks the
// tape in reverse and accumulates d(loss)/d(node) into each node that
// requires a gradient. Parameters enter the tape by reference through
// param(); the ParameterSet must outlive the graph and must not be updated
// until backward() has returned.

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "datk/params.hpp"
#include "datk/tensor.hpp"

namespace datk {

struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
  bool valid() const { return id != static_cast<std::size_t>(-1); }
};

enum class Mode { Train, Eval };

class Graph {
 public:
  // Called once during backward with the gradient of `out` complete.
  using BackwardFn = std::function<void(Graph&, Var out)>;

  // track_params=false records parameters as constants, which skips every
  // weight-gradient computation (attacks only need input gradients).
  explicit Graph(bool track_params = true) : track_params_(track_params) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  Var input(Tensor value, bool requires_grad = true);
  Var param(const ParameterSet& params, const std::string& name);

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

  // Gradient accumulated by the last backward(); zeros when none reached v.
  Tensor grad(Var v) const;
  // Mutable gradient buffer of v, allocated on first use. Only valid for
  // nodes that require a gradient; used by op backward functions.
  std::vector<double>& grad_buffer(Var v);
  std::span<const double> grad_span(Var v) const;

  // Appends an op node. requires_grad is the OR of the inputs; backward is
  // dropped when no input needs a gradient.
  Var record(Tensor value, std::span<const Var> inputs, BackwardFn backward);

  // Runs the reverse sweep from a scalar loss. Returns the gradients of all
  // tracked parameters, plus input_grad for `wrt` when given.
  GradientRecord backward(Var loss, Var wrt = {});

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    const Tensor* external = nullptr;
    std::vector<double> grad;
    bool requires_grad = false;
    BackwardFn backward;
    std::string param_name;
  };

  const Tensor& node_value(const Node& n) const { return n.external ? *n.external : n.value; }

  std::vector<Node> nodes_;
  std::unordered_map<std::string, std::size_t> param_nodes_;
  bool track_params_;
};

// Elementary ops. Shapes must agree exactly; there is no broadcasting.
namespace ops {

Var add(Graph& g, Var a, Var b);
Var sub(Graph& g, Var a, Var b);
Var scale(Graph& g, Var a, double s);
Var mul_const(Graph& g, Var a, const Tensor& c);
Var sum(Graph& g, Var a);
Var mean(Graph& g, Var a);
Var reshape(Graph& g, Var a, Shape shape);
Var relu(Graph& g, Var a);
Var sigmoid(Graph& g, Var a);
Var clamp(Graph& g, Var a, double lo, double hi);
// Value copy with no gradient path.
Var detach(Graph& g, Var a);

// x[N,Ci,H,W] * w[Co,Ci,3,3] + b[Co], padding 1.
Var conv3x3(Graph& g, Var x, Var w, Var b, std::size_t stride);
// x[N,in] w[out,in] b[out] -> [N,out]
Var linear(Graph& g, Var x, Var w, Var b);
// [N,C,H,W] -> [N,C]
Var global_avg_pool(Graph& g, Var x);

struct BatchNormState {
  Tensor* running_mean;
  Tensor* running_var;
  double momentum = 0.1;
  double eps = 1e-5;
};
// Per-channel normalization of [N,C,...]. Train mode normalizes by batch
// statistics and folds them into the running statistics; eval mode reads
// the running statistics and writes nothing.
Var batch_norm(Graph& g, Var x, Var gamma, Var beta, const BatchNormState& state, Mode mode);

}  // namespace ops

}  // namespace datk
