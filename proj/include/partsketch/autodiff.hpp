#pragma once

// Reverse-mode differentiation over Tensor2 values.
//
// A Tape records one forward pass. Leaves are constants, parameters (bound to
// a ParameterSet entry) or free variables. backward() may run once per tape
// and returns one gradient tensor per registered parameter, shaped like the
// parameter value.

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "partsketch/tensor.hpp"

namespace partsketch {

struct ParamId {
  std::uint32_t index = 0;
  friend bool operator==(ParamId, ParamId) = default;
};

using Gradients = std::vector<Tensor2>;

class ParameterSet {
 public:
  ParamId add(std::string name, Tensor2 init);

  std::size_t size() const { return values_.size(); }
  const Tensor2& value(ParamId id) const { return values_.at(id.index); }
  Tensor2& value(ParamId id) { return values_.at(id.index); }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  std::optional<ParamId> find(const std::string& name) const;

  const std::vector<Tensor2>& values() const { return values_; }
  std::vector<Tensor2>& values() { return values_; }

  Gradients zero_gradients() const;
  std::size_t scalar_count() const;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor2> values_;
  std::unordered_map<std::string, std::uint32_t> by_name_;
};

class Tape;

class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::uint32_t id() const { return id_; }
  const Tensor2& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

class BackwardError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class Tape {
 public:
  // Receives the output gradient; accumulates into input slots via the tape.
  using Backprop = std::function<void(Tape&, const Tensor2&)>;

  explicit Tape(const ParameterSet* params = nullptr) : params_(params) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor2 value);
  Var variable(Tensor2 value);
  Var param(ParamId id);

  const Tensor2& value(Var v) const { return nodes_.at(v.id()).value; }
  // Gradient of the last backward() target with respect to `v`; zeros when
  // `v` does not influence the target.
  Tensor2 grad(Var v) const;

  Gradients backward(Var loss);
  bool backward_done() const { return backward_done_; }
  std::size_t node_count() const { return nodes_.size(); }

  // Op construction interface.
  Var record(Tensor2 value, std::initializer_list<Var> inputs, Backprop backprop);
  Var record(Tensor2 value, const std::vector<Var>& inputs, Backprop backprop);
  bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }
  // Adds `g` into the gradient slot of `v` when it requires a gradient.
  void accumulate(Var v, const Tensor2& g);
  // Mutable slot for in-place accumulation, or nullptr when not needed.
  Tensor2* grad_slot(Var v);

 private:
  struct Node {
    Tensor2 value;
    Tensor2 grad;
    bool requires_grad = false;
    bool has_grad = false;
    Backprop backprop;
  };

  const ParameterSet* params_;
  std::vector<Node> nodes_;
  std::unordered_map<std::uint32_t, std::uint32_t> param_nodes_;
  bool backward_done_ = false;
};

enum class Activation { Relu, Tanh, Identity };

Activation parse_activation(const std::string& name);
std::string to_string(Activation a);

namespace ad {

Var matmul(Var a, Var b);
// a * b^T
Var matmul_nt(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var hadamard(Var a, Var b);
Var scale(Var a, double s);
// Adds a 1 x cols row to every row of a.
Var add_row(Var a, Var row);
Var relu(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
Var activate(Var a, Activation act);
Var softmax_rows(Var a);
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
Var slice_cols(Var a, std::size_t begin, std::size_t count);
Var concat_cols(const std::vector<Var>& parts);
// Scalars are 1x1.
Var sum(Var a);
Var mse(Var a, Var b);
Var l1(Var a, Var b);

}  // namespace ad

// Plain-value versions used outside the tape.
Tensor2 matmul(const Tensor2& a, const Tensor2& b);
Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b);
Tensor2 softmax_rows(const Tensor2& x);
Tensor2 layer_norm(const Tensor2& x, const Tensor2& gain, const Tensor2& bias, double eps = 1e-5);
double mse(const Tensor2& a, const Tensor2& b);
double l1(const Tensor2& a, const Tensor2& b);

}  // namespace partsketch
