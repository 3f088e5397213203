#include "partsketch/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "partsketch/kernels.hpp"

namespace partsketch {

// ---------------------------------------------------------------------------
// ParameterSet

ParamId ParameterSet::add(std::string name, Tensor2 init) {
  if (by_name_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  const auto index = static_cast<std::uint32_t>(values_.size());
  by_name_.emplace(name, index);
  names_.push_back(std::move(name));
  values_.push_back(std::move(init));
  return ParamId{index};
}

std::optional<ParamId> ParameterSet::find(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) return std::nullopt;
  return ParamId{it->second};
}

Gradients ParameterSet::zero_gradients() const {
  Gradients g;
  g.reserve(values_.size());
  for (const auto& v : values_) g.emplace_back(v.rows(), v.cols());
  return g;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += v.size();
  return n;
}

// ---------------------------------------------------------------------------
// Tape

const Tensor2& Var::value() const { return tape_->value(*this); }

Var Tape::constant(Tensor2 value) {
  nodes_.push_back(Node{std::move(value), {}, false, false, {}});
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::variable(Tensor2 value) {
  nodes_.push_back(Node{std::move(value), {}, true, false, {}});
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::param(ParamId id) {
  if (params_ == nullptr) throw std::logic_error("Tape::param: tape has no parameter set");
  auto it = param_nodes_.find(id.index);
  if (it != param_nodes_.end()) return Var(this, it->second);
  Var v = variable(params_->value(id));
  param_nodes_.emplace(id.index, v.id());
  return v;
}

Var Tape::record(Tensor2 value, std::initializer_list<Var> inputs, Backprop backprop) {
  return record(std::move(value), std::vector<Var>(inputs), std::move(backprop));
}

Var Tape::record(Tensor2 value, const std::vector<Var>& inputs, Backprop backprop) {
  if (backward_done_) throw BackwardError("Tape::record: tape already consumed by backward()");
  bool needs = false;
  for (const Var& in : inputs) needs = needs || nodes_[in.id()].requires_grad;
  nodes_.push_back(Node{std::move(value), {}, needs, false, needs ? std::move(backprop) : nullptr});
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

void Tape::accumulate(Var v, const Tensor2& g) {
  Node& n = nodes_[v.id()];
  if (!n.requires_grad) return;
  if (!n.has_grad) {
    n.grad = g;
    n.has_grad = true;
  } else {
    n.grad.axpy(1.0, g);
  }
}

Tensor2* Tape::grad_slot(Var v) {
  Node& n = nodes_[v.id()];
  if (!n.requires_grad) return nullptr;
  if (!n.has_grad) {
    n.grad = Tensor2(n.value.rows(), n.value.cols());
    n.has_grad = true;
  }
  return &n.grad;
}

Tensor2 Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.id());
  if (n.has_grad) return n.grad;
  return Tensor2(n.value.rows(), n.value.cols());
}

Gradients Tape::backward(Var loss) {
  if (backward_done_) throw BackwardError("Tape::backward: second backward pass without a new forward");
  const Node& target = nodes_.at(loss.id());
  if (target.value.rows() != 1 || target.value.cols() != 1)
    throw DimensionError("Tape::backward: loss must be 1x1, got " + target.value.shape_string());
  backward_done_ = true;

  accumulate(loss, Tensor2(1, 1, 1.0));
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad || !n.backprop) continue;
    n.backprop(*this, n.grad);
    n.backprop = nullptr;
  }

  Gradients out = params_ ? params_->zero_gradients() : Gradients{};
  for (const auto& [param_index, node_id] : param_nodes_) {
    const Node& n = nodes_[node_id];
    if (n.has_grad) out[param_index] = n.grad;
  }
  return out;
}

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::Relu;
  if (name == "tanh") return Activation::Tanh;
  if (name == "identity") return Activation::Identity;
  throw std::invalid_argument("unknown activation: " + name);
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
    case Activation::Identity: return "identity";
  }
  return "relu";
}

// ---------------------------------------------------------------------------
// Plain-value kernels

Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
  if (a.cols() != b.rows())
    throw DimensionError("matmul: inner dimensions differ " + a.shape_string() + " x " +
                         b.shape_string());
  Tensor2 c(a.rows(), b.cols());
  kernels::matmul(a.values(), b.values(), c.values(), a.rows(), a.cols(), b.cols());
  return c;
}

Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b) {
  if (a.cols() != b.cols())
    throw DimensionError("matmul_nt: inner dimensions differ " + a.shape_string() + " x " +
                         b.shape_string() + "^T");
  Tensor2 c(a.rows(), b.rows());
  kernels::matmul_nt(a.values(), b.values(), c.values(), a.rows(), a.cols(), b.rows());
  return c;
}

namespace {

// a^T * b where a is k x m and b is k x n
Tensor2 matmul_tn(const Tensor2& a, const Tensor2& b) {
  Tensor2 c(a.cols(), b.cols());
  kernels::matmul_tn(a.values(), b.values(), c.values(), a.cols(), a.rows(), b.cols());
  return c;
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

struct LayerNormCache {
  Tensor2 xhat;
  std::vector<double> inv_std;
};

LayerNormCache normalize_rows(const Tensor2& x, double eps) {
  LayerNormCache c{Tensor2(x.rows(), x.cols()), std::vector<double>(x.rows())};
  const double n = static_cast<double>(x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto row = x.row(r);
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : row) var += (v - mean) * (v - mean);
    var /= n;
    const double inv = 1.0 / std::sqrt(var + eps);
    c.inv_std[r] = inv;
    for (std::size_t j = 0; j < x.cols(); ++j) c.xhat(r, j) = (row[j] - mean) * inv;
  }
  return c;
}

void check_row_param(const Tensor2& x, const Tensor2& p, const char* what) {
  if (p.rows() != 1 || p.cols() != x.cols())
    throw DimensionError(std::string(what) + ": expected 1x" + std::to_string(x.cols()) + ", got " +
                         p.shape_string());
}

}  // namespace

Tensor2 softmax_rows(const Tensor2& x) {
  Tensor2 y(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto in = x.row(r);
    auto out = y.row(r);
    const double m = *std::max_element(in.begin(), in.end());
    double s = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) {
      out[j] = std::exp(in[j] - m);
      s += out[j];
    }
    for (double& v : out) v /= s;
  }
  return y;
}

Tensor2 layer_norm(const Tensor2& x, const Tensor2& gain, const Tensor2& bias, double eps) {
  check_row_param(x, gain, "layer_norm gain");
  check_row_param(x, bias, "layer_norm bias");
  Tensor2 y = normalize_rows(x, eps).xhat;
  for (std::size_t r = 0; r < y.rows(); ++r)
    for (std::size_t j = 0; j < y.cols(); ++j) y(r, j) = y(r, j) * gain[j] + bias[j];
  return y;
}

double mse(const Tensor2& a, const Tensor2& b) {
  require_same_shape(a, b, "mse");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

double l1(const Tensor2& a, const Tensor2& b) {
  require_same_shape(a, b, "l1");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

// ---------------------------------------------------------------------------
// Differentiable ops

namespace ad {

namespace {

Tape& same_tape(Var a, Var b) {
  if (&a.tape() != &b.tape()) throw std::logic_error("ops across different tapes");
  return a.tape();
}

template <typename F>
Tensor2 map(const Tensor2& x, F f) {
  Tensor2 y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  return y;
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  return t.record(partsketch::matmul(a.value(), b.value()), {a, b},
                  [a, b](Tape& tape, const Tensor2& g) {
                    if (tape.requires_grad(a)) tape.accumulate(a, partsketch::matmul_nt(g, b.value()));
                    if (tape.requires_grad(b)) tape.accumulate(b, matmul_tn(a.value(), g));
                  });
}

Var matmul_nt(Var a, Var b) {
  Tape& t = same_tape(a, b);
  return t.record(partsketch::matmul_nt(a.value(), b.value()), {a, b},
                  [a, b](Tape& tape, const Tensor2& g) {
                    // c = a b^T: da = g b, db = g^T a
                    if (tape.requires_grad(a)) tape.accumulate(a, partsketch::matmul(g, b.value()));
                    if (tape.requires_grad(b)) tape.accumulate(b, matmul_tn(g, a.value()));
                  });
}

Var transpose(Var a) {
  return a.tape().record(a.value().transposed(), {a}, [a](Tape& tape, const Tensor2& g) {
    tape.accumulate(a, g.transposed());
  });
}

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a.value(), b.value(), "add");
  Tensor2 y = a.value();
  y.axpy(1.0, b.value());
  return t.record(std::move(y), {a, b}, [a, b](Tape& tape, const Tensor2& g) {
    tape.accumulate(a, g);
    tape.accumulate(b, g);
  });
}

Var sub(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a.value(), b.value(), "sub");
  Tensor2 y = a.value();
  y.axpy(-1.0, b.value());
  return t.record(std::move(y), {a, b}, [a, b](Tape& tape, const Tensor2& g) {
    tape.accumulate(a, g);
    if (Tensor2* slot = tape.grad_slot(b)) slot->axpy(-1.0, g);
  });
}

Var hadamard(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a.value(), b.value(), "hadamard");
  Tensor2 y(a.rows(), a.cols());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] * b.value()[i];
  return t.record(std::move(y), {a, b}, [a, b](Tape& tape, const Tensor2& g) {
    if (Tensor2* slot = tape.grad_slot(a))
      for (std::size_t i = 0; i < g.size(); ++i) (*slot)[i] += g[i] * b.value()[i];
    if (Tensor2* slot = tape.grad_slot(b))
      for (std::size_t i = 0; i < g.size(); ++i) (*slot)[i] += g[i] * a.value()[i];
  });
}

Var scale(Var a, double s) {
  Tensor2 y = map(a.value(), [s](double v) { return s * v; });
  return a.tape().record(std::move(y), {a}, [a, s](Tape& tape, const Tensor2& g) {
    if (Tensor2* slot = tape.grad_slot(a)) slot->axpy(s, g);
  });
}

Var add_row(Var a, Var row) {
  Tape& t = same_tape(a, row);
  check_row_param(a.value(), row.value(), "add_row");
  Tensor2 y = a.value();
  const Tensor2& r = row.value();
  for (std::size_t i = 0; i < y.rows(); ++i)
    for (std::size_t j = 0; j < y.cols(); ++j) y(i, j) += r[j];
  return t.record(std::move(y), {a, row}, [a, row](Tape& tape, const Tensor2& g) {
    tape.accumulate(a, g);
    if (Tensor2* slot = tape.grad_slot(row))
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) (*slot)[j] += g(i, j);
  });
}

Var relu(Var a) {
  Tensor2 y = map(a.value(), [](double v) { return v > 0.0 ? v : 0.0; });
  return a.tape().record(std::move(y), {a}, [a](Tape& tape, const Tensor2& g) {
    if (Tensor2* slot = tape.grad_slot(a))
      for (std::size_t i = 0; i < g.size(); ++i)
        if (a.value()[i] > 0.0) (*slot)[i] += g[i];
  });
}

Var tanh(Var a) {
  Tensor2 y = map(a.value(), [](double v) { return std::tanh(v); });
  Tensor2 yc = y;
  return a.tape().record(std::move(y), {a}, [a, yc = std::move(yc)](Tape& tape, const Tensor2& g) {
    if (Tensor2* slot = tape.grad_slot(a))
      for (std::size_t i = 0; i < g.size(); ++i) (*slot)[i] += g[i] * (1.0 - yc[i] * yc[i]);
  });
}

Var sigmoid(Var a) {
  Tensor2 y = map(a.value(), stable_sigmoid);
  Tensor2 yc = y;
  return a.tape().record(std::move(y), {a}, [a, yc = std::move(yc)](Tape& tape, const Tensor2& g) {
    if (Tensor2* slot = tape.grad_slot(a))
      for (std::size_t i = 0; i < g.size(); ++i) (*slot)[i] += g[i] * yc[i] * (1.0 - yc[i]);
  });
}

Var activate(Var a, Activation act) {
  switch (act) {
    case Activation::Relu: return relu(a);
    case Activation::Tanh: return tanh(a);
    case Activation::Identity: return a;
  }
  return a;
}

Var softmax_rows(Var a) {
  Tensor2 y = partsketch::softmax_rows(a.value());
  Tensor2 yc = y;
  return a.tape().record(std::move(y), {a}, [a, yc = std::move(yc)](Tape& tape, const Tensor2& g) {
    Tensor2* slot = tape.grad_slot(a);
    if (!slot) return;
    for (std::size_t r = 0; r < g.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t j = 0; j < g.cols(); ++j) dot += g(r, j) * yc(r, j);
      for (std::size_t j = 0; j < g.cols(); ++j) (*slot)(r, j) += yc(r, j) * (g(r, j) - dot);
    }
  });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  Tape& t = same_tape(x, gain);
  same_tape(x, bias);
  check_row_param(x.value(), gain.value(), "layer_norm gain");
  check_row_param(x.value(), bias.value(), "layer_norm bias");
  auto cache = normalize_rows(x.value(), eps);
  Tensor2 y(x.rows(), x.cols());
  const Tensor2& gv = gain.value();
  const Tensor2& bv = bias.value();
  for (std::size_t r = 0; r < y.rows(); ++r)
    for (std::size_t j = 0; j < y.cols(); ++j) y(r, j) = cache.xhat(r, j) * gv[j] + bv[j];
  return t.record(std::move(y), {x, gain, bias},
                  [x, gain, bias, cache = std::move(cache)](Tape& tape, const Tensor2& g) {
                    const std::size_t rows = g.rows(), cols = g.cols();
                    const Tensor2& gv = gain.value();
                    if (Tensor2* slot = tape.grad_slot(gain))
                      for (std::size_t r = 0; r < rows; ++r)
                        for (std::size_t j = 0; j < cols; ++j)
                          (*slot)[j] += g(r, j) * cache.xhat(r, j);
                    if (Tensor2* slot = tape.grad_slot(bias))
                      for (std::size_t r = 0; r < rows; ++r)
                        for (std::size_t j = 0; j < cols; ++j) (*slot)[j] += g(r, j);
                    Tensor2* slot = tape.grad_slot(x);
                    if (!slot) return;
                    const double n = static_cast<double>(cols);
                    std::vector<double> dxhat(cols);
                    for (std::size_t r = 0; r < rows; ++r) {
                      double s1 = 0.0, s2 = 0.0;
                      for (std::size_t j = 0; j < cols; ++j) {
                        dxhat[j] = g(r, j) * gv[j];
                        s1 += dxhat[j];
                        s2 += dxhat[j] * cache.xhat(r, j);
                      }
                      const double k = cache.inv_std[r] / n;
                      for (std::size_t j = 0; j < cols; ++j)
                        (*slot)(r, j) += k * (n * dxhat[j] - s1 - cache.xhat(r, j) * s2);
                    }
                  });
}

Var slice_cols(Var a, std::size_t begin, std::size_t count) {
  const Tensor2& v = a.value();
  if (begin + count > v.cols())
    throw DimensionError("slice_cols: range [" + std::to_string(begin) + "," +
                         std::to_string(begin + count) + ") exceeds " + v.shape_string());
  Tensor2 y(v.rows(), count);
  for (std::size_t r = 0; r < v.rows(); ++r)
    for (std::size_t j = 0; j < count; ++j) y(r, j) = v(r, begin + j);
  return a.tape().record(std::move(y), {a}, [a, begin, count](Tape& tape, const Tensor2& g) {
    if (Tensor2* slot = tape.grad_slot(a))
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t j = 0; j < count; ++j) (*slot)(r, begin + j) += g(r, j);
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  if (parts.size() == 1) return parts.front();
  Tape& t = parts.front().tape();
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw DimensionError("concat_cols: row counts differ");
    cols += p.cols();
  }
  Tensor2 y(rows, cols);
  std::size_t off = 0;
  for (const Var& p : parts) {
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < p.cols(); ++j) y(r, off + j) = p.value()(r, j);
    off += p.cols();
  }
  std::vector<std::size_t> offsets;
  off = 0;
  for (const Var& p : parts) {
    offsets.push_back(off);
    off += p.cols();
  }
  return t.record(std::move(y), parts, [parts, offsets](Tape& tape, const Tensor2& g) {
    for (std::size_t k = 0; k < parts.size(); ++k) {
      Tensor2* slot = tape.grad_slot(parts[k]);
      if (!slot) continue;
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t j = 0; j < slot->cols(); ++j) (*slot)(r, j) += g(r, offsets[k] + j);
    }
  });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return a.tape().record(Tensor2(1, 1, s), {a}, [a](Tape& tape, const Tensor2& g) {
    if (Tensor2* slot = tape.grad_slot(a))
      for (double& v : slot->values()) v += g[0];
  });
}

Var mse(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const double v = partsketch::mse(a.value(), b.value());
  return t.record(Tensor2(1, 1, v), {a, b}, [a, b](Tape& tape, const Tensor2& g) {
    const double k = 2.0 * g[0] / static_cast<double>(a.value().size());
    if (Tensor2* slot = tape.grad_slot(a))
      for (std::size_t i = 0; i < slot->size(); ++i)
        (*slot)[i] += k * (a.value()[i] - b.value()[i]);
    if (Tensor2* slot = tape.grad_slot(b))
      for (std::size_t i = 0; i < slot->size(); ++i)
        (*slot)[i] -= k * (a.value()[i] - b.value()[i]);
  });
}

Var l1(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const double v = partsketch::l1(a.value(), b.value());
  return t.record(Tensor2(1, 1, v), {a, b}, [a, b](Tape& tape, const Tensor2& g) {
    const double k = g[0] / static_cast<double>(a.value().size());
    auto sign = [](double d) { return d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0); };
    if (Tensor2* slot = tape.grad_slot(a))
      for (std::size_t i = 0; i < slot->size(); ++i)
        (*slot)[i] += k * sign(a.value()[i] - b.value()[i]);
    if (Tensor2* slot = tape.grad_slot(b))
      for (std::size_t i = 0; i < slot->size(); ++i)
        (*slot)[i] -= k * sign(a.value()[i] - b.value()[i]);
  });
}

}  // namespace ad
}  // namespace partsketch
