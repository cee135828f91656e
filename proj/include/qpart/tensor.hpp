#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace qpart::diff {

using Shape = std::vector<int>;

inline std::size_t numel(const Shape& s) {
  std::size_t n = 1;
  for (int d : s) n *= static_cast<std::size_t>(d);
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Parameter group for differential learning rates at test time.
enum class Group { periodic_bn, aperiodic_bn, base_bn, backbone };

inline const char* group_name(Group g) {
  switch (g) {
    case Group::periodic_bn: return "periodic_bn";
    case Group::aperiodic_bn: return "aperiodic_bn";
    case Group::base_bn: return "base_bn";
    default: return "backbone";
  }
}

inline Group group_from_name(const std::string& name) {
  if (name == "periodic_bn") return Group::periodic_bn;
  if (name == "aperiodic_bn") return Group::aperiodic_bn;
  if (name == "base_bn") return Group::base_bn;
  if (name == "backbone") return Group::backbone;
  throw std::invalid_argument("unknown param group: " + name);
}

template <typename S>
class GraphT;

// Dense row-major array. `node >= 0` ties the tensor to a recorded graph
// node; node == -1 marks a constant that gradients do not flow through.
template <typename S>
struct TensorT {
  Shape shape;
  std::shared_ptr<std::vector<S>> data;
  GraphT<S>* graph = nullptr;
  int node = -1;

  std::size_t size() const { return data ? data->size() : 0; }
  S* ptr() { return data->data(); }
  const S* ptr() const { return data->data(); }
  S& operator[](std::size_t i) { return (*data)[i]; }
  const S& operator[](std::size_t i) const { return (*data)[i]; }
  bool on_graph() const { return node >= 0; }
  double scalar() const {
    if (size() != 1) throw ShapeError("scalar() on tensor of shape " + shape_str(shape));
    return static_cast<double>((*data)[0]);
  }
};

template <typename S>
TensorT<S> make_tensor(Shape shape, std::vector<S> values) {
  if (numel(shape) != values.size())
    throw ShapeError("tensor data length " + std::to_string(values.size()) +
                     " does not match shape " + shape_str(shape));
  TensorT<S> t;
  t.shape = std::move(shape);
  t.data = std::make_shared<std::vector<S>>(std::move(values));
  return t;
}

template <typename S>
TensorT<S> make_full(Shape shape, S fill) {
  return make_tensor<S>(std::move(shape), std::vector<S>(numel(shape), fill));
}

// Trainable parameter: value, gradient and momentum buffer share one shape.
template <typename S>
struct ParamT {
  std::string name;
  Shape shape;
  std::shared_ptr<std::vector<S>> value;
  std::vector<S> grad;
  std::vector<S> momentum;
  Group group = Group::backbone;

  ParamT() = default;
  ParamT(std::string name_, Shape shape_, Group group_)
      : name(std::move(name_)),
        shape(std::move(shape_)),
        value(std::make_shared<std::vector<S>>(numel(shape), S(0))),
        grad(numel(shape), S(0)),
        momentum(numel(shape), S(0)),
        group(group_) {}

  std::size_t size() const { return value->size(); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), S(0)); }
};

// Reverse-mode tape. Nodes are appended in execution order, so insertion
// order is a topological order; backward walks it once in reverse.
// Gradient buffers are 64-bit regardless of the forward scalar type.
template <typename S>
class GraphT {
 public:
  using Tensor = TensorT<S>;
  using BackFn = std::function<void(GraphT&, int)>;

  GraphT() = default;
  GraphT(const GraphT&) = delete;
  GraphT& operator=(const GraphT&) = delete;
  GraphT(GraphT&&) = delete;
  GraphT& operator=(GraphT&&) = delete;

  // Grad-capable input (gradient readable via grad_of after backward).
  Tensor leaf(Shape shape, std::vector<S> values) {
    return record(std::move(shape), std::move(values), nullptr);
  }

  Tensor leaf(const Tensor& t) {
    Tensor out = t;
    out.graph = this;
    out.node = add_node(out, nullptr, nullptr);
    return out;
  }

  // Parameter leaf: after backward, the node gradient is accumulated into
  // p.grad (cast to S).
  Tensor use(ParamT<S>& p) {
    Tensor t;
    t.shape = p.shape;
    t.data = p.value;
    t.graph = this;
    t.node = add_node(t, nullptr, &p);
    return t;
  }

  Tensor record(Shape shape, std::vector<S> values, BackFn back) {
    Tensor t = make_tensor<S>(std::move(shape), std::move(values));
    t.graph = this;
    t.node = add_node(t, std::move(back), nullptr);
    return t;
  }

  void backward(const Tensor& loss) {
    if (loss.graph != this || !loss.on_graph())
      throw std::invalid_argument("backward: loss is not on this graph");
    if (numel(loss.shape) != 1)
      throw ShapeError("backward: loss must be scalar, got " + shape_str(loss.shape));
    if (backward_done_) throw std::logic_error("backward: graph already differentiated");
    backward_done_ = true;
    gbuf(loss.node)[0] = 1.0;
    for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
      Node& n = nodes_[id];
      if (n.back && !n.grad.empty()) n.back(*this, id);
    }
    for (Node& n : nodes_) {
      if (n.param && !n.grad.empty()) {
        auto& g = n.param->grad;
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += static_cast<S>(n.grad[i]);
      }
    }
  }

  // Gradient buffer of a node, allocated (zeroed) on first touch.
  std::vector<double>& gbuf(int id) {
    Node& n = nodes_.at(id);
    if (n.grad.empty()) n.grad.assign(numel(n.value.shape), 0.0);
    return n.grad;
  }

  bool has_grad(int id) const { return !nodes_.at(id).grad.empty(); }

  const Tensor& value(int id) const { return nodes_.at(id).value; }

  // Copy of a node's gradient (zeros if it never received one).
  std::vector<double> grad_of(int id) const {
    const Node& n = nodes_.at(id);
    if (n.grad.empty()) return std::vector<double>(numel(n.value.shape), 0.0);
    return n.grad;
  }

  std::size_t num_nodes() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    std::vector<double> grad;
    BackFn back;
    ParamT<S>* param = nullptr;
  };

  int add_node(const Tensor& value, BackFn back, ParamT<S>* param) {
    nodes_.push_back(Node{value, {}, std::move(back), param});
    return static_cast<int>(nodes_.size()) - 1;
  }

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

using Tensor = TensorT<float>;
using Graph = GraphT<float>;
using Param = ParamT<float>;

}  // namespace qpart::diff
