#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

namespace pyrflow {

using Shape = std::vector<int>;

long long shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

class Tape;

// Dense double-precision tensor. The value buffer is shared between handles;
// a tensor is either a constant (node() < 0, never accumulates gradient) or a
// node recorded on a tape.
class Tensor {
   public:
    Tensor() = default;
    Tensor(Shape shape, std::shared_ptr<std::vector<double>> data, Tape* tape, int node);

    static Tensor constant(Shape shape, std::vector<double> values);
    static Tensor zeros(const Shape& shape);
    static Tensor full(const Shape& shape, double v);
    static Tensor scalar(double v);

    const Shape& shape() const { return shape_; }
    long long size() const;
    const std::vector<double>& values() const { return *data_; }
    const std::shared_ptr<std::vector<double>>& data() const { return data_; }
    double item() const;  // requires a single-element tensor

    bool on_tape() const { return node_ >= 0; }
    int node() const { return node_; }
    Tape* tape() const { return tape_; }

   private:
    Shape shape_;
    std::shared_ptr<std::vector<double>> data_;
    Tape* tape_ = nullptr;
    int node_ = -1;
};

// Named trainable tensor. Gradient accumulates across backward passes until
// the optimizer clears it.
struct Parameter {
    std::string name;
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;

    Parameter(std::string n, Shape s, std::vector<double> v);
};

class ParamStore {
   public:
    Parameter& create(const std::string& name, Shape shape, std::vector<double> init);
    Parameter& at(const std::string& name);
    const Parameter& at(const std::string& name) const;
    bool has(const std::string& name) const;
    std::vector<Parameter*> all();  // name order
    std::vector<const Parameter*> all() const;
    void zero_grads();
    size_t count() const { return params_.size(); }

   private:
    std::map<std::string, std::unique_ptr<Parameter>> params_;
};

// Reverse-mode tape. Nodes are recorded in forward order, which is a valid
// topological order, and replayed once in reverse during backward(). A tape
// and its tensors belong to one thread for the forward/backward pair.
class Tape {
   public:
    // Called during backward with the node's own id; reads its output
    // gradient via grad_ptr(self) and accumulates into parent buffers.
    using BackwardFn = std::function<void(Tape&, int self)>;

    // Leaf with gradient tracking (a differentiable input).
    Tensor leaf(Shape shape, std::vector<double> values);
    // Leaf bound to a parameter; memoized so repeated use shares one node.
    Tensor use(Parameter& p);

    // Record an op output. parents lists the node ids of recorded inputs
    // (constants are not parents). fn accumulates into parent grad buffers.
    Tensor record(Shape shape, std::shared_ptr<std::vector<double>> data,
                  std::vector<int> parents, BackwardFn fn);

    void backward(const Tensor& loss);

    // Gradient of a recorded tensor after backward(); zeros if unreached.
    std::vector<double> grad(const Tensor& t) const;
    const std::vector<double>* grad_ptr(int node) const;  // nullptr if unreached
    std::vector<double>& grad_buffer(int node);           // allocates zeros on first use

    // Gradients keyed by parameter name; unreached parameters report zeros.
    std::map<std::string, std::vector<double>> parameter_gradients() const;
    // Adds this tape's parameter gradients into Parameter::grad.
    void accumulate_param_grads();

    size_t node_count() const { return nodes_.size(); }
    size_t op_count() const { return op_count_; }  // recorded non-leaf ops

    // Releases nodes, saved activations and gradients.
    void clear();

   private:
    struct Node {
        Shape shape;
        std::vector<int> parents;
        BackwardFn backward;  // null for leaves
    };

    std::vector<Node> nodes_;
    std::vector<std::vector<double>> grads_;
    std::vector<std::pair<Parameter*, int>> param_leaves_;
    std::unordered_map<const Parameter*, int> param_node_;
    std::unordered_map<int, std::shared_ptr<std::vector<double>>> leased_;
    size_t op_count_ = 0;
    bool ran_backward_ = false;
};

}  // namespace pyrflow
