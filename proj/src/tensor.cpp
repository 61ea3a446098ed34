#include "pyrflow/tensor.hpp"

#include <sstream>
#include <stdexcept>

namespace pyrflow {

long long shape_numel(const Shape& s) {
    long long n = 1;
    for (int d : s) n *= d;
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) os << "x";
        os << s[i];
    }
    os << "]";
    return os.str();
}

Tensor::Tensor(Shape shape, std::shared_ptr<std::vector<double>> data, Tape* tape, int node)
    : shape_(std::move(shape)), data_(std::move(data)), tape_(tape), node_(node) {
    if (static_cast<long long>(data_->size()) != shape_numel(shape_))
        throw std::invalid_argument("tensor data size " + std::to_string(data_->size()) +
                                    " does not match shape " + shape_str(shape_));
}

Tensor Tensor::constant(Shape shape, std::vector<double> values) {
    return Tensor(std::move(shape), std::make_shared<std::vector<double>>(std::move(values)),
                  nullptr, -1);
}

Tensor Tensor::zeros(const Shape& shape) {
    return constant(shape, std::vector<double>(shape_numel(shape), 0.0));
}

Tensor Tensor::full(const Shape& shape, double v) {
    return constant(shape, std::vector<double>(shape_numel(shape), v));
}

Tensor Tensor::scalar(double v) { return constant({1}, {v}); }

long long Tensor::size() const { return shape_numel(shape_); }

double Tensor::item() const {
    if (size() != 1)
        throw std::invalid_argument("item() requires a single-element tensor, got " +
                                    shape_str(shape_));
    return (*data_)[0];
}

Parameter::Parameter(std::string n, Shape s, std::vector<double> v)
    : name(std::move(n)), shape(std::move(s)), value(std::move(v)) {
    if (static_cast<long long>(value.size()) != shape_numel(shape))
        throw std::invalid_argument("parameter " + name + " init size mismatch");
    grad.assign(value.size(), 0.0);
}

Parameter& ParamStore::create(const std::string& name, Shape shape, std::vector<double> init) {
    if (params_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
    auto p = std::make_unique<Parameter>(name, std::move(shape), std::move(init));
    Parameter& ref = *p;
    params_[name] = std::move(p);
    return ref;
}

Parameter& ParamStore::at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("no parameter named " + name);
    return *it->second;
}

const Parameter& ParamStore::at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("no parameter named " + name);
    return *it->second;
}

bool ParamStore::has(const std::string& name) const { return params_.count(name) != 0; }

std::vector<Parameter*> ParamStore::all() {
    std::vector<Parameter*> out;
    out.reserve(params_.size());
    for (auto& [k, v] : params_) out.push_back(v.get());
    return out;
}

std::vector<const Parameter*> ParamStore::all() const {
    std::vector<const Parameter*> out;
    out.reserve(params_.size());
    for (const auto& [k, v] : params_) out.push_back(v.get());
    return out;
}

void ParamStore::zero_grads() {
    for (auto& [k, v] : params_) std::fill(v->grad.begin(), v->grad.end(), 0.0);
}

Tensor Tape::leaf(Shape shape, std::vector<double> values) {
    auto data = std::make_shared<std::vector<double>>(std::move(values));
    nodes_.push_back(Node{shape, {}, nullptr});
    return Tensor(std::move(shape), std::move(data), this, static_cast<int>(nodes_.size()) - 1);
}

Tensor Tape::use(Parameter& p) {
    auto it = param_node_.find(&p);
    if (it != param_node_.end()) {
        // reuse the recorded node so both uses share one gradient slot
        return Tensor(p.shape, leased_.at(it->second), this, it->second);
    }
    Tensor t = leaf(p.shape, p.value);
    param_node_[&p] = t.node();
    param_leaves_.emplace_back(&p, t.node());
    leased_[t.node()] = t.data();
    return t;
}

Tensor Tape::record(Shape shape, std::shared_ptr<std::vector<double>> data,
                    std::vector<int> parents, BackwardFn fn) {
    nodes_.push_back(Node{shape, std::move(parents), std::move(fn)});
    ++op_count_;
    return Tensor(std::move(shape), std::move(data), this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::backward(const Tensor& loss) {
    if (loss.size() != 1)
        throw std::invalid_argument("backward() requires a scalar loss, got " +
                                    shape_str(loss.shape()));
    if (loss.tape() != this || !loss.on_tape())
        throw std::invalid_argument("backward() loss is not recorded on this tape");
    grads_.assign(nodes_.size(), {});
    grad_buffer(loss.node())[0] = 1.0;
    for (int i = loss.node(); i >= 0; --i) {
        if (grads_[i].empty()) continue;  // unreachable from the loss
        if (nodes_[i].backward) nodes_[i].backward(*this, i);
    }
    ran_backward_ = true;
}

std::vector<double>& Tape::grad_buffer(int node) {
    if (grads_[node].empty()) grads_[node].assign(shape_numel(nodes_[node].shape), 0.0);
    return grads_[node];
}

const std::vector<double>* Tape::grad_ptr(int node) const {
    if (node < 0 || node >= static_cast<int>(grads_.size()) || grads_[node].empty())
        return nullptr;
    return &grads_[node];
}

std::vector<double> Tape::grad(const Tensor& t) const {
    if (!t.on_tape()) return std::vector<double>(t.size(), 0.0);
    const std::vector<double>* g = grad_ptr(t.node());
    if (!g) return std::vector<double>(t.size(), 0.0);
    return *g;
}

std::map<std::string, std::vector<double>> Tape::parameter_gradients() const {
    std::map<std::string, std::vector<double>> out;
    for (const auto& [p, node] : param_leaves_) {
        const std::vector<double>* g = grad_ptr(node);
        if (g)
            out[p->name] = *g;
        else
            out[p->name] = std::vector<double>(p->value.size(), 0.0);
    }
    return out;
}

void Tape::accumulate_param_grads() {
    for (const auto& [p, node] : param_leaves_) {
        const std::vector<double>* g = grad_ptr(node);
        if (!g) continue;
        for (size_t i = 0; i < p->grad.size(); ++i) p->grad[i] += (*g)[i];
    }
}

void Tape::clear() {
    nodes_.clear();
    grads_.clear();
    param_leaves_.clear();
    param_node_.clear();
    leased_.clear();
    op_count_ = 0;
    ran_backward_ = false;
}

}  // namespace pyrflow
