#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace ogan {

/// Tensor extents, NCHW for images. Every extent is positive.
class Shape {
public:
    Shape() = default;
    Shape(std::initializer_list<std::size_t> dims) : dims_(dims) { validate(); }
    explicit Shape(std::vector<std::size_t> dims) : dims_(std::move(dims)) { validate(); }

    std::size_t rank() const noexcept { return dims_.size(); }
    std::size_t operator[](std::size_t i) const { return dims_.at(i); }
    const std::vector<std::size_t>& dims() const noexcept { return dims_; }

    std::size_t numel() const noexcept {
        return std::accumulate(dims_.begin(), dims_.end(), std::size_t{1}, std::multiplies<>{});
    }

    friend bool operator==(const Shape&, const Shape&) = default;

    std::string str() const {
        std::ostringstream os;
        os << '[';
        for (std::size_t i = 0; i < dims_.size(); ++i) os << (i ? "x" : "") << dims_[i];
        os << ']';
        return os.str();
    }

private:
    void validate() const {
        for (auto d : dims_)
            if (d == 0) throw ShapeError("tensor extents must be positive");
    }

    std::vector<std::size_t> dims_;
};

namespace detail {

template <typename T>
struct Storage {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;  // empty until first needed
    bool requires_grad = false;
    bool is_leaf = true;

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), T(0));
    }
};

}  // namespace detail

/// Dense row-major array with an optional gradient slot.
///
/// Copies are shallow handles onto the same storage. Values are treated as
/// immutable once an operation has consumed them; only the optimizer writes
/// parameter values in place.
template <typename T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;

    static Tensor zeros(const Shape& shape, bool requires_grad = false) {
        return filled(shape, T(0), requires_grad);
    }

    static Tensor filled(const Shape& shape, T value, bool requires_grad = false) {
        Tensor t;
        t.s_ = std::make_shared<detail::Storage<T>>();
        t.s_->shape = shape;
        t.s_->data.assign(shape.numel(), value);
        t.set_requires_grad(requires_grad);
        return t;
    }

    static Tensor from(const Shape& shape, std::vector<T> values, bool requires_grad = false) {
        if (values.size() != shape.numel())
            throw ShapeError("tensor " + shape.str() + " needs " + std::to_string(shape.numel()) +
                             " values, got " + std::to_string(values.size()));
        Tensor t;
        t.s_ = std::make_shared<detail::Storage<T>>();
        t.s_->shape = shape;
        t.s_->data = std::move(values);
        t.set_requires_grad(requires_grad);
        return t;
    }

    static Tensor scalar(T value, bool requires_grad = false) {
        return filled(Shape{1}, value, requires_grad);
    }

    bool defined() const noexcept { return static_cast<bool>(s_); }
    const Shape& shape() const { return s_->shape; }
    std::size_t dim(std::size_t i) const { return s_->shape[i]; }
    std::size_t numel() const { return s_->data.size(); }

    std::span<const T> data() const { return s_->data; }
    std::span<T> mutable_data() { return s_->data; }
    T item() const {
        if (numel() != 1) throw ShapeError("item() on non-scalar tensor " + shape().str());
        return s_->data[0];
    }
    T operator[](std::size_t i) const { return s_->data[i]; }

    bool requires_grad() const { return s_->requires_grad; }
    bool is_leaf() const { return s_->is_leaf; }

    void set_requires_grad(bool on) {
        s_->requires_grad = on;
        if (on) s_->ensure_grad();
    }

    bool has_grad() const { return s_->grad.size() == s_->data.size(); }

    /// Gradient accumulator; zero-length view when never allocated.
    std::span<const T> grad() const { return s_->grad; }
    std::span<T> mutable_grad() {
        s_->ensure_grad();
        return s_->grad;
    }

    void zero_grad() {
        if (has_grad()) std::fill(s_->grad.begin(), s_->grad.end(), T(0));
    }

    /// Same values, no history, no gradient.
    Tensor detach() const { return from(shape(), s_->data, false); }

    Tensor clone() const { return from(shape(), s_->data, requires_grad()); }

    bool same_storage(const Tensor& other) const { return s_ == other.s_; }

    detail::Storage<T>* storage() const { return s_.get(); }
    const std::shared_ptr<detail::Storage<T>>& storage_handle() const { return s_; }

private:
    std::shared_ptr<detail::Storage<T>> s_;
};

/// Append-only record of differentiable operations.
///
/// Nodes are appended as operations execute, so operands always precede the
/// node consuming them; backward() walks the nodes once in reverse.
template <typename T>
class Tape {
public:
    struct Node {
        std::vector<std::shared_ptr<detail::Storage<T>>> operands;
        std::shared_ptr<detail::Storage<T>> output;
        std::function<void()> backward;
    };

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;
    Tape(Tape&&) noexcept = default;
    Tape& operator=(Tape&&) noexcept = default;

    /// A tape that never records; operations run forward only.
    static Tape inference() {
        Tape t;
        t.recording_ = false;
        return t;
    }

    bool recording() const noexcept { return recording_; }
    std::size_t size() const noexcept { return nodes_.size(); }
    void clear() { nodes_.clear(); }

    /// Whether an op on these operands should be recorded.
    bool wants(std::initializer_list<const Tensor<T>*> operands) const {
        if (!recording_) return false;
        return std::any_of(operands.begin(), operands.end(),
                           [](const Tensor<T>* t) { return t && t->defined() && t->requires_grad(); });
    }

    /// Records `output` as produced from `operands`. The backward rule reads
    /// output.grad and accumulates into operand grads.
    void record(std::initializer_list<const Tensor<T>*> operands, Tensor<T>& output,
                std::function<void()> backward) {
        Node node;
        for (const Tensor<T>* t : operands)
            if (t && t->defined()) node.operands.push_back(t->storage_handle());
        output.storage()->is_leaf = false;
        output.set_requires_grad(true);
        node.output = output.storage_handle();
        node.backward = std::move(backward);
        nodes_.push_back(std::move(node));
    }

    const std::vector<Node>& nodes() const noexcept { return nodes_; }

private:
    std::vector<Node> nodes_;
    bool recording_ = true;
};

/// Populates grad slots with d(loss)/d(tensor).
///
/// Intermediate gradients are reset at the start of every pass; leaf
/// gradients accumulate across passes until the caller zeroes them.
template <typename T>
void backward(const Tensor<T>& loss, Tape<T>& tape) {
    if (!loss.defined() || loss.numel() != 1)
        throw ShapeError("backward() needs a scalar loss, got " +
                         (loss.defined() ? loss.shape().str() : std::string("undefined")));
    auto* root = loss.storage();
    const auto& nodes = tape.nodes();
    bool found = false;
    for (const auto& node : nodes) {
        node.output->ensure_grad();
        std::fill(node.output->grad.begin(), node.output->grad.end(), T(0));
        if (node.output.get() == root) found = true;
    }
    if (!found) {
        if (root->is_leaf && root->requires_grad) {
            root->ensure_grad();
            root->grad[0] += T(1);
            return;
        }
        throw ArgumentError("backward(): loss was not produced on this tape");
    }
    // Each pass is computed from zero and then added to what the leaves held,
    // so a repeated pass contributes exactly the same amount.
    std::vector<std::pair<detail::Storage<T>*, std::vector<T>>> stashed;
    for (const auto& node : nodes)
        for (const auto& op : node.operands) {
            if (!op->is_leaf || !op->requires_grad) continue;
            if (std::any_of(stashed.begin(), stashed.end(), [&](const auto& s) { return s.first == op.get(); }))
                continue;
            op->ensure_grad();
            stashed.emplace_back(op.get(), std::vector<T>(op->grad.size(), T(0)));
            stashed.back().second.swap(op->grad);
        }
    root->grad[0] = T(1);
    for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
        for (const auto& op : it->operands)
            if (op->requires_grad) op->ensure_grad();
        it->backward();
    }
    for (auto& [leaf, before] : stashed)
        for (std::size_t i = 0; i < before.size(); ++i) leaf->grad[i] += before[i];
}

}  // namespace ogan
