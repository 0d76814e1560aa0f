#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace egocap {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // empty until something flows into it
    bool requires_grad = false;

    std::vector<double>& grad_buffer() {
        if (grad.empty()) grad.assign(value.size(), 0.0);
        return grad;
    }
};

}  // namespace detail

// Dense row-major tensor of doubles. A Tensor is a shared handle: copies
// refer to the same storage, use clone() for an independent copy.
//
// Values are immutable once produced by an op; only leaves (parameters)
// are updated in place, through mutable_values().
class Tensor {
public:
    Tensor() = default;
    Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor filled(Shape shape, double value, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    static Tensor vector(std::vector<double> values, bool requires_grad = false);
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                         bool requires_grad = false);

    bool defined() const noexcept { return static_cast<bool>(node_); }

    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t numel() const { return node().value.size(); }
    std::size_t dim(std::size_t i) const;
    // Product of all extents but the last (1 for rank-1 tensors).
    std::size_t rows() const;
    // Extent of the last axis.
    std::size_t cols() const;

    std::span<const double> values() const { return node().value; }
    std::span<double> mutable_values() { return node().value; }
    double item() const;
    double at(std::size_t i) const;
    double at(std::size_t row, std::size_t col) const;

    bool requires_grad() const { return node().requires_grad; }
    void set_requires_grad(bool on) { node().requires_grad = on; }

    bool has_grad() const { return !node().grad.empty(); }
    // Empty span when no gradient has reached this tensor.
    std::span<const double> grad() const { return node().grad; }
    // Gradient buffer, allocated (zero-filled) on first use.
    std::span<double> grad_accumulator() const { return node().grad_buffer(); }
    void zero_grad();

    Tensor clone() const;
    // Value copy that does not participate in differentiation.
    Tensor detach() const;

    bool same_storage(const Tensor& other) const noexcept { return node_ == other.node_; }
    const std::shared_ptr<detail::Node>& handle() const noexcept { return node_; }

private:
    detail::Node& node() const;

    std::shared_ptr<detail::Node> node_;
};

// Receives the gradient of the op's output and accumulates into inputs.
using BackwardFn = std::function<void(std::span<const double> out_grad)>;

// Define-by-run record of differentiable ops. Each op is appended when it
// executes, so the record order is a topological order of the graph and
// reverse replay visits every op exactly once.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    void record(std::shared_ptr<detail::Node> output, BackwardFn backward);
    std::size_t size() const noexcept { return entries_.size(); }

    // Seeds d(loss)/d(loss) = 1, replays recorded ops in reverse and clears
    // the record. The loss must hold exactly one element.
    void backward(const Tensor& loss);
    void clear() noexcept { entries_.clear(); }

private:
    struct Entry {
        std::shared_ptr<detail::Node> output;
        BackwardFn backward;
    };
    std::vector<Entry> entries_;
};

// Makes a tape the recording target of the current thread for its lifetime.
class TapeScope {
public:
    explicit TapeScope(Tape& tape) noexcept;
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    Tape* previous_;
};

Tape* active_tape() noexcept;

// Suspends recording (inference, finite differences).
class NoGradScope {
public:
    NoGradScope() noexcept;
    ~NoGradScope();
    NoGradScope(const NoGradScope&) = delete;
    NoGradScope& operator=(const NoGradScope&) = delete;

private:
    Tape* previous_;
};

// Builds the result of a primitive. When a tape is active and some input
// requires grad, the result requires grad and `backward` is recorded;
// otherwise `backward` is dropped.
Tensor make_op_result(Shape shape, std::vector<double> values,
                      std::initializer_list<const Tensor*> inputs, BackwardFn backward);
Tensor make_op_result(Shape shape, std::vector<double> values,
                      std::span<const Tensor> inputs, BackwardFn backward);

}  // namespace egocap
