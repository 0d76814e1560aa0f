#include "egocap/tensor.hpp"

#include <sstream>

#include "egocap/errors.hpp"

namespace egocap {

const char* error_kind_name(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::Dimension: return "dimension";
        case ErrorKind::Index: return "index";
        case ErrorKind::Numeric: return "numeric";
        case ErrorKind::Data: return "data";
        case ErrorKind::Config: return "config";
        case ErrorKind::Contract: return "contract";
    }
    return "unknown";
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto e : shape) n *= e;
    return n;
}

namespace {

void validate_shape(const Shape& shape) {
    if (shape.empty()) throw DimensionError("tensor shape must have at least one extent");
    for (auto e : shape) {
        if (e == 0) throw DimensionError("tensor extents must be positive, got " + shape_str(shape));
    }
}

thread_local Tape* g_active_tape = nullptr;

}  // namespace

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
    validate_shape(shape);
    if (shape_numel(shape) != values.size()) {
        throw DimensionError("shape " + shape_str(shape) + " needs " +
                             std::to_string(shape_numel(shape)) + " values, got " +
                             std::to_string(values.size()));
    }
    node_ = std::make_shared<detail::Node>();
    node_->shape = std::move(shape);
    node_->value = std::move(values);
    node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    return filled(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::filled(Shape shape, double value, bool requires_grad) {
    validate_shape(shape);
    const auto n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return Tensor({1}, {value}, requires_grad);
}

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
    const auto n = values.size();
    return Tensor({n}, std::move(values), requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                      bool requires_grad) {
    return Tensor({rows, cols}, std::move(values), requires_grad);
}

detail::Node& Tensor::node() const {
    if (!node_) throw ContractError("use of an undefined tensor");
    return *node_;
}

const Shape& Tensor::shape() const { return node().shape; }

std::size_t Tensor::dim(std::size_t i) const {
    const auto& s = shape();
    if (i >= s.size()) {
        throw IndexError("axis " + std::to_string(i) + " out of range for shape " + shape_str(s));
    }
    return s[i];
}

std::size_t Tensor::rows() const {
    const auto& s = shape();
    std::size_t r = 1;
    for (std::size_t i = 0; i + 1 < s.size(); ++i) r *= s[i];
    return r;
}

std::size_t Tensor::cols() const { return shape().back(); }

double Tensor::item() const {
    if (numel() != 1) {
        throw DimensionError("item() needs a single-element tensor, got " + shape_str(shape()));
    }
    return node().value[0];
}

double Tensor::at(std::size_t i) const {
    if (i >= numel()) throw IndexError("flat index " + std::to_string(i) + " out of range");
    return node().value[i];
}

double Tensor::at(std::size_t row, std::size_t col) const {
    if (row >= rows() || col >= cols()) {
        throw IndexError("index (" + std::to_string(row) + "," + std::to_string(col) +
                         ") out of range for " + shape_str(shape()));
    }
    return node().value[row * cols() + col];
}

void Tensor::zero_grad() {
    auto& g = node().grad;
    std::fill(g.begin(), g.end(), 0.0);
}

Tensor Tensor::clone() const {
    const auto& n = node();
    return Tensor(n.shape, n.value, n.requires_grad);
}

Tensor Tensor::detach() const {
    const auto& n = node();
    return Tensor(n.shape, n.value, false);
}

void Tape::record(std::shared_ptr<detail::Node> output, BackwardFn backward) {
    entries_.push_back(Entry{std::move(output), std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1) {
        throw DimensionError("backward() needs a single-element loss");
    }
    auto& seed = loss.handle()->grad_buffer();
    seed[0] += 1.0;
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
        const auto& g = it->output->grad;
        if (g.empty()) continue;
        it->backward(g);
    }
    entries_.clear();
}

TapeScope::TapeScope(Tape& tape) noexcept : previous_(g_active_tape) { g_active_tape = &tape; }

TapeScope::~TapeScope() { g_active_tape = previous_; }

Tape* active_tape() noexcept { return g_active_tape; }

NoGradScope::NoGradScope() noexcept : previous_(g_active_tape) { g_active_tape = nullptr; }

NoGradScope::~NoGradScope() { g_active_tape = previous_; }

namespace {

template <typename Range>
Tensor make_result_impl(Shape shape, std::vector<double> values, const Range& inputs,
                        BackwardFn backward) {
    Tensor out(std::move(shape), std::move(values));
    Tape* tape = active_tape();
    if (!tape) return out;
    bool any = false;
    for (const auto& in : inputs) {
        if (in.requires_grad()) {
            any = true;
            break;
        }
    }
    if (!any) return out;
    out.set_requires_grad(true);
    tape->record(out.handle(), std::move(backward));
    return out;
}

struct PtrRange {
    std::initializer_list<const Tensor*> ptrs;
    struct It {
        const Tensor* const* p;
        const Tensor& operator*() const { return **p; }
        It& operator++() {
            ++p;
            return *this;
        }
        bool operator!=(const It& o) const { return p != o.p; }
    };
    It begin() const { return It{ptrs.begin()}; }
    It end() const { return It{ptrs.end()}; }
};

}  // namespace

Tensor make_op_result(Shape shape, std::vector<double> values,
                      std::initializer_list<const Tensor*> inputs, BackwardFn backward) {
    return make_result_impl(std::move(shape), std::move(values), PtrRange{inputs},
                            std::move(backward));
}

Tensor make_op_result(Shape shape, std::vector<double> values, std::span<const Tensor> inputs,
                      BackwardFn backward) {
    return make_result_impl(std::move(shape), std::move(values), inputs, std::move(backward));
}

}  // namespace egocap
