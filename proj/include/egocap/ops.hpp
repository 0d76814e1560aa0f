#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "egocap/tensor.hpp"

// Differentiable primitives. Every op checks shapes explicitly; the only
// implicit broadcast is a single-element operand in add/sub/mul.
//
// "Row" ops treat a tensor as rows() x cols(): the last axis is the feature
// axis and every leading axis is folded into the row count.
namespace egocap {

Tensor matmul(const Tensor& a, const Tensor& b);
// x[rows x in] * w[in x out] + bias[out]. `bias` may be undefined.
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& bias = Tensor());

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
// a * x + b with scalar a, b.
Tensor scale_shift(const Tensor& x, double a, double b);
inline Tensor scale(const Tensor& x, double a) { return scale_shift(x, a, 0.0); }
inline Tensor one_minus(const Tensor& x) { return scale_shift(x, -1.0, 1.0); }

// x[r x n] with every row multiplied by the matching entry of s[r x 1].
Tensor scale_rows(const Tensor& x, const Tensor& s);
// Each row divided by its sum. Entries must be positive.
Tensor normalize_rows(const Tensor& x);

// Concatenation / slicing along the last axis; leading shapes must agree.
Tensor concat(std::span<const Tensor> parts);
Tensor concat(std::initializer_list<Tensor> parts);
Tensor slice(const Tensor& x, std::size_t begin, std::size_t end);
Tensor reshape(const Tensor& x, Shape shape);

Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// Row-wise softmax of x / temperature, max-subtracted.
Tensor softmax(const Tensor& x, double temperature = 1.0);

// -log softmax(logits)[target] for a single row of logits.
Tensor cross_entropy(const Tensor& logits, std::size_t target);
// Sum over rows of weights[r] * -log softmax(logits[r])[targets[r]].
// A zero weight contributes exactly zero gradient to its row.
Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> targets,
                     std::span<const double> weights);

// Rows of table[vocab x width] picked by ids -> [ids.size() x width].
Tensor embedding_lookup(const Tensor& table, std::span<const std::size_t> ids);

// Forward value of `hard`, gradient routed to `soft` unchanged.
Tensor straight_through(const Tensor& soft, const Tensor& hard);
// one_hot(argmax) per row in the forward pass, identity gradient to `soft`.
Tensor straight_through_one_hot(const Tensor& soft);
// 1 where soft > threshold else 0 in the forward pass, identity gradient.
Tensor straight_through_threshold(const Tensor& soft, double threshold);

// Non-differentiable helpers.
std::vector<std::size_t> argmax(const Tensor& x);  // one index per row
Tensor one_hot(std::span<const std::size_t> indices, std::size_t depth);

}  // namespace egocap
