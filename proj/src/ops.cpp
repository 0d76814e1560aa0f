#include "egocap/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "egocap/errors.hpp"

namespace egocap {

namespace {

// C[m x n] += A[m x k] * B[k x n]
void gemm_acc(const double* __restrict a, const double* __restrict b, double* __restrict c,
              std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        const double* arow = a + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            const double* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// dA[m x k] += dC[m x n] * B[k x n]^T
void gemm_acc_bt(const double* __restrict dc, const double* __restrict b, double* __restrict da,
                 std::size_t m, std::size_t k, std::size_t n) {
    std::vector<double> bt(n * k);
    for (std::size_t p = 0; p < k; ++p)
        for (std::size_t j = 0; j < n; ++j) bt[j * k + p] = b[p * n + j];
    gemm_acc(dc, bt.data(), da, m, n, k);
}

// dB[k x n] += A[m x k]^T * dC[m x n]
void gemm_acc_at(const double* __restrict a, const double* __restrict dc, double* __restrict db,
                 std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        const double* grow = dc + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            double* drow = db + p * n;
            for (std::size_t j = 0; j < n; ++j) drow[j] += av * grow[j];
        }
    }
}

[[noreturn]] void shape_mismatch(const char* op, const Tensor& a, const Tensor& b) {
    throw DimensionError(std::string(op) + ": incompatible shapes " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()));
}

void require_finite(const char* op, std::span<const double> v) {
    for (double x : v) {
        if (!std::isfinite(x)) throw NumericError(std::string(op) + ": non-finite input");
    }
}

Shape with_last(const Shape& s, std::size_t last) {
    Shape out = s;
    out.back() = last;
    return out;
}

bool same_leading(const Shape& a, const Shape& b) {
    return a.size() == b.size() && std::equal(a.begin(), a.end() - 1, b.begin());
}

enum class Binary { Add, Sub, Mul };

Tensor binary(Binary kind, const Tensor& a, const Tensor& b) {
    const char* name = kind == Binary::Add ? "add" : kind == Binary::Sub ? "sub" : "mul";
    const bool same = a.shape() == b.shape();
    const bool a_scalar = a.numel() == 1;
    const bool b_scalar = b.numel() == 1;
    if (!same && !a_scalar && !b_scalar) shape_mismatch(name, a, b);

    const Shape out_shape = same ? a.shape() : (a_scalar ? b.shape() : a.shape());
    const std::size_t n = shape_numel(out_shape);
    const auto av = a.values();
    const auto bv = b.values();
    const std::size_t sa = a.numel() == n ? 1 : 0;  // stride 0 broadcasts
    const std::size_t sb = b.numel() == n ? 1 : 0;

    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = av[i * sa];
        const double y = bv[i * sb];
        out[i] = kind == Binary::Add ? x + y : kind == Binary::Sub ? x - y : x * y;
    }

    return make_op_result(out_shape, std::move(out), {&a, &b},
                          [a, b, kind, n, sa, sb](std::span<const double> g) mutable {
                              if (a.requires_grad()) {
                                  auto ga = a.grad_accumulator();
                                  const auto bv = b.values();
                                  for (std::size_t i = 0; i < n; ++i) {
                                      const double d = kind == Binary::Mul ? g[i] * bv[i * sb] : g[i];
                                      ga[i * sa] += d;
                                  }
                              }
                              if (b.requires_grad()) {
                                  auto gb = b.grad_accumulator();
                                  const auto av = a.values();
                                  for (std::size_t i = 0; i < n; ++i) {
                                      double d = g[i];
                                      if (kind == Binary::Sub) d = -d;
                                      if (kind == Binary::Mul) d *= av[i * sa];
                                      gb[i * sb] += d;
                                  }
                              }
                          });
}

template <typename F, typename D>
Tensor unary(const Tensor& x, F forward, D derivative_from_output) {
    const auto xv = x.values();
    std::vector<double> out(xv.size());
    for (std::size_t i = 0; i < xv.size(); ++i) out[i] = forward(xv[i]);
    std::vector<double> kept = out;
    return make_op_result(x.shape(), std::move(out), {&x},
                          [x, y = std::move(kept), derivative_from_output](
                              std::span<const double> g) mutable {
                              auto gx = x.grad_accumulator();
                              const auto xv = x.values();
                              for (std::size_t i = 0; i < gx.size(); ++i)
                                  gx[i] += g[i] * derivative_from_output(xv[i], y[i]);
                          });
}

double stable_sigmoid(double v) {
    if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
}

// Row-wise softmax of x / temperature into `out`.
void softmax_rows(std::span<const double> x, std::size_t rows, std::size_t cols, double temperature,
                  std::span<double> out) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x.data() + r * cols;
        double* yr = out.data() + r * cols;
        const double m = *std::max_element(xr, xr + cols);
        double total = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            yr[j] = std::exp((xr[j] - m) / temperature);
            total += yr[j];
        }
        for (std::size_t j = 0; j < cols; ++j) yr[j] /= total;
    }
}

Tensor pass_through(const Tensor& soft, std::vector<double> forward_values) {
    return make_op_result(soft.shape(), std::move(forward_values), {&soft},
                          [soft](std::span<const double> g) mutable {
                              auto gs = soft.grad_accumulator();
                              for (std::size_t i = 0; i < gs.size(); ++i) gs[i] += g[i];
                          });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) shape_mismatch("matmul", a, b);
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<double> out(m * n, 0.0);
    gemm_acc(a.values().data(), b.values().data(), out.data(), m, k, n);
    return make_op_result({m, n}, std::move(out), {&a, &b},
                          [a, b, m, k, n](std::span<const double> g) mutable {
                              if (a.requires_grad())
                                  gemm_acc_bt(g.data(), b.values().data(),
                                              a.grad_accumulator().data(), m, k, n);
                              if (b.requires_grad())
                                  gemm_acc_at(a.values().data(), g.data(),
                                              b.grad_accumulator().data(), m, k, n);
                          });
}

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& bias) {
    if (w.rank() != 2 || x.cols() != w.dim(0)) shape_mismatch("affine", x, w);
    const std::size_t m = x.rows(), k = x.cols(), n = w.dim(1);
    const bool has_bias = bias.defined();
    if (has_bias && (bias.rank() != 1 || bias.dim(0) != n)) shape_mismatch("affine bias", w, bias);

    std::vector<double> out(m * n, 0.0);
    if (has_bias) {
        const auto bv = bias.values();
        for (std::size_t i = 0; i < m; ++i) std::copy(bv.begin(), bv.end(), out.begin() + i * n);
    }
    gemm_acc(x.values().data(), w.values().data(), out.data(), m, k, n);

    Tensor b_or_x = has_bias ? bias : x;
    return make_op_result(with_last(x.shape(), n), std::move(out), {&x, &w, &b_or_x},
                          [x, w, bias, has_bias, m, k, n](std::span<const double> g) mutable {
                              if (x.requires_grad())
                                  gemm_acc_bt(g.data(), w.values().data(),
                                              x.grad_accumulator().data(), m, k, n);
                              if (w.requires_grad())
                                  gemm_acc_at(x.values().data(), g.data(),
                                              w.grad_accumulator().data(), m, k, n);
                              if (has_bias && bias.requires_grad()) {
                                  auto gb = bias.grad_accumulator();
                                  for (std::size_t i = 0; i < m; ++i)
                                      for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
                              }
                          });
}

Tensor add(const Tensor& a, const Tensor& b) { return binary(Binary::Add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(Binary::Sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(Binary::Mul, a, b); }

Tensor scale_shift(const Tensor& x, double a, double b) {
    const auto xv = x.values();
    std::vector<double> out(xv.size());
    for (std::size_t i = 0; i < xv.size(); ++i) out[i] = a * xv[i] + b;
    return make_op_result(x.shape(), std::move(out), {&x}, [x, a](std::span<const double> g) mutable {
        auto gx = x.grad_accumulator();
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += a * g[i];
    });
}

Tensor scale_rows(const Tensor& x, const Tensor& s) {
    if (s.cols() != 1 || s.rows() != x.rows()) shape_mismatch("scale_rows", x, s);
    const std::size_t r = x.rows(), c = x.cols();
    const auto xv = x.values();
    const auto sv = s.values();
    std::vector<double> out(xv.size());
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] = xv[i * c + j] * sv[i];
    return make_op_result(x.shape(), std::move(out), {&x, &s},
                          [x, s, r, c](std::span<const double> g) mutable {
                              if (x.requires_grad()) {
                                  auto gx = x.grad_accumulator();
                                  const auto sv = s.values();
                                  for (std::size_t i = 0; i < r; ++i)
                                      for (std::size_t j = 0; j < c; ++j)
                                          gx[i * c + j] += g[i * c + j] * sv[i];
                              }
                              if (s.requires_grad()) {
                                  auto gs = s.grad_accumulator();
                                  const auto xv = x.values();
                                  for (std::size_t i = 0; i < r; ++i) {
                                      double acc = 0.0;
                                      for (std::size_t j = 0; j < c; ++j)
                                          acc += g[i * c + j] * xv[i * c + j];
                                      gs[i] += acc;
                                  }
                              }
                          });
}

Tensor normalize_rows(const Tensor& x) {
    const std::size_t r = x.rows(), c = x.cols();
    const auto xv = x.values();
    std::vector<double> out(xv.size());
    std::vector<double> totals(r);
    for (std::size_t i = 0; i < r; ++i) {
        double t = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            if (!(xv[i * c + j] > 0.0)) throw NumericError("normalize_rows: entries must be positive");
            t += xv[i * c + j];
        }
        totals[i] = t;
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] = xv[i * c + j] / t;
    }
    std::vector<double> y = out;
    return make_op_result(x.shape(), std::move(out), {&x},
                          [x, y = std::move(y), totals = std::move(totals), r,
                           c](std::span<const double> g) mutable {
                              auto gx = x.grad_accumulator();
                              for (std::size_t i = 0; i < r; ++i) {
                                  double dot = 0.0;
                                  for (std::size_t j = 0; j < c; ++j) dot += g[i * c + j] * y[i * c + j];
                                  for (std::size_t j = 0; j < c; ++j)
                                      gx[i * c + j] += (g[i * c + j] - dot) / totals[i];
                              }
                          });
}

Tensor concat(std::span<const Tensor> parts) {
    if (parts.empty()) throw DimensionError("concat: no inputs");
    const Shape& first = parts[0].shape();
    std::size_t width = 0;
    std::vector<std::size_t> widths;
    widths.reserve(parts.size());
    for (const auto& p : parts) {
        if (!same_leading(p.shape(), first)) shape_mismatch("concat", parts[0], p);
        widths.push_back(p.cols());
        width += p.cols();
    }
    const std::size_t r = parts[0].rows();
    std::vector<double> out(r * width);
    std::size_t offset = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const auto v = parts[k].values();
        for (std::size_t i = 0; i < r; ++i)
            std::copy_n(v.data() + i * widths[k], widths[k], out.data() + i * width + offset);
        offset += widths[k];
    }
    std::vector<Tensor> kept(parts.begin(), parts.end());
    return make_op_result(with_last(first, width), std::move(out), parts,
                          [kept = std::move(kept), widths = std::move(widths), r,
                           width](std::span<const double> g) mutable {
                              std::size_t offset = 0;
                              for (std::size_t k = 0; k < kept.size(); ++k) {
                                  if (kept[k].requires_grad()) {
                                      auto gk = kept[k].grad_accumulator();
                                      for (std::size_t i = 0; i < r; ++i)
                                          for (std::size_t j = 0; j < widths[k]; ++j)
                                              gk[i * widths[k] + j] += g[i * width + offset + j];
                                  }
                                  offset += widths[k];
                              }
                          });
}

Tensor concat(std::initializer_list<Tensor> parts) {
    return concat(std::span<const Tensor>(parts.begin(), parts.size()));
}

Tensor slice(const Tensor& x, std::size_t begin, std::size_t end) {
    const std::size_t c = x.cols();
    if (begin >= end || end > c) {
        throw IndexError("slice [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") out of range for " + shape_str(x.shape()));
    }
    const std::size_t r = x.rows(), w = end - begin;
    const auto xv = x.values();
    std::vector<double> out(r * w);
    for (std::size_t i = 0; i < r; ++i) std::copy_n(xv.data() + i * c + begin, w, out.data() + i * w);
    return make_op_result(with_last(x.shape(), w), std::move(out), {&x},
                          [x, begin, r, c, w](std::span<const double> g) mutable {
                              auto gx = x.grad_accumulator();
                              for (std::size_t i = 0; i < r; ++i)
                                  for (std::size_t j = 0; j < w; ++j) gx[i * c + begin + j] += g[i * w + j];
                          });
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_numel(shape) != x.numel()) {
        throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
    }
    const auto xv = x.values();
    return make_op_result(std::move(shape), std::vector<double>(xv.begin(), xv.end()), {&x},
                          [x](std::span<const double> g) mutable {
                              auto gx = x.grad_accumulator();
                              for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
                          });
}

Tensor sigmoid(const Tensor& x) {
    return unary(x, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
    return unary(x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor exp(const Tensor& x) {
    return unary(x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
    for (double v : x.values()) {
        if (!(v > 0.0)) throw NumericError("log: input must be positive, got " + std::to_string(v));
    }
    return unary(x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor sum(const Tensor& x) {
    double total = 0.0;
    for (double v : x.values()) total += v;
    return make_op_result({1}, {total}, {&x}, [x](std::span<const double> g) mutable {
        auto gx = x.grad_accumulator();
        for (auto& v : gx) v += g[0];
    });
}

Tensor mean(const Tensor& x) {
    const double n = static_cast<double>(x.numel());
    double total = 0.0;
    for (double v : x.values()) total += v;
    return make_op_result({1}, {total / n}, {&x}, [x, n](std::span<const double> g) mutable {
        auto gx = x.grad_accumulator();
        for (auto& v : gx) v += g[0] / n;
    });
}

Tensor softmax(const Tensor& x, double temperature) {
    if (!(temperature > 0.0)) throw ConfigError("softmax: temperature must be positive");
    require_finite("softmax", x.values());
    const std::size_t r = x.rows(), c = x.cols();
    std::vector<double> out(x.numel());
    softmax_rows(x.values(), r, c, temperature, out);
    std::vector<double> y = out;
    return make_op_result(x.shape(), std::move(out), {&x},
                          [x, y = std::move(y), r, c, temperature](std::span<const double> g) mutable {
                              auto gx = x.grad_accumulator();
                              for (std::size_t i = 0; i < r; ++i) {
                                  double dot = 0.0;
                                  for (std::size_t j = 0; j < c; ++j) dot += g[i * c + j] * y[i * c + j];
                                  for (std::size_t j = 0; j < c; ++j)
                                      gx[i * c + j] += y[i * c + j] * (g[i * c + j] - dot) / temperature;
                              }
                          });
}

Tensor cross_entropy(const Tensor& logits, std::size_t target) {
    if (logits.rows() != 1) {
        throw DimensionError("cross_entropy: expected a single row of logits, got " +
                             shape_str(logits.shape()));
    }
    const std::size_t t[1] = {target};
    const double w[1] = {1.0};
    return cross_entropy(logits, t, w);
}

Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> targets,
                     std::span<const double> weights) {
    const std::size_t r = logits.rows(), c = logits.cols();
    if (targets.size() != r || weights.size() != r) {
        throw DimensionError("cross_entropy: " + std::to_string(r) + " rows but " +
                             std::to_string(targets.size()) + " targets / " +
                             std::to_string(weights.size()) + " weights");
    }
    for (auto t : targets) {
        if (t >= c) {
            throw IndexError("cross_entropy: target " + std::to_string(t) +
                             " out of range for vocabulary " + std::to_string(c));
        }
    }
    require_finite("cross_entropy", logits.values());
    std::vector<double> probs(logits.numel());
    softmax_rows(logits.values(), r, c, 1.0, probs);

    const auto lv = logits.values();
    double loss = 0.0;
    for (std::size_t i = 0; i < r; ++i) {
        if (weights[i] == 0.0) continue;
        const double* row = lv.data() + i * c;
        const double m = *std::max_element(row, row + c);
        double total = 0.0;
        for (std::size_t j = 0; j < c; ++j) total += std::exp(row[j] - m);
        loss += weights[i] * (m + std::log(total) - row[targets[i]]);
    }
    std::vector<std::size_t> tk(targets.begin(), targets.end());
    std::vector<double> wk(weights.begin(), weights.end());
    return make_op_result({1}, {loss}, {&logits},
                          [logits, probs = std::move(probs), tk = std::move(tk), wk = std::move(wk), r,
                           c](std::span<const double> g) mutable {
                              auto gl = logits.grad_accumulator();
                              for (std::size_t i = 0; i < r; ++i) {
                                  if (wk[i] == 0.0) continue;
                                  const double s = g[0] * wk[i];
                                  for (std::size_t j = 0; j < c; ++j) {
                                      const double d = probs[i * c + j] - (j == tk[i] ? 1.0 : 0.0);
                                      gl[i * c + j] += s * d;
                                  }
                              }
                          });
}

Tensor embedding_lookup(const Tensor& table, std::span<const std::size_t> ids) {
    if (table.rank() != 2) throw DimensionError("embedding_lookup: table must be a matrix");
    if (ids.empty()) throw DimensionError("embedding_lookup: no ids");
    const std::size_t vocab = table.dim(0), width = table.dim(1);
    for (auto id : ids) {
        if (id >= vocab) {
            throw IndexError("embedding_lookup: id " + std::to_string(id) + " out of range for vocabulary " +
                             std::to_string(vocab));
        }
    }
    const auto tv = table.values();
    std::vector<double> out(ids.size() * width);
    for (std::size_t i = 0; i < ids.size(); ++i)
        std::copy_n(tv.data() + ids[i] * width, width, out.data() + i * width);
    std::vector<std::size_t> kept(ids.begin(), ids.end());
    return make_op_result({ids.size(), width}, std::move(out), {&table},
                          [table, kept = std::move(kept), width](std::span<const double> g) mutable {
                              auto gt = table.grad_accumulator();
                              for (std::size_t i = 0; i < kept.size(); ++i)
                                  for (std::size_t j = 0; j < width; ++j)
                                      gt[kept[i] * width + j] += g[i * width + j];
                          });
}

Tensor straight_through(const Tensor& soft, const Tensor& hard) {
    if (soft.shape() != hard.shape()) shape_mismatch("straight_through", soft, hard);
    const auto hv = hard.values();
    return pass_through(soft, std::vector<double>(hv.begin(), hv.end()));
}

Tensor straight_through_one_hot(const Tensor& soft) {
    const std::size_t c = soft.cols();
    std::vector<double> out(soft.numel(), 0.0);
    const auto idx = argmax(soft);
    for (std::size_t i = 0; i < idx.size(); ++i) out[i * c + idx[i]] = 1.0;
    return pass_through(soft, std::move(out));
}

Tensor straight_through_threshold(const Tensor& soft, double threshold) {
    const auto sv = soft.values();
    std::vector<double> out(sv.size());
    for (std::size_t i = 0; i < sv.size(); ++i) out[i] = sv[i] > threshold ? 1.0 : 0.0;
    return pass_through(soft, std::move(out));
}

std::vector<std::size_t> argmax(const Tensor& x) {
    const std::size_t r = x.rows(), c = x.cols();
    const auto xv = x.values();
    std::vector<std::size_t> out(r);
    for (std::size_t i = 0; i < r; ++i) {
        const double* row = xv.data() + i * c;
        out[i] = static_cast<std::size_t>(std::max_element(row, row + c) - row);
    }
    return out;
}

Tensor one_hot(std::span<const std::size_t> indices, std::size_t depth) {
    if (indices.empty() || depth == 0) throw DimensionError("one_hot: empty input");
    std::vector<double> out(indices.size() * depth, 0.0);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= depth) {
            throw IndexError("one_hot: index " + std::to_string(indices[i]) + " >= depth " +
                             std::to_string(depth));
        }
        out[i * depth + indices[i]] = 1.0;
    }
    return Tensor({indices.size(), depth}, std::move(out));
}

}  // namespace egocap
