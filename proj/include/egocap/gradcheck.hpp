#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "egocap/tensor.hpp"

namespace egocap {

struct GradCheckOptions {
    double step = 1e-5;
    double tolerance = 1e-4;
    // Relative error is |analytic - numeric| / max(|analytic|, |numeric|, abs_floor),
    // so coordinates whose true gradient is ~0 are judged on an absolute scale.
    double abs_floor = 1e-6;
    // 0 checks every coordinate; otherwise a seeded sample per input.
    std::size_t max_coords_per_input = 0;
    std::uint64_t sample_seed = 0;
};

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t coords_checked = 0;
    std::size_t worst_input = 0;
    std::size_t worst_coord = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    bool passed = false;

    std::string summary() const;
};

using ScalarFn = std::function<Tensor(std::span<const Tensor>)>;

// Compares reverse-mode gradients of a scalar-valued f against central
// differences, coordinate by coordinate. Inputs are perturbed in place and
// restored. Throws ContractError when two identical forward passes disagree.
GradCheckReport grad_check(const ScalarFn& f, std::span<const Tensor> inputs,
                           const GradCheckOptions& options = {});

}  // namespace egocap
