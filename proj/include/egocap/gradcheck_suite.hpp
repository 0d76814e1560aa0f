#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "egocap/gradcheck.hpp"

namespace egocap {

struct NamedGradCheck {
    std::string name;
    GradCheckReport report;
};

// Every differentiable primitive and recurrent cell on random inputs in
// [-2, 2] (positive where the op requires it), each reduced to a scalar
// through a fixed random weighting.
std::vector<NamedGradCheck> primitive_grad_checks(std::uint64_t seed, double tolerance = 1e-4);

// Caption loss of a tiny encoder / fusion / attention / decoder model on two
// synthetic segments with the softmax attention variant, checked for every
// parameter coordinate. The boundary detector is switched off: its
// straight-through surrogate is not the derivative of the forward pass.
NamedGradCheck end_to_end_grad_check(std::uint64_t seed, double tolerance = 1e-3);

}  // namespace egocap
