#include "egocap/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

#include "egocap/errors.hpp"
#include "egocap/rng.hpp"

namespace egocap {

std::string GradCheckReport::summary() const {
    std::ostringstream os;
    os.precision(3);
    os << (passed ? "PASS" : "FAIL") << " max_rel_err=" << std::scientific << max_rel_error
       << " coords=" << coords_checked << " worst=(input " << worst_input << ", coord " << worst_coord
       << ", analytic " << worst_analytic << ", numeric " << worst_numeric << ")";
    return os.str();
}

namespace {

double evaluate(const ScalarFn& f, std::span<const Tensor> inputs) {
    NoGradScope no_grad;
    const Tensor out = f(inputs);
    if (out.numel() != 1) throw ContractError("grad_check: function must return a scalar");
    return out.item();
}

}  // namespace

GradCheckReport grad_check(const ScalarFn& f, std::span<const Tensor> inputs,
                           const GradCheckOptions& options) {
    if (!(options.step > 0.0)) throw ConfigError("grad_check: step must be positive");

    const double first = evaluate(f, inputs);
    const double second = evaluate(f, inputs);
    if (std::memcmp(&first, &second, sizeof(double)) != 0) {
        throw ContractError("grad_check: function is not deterministic (two forward passes disagree)");
    }

    std::vector<Tensor> work(inputs.begin(), inputs.end());
    std::vector<bool> had_flag;
    for (auto& t : work) {
        had_flag.push_back(t.requires_grad());
        t.set_requires_grad(true);
        t.zero_grad();
    }
    {
        Tape tape;
        TapeScope scope(tape);
        const Tensor out = f(work);
        tape.backward(out);
    }
    std::vector<std::vector<double>> analytic;
    for (auto& t : work) {
        const auto g = t.grad();
        analytic.emplace_back(g.begin(), g.end());
        if (analytic.back().empty()) analytic.back().assign(t.numel(), 0.0);
    }

    GradCheckReport report;
    Rng sampler(options.sample_seed);
    for (std::size_t k = 0; k < work.size(); ++k) {
        auto values = work[k].mutable_values();
        std::vector<std::size_t> coords(values.size());
        std::iota(coords.begin(), coords.end(), 0);
        if (options.max_coords_per_input && coords.size() > options.max_coords_per_input) {
            sampler.shuffle(coords);
            coords.resize(options.max_coords_per_input);
            std::sort(coords.begin(), coords.end());
        }
        for (auto i : coords) {
            const double saved = values[i];
            values[i] = saved + options.step;
            const double plus = evaluate(f, work);
            values[i] = saved - options.step;
            const double minus = evaluate(f, work);
            values[i] = saved;

            const double numeric = (plus - minus) / (2.0 * options.step);
            const double a = analytic[k][i];
            const double denom = std::max({std::abs(a), std::abs(numeric), options.abs_floor});
            const double rel = std::abs(a - numeric) / denom;
            ++report.coords_checked;
            if (rel > report.max_rel_error || !std::isfinite(rel)) {
                report.max_rel_error = std::isfinite(rel) ? rel : INFINITY;
                report.worst_input = k;
                report.worst_coord = i;
                report.worst_analytic = a;
                report.worst_numeric = numeric;
            }
        }
    }
    for (std::size_t k = 0; k < work.size(); ++k) {
        work[k].zero_grad();
        work[k].set_requires_grad(had_flag[k]);
    }
    report.passed = report.max_rel_error <= options.tolerance;
    return report;
}

}  // namespace egocap
