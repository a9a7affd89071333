#include "reface/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "reface/common.hpp"
#include "reface/rng.hpp"

namespace reface {

GradCheckReport grad_check(
    const std::function<Tensor<double>(const std::vector<Tensor<double>>&)>& fn,
    std::vector<Tensor<double>> inputs, double h, int max_coords, uint64_t seed) {
    for (auto& t : inputs)
        if (t.requires_grad()) t.zero_grad();

    Tensor<double> loss = fn(inputs);
    REFACE_CHECK(loss.numel() == 1, "grad_check: fn must return a scalar, got ",
                 shape_str(loss.shape()));
    backward(loss);

    std::vector<std::vector<double>> analytic;
    for (auto& t : inputs) {
        if (t.requires_grad()) {
            auto g = t.grad();
            analytic.emplace_back(g.begin(), g.end());
        } else {
            analytic.emplace_back();
        }
    }

    GradCheckReport report;
    NoGradGuard no_grad;
    Rng rng(seed);
    for (size_t ti = 0; ti < inputs.size(); ++ti) {
        if (!inputs[ti].requires_grad()) continue;
        const int64_t n = inputs[ti].numel();
        std::vector<int64_t> coords;
        if (max_coords <= 0 || n <= max_coords) {
            coords.resize(n);
            for (int64_t i = 0; i < n; ++i) coords[i] = i;
        } else {
            std::unordered_set<int64_t> seen;
            while (static_cast<int>(seen.size()) < max_coords)
                seen.insert(rng.uniform_int(0, n - 1));
            coords.assign(seen.begin(), seen.end());
            std::sort(coords.begin(), coords.end());
        }
        double* data = inputs[ti].ptr();
        for (int64_t c : coords) {
            const double saved = data[c];
            data[c] = saved + h;
            const double lp = fn(inputs).item();
            data[c] = saved - h;
            const double lm = fn(inputs).item();
            data[c] = saved;
            const double numeric = (lp - lm) / (2.0 * h);
            const double a = analytic[ti][c];
            const double rel =
                std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-2});
            ++report.coords_checked;
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst = str("input ", ti, " coord ", c, ": analytic=", a,
                                   " numeric=", numeric);
            }
        }
    }
    return report;
}

}  // namespace reface
