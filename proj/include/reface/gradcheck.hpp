#pragma once

#include <functional>
#include <string>

#include "reface/tensor.hpp"

namespace reface {

struct GradCheckReport {
    double max_rel_err = 0.0;
    int64_t coords_checked = 0;
    std::string worst;  // coordinate with the largest relative error

    bool ok(double tol = 1e-5) const { return max_rel_err < tol; }
};

// Compares backward() against central finite differences for every input
// that requires grad. `fn` must rebuild a scalar loss from the given leaves
// deterministically (it is re-evaluated ~2x per checked coordinate).
// max_coords <= 0 checks every coordinate; otherwise a seeded subsample per
// input. Runs in double; h = 1e-4 puts truncation error around 1e-8.
GradCheckReport grad_check(
    const std::function<Tensor<double>(const std::vector<Tensor<double>>&)>& fn,
    std::vector<Tensor<double>> inputs, double h = 1e-4, int max_coords = -1,
    uint64_t seed = 1234);

}  // namespace reface
