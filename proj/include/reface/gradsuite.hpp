#pragma once

#include <string>
#include <vector>

namespace reface::check {

struct OpReport {
    std::string name;
    double max_rel_err = 0.0;
    int64_t coords = 0;
    bool ok = false;
};

// 64-bit finite-difference verification, grouped per module. `module` is one
// of suite_names() or "all". `corrupt` appends a harness self-test entry
// whose backward is deliberately wrong; its report must come back not-ok.
std::vector<OpReport> run_suite(const std::string& module, double tol = 1e-5,
                                bool corrupt = false);

const std::vector<std::string>& suite_names();

}  // namespace reface::check
