#pragma once

#include <string>
#include <utility>
#include <vector>

#include "reface/nn.hpp"
#include "reface/tensor.hpp"

namespace reface::metrics {

// Inclusive pixel rectangle.
struct Box {
    int x0 = 0, y0 = 0, x1 = -1, y1 = -1;
    bool contains(int x, int y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
};

// Windowed SSIM over [3,H,W] images in [-1,1]: 11x11 Gaussian window
// (sigma 1.5), K1=0.01, K2=0.03, dynamic range 2, valid windows only,
// averaged over channels.
double ssim(const Tensor<float>& a, const Tensor<float>& b);

// Mean Euclidean distance over interleaved (x,y) landmark pairs.
double landmark_error(const Tensor<float>& f_geo, const Tensor<float>& l);

// Mean |a-b| over pixels inside the union of boxes vs outside it.
std::pair<double, double> region_l1(const Tensor<float>& a, const Tensor<float>& b,
                                    const std::vector<Box>& boxes);

template <typename S>
int64_t count_params(const ParamList<S>& params) {
    int64_t n = 0;
    for (const auto& p : params) n += p.tensor.numel();
    return n;
}

struct BenchReport {
    std::string config_name;
    int resolution = 0;
    int threads = 1;
    int iterations = 0;
    int64_t total_params = 0;
    std::vector<std::pair<std::string, int64_t>> submodule_params;
    double mean_ms = 0.0;
    double p95_ms = 0.0;
    double fps = 0.0;

    std::string text() const;
    std::string csv() const;
};

}  // namespace reface::metrics
