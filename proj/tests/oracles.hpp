#pragma once

// Deliberately naive reference implementations, written against the math
// definitions rather than the production kernels: iterate output
// coordinates and sum products, nothing shared with src/ops_nn.cpp.

#include <vector>

#include "reface/rng.hpp"
#include "reface/tensor.hpp"

namespace reftest {

template <typename S>
std::vector<S> conv2d_oracle(const std::vector<S>& x, int n, int cin, int h, int w,
                             const std::vector<S>& wt, int cout, int kh, int kw,
                             const std::vector<S>& b, int stride, int pad, int groups) {
    const int cg = cin / groups;
    const int co_per_g = cout / groups;
    const int ho = (h + 2 * pad - kh) / stride + 1;
    const int wo = (w + 2 * pad - kw) / stride + 1;
    std::vector<S> out(static_cast<size_t>(n) * cout * ho * wo);
    for (int ni = 0; ni < n; ++ni)
        for (int co = 0; co < cout; ++co)
            for (int oy = 0; oy < ho; ++oy)
                for (int ox = 0; ox < wo; ++ox) {
                    const int gi = co / co_per_g;
                    double acc = static_cast<double>(b[co]);
                    for (int ci = 0; ci < cg; ++ci)
                        for (int ky = 0; ky < kh; ++ky)
                            for (int kx = 0; kx < kw; ++kx) {
                                const int iy = oy * stride + ky - pad;
                                const int ix = ox * stride + kx - pad;
                                if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                                const int c = gi * cg + ci;
                                const double xv =
                                    x[((static_cast<size_t>(ni) * cin + c) * h + iy) * w + ix];
                                const double wv =
                                    wt[((static_cast<size_t>(co) * cg + ci) * kh + ky) * kw + kx];
                                acc += xv * wv;
                            }
                    out[((static_cast<size_t>(ni) * cout + co) * ho + oy) * wo + ox] =
                        static_cast<S>(acc);
                }
    return out;
}

template <typename S>
std::vector<S> conv1d_oracle(const std::vector<S>& x, int n, int cin, int t,
                             const std::vector<S>& wt, int cout, int k, const std::vector<S>& b,
                             int stride, int pad) {
    const int to = (t + 2 * pad - k) / stride + 1;
    std::vector<S> out(static_cast<size_t>(n) * cout * to);
    for (int ni = 0; ni < n; ++ni)
        for (int co = 0; co < cout; ++co)
            for (int ot = 0; ot < to; ++ot) {
                double acc = static_cast<double>(b[co]);
                for (int ci = 0; ci < cin; ++ci)
                    for (int kk = 0; kk < k; ++kk) {
                        const int it = ot * stride + kk - pad;
                        if (it < 0 || it >= t) continue;
                        acc += static_cast<double>(x[(static_cast<size_t>(ni) * cin + ci) * t + it]) *
                               static_cast<double>(wt[(static_cast<size_t>(co) * cin + ci) * k + kk]);
                    }
                out[(static_cast<size_t>(ni) * cout + co) * to + ot] = static_cast<S>(acc);
            }
    return out;
}

template <typename S>
reface::Tensor<S> rand_tensor(reface::Rng& rng, reface::Shape shape, S lo = S(-1), S hi = S(1)) {
    reface::Tensor<S> t(std::move(shape));
    for (auto& v : t.data()) v = static_cast<S>(rng.uniform(static_cast<double>(lo), static_cast<double>(hi)));
    return t;
}

template <typename S>
double max_abs_diff(const reface::Tensor<S>& a, const std::vector<S>& b) {
    double m = 0;
    for (int64_t i = 0; i < a.numel(); ++i)
        m = std::max(m, std::abs(static_cast<double>(a.ptr()[i]) - static_cast<double>(b[i])));
    return m;
}

}  // namespace reftest
