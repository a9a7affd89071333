#include "reface/metrics.hpp"

#include <array>
#include <cmath>
#include <cstdio>

namespace reface::metrics {

namespace {

constexpr int kWin = 11;
constexpr double kC1 = (0.01 * 2.0) * (0.01 * 2.0);
constexpr double kC2 = (0.03 * 2.0) * (0.03 * 2.0);

std::array<double, kWin> gaussian_window() {
    std::array<double, kWin> g{};
    double sum = 0;
    for (int i = 0; i < kWin; ++i) {
        const double d = i - (kWin - 1) / 2;
        g[size_t(i)] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
        sum += g[size_t(i)];
    }
    for (auto& v : g) v /= sum;
    return g;
}

std::string fmt(const char* f, double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), f, v);
    return buf;
}

}  // namespace

double ssim(const Tensor<float>& a, const Tensor<float>& b) {
    REFACE_CHECK(a.rank() == 3 && a.dim(0) == 3, "ssim: want [3,H,W], got ", shape_str(a.shape()));
    REFACE_CHECK(a.shape() == b.shape(), "ssim: shape mismatch ", shape_str(a.shape()), " vs ",
                 shape_str(b.shape()));
    const int h = a.dim(1), w = a.dim(2);
    REFACE_CHECK(h >= kWin && w >= kWin, "ssim: image smaller than the ", kWin, "x", kWin,
                 " window");
    static const std::array<double, kWin> g = gaussian_window();
    const int wo = w - kWin + 1, ho = h - kWin + 1;

    // horizontal then vertical weighted sums of (a, b, a^2, b^2, ab)
    std::vector<double> row(size_t(h) * wo * 5);
    double total = 0;
    for (int c = 0; c < 3; ++c) {
        const float* pa = a.ptr() + size_t(c) * h * w;
        const float* pb = b.ptr() + size_t(c) * h * w;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < wo; ++x) {
                double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
                for (int k = 0; k < kWin; ++k) {
                    const double va = pa[size_t(y) * w + x + k];
                    const double vb = pb[size_t(y) * w + x + k];
                    sa += g[size_t(k)] * va;
                    sb += g[size_t(k)] * vb;
                    saa += g[size_t(k)] * (va * va);
                    sbb += g[size_t(k)] * (vb * vb);
                    sab += g[size_t(k)] * (va * vb);  // va*vb == vb*va keeps ssim symmetric
                }
                double* r = &row[(size_t(y) * wo + x) * 5];
                r[0] = sa, r[1] = sb, r[2] = saa, r[3] = sbb, r[4] = sab;
            }
        for (int y = 0; y < ho; ++y)
            for (int x = 0; x < wo; ++x) {
                double ma = 0, mb = 0, maa = 0, mbb = 0, mab = 0;
                for (int k = 0; k < kWin; ++k) {
                    const double* r = &row[(size_t(y + k) * wo + x) * 5];
                    ma += g[size_t(k)] * r[0];
                    mb += g[size_t(k)] * r[1];
                    maa += g[size_t(k)] * r[2];
                    mbb += g[size_t(k)] * r[3];
                    mab += g[size_t(k)] * r[4];
                }
                const double va = maa - ma * ma, vb = mbb - mb * mb, cab = mab - ma * mb;
                const double t1 = 2.0 * ma * mb + kC1, d1 = ma * ma + mb * mb + kC1;
                const double t2 = 2.0 * cab + kC2, d2 = va + vb + kC2;
                total += (t1 * t2) / (d1 * d2);
            }
    }
    return total / (3.0 * ho * wo);
}

double landmark_error(const Tensor<float>& f_geo, const Tensor<float>& l) {
    REFACE_CHECK(f_geo.shape() == l.shape(), "landmark_error: shape mismatch ", shape_str(f_geo.shape()),
                 " vs ", shape_str(l.shape()));
    const int64_t n = f_geo.numel();
    REFACE_CHECK(n > 0 && n % 2 == 0, "landmark_error: want interleaved (x,y) pairs, got ",
                 shape_str(f_geo.shape()));
    const float* p = f_geo.ptr();
    const float* q = l.ptr();
    double sum = 0;
    for (int64_t i = 0; i < n; i += 2) {
        const double dx = double(p[i]) - q[i], dy = double(p[i + 1]) - q[i + 1];
        sum += std::sqrt(dx * dx + dy * dy);
    }
    return sum / double(n / 2);
}

std::pair<double, double> region_l1(const Tensor<float>& a, const Tensor<float>& b,
                                    const std::vector<Box>& boxes) {
    REFACE_CHECK(a.rank() == 3, "region_l1: want [C,H,W], got ", shape_str(a.shape()));
    REFACE_CHECK(a.shape() == b.shape(), "region_l1: shape mismatch ", shape_str(a.shape()), " vs ",
                 shape_str(b.shape()));
    const int c = a.dim(0), h = a.dim(1), w = a.dim(2);
    const float* pa = a.ptr();
    const float* pb = b.ptr();
    double in_sum = 0, out_sum = 0;
    int64_t in_n = 0, out_n = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            bool inside = false;
            for (const auto& bx : boxes)
                if (bx.contains(x, y)) {
                    inside = true;
                    break;
                }
            double d = 0;
            for (int ch = 0; ch < c; ++ch) {
                const size_t at = (size_t(ch) * h + y) * w + x;
                d += std::abs(double(pa[at]) - pb[at]);
            }
            if (inside)
                in_sum += d, in_n += c;
            else
                out_sum += d, out_n += c;
        }
    return {in_n ? in_sum / double(in_n) : 0.0, out_n ? out_sum / double(out_n) : 0.0};
}

std::string BenchReport::text() const {
    std::string out;
    out += "config: " + config_name + "\n";
    out += str("resolution: ", resolution, "\n");
    out += str("threads: ", threads, "\n");
    out += str("iterations: ", iterations, "\n");
    out += str("total_params: ", total_params, "\n");
    for (const auto& [name, n] : submodule_params) out += str("params.", name, ": ", n, "\n");
    out += "mean_ms: " + fmt("%.4f", mean_ms) + "\n";
    out += "p95_ms: " + fmt("%.4f", p95_ms) + "\n";
    out += "fps: " + fmt("%.3f", fps) + "\n";
    return out;
}

std::string BenchReport::csv() const {
    std::string head = "config,resolution,threads,iterations,total_params";
    std::string vals = str(config_name, ",", resolution, ",", threads, ",", iterations, ",",
                           total_params);
    for (const auto& [name, n] : submodule_params) {
        head += ",params_" + name;
        vals += str(",", n);
    }
    head += ",mean_ms,p95_ms,fps";
    vals += "," + fmt("%.4f", mean_ms) + "," + fmt("%.4f", p95_ms) + "," + fmt("%.3f", fps);
    return head + "\n" + vals + "\n";
}

}  // namespace reface::metrics
