#include <cmath>

#include "reface/ops.hpp"

namespace reface {

template <typename S>
static void check_same_shape(const Tensor<S>& a, const Tensor<S>& b, const char* op) {
    REFACE_CHECK(a.shape() == b.shape(), op, ": shape mismatch ", shape_str(a.shape()),
                 " vs ", shape_str(b.shape()));
}

template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
    check_same_shape(a, b, "add");
    std::vector<S> out(a.numel());
    const S* pa = a.ptr();
    const S* pb = b.ptr();
    for (size_t i = 0; i < out.size(); ++i) out[i] = pa[i] + pb[i];
    return make_op<S>({a, b}, a.shape(), std::move(out),
        [](const std::vector<S>& g, const std::vector<std::vector<S>*>& gin) {
            if (gin[0])
                for (size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i];
            if (gin[1])
                for (size_t i = 0; i < g.size(); ++i) (*gin[1])[i] += g[i];
        });
}

template <typename S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b) {
    check_same_shape(a, b, "sub");
    std::vector<S> out(a.numel());
    const S* pa = a.ptr();
    const S* pb = b.ptr();
    for (size_t i = 0; i < out.size(); ++i) out[i] = pa[i] - pb[i];
    return make_op<S>({a, b}, a.shape(), std::move(out),
        [](const std::vector<S>& g, const std::vector<std::vector<S>*>& gin) {
            if (gin[0])
                for (size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i];
            if (gin[1])
                for (size_t i = 0; i < g.size(); ++i) (*gin[1])[i] -= g[i];
        });
}

template <typename S>
Tensor<S> scale(const Tensor<S>& x, S factor) {
    std::vector<S> out(x.numel());
    const S* px = x.ptr();
    for (size_t i = 0; i < out.size(); ++i) out[i] = px[i] * factor;
    return make_op<S>({x}, x.shape(), std::move(out),
        [factor](const std::vector<S>& g, const std::vector<std::vector<S>*>& gin) {
            if (gin[0])
                for (size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i] * factor;
        });
}

template <typename S>
Tensor<S> relu(const Tensor<S>& x) {
    return leaky_relu(x, S(0));
}

// Subgradient at exactly 0 is the positive-branch slope (fixed for
// determinism).
template <typename S>
Tensor<S> leaky_relu(const Tensor<S>& x, S slope) {
    std::vector<S> out(x.numel());
    const S* px = x.ptr();
    for (size_t i = 0; i < out.size(); ++i) out[i] = px[i] >= S(0) ? px[i] : px[i] * slope;
    return make_op<S>({x}, x.shape(), std::move(out),
        [x, slope](const std::vector<S>& g, const std::vector<std::vector<S>*>& gin) {
            if (!gin[0]) return;
            const S* px = x.ptr();
            for (size_t i = 0; i < g.size(); ++i)
                (*gin[0])[i] += px[i] >= S(0) ? g[i] : g[i] * slope;
        });
}

template <typename S>
Tensor<S> tanh_op(const Tensor<S>& x) {
    std::vector<S> out(x.numel());
    const S* px = x.ptr();
    for (size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(px[i]);
    std::vector<S> saved = out;  // y' = 1 - y^2
    return make_op<S>({x}, x.shape(), std::move(out),
        [saved = std::move(saved)](const std::vector<S>& g, const std::vector<std::vector<S>*>& gin) {
            if (!gin[0]) return;
            for (size_t i = 0; i < g.size(); ++i)
                (*gin[0])[i] += g[i] * (S(1) - saved[i] * saved[i]);
        });
}

template <typename S>
Tensor<S> reshape(const Tensor<S>& x, Shape new_shape) {
    REFACE_CHECK(numel_of(new_shape) == x.numel(), "reshape: cannot view ", shape_str(x.shape()),
                 " as ", shape_str(new_shape));
    std::vector<S> out(x.ptr(), x.ptr() + x.numel());
    return make_op<S>({x}, std::move(new_shape), std::move(out),
        [](const std::vector<S>& g, const std::vector<std::vector<S>*>& gin) {
            if (gin[0])
                for (size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i];
        });
}

template <typename S>
Tensor<S> narrow(const Tensor<S>& x, int axis, int start, int length) {
    const Shape& shape = x.shape();
    REFACE_CHECK(axis >= 0 && axis < x.rank(), "narrow: axis ", axis, " out of range for ",
                 shape_str(shape));
    REFACE_CHECK(start >= 0 && length >= 1 && start + length <= shape[axis],
                 "narrow: range [", start, ",", start + length, ") exceeds extent ", shape[axis]);
    int64_t inner = 1;
    for (int i = axis + 1; i < x.rank(); ++i) inner *= shape[i];
    int64_t outer = 1;
    for (int i = 0; i < axis; ++i) outer *= shape[i];
    const int64_t in_stride = shape[axis] * inner;
    const int64_t out_stride = length * inner;
    const int64_t offset = start * inner;

    Shape out_shape = shape;
    out_shape[axis] = length;
    std::vector<S> out(outer * out_stride);
    const S* px = x.ptr();
    for (int64_t o = 0; o < outer; ++o)
        for (int64_t i = 0; i < out_stride; ++i) out[o * out_stride + i] = px[o * in_stride + offset + i];

    return make_op<S>({x}, std::move(out_shape), std::move(out),
        [outer, in_stride, out_stride, offset](const std::vector<S>& g,
                                               const std::vector<std::vector<S>*>& gin) {
            if (!gin[0]) return;
            for (int64_t o = 0; o < outer; ++o)
                for (int64_t i = 0; i < out_stride; ++i)
                    (*gin[0])[o * in_stride + offset + i] += g[o * out_stride + i];
        });
}

template <typename S>
Tensor<S> concat(const std::vector<Tensor<S>>& xs, int axis) {
    REFACE_CHECK(!xs.empty(), "concat: no inputs");
    const Shape& first = xs[0].shape();
    REFACE_CHECK(axis >= 0 && axis < xs[0].rank(), "concat: axis ", axis, " out of range");
    int total_axis = 0;
    for (const auto& x : xs) {
        REFACE_CHECK(x.rank() == xs[0].rank(), "concat: rank mismatch");
        for (int i = 0; i < x.rank(); ++i)
            REFACE_CHECK(i == axis || x.shape()[i] == first[i], "concat: extent mismatch at dim ", i,
                         ": ", x.shape()[i], " vs ", first[i]);
        total_axis += x.shape()[axis];
    }
    int64_t inner = 1;
    for (int i = axis + 1; i < xs[0].rank(); ++i) inner *= first[i];
    int64_t outer = 1;
    for (int i = 0; i < axis; ++i) outer *= first[i];

    Shape out_shape = first;
    out_shape[axis] = total_axis;
    const int64_t out_stride = total_axis * inner;
    std::vector<S> out(outer * out_stride);
    std::vector<int64_t> strides, offsets;
    int64_t off = 0;
    for (const auto& x : xs) {
        int64_t s = x.shape()[axis] * inner;
        strides.push_back(s);
        offsets.push_back(off);
        const S* px = x.ptr();
        for (int64_t o = 0; o < outer; ++o)
            for (int64_t i = 0; i < s; ++i) out[o * out_stride + off + i] = px[o * s + i];
        off += s;
    }

    return make_op<S>(xs, std::move(out_shape), std::move(out),
        [outer, out_stride, strides, offsets](const std::vector<S>& g,
                                              const std::vector<std::vector<S>*>& gin) {
            for (size_t k = 0; k < strides.size(); ++k) {
                if (!gin[k]) continue;
                for (int64_t o = 0; o < outer; ++o)
                    for (int64_t i = 0; i < strides[k]; ++i)
                        (*gin[k])[o * strides[k] + i] += g[o * out_stride + offsets[k] + i];
            }
        });
}

template <typename S>
Tensor<S> transpose12(const Tensor<S>& x) {
    REFACE_CHECK(x.rank() == 3, "transpose12: expected rank-3 tensor, got ", shape_str(x.shape()));
    const int a = x.dim(0), b = x.dim(1), c = x.dim(2);
    std::vector<S> out(x.numel());
    const S* px = x.ptr();
    for (int i = 0; i < a; ++i)
        for (int j = 0; j < b; ++j)
            for (int k = 0; k < c; ++k)
                out[(static_cast<int64_t>(i) * c + k) * b + j] =
                    px[(static_cast<int64_t>(i) * b + j) * c + k];
    return make_op<S>({x}, {a, c, b}, std::move(out),
        [a, b, c](const std::vector<S>& g, const std::vector<std::vector<S>*>& gin) {
            if (!gin[0]) return;
            for (int i = 0; i < a; ++i)
                for (int j = 0; j < b; ++j)
                    for (int k = 0; k < c; ++k)
                        (*gin[0])[(static_cast<int64_t>(i) * b + j) * c + k] +=
                            g[(static_cast<int64_t>(i) * c + k) * b + j];
        });
}

template <typename S>
Tensor<S> upsample_nearest2x(const Tensor<S>& x) {
    REFACE_CHECK(x.rank() == 4, "upsample_nearest2x: expected [N,C,H,W], got ", shape_str(x.shape()));
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    std::vector<S> out(static_cast<size_t>(n) * c * 4 * h * w);
    const S* px = x.ptr();
    for (int64_t p = 0; p < static_cast<int64_t>(n) * c; ++p) {
        const S* in_plane = px + p * h * w;
        S* out_plane = out.data() + p * 4 * h * w;
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx) {
                S v = in_plane[y * w + xx];
                S* o = out_plane + (2 * y) * (2 * w) + 2 * xx;
                o[0] = v;
                o[1] = v;
                o[2 * w] = v;
                o[2 * w + 1] = v;
            }
    }
    return make_op<S>({x}, {n, c, 2 * h, 2 * w}, std::move(out),
        [n, c, h, w](const std::vector<S>& g, const std::vector<std::vector<S>*>& gin) {
            if (!gin[0]) return;
            for (int64_t p = 0; p < static_cast<int64_t>(n) * c; ++p) {
                S* gi = gin[0]->data() + p * h * w;
                const S* go = g.data() + p * 4 * h * w;
                for (int y = 0; y < h; ++y)
                    for (int xx = 0; xx < w; ++xx) {
                        const S* o = go + (2 * y) * (2 * w) + 2 * xx;
                        gi[y * w + xx] += o[0] + o[1] + o[2 * w] + o[2 * w + 1];
                    }
            }
        });
}

template <typename S>
Tensor<S> mean(const Tensor<S>& x) {
    const int64_t n = x.numel();
    REFACE_CHECK(n > 0, "mean: empty tensor");
    double acc = 0;
    const S* px = x.ptr();
    for (int64_t i = 0; i < n; ++i) acc += static_cast<double>(px[i]);
    S value = static_cast<S>(acc / static_cast<double>(n));
    return make_op<S>({x}, {1}, {value},
        [n](const std::vector<S>& g, const std::vector<std::vector<S>*>& gin) {
            if (!gin[0]) return;
            S gv = g[0] / static_cast<S>(n);
            for (auto& v : *gin[0]) v += gv;
        });
}

template <typename S>
Tensor<S> l1(const Tensor<S>& x, const Tensor<S>& y) {
    check_same_shape(x, y, "l1");
    const int64_t n = x.numel();
    double acc = 0;
    const S* px = x.ptr();
    const S* py = y.ptr();
    for (int64_t i = 0; i < n; ++i) acc += std::abs(static_cast<double>(px[i]) - static_cast<double>(py[i]));
    S value = static_cast<S>(acc / static_cast<double>(n));
    return make_op<S>({x, y}, {1}, {value},
        [x, y, n](const std::vector<S>& g, const std::vector<std::vector<S>*>& gin) {
            const S* px = x.ptr();
            const S* py = y.ptr();
            S gv = g[0] / static_cast<S>(n);
            for (int64_t i = 0; i < n; ++i) {
                S d = px[i] - py[i];
                S s = d > S(0) ? gv : (d < S(0) ? -gv : S(0));
                if (gin[0]) (*gin[0])[i] += s;
                if (gin[1]) (*gin[1])[i] -= s;
            }
        });
}

#define REFACE_INSTANTIATE(S)                                                           \
    template Tensor<S> add<S>(const Tensor<S>&, const Tensor<S>&);                     \
    template Tensor<S> sub<S>(const Tensor<S>&, const Tensor<S>&);                     \
    template Tensor<S> scale<S>(const Tensor<S>&, S);                                  \
    template Tensor<S> relu<S>(const Tensor<S>&);                                      \
    template Tensor<S> leaky_relu<S>(const Tensor<S>&, S);                             \
    template Tensor<S> tanh_op<S>(const Tensor<S>&);                                   \
    template Tensor<S> reshape<S>(const Tensor<S>&, Shape);                            \
    template Tensor<S> narrow<S>(const Tensor<S>&, int, int, int);                     \
    template Tensor<S> concat<S>(const std::vector<Tensor<S>>&, int);                  \
    template Tensor<S> transpose12<S>(const Tensor<S>&);                               \
    template Tensor<S> upsample_nearest2x<S>(const Tensor<S>&);                        \
    template Tensor<S> mean<S>(const Tensor<S>&);                                      \
    template Tensor<S> l1<S>(const Tensor<S>&, const Tensor<S>&);

REFACE_INSTANTIATE(float)
REFACE_INSTANTIATE(double)
#undef REFACE_INSTANTIATE

}  // namespace reface
