#include <cmath>

#include "reface/ops.hpp"

namespace reface {

template <typename S>
Tensor<S> linear(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b) {
    REFACE_CHECK(x.rank() == 2, "linear: input must be [N,Din], got ", shape_str(x.shape()));
    REFACE_CHECK(w.rank() == 2, "linear: weight must be [Dout,Din], got ", shape_str(w.shape()));
    const int n = x.dim(0), din = x.dim(1), dout = w.dim(0);
    REFACE_CHECK(w.dim(1) == din, "linear: weight expects ", w.dim(1), " inputs, got ", din);
    REFACE_CHECK(b.rank() == 1 && b.dim(0) == dout, "linear: bias must be [", dout, "], got ",
                 shape_str(b.shape()));

    std::vector<S> out(static_cast<size_t>(n) * dout);
    const S* px = x.ptr();
    const S* pw = w.ptr();
    const S* pb = b.ptr();
    for (int i = 0; i < n; ++i) {
        const S* xr = px + static_cast<int64_t>(i) * din;
        S* yr = out.data() + static_cast<int64_t>(i) * dout;
        for (int o = 0; o < dout; ++o) {
            const S* wr = pw + static_cast<int64_t>(o) * din;
            double acc = static_cast<double>(pb[o]);  // accumulate wide, round once
            for (int k = 0; k < din; ++k)
                acc += static_cast<double>(xr[k]) * static_cast<double>(wr[k]);
            yr[o] = static_cast<S>(acc);
        }
    }
    return make_op<S>({x, w, b}, {n, dout}, std::move(out),
        [x, w, n, din, dout](const std::vector<S>& g, const std::vector<std::vector<S>*>& gin) {
            const S* px = x.ptr();
            const S* pw = w.ptr();
            for (int i = 0; i < n; ++i) {
                const S* gr = g.data() + static_cast<int64_t>(i) * dout;
                const S* xr = px + static_cast<int64_t>(i) * din;
                for (int o = 0; o < dout; ++o) {
                    const S gv = gr[o];
                    if (gv == S(0)) continue;
                    if (gin[0]) {
                        S* dxr = gin[0]->data() + static_cast<int64_t>(i) * din;
                        const S* wr = pw + static_cast<int64_t>(o) * din;
                        for (int k = 0; k < din; ++k) dxr[k] += gv * wr[k];
                    }
                    if (gin[1]) {
                        S* dwr = gin[1]->data() + static_cast<int64_t>(o) * din;
                        for (int k = 0; k < din; ++k) dwr[k] += gv * xr[k];
                    }
                    if (gin[2]) (*gin[2])[o] += gv;
                }
            }
        });
}

template <typename S>
Tensor<S> conv2d(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b, int stride,
                 int padding, int groups) {
    REFACE_CHECK(x.rank() == 4, "conv2d: input must be [N,C,H,W], got ", shape_str(x.shape()));
    REFACE_CHECK(w.rank() == 4, "conv2d: weight must be [Cout,Cin/g,Kh,Kw], got ",
                 shape_str(w.shape()));
    REFACE_CHECK(stride >= 1 && padding >= 0 && groups >= 1, "conv2d: bad stride/padding/groups ",
                 stride, "/", padding, "/", groups);
    const int n = x.dim(0), cin = x.dim(1), h = x.dim(2), wdt = x.dim(3);
    const int cout = w.dim(0), cg = w.dim(1), kh = w.dim(2), kw = w.dim(3);
    REFACE_CHECK(cin % groups == 0 && cout % groups == 0, "conv2d: channels ", cin, "->", cout,
                 " not divisible by groups=", groups);
    REFACE_CHECK(cg == cin / groups, "conv2d: weight expects ", cg, " channels per group, input has ",
                 cin / groups);
    REFACE_CHECK(b.rank() == 1 && b.dim(0) == cout, "conv2d: bias must be [", cout, "], got ",
                 shape_str(b.shape()));
    const int ho = (h + 2 * padding - kh) / stride + 1;
    const int wo = (wdt + 2 * padding - kw) / stride + 1;
    REFACE_CHECK(ho >= 1 && wo >= 1, "conv2d: kernel ", kh, "x", kw, " too large for ", h, "x", wdt,
                 " with padding ", padding);
    const int co_per_g = cout / groups;

    std::vector<S> out(static_cast<size_t>(n) * cout * ho * wo);
    const S* px = x.ptr();
    const S* pw = w.ptr();
    const S* pb = b.ptr();

    // Accumulate each output row in double and round to S once: the result
    // then agrees with any direct-summation reference to the last ulp, which
    // also makes grouped == concat-of-ungrouped hold bitwise.
    //
    // Stride 1/2 go through a zero-padded copy of the current group's input
    // so the tap loops have no boundary branches; stride 2 additionally
    // splits padded rows into even/odd phases so every tap reads a
    // contiguous run. Anything else takes the generic branchy path.
    const int ph = h + 2 * padding;
    const int pw2 = wdt + 2 * padding;
    const int halfw = pw2 / 2 + 2;  // phase-buffer width, with slack
    std::vector<S> padbuf;
    std::vector<S> even, odd;
    if (stride == 1)
        padbuf.assign(static_cast<size_t>(cg) * ph * pw2, S(0));
    else if (stride == 2) {
        even.assign(static_cast<size_t>(cg) * ph * halfw, S(0));
        odd.assign(static_cast<size_t>(cg) * ph * halfw, S(0));
    }
    std::vector<double> acc(wo);

    for (int ni = 0; ni < n; ++ni) {
        for (int gi = 0; gi < groups; ++gi) {
            // stage this group's channels
            if (stride == 1) {
                for (int ci = 0; ci < cg; ++ci) {
                    const S* in_plane =
                        px + (static_cast<int64_t>(ni) * cin + gi * cg + ci) * h * wdt;
                    for (int iy = 0; iy < h; ++iy) {
                        S* dst = padbuf.data() +
                                 (static_cast<int64_t>(ci) * ph + iy + padding) * pw2 + padding;
                        const S* src = in_plane + static_cast<int64_t>(iy) * wdt;
                        for (int ix = 0; ix < wdt; ++ix) dst[ix] = src[ix];
                    }
                }
            } else if (stride == 2) {
                for (int ci = 0; ci < cg; ++ci) {
                    const S* in_plane =
                        px + (static_cast<int64_t>(ni) * cin + gi * cg + ci) * h * wdt;
                    for (int iy = 0; iy < h; ++iy) {
                        const int py = iy + padding;
                        S* e = even.data() + (static_cast<int64_t>(ci) * ph + py) * halfw;
                        S* o = odd.data() + (static_cast<int64_t>(ci) * ph + py) * halfw;
                        const S* src = in_plane + static_cast<int64_t>(iy) * wdt;
                        for (int ix = 0; ix < wdt; ++ix) {
                            const int pxi = ix + padding;
                            if (pxi & 1)
                                o[pxi >> 1] = src[ix];
                            else
                                e[pxi >> 1] = src[ix];
                        }
                    }
                }
            }

            for (int cr = 0; cr < co_per_g; ++cr) {
                const int co = gi * co_per_g + cr;
                S* out_plane = out.data() + (static_cast<int64_t>(ni) * cout + co) * ho * wo;
                const double bias = static_cast<double>(pb[co]);
                const S* wbase = pw + static_cast<int64_t>(co) * cg * kh * kw;

                for (int oy = 0; oy < ho; ++oy) {
                    double* ar = acc.data();
                    for (int i = 0; i < wo; ++i) ar[i] = bias;

                    if (stride == 1 && kh == 3 && kw == 3) {
                        for (int ci = 0; ci < cg; ++ci) {
                            const S* r0 =
                                padbuf.data() + (static_cast<int64_t>(ci) * ph + oy) * pw2;
                            const S* r1 = r0 + pw2;
                            const S* r2 = r1 + pw2;
                            const S* wk = wbase + static_cast<int64_t>(ci) * 9;
                            const double w0 = wk[0], w1 = wk[1], w2 = wk[2];
                            const double w3 = wk[3], w4 = wk[4], w5 = wk[5];
                            const double w6 = wk[6], w7 = wk[7], w8 = wk[8];
                            for (int ox = 0; ox < wo; ++ox) {
                                ar[ox] += w0 * r0[ox] + w1 * r0[ox + 1] + w2 * r0[ox + 2] +
                                          w3 * r1[ox] + w4 * r1[ox + 1] + w5 * r1[ox + 2] +
                                          w6 * r2[ox] + w7 * r2[ox + 1] + w8 * r2[ox + 2];
                            }
                        }
                    } else if (stride == 1) {
                        for (int ci = 0; ci < cg; ++ci) {
                            const S* wk = wbase + static_cast<int64_t>(ci) * kh * kw;
                            for (int ky = 0; ky < kh; ++ky) {
                                const S* row =
                                    padbuf.data() +
                                    (static_cast<int64_t>(ci) * ph + oy + ky) * pw2;
                                for (int kx = 0; kx < kw; ++kx) {
                                    const double wv = wk[ky * kw + kx];
                                    if (wv == 0.0) continue;
                                    const S* src = row + kx;
                                    for (int ox = 0; ox < wo; ++ox) ar[ox] += wv * src[ox];
                                }
                            }
                        }
                    } else if (stride == 2) {
                        for (int ci = 0; ci < cg; ++ci) {
                            const S* wk = wbase + static_cast<int64_t>(ci) * kh * kw;
                            for (int ky = 0; ky < kh; ++ky) {
                                const int py = 2 * oy + ky;
                                const S* e =
                                    even.data() + (static_cast<int64_t>(ci) * ph + py) * halfw;
                                const S* o =
                                    odd.data() + (static_cast<int64_t>(ci) * ph + py) * halfw;
                                for (int kx = 0; kx < kw; ++kx) {
                                    const double wv = wk[ky * kw + kx];
                                    if (wv == 0.0) continue;
                                    const S* src = ((kx & 1) ? o : e) + (kx >> 1);
                                    for (int ox = 0; ox < wo; ++ox) ar[ox] += wv * src[ox];
                                }
                            }
                        }
                    } else {
                        for (int ci = 0; ci < cg; ++ci) {
                            const S* in_plane =
                                px + (static_cast<int64_t>(ni) * cin + gi * cg + ci) * h * wdt;
                            const S* wk = wbase + static_cast<int64_t>(ci) * kh * kw;
                            for (int ky = 0; ky < kh; ++ky) {
                                const int iy = oy * stride + ky - padding;
                                if (iy < 0 || iy >= h) continue;
                                const S* in_row = in_plane + static_cast<int64_t>(iy) * wdt;
                                for (int kx = 0; kx < kw; ++kx) {
                                    const double wv = wk[ky * kw + kx];
                                    if (wv == 0.0) continue;
                                    for (int ox = 0; ox < wo; ++ox) {
                                        const int ix = ox * stride + kx - padding;
                                        if (ix >= 0 && ix < wdt)
                                            ar[ox] += wv * static_cast<double>(in_row[ix]);
                                    }
                                }
                            }
                        }
                    }

                    S* out_row = out_plane + static_cast<int64_t>(oy) * wo;
                    for (int i = 0; i < wo; ++i) out_row[i] = static_cast<S>(ar[i]);
                }
            }
        }
    }

    return make_op<S>({x, w, b}, {n, cout, ho, wo}, std::move(out),
        [x, w, n, cin, h, wdt, cout, cg, kh, kw, ho, wo, stride, padding, groups, co_per_g](
            const std::vector<S>& g, const std::vector<std::vector<S>*>& gin) {
            const S* px = x.ptr();
            const S* pw = w.ptr();
            if (gin[2]) {
                for (int ni = 0; ni < n; ++ni)
                    for (int co = 0; co < cout; ++co) {
                        const S* g_plane =
                            g.data() + (static_cast<int64_t>(ni) * cout + co) * ho * wo;
                        S acc = S(0);
                        for (int64_t i = 0; i < static_cast<int64_t>(ho) * wo; ++i)
                            acc += g_plane[i];
                        (*gin[2])[co] += acc;
                    }
            }
            if (!gin[0] && !gin[1]) return;

            // Mirrors the forward's staging: d_w correlates the zero-padded
            // input with the output gradient, d_x is a full correlation of
            // the zero-padded output gradient with the flipped kernel, and
            // stride 2 splits rows into even/odd phases so every tap walks a
            // contiguous run. Accumulation goes through row vectors; a
            // scalar running sum would serialize the inner loop.
            const int ph = h + 2 * padding;
            const int pw2 = wdt + 2 * padding;
            const int halfw = pw2 / 2 + 2;
            const int gqy = kh - 1 - padding;  // d_x-side padding of g
            const int gqx = kw - 1 - padding;

            if (stride == 1 && gqy >= 0 && gqx >= 0) {
                const int gph = ho + 2 * gqy;  // == h + kh - 1
                const int gpw = wo + 2 * gqx;
                std::vector<S> xpad, gpad;
                if (gin[1]) xpad.assign(static_cast<size_t>(cg) * ph * pw2, S(0));
                if (gin[0]) gpad.assign(static_cast<size_t>(co_per_g) * gph * gpw, S(0));
                std::vector<S> dwrow(static_cast<size_t>(kh) * kw * wo);
                std::vector<S> arow(static_cast<size_t>(wdt));
                for (int ni = 0; ni < n; ++ni) {
                    for (int gi = 0; gi < groups; ++gi) {
                        if (gin[1]) {
                            for (int ci = 0; ci < cg; ++ci) {
                                const S* in_plane =
                                    px + (static_cast<int64_t>(ni) * cin + gi * cg + ci) * h * wdt;
                                for (int iy = 0; iy < h; ++iy) {
                                    S* dst = xpad.data() +
                                             (static_cast<int64_t>(ci) * ph + iy + padding) * pw2 +
                                             padding;
                                    const S* src = in_plane + static_cast<int64_t>(iy) * wdt;
                                    for (int ix = 0; ix < wdt; ++ix) dst[ix] = src[ix];
                                }
                            }
                        }
                        if (gin[0]) {
                            for (int cr = 0; cr < co_per_g; ++cr) {
                                const int co = gi * co_per_g + cr;
                                const S* g_plane =
                                    g.data() + (static_cast<int64_t>(ni) * cout + co) * ho * wo;
                                for (int oy = 0; oy < ho; ++oy) {
                                    S* dst = gpad.data() +
                                             (static_cast<int64_t>(cr) * gph + oy + gqy) * gpw +
                                             gqx;
                                    const S* src = g_plane + static_cast<int64_t>(oy) * wo;
                                    for (int ox = 0; ox < wo; ++ox) dst[ox] = src[ox];
                                }
                            }
                        }
                        if (gin[1]) {
                            for (int cr = 0; cr < co_per_g; ++cr) {
                                const int co = gi * co_per_g + cr;
                                const S* g_plane =
                                    g.data() + (static_cast<int64_t>(ni) * cout + co) * ho * wo;
                                for (int ci = 0; ci < cg; ++ci) {
                                    std::fill(dwrow.begin(), dwrow.end(), S(0));
                                    const S* xp = xpad.data() + static_cast<int64_t>(ci) * ph * pw2;
                                    for (int oy = 0; oy < ho; ++oy) {
                                        const S* grow = g_plane + static_cast<int64_t>(oy) * wo;
                                        for (int ky = 0; ky < kh; ++ky) {
                                            const S* xrow =
                                                xp + (static_cast<int64_t>(oy) + ky) * pw2;
                                            for (int kx = 0; kx < kw; ++kx) {
                                                S* a = dwrow.data() +
                                                       static_cast<int64_t>(ky * kw + kx) * wo;
                                                const S* src = xrow + kx;
                                                for (int ox = 0; ox < wo; ++ox)
                                                    a[ox] += grow[ox] * src[ox];
                                            }
                                        }
                                    }
                                    S* dwk = gin[1]->data() +
                                             ((static_cast<int64_t>(co) * cg + ci) * kh) * kw;
                                    for (int t = 0; t < kh * kw; ++t) {
                                        const S* a = dwrow.data() + static_cast<int64_t>(t) * wo;
                                        S s = S(0);
                                        for (int ox = 0; ox < wo; ++ox) s += a[ox];
                                        dwk[t] += s;
                                    }
                                }
                            }
                        }
                        if (gin[0]) {
                            for (int ci = 0; ci < cg; ++ci) {
                                S* din_plane =
                                    gin[0]->data() +
                                    (static_cast<int64_t>(ni) * cin + gi * cg + ci) * h * wdt;
                                for (int iy = 0; iy < h; ++iy) {
                                    std::fill(arow.begin(), arow.end(), S(0));
                                    S* ar = arow.data();
                                    for (int cr = 0; cr < co_per_g; ++cr) {
                                        const int co = gi * co_per_g + cr;
                                        const S* wk =
                                            pw + ((static_cast<int64_t>(co) * cg + ci) * kh) * kw;
                                        const S* gp =
                                            gpad.data() + static_cast<int64_t>(cr) * gph * gpw;
                                        for (int ry = 0; ry < kh; ++ry) {
                                            const S* grow =
                                                gp + (static_cast<int64_t>(iy) + ry) * gpw;
                                            for (int rx = 0; rx < kw; ++rx) {
                                                const S wv = wk[(kh - 1 - ry) * kw + (kw - 1 - rx)];
                                                if (wv == S(0)) continue;
                                                const S* src = grow + rx;
                                                for (int ix = 0; ix < wdt; ++ix)
                                                    ar[ix] += wv * src[ix];
                                            }
                                        }
                                    }
                                    S* dst = din_plane + static_cast<int64_t>(iy) * wdt;
                                    for (int ix = 0; ix < wdt; ++ix) dst[ix] += ar[ix];
                                }
                            }
                        }
                    }
                }
            } else if (stride == 2) {
                std::vector<S> even, odd;  // padded input phases, for d_w
                if (gin[1]) {
                    even.assign(static_cast<size_t>(cg) * ph * halfw, S(0));
                    odd.assign(static_cast<size_t>(cg) * ph * halfw, S(0));
                }
                std::vector<S> dxe, dxo;  // padded d_x phases
                if (gin[0]) {
                    dxe.resize(static_cast<size_t>(ph) * halfw);
                    dxo.resize(static_cast<size_t>(ph) * halfw);
                }
                std::vector<S> dwrow(static_cast<size_t>(kh) * kw * wo);
                for (int ni = 0; ni < n; ++ni) {
                    for (int gi = 0; gi < groups; ++gi) {
                        if (gin[1]) {
                            for (int ci = 0; ci < cg; ++ci) {
                                const S* in_plane =
                                    px + (static_cast<int64_t>(ni) * cin + gi * cg + ci) * h * wdt;
                                for (int iy = 0; iy < h; ++iy) {
                                    const int py = iy + padding;
                                    S* e = even.data() +
                                           (static_cast<int64_t>(ci) * ph + py) * halfw;
                                    S* o = odd.data() +
                                           (static_cast<int64_t>(ci) * ph + py) * halfw;
                                    const S* src = in_plane + static_cast<int64_t>(iy) * wdt;
                                    for (int ix = 0; ix < wdt; ++ix) {
                                        const int pxi = ix + padding;
                                        if (pxi & 1)
                                            o[pxi >> 1] = src[ix];
                                        else
                                            e[pxi >> 1] = src[ix];
                                    }
                                }
                            }
                            for (int cr = 0; cr < co_per_g; ++cr) {
                                const int co = gi * co_per_g + cr;
                                const S* g_plane =
                                    g.data() + (static_cast<int64_t>(ni) * cout + co) * ho * wo;
                                for (int ci = 0; ci < cg; ++ci) {
                                    std::fill(dwrow.begin(), dwrow.end(), S(0));
                                    for (int oy = 0; oy < ho; ++oy) {
                                        const S* grow = g_plane + static_cast<int64_t>(oy) * wo;
                                        for (int ky = 0; ky < kh; ++ky) {
                                            const int py = 2 * oy + ky;
                                            const S* e =
                                                even.data() +
                                                (static_cast<int64_t>(ci) * ph + py) * halfw;
                                            const S* o =
                                                odd.data() +
                                                (static_cast<int64_t>(ci) * ph + py) * halfw;
                                            for (int kx = 0; kx < kw; ++kx) {
                                                S* a = dwrow.data() +
                                                       static_cast<int64_t>(ky * kw + kx) * wo;
                                                const S* src = ((kx & 1) ? o : e) + (kx >> 1);
                                                for (int ox = 0; ox < wo; ++ox)
                                                    a[ox] += grow[ox] * src[ox];
                                            }
                                        }
                                    }
                                    S* dwk = gin[1]->data() +
                                             ((static_cast<int64_t>(co) * cg + ci) * kh) * kw;
                                    for (int t = 0; t < kh * kw; ++t) {
                                        const S* a = dwrow.data() + static_cast<int64_t>(t) * wo;
                                        S s = S(0);
                                        for (int ox = 0; ox < wo; ++ox) s += a[ox];
                                        dwk[t] += s;
                                    }
                                }
                            }
                        }
                        if (gin[0]) {
                            for (int ci = 0; ci < cg; ++ci) {
                                std::fill(dxe.begin(), dxe.end(), S(0));
                                std::fill(dxo.begin(), dxo.end(), S(0));
                                for (int cr = 0; cr < co_per_g; ++cr) {
                                    const int co = gi * co_per_g + cr;
                                    const S* g_plane =
                                        g.data() + (static_cast<int64_t>(ni) * cout + co) * ho * wo;
                                    const S* wk =
                                        pw + ((static_cast<int64_t>(co) * cg + ci) * kh) * kw;
                                    for (int oy = 0; oy < ho; ++oy) {
                                        const S* grow = g_plane + static_cast<int64_t>(oy) * wo;
                                        for (int ky = 0; ky < kh; ++ky) {
                                            const int py = 2 * oy + ky;
                                            for (int kx = 0; kx < kw; ++kx) {
                                                const S wv = wk[ky * kw + kx];
                                                if (wv == S(0)) continue;
                                                S* dst = ((kx & 1) ? dxo : dxe).data() +
                                                         static_cast<int64_t>(py) * halfw +
                                                         (kx >> 1);
                                                for (int ox = 0; ox < wo; ++ox)
                                                    dst[ox] += wv * grow[ox];
                                            }
                                        }
                                    }
                                }
                                S* din_plane =
                                    gin[0]->data() +
                                    (static_cast<int64_t>(ni) * cin + gi * cg + ci) * h * wdt;
                                for (int iy = 0; iy < h; ++iy) {
                                    const int piy = iy + padding;
                                    const S* er = dxe.data() + static_cast<int64_t>(piy) * halfw;
                                    const S* orow = dxo.data() + static_cast<int64_t>(piy) * halfw;
                                    S* dst = din_plane + static_cast<int64_t>(iy) * wdt;
                                    for (int ix = 0; ix < wdt; ++ix) {
                                        const int pxi = ix + padding;
                                        dst[ix] += ((pxi & 1) ? orow : er)[pxi >> 1];
                                    }
                                }
                            }
                        }
                    }
                }
            } else {
                // generic path for unusual stride/padding combinations
                for (int ni = 0; ni < n; ++ni) {
                    for (int gi = 0; gi < groups; ++gi) {
                        for (int cr = 0; cr < co_per_g; ++cr) {
                            const int co = gi * co_per_g + cr;
                            const S* g_plane =
                                g.data() + (static_cast<int64_t>(ni) * cout + co) * ho * wo;
                            for (int ci = 0; ci < cg; ++ci) {
                                const int c = gi * cg + ci;
                                const S* in_plane =
                                    px + (static_cast<int64_t>(ni) * cin + c) * h * wdt;
                                S* din_plane =
                                    gin[0] ? gin[0]->data() +
                                                 (static_cast<int64_t>(ni) * cin + c) * h * wdt
                                           : nullptr;
                                const S* wk = pw + ((static_cast<int64_t>(co) * cg + ci) * kh) * kw;
                                S* dwk = gin[1]
                                             ? gin[1]->data() +
                                                   ((static_cast<int64_t>(co) * cg + ci) * kh) * kw
                                             : nullptr;
                                for (int ky = 0; ky < kh; ++ky) {
                                    for (int kx = 0; kx < kw; ++kx) {
                                        const S wv = wk[ky * kw + kx];
                                        S dw_acc = S(0);
                                        for (int oy = 0; oy < ho; ++oy) {
                                            const int iy = oy * stride + ky - padding;
                                            if (iy < 0 || iy >= h) continue;
                                            const S* g_row =
                                                g_plane + static_cast<int64_t>(oy) * wo;
                                            const int64_t row_off = static_cast<int64_t>(iy) * wdt;
                                            for (int ox = 0; ox < wo; ++ox) {
                                                const int ix = ox * stride + kx - padding;
                                                if (ix < 0 || ix >= wdt) continue;
                                                if (dwk)
                                                    dw_acc += g_row[ox] * in_plane[row_off + ix];
                                                if (din_plane)
                                                    din_plane[row_off + ix] += wv * g_row[ox];
                                            }
                                        }
                                        if (dwk) dwk[ky * kw + kx] += dw_acc;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        });
}

template <typename S>
Tensor<S> conv1d(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b, int stride,
                 int padding) {
    REFACE_CHECK(x.rank() == 3, "conv1d: input must be [N,C,T], got ", shape_str(x.shape()));
    REFACE_CHECK(w.rank() == 3, "conv1d: weight must be [Cout,Cin,K], got ", shape_str(w.shape()));
    REFACE_CHECK(stride >= 1 && padding >= 0, "conv1d: bad stride/padding ", stride, "/", padding);
    const int n = x.dim(0), cin = x.dim(1), t = x.dim(2);
    const int cout = w.dim(0), k = w.dim(2);
    REFACE_CHECK(w.dim(1) == cin, "conv1d: weight expects ", w.dim(1), " channels, input has ", cin);
    REFACE_CHECK(b.rank() == 1 && b.dim(0) == cout, "conv1d: bias must be [", cout, "], got ",
                 shape_str(b.shape()));
    const int to = (t + 2 * padding - k) / stride + 1;
    REFACE_CHECK(to >= 1, "conv1d: kernel ", k, " too large for length ", t, " with padding ",
                 padding);

    std::vector<S> out(static_cast<size_t>(n) * cout * to);
    std::vector<double> acc(to);
    const S* px = x.ptr();
    const S* pw = w.ptr();
    const S* pb = b.ptr();
    for (int ni = 0; ni < n; ++ni) {
        for (int co = 0; co < cout; ++co) {
            S* out_row = out.data() + (static_cast<int64_t>(ni) * cout + co) * to;
            for (auto& v : acc) v = static_cast<double>(pb[co]);
            for (int ci = 0; ci < cin; ++ci) {
                const S* in_row = px + (static_cast<int64_t>(ni) * cin + ci) * t;
                const S* wk = pw + (static_cast<int64_t>(co) * cin + ci) * k;
                for (int kk = 0; kk < k; ++kk) {
                    const double wv = static_cast<double>(wk[kk]);
                    if (wv == 0.0) continue;
                    for (int ot = 0; ot < to; ++ot) {
                        const int it = ot * stride + kk - padding;
                        if (it >= 0 && it < t) acc[ot] += wv * static_cast<double>(in_row[it]);
                    }
                }
            }
            for (int i = 0; i < to; ++i) out_row[i] = static_cast<S>(acc[i]);
        }
    }

    return make_op<S>({x, w, b}, {n, cout, to}, std::move(out),
        [x, w, n, cin, t, cout, k, to, stride, padding](const std::vector<S>& g,
                                                        const std::vector<std::vector<S>*>& gin) {
            const S* px = x.ptr();
            const S* pw = w.ptr();
            for (int ni = 0; ni < n; ++ni) {
                for (int co = 0; co < cout; ++co) {
                    const S* g_row = g.data() + (static_cast<int64_t>(ni) * cout + co) * to;
                    if (gin[2]) {
                        S acc = S(0);
                        for (int i = 0; i < to; ++i) acc += g_row[i];
                        (*gin[2])[co] += acc;
                    }
                    if (!gin[0] && !gin[1]) continue;
                    for (int ci = 0; ci < cin; ++ci) {
                        const S* in_row = px + (static_cast<int64_t>(ni) * cin + ci) * t;
                        S* din_row = gin[0]
                                         ? gin[0]->data() + (static_cast<int64_t>(ni) * cin + ci) * t
                                         : nullptr;
                        const S* wk = pw + (static_cast<int64_t>(co) * cin + ci) * k;
                        S* dwk = gin[1]
                                     ? gin[1]->data() + (static_cast<int64_t>(co) * cin + ci) * k
                                     : nullptr;
                        for (int kk = 0; kk < k; ++kk) {
                            const S wv = wk[kk];
                            S dw_acc = S(0);
                            for (int ot = 0; ot < to; ++ot) {
                                const int it = ot * stride + kk - padding;
                                if (it < 0 || it >= t) continue;
                                if (dwk) dw_acc += g_row[ot] * in_row[it];
                                if (din_row) din_row[it] += wv * g_row[ot];
                            }
                            if (dwk) dwk[kk] += dw_acc;
                        }
                    }
                }
            }
        });
}

template <typename S>
Tensor<S> instance_norm(const Tensor<S>& x, const Tensor<S>& scale_t, const Tensor<S>& shift_t,
                        S eps) {
    REFACE_CHECK(x.rank() == 4, "instance_norm: input must be [N,C,H,W], got ",
                 shape_str(x.shape()));
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), wdt = x.dim(3);
    REFACE_CHECK(scale_t.rank() == 1 && scale_t.dim(0) == c, "instance_norm: scale must be [", c,
                 "], got ", shape_str(scale_t.shape()));
    REFACE_CHECK(shift_t.rank() == 1 && shift_t.dim(0) == c, "instance_norm: shift must be [", c,
                 "], got ", shape_str(shift_t.shape()));
    const int64_t m = static_cast<int64_t>(h) * wdt;
    REFACE_CHECK(m >= 1, "instance_norm: empty spatial extent");

    std::vector<S> out(x.numel());
    std::vector<S> xhat(x.numel());
    std::vector<S> inv_std(static_cast<size_t>(n) * c);
    const S* px = x.ptr();
    const S* pg = scale_t.ptr();
    const S* pbeta = shift_t.ptr();
    for (int64_t p = 0; p < static_cast<int64_t>(n) * c; ++p) {
        const S* in_plane = px + p * m;
        double mu = 0;
        for (int64_t i = 0; i < m; ++i) mu += static_cast<double>(in_plane[i]);
        mu /= static_cast<double>(m);
        double var = 0;
        for (int64_t i = 0; i < m; ++i) {
            const double d = static_cast<double>(in_plane[i]) - mu;
            var += d * d;
        }
        var /= static_cast<double>(m);
        const S si = static_cast<S>(1.0 / std::sqrt(var + static_cast<double>(eps)));
        inv_std[p] = si;
        const S mu_s = static_cast<S>(mu);
        const int ci = static_cast<int>(p % c);
        const S gamma = pg[ci], beta = pbeta[ci];
        S* xh = xhat.data() + p * m;
        S* o = out.data() + p * m;
        for (int64_t i = 0; i < m; ++i) {
            xh[i] = (in_plane[i] - mu_s) * si;
            o[i] = gamma * xh[i] + beta;
        }
    }

    return make_op<S>({x, scale_t, shift_t}, x.shape(), std::move(out),
        [scale_t, n, c, m, xhat = std::move(xhat), inv_std = std::move(inv_std)](
            const std::vector<S>& g, const std::vector<std::vector<S>*>& gin) {
            const S* pg = scale_t.ptr();
            for (int64_t p = 0; p < static_cast<int64_t>(n) * c; ++p) {
                const int ci = static_cast<int>(p % c);
                const S* g_plane = g.data() + p * m;
                const S* xh = xhat.data() + p * m;
                if (gin[1] || gin[2]) {
                    double dg = 0, db = 0;
                    for (int64_t i = 0; i < m; ++i) {
                        dg += static_cast<double>(g_plane[i]) * static_cast<double>(xh[i]);
                        db += static_cast<double>(g_plane[i]);
                    }
                    if (gin[1]) (*gin[1])[ci] += static_cast<S>(dg);
                    if (gin[2]) (*gin[2])[ci] += static_cast<S>(db);
                }
                if (gin[0]) {
                    double gm = 0, gxm = 0;
                    for (int64_t i = 0; i < m; ++i) {
                        gm += static_cast<double>(g_plane[i]);
                        gxm += static_cast<double>(g_plane[i]) * static_cast<double>(xh[i]);
                    }
                    gm /= static_cast<double>(m);
                    gxm /= static_cast<double>(m);
                    const S k = pg[ci] * inv_std[p];
                    const S gm_s = static_cast<S>(gm), gxm_s = static_cast<S>(gxm);
                    S* dx = gin[0]->data() + p * m;
                    for (int64_t i = 0; i < m; ++i)
                        dx[i] += k * (g_plane[i] - gm_s - xh[i] * gxm_s);
                }
            }
        });
}

#define REFACE_INSTANTIATE(S)                                                                     \
    template Tensor<S> linear<S>(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&);          \
    template Tensor<S> conv2d<S>(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&, int, int, \
                                 int);                                                           \
    template Tensor<S> conv1d<S>(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&, int,      \
                                 int);                                                           \
    template Tensor<S> instance_norm<S>(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&, S);

REFACE_INSTANTIATE(float)
REFACE_INSTANTIATE(double)
#undef REFACE_INSTANTIATE

}  // namespace reface
