#include "ddci/layers.hpp"

#include <algorithm>
#include <cmath>

namespace ddci {

void validate(const SubnetConfig& cfg) {
    if (cfg.in_channels == 0 || cfg.hidden_channels == 0 || cfg.blocks == 0)
        throw ParamError("subnet config dims must be positive");
    if (cfg.kernel % 2 == 0) throw ParamError("convolution kernel size must be odd");
    if (cfg.se_reduction == 0 || cfg.hidden_channels % cfg.se_reduction != 0)
        throw ParamError("hidden_channels must be divisible by se_reduction");
}

namespace {

void check_conv_shapes(const RealTensor& x, const ConvParams& p) {
    if (x.rank() != 3) throw ShapeError("conv input must be (ch, H, W)");
    if (p.w.rank() != 4 || p.b.rank() != 1) throw ShapeError("conv params must be rank 4 / rank 1");
    if (p.w.dim(2) != p.w.dim(3) || p.w.dim(2) % 2 == 0)
        throw ShapeError("conv kernel must be square with odd size");
    if (p.w.dim(1) != x.dim(0)) throw ShapeError("conv input channel mismatch");
    if (p.b.dim(0) != p.w.dim(0)) throw ShapeError("conv bias length mismatch");
}

// Fused 3x3 kernels for the hot path: one pass per (out, in) channel pair
// with the nine taps held in registers. dst += cross-correlation(src, k3)
// under zero padding.
void accum_corr3(double* dst, const double* src, std::ptrdiff_t h, std::ptrdiff_t w,
                 const double* k3) {
    const double k00 = k3[0], k01 = k3[1], k02 = k3[2];
    const double k10 = k3[3], k11 = k3[4], k12 = k3[5];
    const double k20 = k3[6], k21 = k3[7], k22 = k3[8];
    for (std::ptrdiff_t i = 0; i < h; ++i) {
        double* drow = dst + i * w;
        const double* r0 = i > 0 ? src + (i - 1) * w : nullptr;
        const double* r1 = src + i * w;
        const double* r2 = i + 1 < h ? src + (i + 1) * w : nullptr;
        // interior columns; rows fall out naturally via null checks
        if (r0 && r2) {
#pragma omp simd
            for (std::ptrdiff_t j = 1; j < w - 1; ++j)
                drow[j] += k00 * r0[j - 1] + k01 * r0[j] + k02 * r0[j + 1] + k10 * r1[j - 1] +
                           k11 * r1[j] + k12 * r1[j + 1] + k20 * r2[j - 1] + k21 * r2[j] +
                           k22 * r2[j + 1];
        } else if (r0) {
#pragma omp simd
            for (std::ptrdiff_t j = 1; j < w - 1; ++j)
                drow[j] += k00 * r0[j - 1] + k01 * r0[j] + k02 * r0[j + 1] + k10 * r1[j - 1] +
                           k11 * r1[j] + k12 * r1[j + 1];
        } else if (r2) {
#pragma omp simd
            for (std::ptrdiff_t j = 1; j < w - 1; ++j)
                drow[j] += k10 * r1[j - 1] + k11 * r1[j] + k12 * r1[j + 1] + k20 * r2[j - 1] +
                           k21 * r2[j] + k22 * r2[j + 1];
        } else {
#pragma omp simd
            for (std::ptrdiff_t j = 1; j < w - 1; ++j)
                drow[j] += k10 * r1[j - 1] + k11 * r1[j] + k12 * r1[j + 1];
        }
        // left and right edges
        const int edge_passes = w == 1 ? 1 : 2;
        for (int pass = 0; pass < edge_passes; ++pass) {
            const std::ptrdiff_t j = pass == 0 ? 0 : w - 1;
            double acc = 0.0;
            if (r0) {
                if (j > 0) acc += k00 * r0[j - 1];
                acc += k01 * r0[j];
                if (j + 1 < w) acc += k02 * r0[j + 1];
            }
            if (j > 0) acc += k10 * r1[j - 1];
            acc += k11 * r1[j];
            if (j + 1 < w) acc += k12 * r1[j + 1];
            if (r2) {
                if (j > 0) acc += k20 * r2[j - 1];
                acc += k21 * r2[j];
                if (j + 1 < w) acc += k22 * r2[j + 1];
            }
            drow[j] += acc;
        }
    }
}

// out[p][q] += sum_{i,j} gy[i,j] * x[i+p-1, j+q-1] for the nine taps.
void accum_weight_corr3(const double* gy, const double* x, std::ptrdiff_t h, std::ptrdiff_t w,
                        double* out) {
    for (std::ptrdiff_t p = 0; p < 3; ++p) {
        const std::ptrdiff_t di = p - 1;
        const std::ptrdiff_t i0 = std::max<std::ptrdiff_t>(0, -di);
        const std::ptrdiff_t i1 = std::min<std::ptrdiff_t>(h, h - di);
        double a0 = 0.0, a1 = 0.0, a2 = 0.0;
        double e0 = 0.0, e1 = 0.0, e2 = 0.0;
        for (std::ptrdiff_t i = i0; i < i1; ++i) {
            const double* gyrow = gy + i * w;
            const double* xrow = x + (i + di) * w;
#pragma omp simd reduction(+ : a0, a1, a2)
            for (std::ptrdiff_t j = 1; j < w - 1; ++j) {
                a0 += gyrow[j] * xrow[j - 1];
                a1 += gyrow[j] * xrow[j];
                a2 += gyrow[j] * xrow[j + 1];
            }
            // edge columns contribute to the taps they can reach
            e1 += gyrow[0] * xrow[0];
            if (w > 1) {
                e2 += gyrow[0] * xrow[1];
                e0 += gyrow[w - 1] * xrow[w - 2];
                e1 += gyrow[w - 1] * xrow[w - 1];
            }
        }
        out[p * 3 + 0] += a0 + e0;
        out[p * 3 + 1] += a1 + e1;
        out[p * 3 + 2] += a2 + e2;
    }
}

}  // namespace

RealTensor conv2d_forward(const RealTensor& x, const ConvParams& p, Tape* tape) {
    check_conv_shapes(x, p);
    const std::size_t oc = p.w.dim(0), ic = p.w.dim(1), k = p.w.dim(2);
    const std::size_t h = x.dim(1), w = x.dim(2);
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>((k - 1) / 2);
    const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(h), iw = static_cast<std::ptrdiff_t>(w);

    RealTensor y({oc, h, w});
    if (k == 3) {
        for (std::size_t o = 0; o < oc; ++o) {
            double* yo = y.data() + o * h * w;
            const double bias = p.b[o];
            for (std::size_t i = 0; i < h * w; ++i) yo[i] = bias;
            for (std::size_t c = 0; c < ic; ++c)
                accum_corr3(yo, x.data() + c * h * w, static_cast<std::ptrdiff_t>(h),
                            static_cast<std::ptrdiff_t>(w), p.w.data() + (o * ic + c) * 9);
        }
        if (tape) tape->push(ConvNode{x, p.w});
        return y;
    }
    for (std::size_t o = 0; o < oc; ++o) {
        double* yo = y.data() + o * h * w;
        const double bias = p.b[o];
        for (std::size_t i = 0; i < h * w; ++i) yo[i] = bias;
        for (std::size_t c = 0; c < ic; ++c) {
            const double* xc = x.data() + c * h * w;
            for (std::size_t kp = 0; kp < k; ++kp) {
                const std::ptrdiff_t di = static_cast<std::ptrdiff_t>(kp) - pad;
                const std::ptrdiff_t i0 = std::max<std::ptrdiff_t>(0, -di);
                const std::ptrdiff_t i1 = std::min<std::ptrdiff_t>(ih, ih - di);
                for (std::size_t kq = 0; kq < k; ++kq) {
                    const std::ptrdiff_t dj = static_cast<std::ptrdiff_t>(kq) - pad;
                    const double wv = p.w.at4(o, c, kp, kq);
                    const std::ptrdiff_t j0 = std::max<std::ptrdiff_t>(0, -dj);
                    const std::ptrdiff_t j1 = std::min<std::ptrdiff_t>(iw, iw - dj);
                    for (std::ptrdiff_t i = i0; i < i1; ++i) {
                        double* yrow = yo + i * iw;
                        const double* xrow = xc + (i + di) * iw + dj;
                        for (std::ptrdiff_t j = j0; j < j1; ++j) yrow[j] += wv * xrow[j];
                    }
                }
            }
        }
    }
    if (tape) tape->push(ConvNode{x, p.w});
    return y;
}

ConvGrads conv2d_backward(const RealTensor& grad_out, Tape& tape) {
    ConvNode node = tape.pop<ConvNode>();
    const RealTensor& x = node.x;
    const RealTensor& w = node.w;
    const std::size_t oc = w.dim(0), ic = w.dim(1), k = w.dim(2);
    const std::size_t h = x.dim(1), ww = x.dim(2);
    if (grad_out.rank() != 3 || grad_out.dim(0) != oc || grad_out.dim(1) != h ||
        grad_out.dim(2) != ww)
        throw ShapeError("conv2d_backward: upstream gradient shape mismatch");
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>((k - 1) / 2);
    const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(h), iw = static_cast<std::ptrdiff_t>(ww);

    ConvGrads g{RealTensor({ic, h, ww}), RealTensor({oc, ic, k, k}), RealTensor({oc})};

    for (std::size_t o = 0; o < oc; ++o) {
        const double* gyo = grad_out.data() + o * h * ww;
        double acc = 0.0;
        for (std::size_t i = 0; i < h * ww; ++i) acc += gyo[i];
        g.b[o] = acc;
    }

    if (k == 3) {
        const auto ih3 = static_cast<std::ptrdiff_t>(h);
        const auto iw3 = static_cast<std::ptrdiff_t>(ww);
        for (std::size_t o = 0; o < oc; ++o) {
            const double* gyo = grad_out.data() + o * h * ww;
            for (std::size_t c = 0; c < ic; ++c)
                accum_weight_corr3(gyo, x.data() + c * h * ww, ih3, iw3,
                                   g.w.data() + (o * ic + c) * 9);
        }
        double flipped[9];
        for (std::size_t c = 0; c < ic; ++c) {
            double* gxc = g.x.data() + c * h * ww;
            for (std::size_t o = 0; o < oc; ++o) {
                const double* wk = w.data() + (o * ic + c) * 9;
                for (int t = 0; t < 9; ++t) flipped[t] = wk[8 - t];
                accum_corr3(gxc, grad_out.data() + o * h * ww, ih3, iw3, flipped);
            }
        }
        return g;
    }

    // d/dw: correlate upstream gradient with the saved input
    for (std::size_t o = 0; o < oc; ++o) {
        const double* gyo = grad_out.data() + o * h * ww;
        for (std::size_t c = 0; c < ic; ++c) {
            const double* xc = x.data() + c * h * ww;
            for (std::size_t kp = 0; kp < k; ++kp) {
                const std::ptrdiff_t di = static_cast<std::ptrdiff_t>(kp) - pad;
                const std::ptrdiff_t i0 = std::max<std::ptrdiff_t>(0, -di);
                const std::ptrdiff_t i1 = std::min<std::ptrdiff_t>(ih, ih - di);
                for (std::size_t kq = 0; kq < k; ++kq) {
                    const std::ptrdiff_t dj = static_cast<std::ptrdiff_t>(kq) - pad;
                    const std::ptrdiff_t j0 = std::max<std::ptrdiff_t>(0, -dj);
                    const std::ptrdiff_t j1 = std::min<std::ptrdiff_t>(iw, iw - dj);
                    double acc = 0.0;
                    for (std::ptrdiff_t i = i0; i < i1; ++i) {
                        const double* gyrow = gyo + i * iw;
                        const double* xrow = xc + (i + di) * iw + dj;
                        for (std::ptrdiff_t j = j0; j < j1; ++j) acc += gyrow[j] * xrow[j];
                    }
                    g.w.at4(o, c, kp, kq) = acc;
                }
            }
        }
    }

    // d/dx: correlation of the upstream gradient with the flipped kernel
    for (std::size_t c = 0; c < ic; ++c) {
        double* gxc = g.x.data() + c * h * ww;
        for (std::size_t o = 0; o < oc; ++o) {
            const double* gyo = grad_out.data() + o * h * ww;
            for (std::size_t kp = 0; kp < k; ++kp) {
                const std::ptrdiff_t di = static_cast<std::ptrdiff_t>(kp) - pad;
                const std::ptrdiff_t m0 = std::max<std::ptrdiff_t>(0, di);
                const std::ptrdiff_t m1 = std::min<std::ptrdiff_t>(ih, ih + di);
                for (std::size_t kq = 0; kq < k; ++kq) {
                    const std::ptrdiff_t dj = static_cast<std::ptrdiff_t>(kq) - pad;
                    const double wv = w.at4(o, c, kp, kq);
                    const std::ptrdiff_t n0 = std::max<std::ptrdiff_t>(0, dj);
                    const std::ptrdiff_t n1 = std::min<std::ptrdiff_t>(iw, iw + dj);
                    for (std::ptrdiff_t m = m0; m < m1; ++m) {
                        double* gxrow = gxc + m * iw;
                        const double* gyrow = gyo + (m - di) * iw - dj;
                        for (std::ptrdiff_t n = n0; n < n1; ++n) gxrow[n] += wv * gyrow[n];
                    }
                }
            }
        }
    }
    return g;
}

RealTensor relu_forward(const RealTensor& x, Tape* tape) {
    RealTensor y = x;
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = y[i] > 0.0 ? y[i] : 0.0;
    if (tape) tape->push(ReluNode{x});
    return y;
}

RealTensor relu_backward(const RealTensor& grad_out, Tape& tape) {
    ReluNode node = tape.pop<ReluNode>();
    if (!grad_out.same_shape(node.x)) throw ShapeError("relu_backward: gradient shape mismatch");
    RealTensor g = grad_out;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (node.x[i] <= 0.0) g[i] = 0.0;
    return g;
}

RealTensor global_avg_pool(const RealTensor& x) {
    if (x.rank() != 3) throw ShapeError("global_avg_pool input must be (ch, H, W)");
    const std::size_t ch = x.dim(0), plane = x.dim(1) * x.dim(2);
    RealTensor s({ch});
    for (std::size_t c = 0; c < ch; ++c) {
        const double* xc = x.data() + c * plane;
        double acc = 0.0;
        for (std::size_t i = 0; i < plane; ++i) acc += xc[i];
        s[c] = acc / static_cast<double>(plane);
    }
    return s;
}

RealTensor fc_forward(const RealTensor& x, const FcParams& p) {
    if (x.rank() != 1 || p.w.rank() != 2) throw ShapeError("fc expects vector input, matrix weight");
    const std::size_t out = p.w.dim(0), in = p.w.dim(1);
    if (x.dim(0) != in || p.b.dim(0) != out) throw ShapeError("fc shape mismatch");
    RealTensor y({out});
    for (std::size_t o = 0; o < out; ++o) {
        double acc = p.b[o];
        const double* wrow = p.w.data() + o * in;
        for (std::size_t i = 0; i < in; ++i) acc += wrow[i] * x[i];
        y[o] = acc;
    }
    return y;
}

RealTensor sigmoid(const RealTensor& x) {
    RealTensor y = x;
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = 1.0 / (1.0 + std::exp(-y[i]));
    return y;
}

RealTensor se_block_forward(const RealTensor& x, const SeParams& p, Tape* tape) {
    if (x.rank() != 3) throw ShapeError("se_block input must be (ch, H, W)");
    const std::size_t ch = x.dim(0);
    if (p.reduce.w.dim(1) != ch || p.expand.w.dim(0) != ch)
        throw ShapeError("se_block: channel count does not match fc shapes");
    if (ch % p.reduce.w.dim(0) != 0)
        throw ShapeError("se_block: channel count not divisible by reduction");

    RealTensor s = global_avg_pool(x);
    RealTensor u = fc_forward(s, p.reduce);
    RealTensor a = relu_forward(u, nullptr);
    RealTensor v = fc_forward(a, p.expand);
    RealTensor g = sigmoid(v);

    RealTensor y = x;
    const std::size_t plane = x.dim(1) * x.dim(2);
    for (std::size_t c = 0; c < ch; ++c) {
        double* yc = y.data() + c * plane;
        const double gc = g[c];
        for (std::size_t i = 0; i < plane; ++i) yc[i] *= gc;
    }
    if (tape) tape->push(SeNode{x, s, u, a, g, p.reduce.w, p.expand.w});
    return y;
}

SeGrads se_block_backward(const RealTensor& grad_out, Tape& tape) {
    SeNode node = tape.pop<SeNode>();
    const RealTensor& x = node.x;
    if (!grad_out.same_shape(x)) throw ShapeError("se_block_backward: gradient shape mismatch");
    const std::size_t ch = x.dim(0), plane = x.dim(1) * x.dim(2);
    const std::size_t red = node.w1.dim(0);

    // gate gradient and the direct scaling path
    RealTensor gg({ch});
    SeGrads out{RealTensor::zeros_like(x),
                SeParams{FcParams{RealTensor({red, ch}), RealTensor({red})},
                         FcParams{RealTensor({ch, red}), RealTensor({ch})}}};
    for (std::size_t c = 0; c < ch; ++c) {
        const double* gyc = grad_out.data() + c * plane;
        const double* xc = x.data() + c * plane;
        double* gxc = out.x.data() + c * plane;
        double acc = 0.0;
        const double gc = node.g[c];
        for (std::size_t i = 0; i < plane; ++i) {
            acc += gyc[i] * xc[i];
            gxc[i] = gyc[i] * gc;
        }
        gg[c] = acc;
    }

    // through the gate: sigmoid, expand fc, relu, reduce fc, pooled stats
    RealTensor gv({ch});
    for (std::size_t c = 0; c < ch; ++c) gv[c] = gg[c] * node.g[c] * (1.0 - node.g[c]);

    RealTensor ga({red});
    for (std::size_t c = 0; c < ch; ++c) {
        const double* w2row = node.w2.data() + c * red;
        double* gw2row = out.params.expand.w.data() + c * red;
        for (std::size_t k = 0; k < red; ++k) {
            gw2row[k] = gv[c] * node.a[k];
            ga[k] += w2row[k] * gv[c];
        }
        out.params.expand.b[c] = gv[c];
    }

    RealTensor gu({red});
    for (std::size_t k = 0; k < red; ++k) gu[k] = node.u[k] > 0.0 ? ga[k] : 0.0;

    RealTensor gs({ch});
    for (std::size_t k = 0; k < red; ++k) {
        const double* w1row = node.w1.data() + k * ch;
        double* gw1row = out.params.reduce.w.data() + k * ch;
        for (std::size_t c = 0; c < ch; ++c) {
            gw1row[c] = gu[k] * node.s[c];
            gs[c] += w1row[c] * gu[k];
        }
        out.params.reduce.b[k] = gu[k];
    }

    const double inv_plane = 1.0 / static_cast<double>(plane);
    for (std::size_t c = 0; c < ch; ++c) {
        double* gxc = out.x.data() + c * plane;
        const double add = gs[c] * inv_plane;
        for (std::size_t i = 0; i < plane; ++i) gxc[i] += add;
    }
    return out;
}

RealTensor subnet_forward(const RealTensor& x, const SubnetParams& p, const SubnetConfig& cfg,
                          Tape* tape) {
    validate(cfg);
    if (x.rank() != 3 || x.dim(0) != cfg.in_channels)
        throw ShapeError("subnet input channel count does not match config");
    if (p.blocks.size() != cfg.blocks) throw ShapeError("subnet params block count mismatch");

    RealTensor h = conv2d_forward(x, p.lift, tape);
    for (const BlockParams& blk : p.blocks) {
        RealTensor t = conv2d_forward(h, blk.conv1, tape);
        t = relu_forward(t, tape);
        t = conv2d_forward(t, blk.conv2, tape);
        t = se_block_forward(t, blk.se, tape);
        h += t;  // residual over the block
    }
    RealTensor out = conv2d_forward(h, p.project, tape);
    out += x;  // global residual
    return out;
}

SubnetGrads subnet_backward(const RealTensor& grad_out, const SubnetConfig& cfg, Tape& tape) {
    SubnetGrads out;
    out.params.blocks.resize(cfg.blocks);

    ConvGrads proj = conv2d_backward(grad_out, tape);
    out.params.project = ConvParams{std::move(proj.w), std::move(proj.b)};

    RealTensor gh = std::move(proj.x);
    for (std::size_t bi = cfg.blocks; bi-- > 0;) {
        SeGrads se = se_block_backward(gh, tape);
        ConvGrads c2 = conv2d_backward(se.x, tape);
        RealTensor gt1 = relu_backward(c2.x, tape);
        ConvGrads c1 = conv2d_backward(gt1, tape);
        BlockParams& bg = out.params.blocks[bi];
        bg.se = std::move(se.params);
        bg.conv2 = ConvParams{std::move(c2.w), std::move(c2.b)};
        bg.conv1 = ConvParams{std::move(c1.w), std::move(c1.b)};
        gh += c1.x;  // block residual fan-in
    }
    ConvGrads lift = conv2d_backward(gh, tape);
    out.params.lift = ConvParams{std::move(lift.w), std::move(lift.b)};

    out.x = std::move(lift.x);
    out.x += grad_out;  // global residual fan-in
    return out;
}

namespace {

RealTensor he_uniform(std::vector<std::size_t> shape, std::size_t fan_in, Rng& rng) {
    RealTensor t(std::move(shape));
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-limit, limit);
    return t;
}

ConvParams init_conv(std::size_t out, std::size_t in, std::size_t k, Rng& rng) {
    return ConvParams{he_uniform({out, in, k, k}, in * k * k, rng), RealTensor({out})};
}

FcParams init_fc(std::size_t out, std::size_t in, Rng& rng) {
    return FcParams{he_uniform({out, in}, in, rng), RealTensor({out})};
}

}  // namespace

SubnetParams init_subnet_params(const SubnetConfig& cfg, Rng& rng) {
    validate(cfg);
    SubnetParams p;
    p.lift = init_conv(cfg.hidden_channels, cfg.in_channels, cfg.kernel, rng);
    const std::size_t red = cfg.hidden_channels / cfg.se_reduction;
    for (std::size_t b = 0; b < cfg.blocks; ++b) {
        BlockParams blk;
        blk.conv1 = init_conv(cfg.hidden_channels, cfg.hidden_channels, cfg.kernel, rng);
        blk.conv2 = init_conv(cfg.hidden_channels, cfg.hidden_channels, cfg.kernel, rng);
        blk.se.reduce = init_fc(red, cfg.hidden_channels, rng);
        blk.se.expand = init_fc(cfg.hidden_channels, red, rng);
        p.blocks.push_back(std::move(blk));
    }
    p.project = init_conv(cfg.in_channels, cfg.hidden_channels, cfg.kernel, rng);
    return p;
}

SubnetParams zero_subnet_params(const SubnetConfig& cfg) {
    validate(cfg);
    SubnetParams p;
    p.lift = ConvParams{RealTensor({cfg.hidden_channels, cfg.in_channels, cfg.kernel, cfg.kernel}),
                        RealTensor({cfg.hidden_channels})};
    const std::size_t red = cfg.hidden_channels / cfg.se_reduction;
    for (std::size_t b = 0; b < cfg.blocks; ++b) {
        BlockParams blk;
        blk.conv1 =
            ConvParams{RealTensor({cfg.hidden_channels, cfg.hidden_channels, cfg.kernel, cfg.kernel}),
                       RealTensor({cfg.hidden_channels})};
        blk.conv2 =
            ConvParams{RealTensor({cfg.hidden_channels, cfg.hidden_channels, cfg.kernel, cfg.kernel}),
                       RealTensor({cfg.hidden_channels})};
        blk.se.reduce = FcParams{RealTensor({red, cfg.hidden_channels}), RealTensor({red})};
        blk.se.expand = FcParams{RealTensor({cfg.hidden_channels, red}), RealTensor({cfg.hidden_channels})};
        p.blocks.push_back(std::move(blk));
    }
    p.project = ConvParams{RealTensor({cfg.in_channels, cfg.hidden_channels, cfg.kernel, cfg.kernel}),
                           RealTensor({cfg.in_channels})};
    return p;
}

}  // namespace ddci
