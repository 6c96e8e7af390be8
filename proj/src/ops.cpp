#include "cognisnn/ops.hpp"

#include <algorithm>
#include <cmath>

#include "cognisnn/util.hpp"

namespace cognisnn {

namespace {

// view a [C,H,W] tensor as a group of one without copying the shape handling
std::vector<std::size_t> as_group_shape(const Tensor& t, const char* what) {
    if (t.rank() == 4) return t.shape;
    if (t.rank() == 3) return {1, t.shape[0], t.shape[1], t.shape[2]};
    throw DimensionError(std::string(what) + ": expected rank 3 or 4, got rank " +
                         std::to_string(t.rank()));
}

struct ConvDims {
    std::size_t g, cin, h, w, cout, kh, kw, ho, wo;
};

ConvDims conv_dims(const std::vector<std::size_t>& xs, const Tensor& k,
                   std::size_t stride, std::size_t pad) {
    if (k.rank() != 4) throw DimensionError("conv2d: kernels must be [Cout,Cin,kh,kw]");
    ConvDims d{};
    d.g = xs[0];
    d.cin = xs[1];
    d.h = xs[2];
    d.w = xs[3];
    d.cout = k.shape[0];
    d.kh = k.shape[2];
    d.kw = k.shape[3];
    if (k.shape[1] != d.cin)
        throw DimensionError("conv2d: kernel Cin " + std::to_string(k.shape[1]) +
                             " does not match input channels " + std::to_string(d.cin));
    if (stride == 0) throw InvalidArgument("conv2d: stride must be positive");
    if (d.h + 2 * pad < d.kh || d.w + 2 * pad < d.kw)
        throw DimensionError("conv2d: kernel larger than padded input");
    d.ho = (d.h + 2 * pad - d.kh) / stride + 1;
    d.wo = (d.w + 2 * pad - d.kw) / stride + 1;
    return d;
}

// valid output column range for a given kernel column: 0 <= ox*stride+kx-pad < W
inline void ox_range(std::size_t kx, std::size_t pad, std::size_t stride, std::size_t w,
                     std::size_t wo, std::size_t& ox0, std::size_t& ox1) {
    long lo = long(pad) - long(kx);
    std::size_t o0 = lo <= 0 ? 0 : std::size_t((lo + long(stride) - 1) / long(stride));
    long hi = long(w) - 1 + long(pad) - long(kx);
    if (hi < 0) {
        ox0 = 1;
        ox1 = 0;
        return;
    }
    std::size_t o1 = std::size_t(hi) / stride;
    if (o1 >= wo) o1 = wo - 1;
    ox0 = o0;
    ox1 = o1;
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernels, std::size_t stride,
              std::size_t padding) {
    auto xs = as_group_shape(input, "conv2d");
    ConvDims d = conv_dims(xs, kernels, stride, padding);
    Tensor out = Tensor::zeros(input.rank() == 3
                                   ? std::vector<std::size_t>{d.cout, d.ho, d.wo}
                                   : std::vector<std::size_t>{d.g, d.cout, d.ho, d.wo});
    const double* x = input.data.data();
    const double* kd = kernels.data.data();
    double* y = out.data.data();

    // one output row accumulates in a stack buffer; tap order (ci,ky,kx) is
    // fixed so results are bit-identical for any thread count
    parallel_for(d.g * d.cout, [&](std::size_t gc) {
        std::size_t g = gc / d.cout, co = gc % d.cout;
        double* yslab = y + (g * d.cout + co) * d.ho * d.wo;
        std::vector<double> acc(d.wo);
        for (std::size_t oy = 0; oy < d.ho; ++oy) {
            std::fill(acc.begin(), acc.end(), 0.0);
            for (std::size_t ci = 0; ci < d.cin; ++ci) {
                const double* xslab = x + (g * d.cin + ci) * d.h * d.w;
                for (std::size_t ky = 0; ky < d.kh; ++ky) {
                    long iy = long(oy * stride + ky) - long(padding);
                    if (iy < 0 || iy >= long(d.h)) continue;
                    const double* xrow = xslab + std::size_t(iy) * d.w;
                    const double* krow = kd + ((co * d.cin + ci) * d.kh + ky) * d.kw;
                    for (std::size_t kx = 0; kx < d.kw; ++kx) {
                        double wv = krow[kx];
                        if (wv == 0.0) continue;
                        std::size_t ox0, ox1;
                        ox_range(kx, padding, stride, d.w, d.wo, ox0, ox1);
                        if (ox0 > ox1) continue;
                        long base = long(kx) - long(padding);
                        const double* xr = xrow + base;
                        if (stride == 1) {
                            for (std::size_t ox = ox0; ox <= ox1; ++ox)
                                acc[ox] += wv * xr[ox];
                        } else {
                            for (std::size_t ox = ox0; ox <= ox1; ++ox)
                                acc[ox] += wv * xrow[std::size_t(long(ox * stride) + base)];
                        }
                    }
                }
            }
            std::copy(acc.begin(), acc.end(), yslab + oy * d.wo);
        }
    });
    return out;
}

Tensor conv2d_grad_input(const Tensor& dy, const Tensor& kernels,
                         const std::vector<std::size_t>& input_shape, std::size_t stride,
                         std::size_t padding) {
    Tensor dx = Tensor::zeros(input_shape);
    auto xs = as_group_shape(dx, "conv2d");
    ConvDims d = conv_dims(xs, kernels, stride, padding);
    const double* dyp = dy.data.data();
    const double* kd = kernels.data.data();
    double* dxp = dx.data.data();

    if (stride == 1) {
        // full correlation with the flipped kernel, one dx row per pass
        parallel_for(d.g * d.cin, [&](std::size_t gc) {
            std::size_t g = gc / d.cin, ci = gc % d.cin;
            double* dxslab = dxp + (g * d.cin + ci) * d.h * d.w;
            std::vector<double> acc(d.w);
            for (std::size_t iy = 0; iy < d.h; ++iy) {
                std::fill(acc.begin(), acc.end(), 0.0);
                for (std::size_t co = 0; co < d.cout; ++co) {
                    const double* dyslab = dyp + (g * d.cout + co) * d.ho * d.wo;
                    for (std::size_t ky = 0; ky < d.kh; ++ky) {
                        long oy = long(iy) + long(padding) - long(ky);
                        if (oy < 0 || oy >= long(d.ho)) continue;
                        const double* dyrow = dyslab + std::size_t(oy) * d.wo;
                        const double* krow = kd + ((co * d.cin + ci) * d.kh + ky) * d.kw;
                        for (std::size_t kx = 0; kx < d.kw; ++kx) {
                            double wv = krow[kx];
                            if (wv == 0.0) continue;
                            // ix = ox + kx - pad  =>  ox = ix + (pad - kx)
                            long shift = long(padding) - long(kx);
                            std::size_t ix0 = shift < 0 ? std::size_t(-shift) : 0;
                            long ix1l = long(d.wo) - 1 - shift;
                            if (ix1l < 0) continue;
                            std::size_t ix1 = std::min(d.w - 1, std::size_t(ix1l));
                            const double* dyr = dyrow + shift;
                            for (std::size_t ix = ix0; ix <= ix1; ++ix)
                                acc[ix] += wv * dyr[ix];
                        }
                    }
                }
                std::copy(acc.begin(), acc.end(), dxslab + iy * d.w);
            }
        });
        return dx;
    }

    parallel_for(d.g * d.cin, [&](std::size_t gc) {
        std::size_t g = gc / d.cin, ci = gc % d.cin;
        double* dxslab = dxp + (g * d.cin + ci) * d.h * d.w;
        for (std::size_t co = 0; co < d.cout; ++co) {
            const double* dyslab = dyp + (g * d.cout + co) * d.ho * d.wo;
            for (std::size_t ky = 0; ky < d.kh; ++ky) {
                for (std::size_t kx = 0; kx < d.kw; ++kx) {
                    double wv = kd[((co * d.cin + ci) * d.kh + ky) * d.kw + kx];
                    if (wv == 0.0) continue;
                    std::size_t ox0, ox1;
                    ox_range(kx, padding, stride, d.w, d.wo, ox0, ox1);
                    if (ox0 > ox1) continue;
                    for (std::size_t oy = 0; oy < d.ho; ++oy) {
                        long iy = long(oy * stride + ky) - long(padding);
                        if (iy < 0 || iy >= long(d.h)) continue;
                        double* dxrow = dxslab + std::size_t(iy) * d.w;
                        const double* dyrow = dyslab + oy * d.wo;
                        long base = long(kx) - long(padding);
                        for (std::size_t ox = ox0; ox <= ox1; ++ox)
                            dxrow[std::size_t(long(ox * stride) + base)] += wv * dyrow[ox];
                    }
                }
            }
        }
    });
    return dx;
}

Tensor conv2d_grad_kernels(const Tensor& dy, const Tensor& input,
                           const std::vector<std::size_t>& kernel_shape,
                           std::size_t stride, std::size_t padding) {
    auto xs = as_group_shape(input, "conv2d");
    Tensor kshape_probe(kernel_shape, std::vector<double>(Tensor::count(kernel_shape), 0.0));
    ConvDims d = conv_dims(xs, kshape_probe, stride, padding);
    Tensor dw = Tensor::zeros(kernel_shape);
    const double* x = input.data.data();
    const double* dyp = dy.data.data();
    double* dwp = dw.data.data();

    // one weight coordinate per work item: any thread count sums in the same order
    parallel_for(d.cout * d.cin * d.kh * d.kw, [&](std::size_t idx) {
        std::size_t kx = idx % d.kw;
        std::size_t ky = (idx / d.kw) % d.kh;
        std::size_t ci = (idx / (d.kw * d.kh)) % d.cin;
        std::size_t co = idx / (d.kw * d.kh * d.cin);
        std::size_t ox0, ox1;
        ox_range(kx, padding, stride, d.w, d.wo, ox0, ox1);
        double s = 0.0;
        if (ox0 <= ox1) {
            for (std::size_t g = 0; g < d.g; ++g) {
                const double* xslab = x + (g * d.cin + ci) * d.h * d.w;
                const double* dyslab = dyp + (g * d.cout + co) * d.ho * d.wo;
                for (std::size_t oy = 0; oy < d.ho; ++oy) {
                    long iy = long(oy * stride + ky) - long(padding);
                    if (iy < 0 || iy >= long(d.h)) continue;
                    const double* xrow = xslab + std::size_t(iy) * d.w;
                    const double* dyrow = dyslab + oy * d.wo;
                    long base = long(kx) - long(padding);
                    for (std::size_t ox = ox0; ox <= ox1; ++ox)
                        s += dyrow[ox] * xrow[std::size_t(long(ox * stride) + base)];
                }
            }
        }
        dwp[idx] = s;
    });
    return dw;
}

Tensor avg_pool(const Tensor& input, std::size_t kernel) {
    if (kernel == 0) throw InvalidArgument("avg_pool: kernel must be positive");
    auto xs = as_group_shape(input, "avg_pool");
    std::size_t g = xs[0], c = xs[1], h = xs[2], w = xs[3];
    if (h % kernel != 0 || w % kernel != 0)
        throw DimensionError("avg_pool: kernel " + std::to_string(kernel) +
                             " does not divide " + std::to_string(h) + "x" +
                             std::to_string(w));
    if (kernel == 1) return input;
    std::size_t ho = h / kernel, wo = w / kernel;
    Tensor out = Tensor::zeros(input.rank() == 3
                                   ? std::vector<std::size_t>{c, ho, wo}
                                   : std::vector<std::size_t>{g, c, ho, wo});
    const double inv = 1.0 / double(kernel * kernel);
    for (std::size_t gc = 0; gc < g * c; ++gc) {
        const double* xs2 = input.data.data() + gc * h * w;
        double* ys = out.data.data() + gc * ho * wo;
        for (std::size_t oy = 0; oy < ho; ++oy)
            for (std::size_t ox = 0; ox < wo; ++ox) {
                double s = 0.0;
                for (std::size_t dy = 0; dy < kernel; ++dy)
                    for (std::size_t dx = 0; dx < kernel; ++dx)
                        s += xs2[(oy * kernel + dy) * w + ox * kernel + dx];
                ys[oy * wo + ox] = s * inv;
            }
    }
    return out;
}

Tensor avg_pool_grad(const Tensor& dy, std::size_t kernel,
                     const std::vector<std::size_t>& input_shape) {
    Tensor dx = Tensor::zeros(input_shape);
    if (kernel == 1) {
        dx.data = dy.data;
        return dx;
    }
    auto xs = as_group_shape(dx, "avg_pool");
    std::size_t g = xs[0], c = xs[1], h = xs[2], w = xs[3];
    std::size_t ho = h / kernel, wo = w / kernel;
    const double inv = 1.0 / double(kernel * kernel);
    for (std::size_t gc = 0; gc < g * c; ++gc) {
        double* dxs = dx.data.data() + gc * h * w;
        const double* dys = dy.data.data() + gc * ho * wo;
        for (std::size_t oy = 0; oy < ho; ++oy)
            for (std::size_t ox = 0; ox < wo; ++ox) {
                double v = dys[oy * wo + ox] * inv;
                for (std::size_t ddy = 0; ddy < kernel; ++ddy)
                    for (std::size_t ddx = 0; ddx < kernel; ++ddx)
                        dxs[(oy * kernel + ddy) * w + ox * kernel + ddx] += v;
            }
    }
    return dx;
}

Tensor global_avg_pool(const Tensor& input) {
    auto xs = as_group_shape(input, "global_avg_pool");
    std::size_t g = xs[0], c = xs[1], hw = xs[2] * xs[3];
    Tensor out = Tensor::zeros({g, c});
    const double inv = 1.0 / double(hw);
    for (std::size_t gc = 0; gc < g * c; ++gc) {
        const double* x = input.data.data() + gc * hw;
        double s = 0.0;
        for (std::size_t i = 0; i < hw; ++i) s += x[i];
        out.data[gc] = s * inv;
    }
    return out;
}

Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias) {
    if (weight.rank() != 2) throw DimensionError("linear: weight must be [Dout,Din]");
    std::size_t dout = weight.shape[0], din = weight.shape[1];
    if (bias.size() != dout) throw DimensionError("linear: bias length mismatch");
    std::size_t b = 1;
    const Tensor* x = &input;
    Tensor promoted;
    if (input.rank() == 1) {
        if (input.size() != din) throw DimensionError("linear: input length mismatch");
    } else if (input.rank() == 2) {
        b = input.shape[0];
        if (input.shape[1] != din) throw DimensionError("linear: input width mismatch");
    } else {
        throw DimensionError("linear: input must be rank 1 or 2");
    }
    (void)x;
    (void)promoted;
    Tensor out = Tensor::zeros(input.rank() == 1 ? std::vector<std::size_t>{dout}
                                                 : std::vector<std::size_t>{b, dout});
    for (std::size_t i = 0; i < b; ++i) {
        const double* xr = input.data.data() + i * din;
        double* yr = out.data.data() + i * dout;
        for (std::size_t o = 0; o < dout; ++o) {
            const double* wr = weight.data.data() + o * din;
            double s = bias.data[o];
            for (std::size_t k = 0; k < din; ++k) s += wr[k] * xr[k];
            yr[o] = s;
        }
    }
    return out;
}

BnStats batch_norm_stats(const Tensor& input) {
    if (input.rank() < 2) throw DimensionError("batch_norm: input must have a channel dim");
    std::size_t g = input.shape[0], c = input.shape[1];
    if (g == 0 || c == 0 || input.size() == 0)
        throw InvalidArgument("batch_norm: zero-size batch in train mode");
    std::size_t s = input.size() / (g * c);
    std::size_t n = g * s;
    BnStats st{Tensor::zeros({c}), Tensor::zeros({c})};
    for (std::size_t ch = 0; ch < c; ++ch) {
        double sum = 0.0;
        for (std::size_t gi = 0; gi < g; ++gi) {
            const double* x = input.data.data() + (gi * c + ch) * s;
            for (std::size_t i = 0; i < s; ++i) sum += x[i];
        }
        double mean = sum / double(n);
        double var = 0.0;
        for (std::size_t gi = 0; gi < g; ++gi) {
            const double* x = input.data.data() + (gi * c + ch) * s;
            for (std::size_t i = 0; i < s; ++i) {
                double d = x[i] - mean;
                var += d * d;
            }
        }
        st.mean.data[ch] = mean;
        st.var.data[ch] = var / double(n);
    }
    return st;
}

Tensor batch_norm_apply(const Tensor& input, const Tensor& mean, const Tensor& var,
                        const Tensor& gamma, const Tensor& beta, double eps) {
    std::size_t g = input.shape[0], c = input.shape[1];
    std::size_t s = input.size() / (g * c);
    if (gamma.size() != c || beta.size() != c)
        throw DimensionError("batch_norm: gamma/beta length must equal channel count");
    Tensor out = Tensor::zeros(input.shape);
    for (std::size_t ch = 0; ch < c; ++ch) {
        double inv = 1.0 / std::sqrt(var.data[ch] + eps);
        double gm = gamma.data[ch], bt = beta.data[ch], mn = mean.data[ch];
        for (std::size_t gi = 0; gi < g; ++gi) {
            const double* x = input.data.data() + (gi * c + ch) * s;
            double* y = out.data.data() + (gi * c + ch) * s;
            for (std::size_t i = 0; i < s; ++i) y[i] = gm * (x[i] - mn) * inv + bt;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// tape ops
// ---------------------------------------------------------------------------

Var op_leaf(Tape& t, Tensor v, const char* tag) { return t.leaf(std::move(v), tag); }

namespace {

// generic elementwise binary op with constant partials
Var ew_binary(Tape& t, Var a, Var b, const char* tag, double (*f)(double, double),
              void (*df)(double, double, double, double&, double&)) {
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    if (!av.same_shape(bv)) throw DimensionError(std::string(tag) + ": shape mismatch");
    Tensor out = Tensor::zeros(av.shape);
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = f(av.data[i], bv.data[i]);
    int ai = a.index, bi = b.index;
    return t.push(std::move(out), {ai, bi},
                  [ai, bi, df](Tape& tp, int self) {
                      const Tensor& g = tp.node(self).grad;
                      const Tensor& av2 = tp.node(ai).value;
                      const Tensor& bv2 = tp.node(bi).value;
                      Tensor da = Tensor::zeros(av2.shape);
                      Tensor db = Tensor::zeros(bv2.shape);
                      for (std::size_t i = 0; i < g.size(); ++i) {
                          double pa, pb;
                          df(av2.data[i], bv2.data[i], g.data[i], pa, pb);
                          da.data[i] = pa;
                          db.data[i] = pb;
                      }
                      tp.accumulate(ai, da);
                      tp.accumulate(bi, db);
                  },
                  tag);
}

}  // namespace

Var op_add(Tape& t, Var a, Var b) {
    return ew_binary(
        t, a, b, "add", [](double x, double y) { return x + y; },
        [](double, double, double g, double& pa, double& pb) {
            pa = g;
            pb = g;
        });
}

Var op_sub(Tape& t, Var a, Var b) {
    return ew_binary(
        t, a, b, "sub", [](double x, double y) { return x - y; },
        [](double, double, double g, double& pa, double& pb) {
            pa = g;
            pb = -g;
        });
}

Var op_mul(Tape& t, Var a, Var b) {
    return ew_binary(
        t, a, b, "mul", [](double x, double y) { return x * y; },
        [](double x, double y, double g, double& pa, double& pb) {
            pa = g * y;
            pb = g * x;
        });
}

Var op_lincomb(Tape& t, Var a, Var b, double ca, double cb) {
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    if (!av.same_shape(bv)) throw DimensionError("lincomb: shape mismatch");
    Tensor out = Tensor::zeros(av.shape);
    for (std::size_t i = 0; i < out.size(); ++i)
        out.data[i] = ca * av.data[i] + cb * bv.data[i];
    int ai = a.index, bi = b.index;
    return t.push(std::move(out), {ai, bi},
                  [ai, bi, ca, cb](Tape& tp, int self) {
                      const Tensor& g = tp.node(self).grad;
                      Tensor da = Tensor::zeros(g.shape);
                      Tensor db = Tensor::zeros(g.shape);
                      for (std::size_t i = 0; i < g.size(); ++i) {
                          da.data[i] = ca * g.data[i];
                          db.data[i] = cb * g.data[i];
                      }
                      tp.accumulate(ai, da);
                      tp.accumulate(bi, db);
                  },
                  "lincomb");
}

Var op_affine(Tape& t, Var x, double k, double c) {
    const Tensor& xv = t.value(x);
    Tensor out = Tensor::zeros(xv.shape);
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = k * xv.data[i] + c;
    int xi = x.index;
    return t.push(std::move(out), {xi},
                  [xi, k](Tape& tp, int self) {
                      const Tensor& g = tp.node(self).grad;
                      Tensor dx = Tensor::zeros(g.shape);
                      for (std::size_t i = 0; i < g.size(); ++i) dx.data[i] = k * g.data[i];
                      tp.accumulate(xi, dx);
                  },
                  "affine");
}

Var op_sigmoid(Tape& t, Var x) {
    const Tensor& xv = t.value(x);
    Tensor out = Tensor::zeros(xv.shape);
    for (std::size_t i = 0; i < out.size(); ++i)
        out.data[i] = 1.0 / (1.0 + std::exp(-xv.data[i]));
    int xi = x.index;
    return t.push(std::move(out), {xi},
                  [xi](Tape& tp, int self) {
                      const Tensor& g = tp.node(self).grad;
                      const Tensor& y = tp.node(self).value;
                      Tensor dx = Tensor::zeros(g.shape);
                      for (std::size_t i = 0; i < g.size(); ++i)
                          dx.data[i] = g.data[i] * y.data[i] * (1.0 - y.data[i]);
                      tp.accumulate(xi, dx);
                  },
                  "sigmoid");
}

Var op_scale_by(Tape& t, Var s, Var x) {
    const Tensor& sv = t.value(s);
    const Tensor& xv = t.value(x);
    if (sv.size() != 1) throw DimensionError("scale_by: scale must be a single element");
    Tensor out = Tensor::zeros(xv.shape);
    double sc = sv.data[0];
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = sc * xv.data[i];
    int si = s.index, xi = x.index;
    return t.push(std::move(out), {si, xi},
                  [si, xi](Tape& tp, int self) {
                      const Tensor& g = tp.node(self).grad;
                      const Tensor& xv2 = tp.node(xi).value;
                      double sc2 = tp.node(si).value.data[0];
                      Tensor dx = Tensor::zeros(g.shape);
                      double ds = 0.0;
                      for (std::size_t i = 0; i < g.size(); ++i) {
                          dx.data[i] = sc2 * g.data[i];
                          ds += g.data[i] * xv2.data[i];
                      }
                      tp.accumulate(xi, dx);
                      tp.accumulate(si, &ds, 1);
                  },
                  "scale_by");
}

Var op_addn(Tape& t, const std::vector<Var>& xs) {
    if (xs.empty()) throw InvalidArgument("addn: empty operand list");
    if (xs.size() == 1) return xs[0];
    const Tensor& first = t.value(xs[0]);
    Tensor out = first;
    std::vector<int> parents;
    parents.reserve(xs.size());
    parents.push_back(xs[0].index);
    for (std::size_t i = 1; i < xs.size(); ++i) {
        const Tensor& v = t.value(xs[i]);
        if (!v.same_shape(first)) throw DimensionError("addn: shape mismatch");
        for (std::size_t j = 0; j < out.size(); ++j) out.data[j] += v.data[j];
        parents.push_back(xs[i].index);
    }
    return t.push(std::move(out), parents,
                  [](Tape& tp, int self) {
                      const Tensor& g = tp.node(self).grad;
                      for (int p : tp.node(self).parents) tp.accumulate(p, g);
                  },
                  "addn");
}

Var op_conv2d(Tape& t, Var x, Var w, std::size_t stride, std::size_t padding) {
    Tensor out = conv2d(t.value(x), t.value(w), stride, padding);
    int xi = x.index, wi = w.index;
    return t.push(std::move(out), {xi, wi},
                  [xi, wi, stride, padding](Tape& tp, int self) {
                      const Tensor& g = tp.node(self).grad;
                      const Tensor& xv = tp.node(xi).value;
                      const Tensor& wv = tp.node(wi).value;
                      tp.accumulate(xi, conv2d_grad_input(g, wv, xv.shape, stride, padding));
                      tp.accumulate(wi, conv2d_grad_kernels(g, xv, wv.shape, stride, padding));
                  },
                  "conv2d");
}

Var op_avg_pool(Tape& t, Var x, std::size_t kernel) {
    Tensor out = avg_pool(t.value(x), kernel);
    int xi = x.index;
    return t.push(std::move(out), {xi},
                  [xi, kernel](Tape& tp, int self) {
                      const Tensor& g = tp.node(self).grad;
                      tp.accumulate(xi, avg_pool_grad(g, kernel, tp.node(xi).value.shape));
                  },
                  "avg_pool");
}

Var op_global_avg_pool(Tape& t, Var x) {
    Tensor out = global_avg_pool(t.value(x));
    int xi = x.index;
    return t.push(std::move(out), {xi},
                  [xi](Tape& tp, int self) {
                      const Tensor& g = tp.node(self).grad;
                      const Tensor& xv = tp.node(xi).value;
                      auto xs = xv.rank() == 4 ? xv.shape
                                               : std::vector<std::size_t>{1, xv.shape[0],
                                                                          xv.shape[1],
                                                                          xv.shape[2]};
                      std::size_t hw = xs[2] * xs[3];
                      double inv = 1.0 / double(hw);
                      Tensor dx = Tensor::zeros(xv.shape);
                      for (std::size_t gc = 0; gc < xs[0] * xs[1]; ++gc) {
                          double gv = g.data[gc] * inv;
                          double* d = dx.data.data() + gc * hw;
                          for (std::size_t i = 0; i < hw; ++i) d[i] += gv;
                      }
                      tp.accumulate(xi, dx);
                  },
                  "global_avg_pool");
}

Var op_linear(Tape& t, Var x, Var w, Var b) {
    Tensor out = linear(t.value(x), t.value(w), t.value(b));
    int xi = x.index, wi = w.index, bi = b.index;
    return t.push(std::move(out), {xi, wi, bi},
                  [xi, wi, bi](Tape& tp, int self) {
                      const Tensor& g = tp.node(self).grad;
                      const Tensor& xv = tp.node(xi).value;
                      const Tensor& wv = tp.node(wi).value;
                      std::size_t dout = wv.shape[0], din = wv.shape[1];
                      std::size_t bsz = xv.rank() == 2 ? xv.shape[0] : 1;
                      Tensor dx = Tensor::zeros(xv.shape);
                      Tensor dw = Tensor::zeros(wv.shape);
                      Tensor db = Tensor::zeros({dout});
                      for (std::size_t i = 0; i < bsz; ++i) {
                          const double* gr = g.data.data() + i * dout;
                          const double* xr = xv.data.data() + i * din;
                          double* dxr = dx.data.data() + i * din;
                          for (std::size_t o = 0; o < dout; ++o) {
                              double gv = gr[o];
                              if (gv == 0.0) continue;
                              const double* wr = wv.data.data() + o * din;
                              double* dwr = dw.data.data() + o * din;
                              for (std::size_t k = 0; k < din; ++k) {
                                  dxr[k] += gv * wr[k];
                                  dwr[k] += gv * xr[k];
                              }
                              db.data[o] += gv;
                          }
                      }
                      tp.accumulate(xi, dx);
                      tp.accumulate(wi, dw);
                      tp.accumulate(bi, db);
                  },
                  "linear");
}

Var op_batch_norm_train(Tape& t, Var x, Var gamma, Var beta, BnRunning* running,
                        double eps) {
    const Tensor& xv = t.value(x);
    BnStats st = batch_norm_stats(xv);
    Tensor out = batch_norm_apply(xv, st.mean, st.var, t.value(gamma), t.value(beta), eps);
    std::size_t c = xv.shape[1];
    std::size_t n = xv.size() / c;
    if (running) {
        double m = running->momentum;
        double unbias = n > 1 ? double(n) / double(n - 1) : 1.0;
        for (std::size_t ch = 0; ch < c; ++ch) {
            running->mean.data[ch] =
                (1.0 - m) * running->mean.data[ch] + m * st.mean.data[ch];
            running->var.data[ch] =
                (1.0 - m) * running->var.data[ch] + m * st.var.data[ch] * unbias;
        }
    }
    int xi = x.index, gi = gamma.index, bi = beta.index;
    Tensor mean = st.mean, var = st.var;
    return t.push(std::move(out), {xi, gi, bi},
                  [xi, gi, bi, mean, var, eps](Tape& tp, int self) {
                      const Tensor& g = tp.node(self).grad;
                      const Tensor& xv2 = tp.node(xi).value;
                      const Tensor& gm = tp.node(gi).value;
                      std::size_t gsz = xv2.shape[0], c2 = xv2.shape[1];
                      std::size_t s = xv2.size() / (gsz * c2);
                      std::size_t n2 = gsz * s;
                      Tensor dx = Tensor::zeros(xv2.shape);
                      Tensor dgamma = Tensor::zeros({c2});
                      Tensor dbeta = Tensor::zeros({c2});
                      for (std::size_t ch = 0; ch < c2; ++ch) {
                          double inv = 1.0 / std::sqrt(var.data[ch] + eps);
                          double mn = mean.data[ch];
                          double sum_dy = 0.0, sum_dy_xhat = 0.0;
                          for (std::size_t gi2 = 0; gi2 < gsz; ++gi2) {
                              const double* xr = xv2.data.data() + (gi2 * c2 + ch) * s;
                              const double* gr = g.data.data() + (gi2 * c2 + ch) * s;
                              for (std::size_t i = 0; i < s; ++i) {
                                  double xh = (xr[i] - mn) * inv;
                                  sum_dy += gr[i];
                                  sum_dy_xhat += gr[i] * xh;
                              }
                          }
                          dgamma.data[ch] = sum_dy_xhat;
                          dbeta.data[ch] = sum_dy;
                          double k = gm.data[ch] * inv;
                          double mdy = sum_dy / double(n2);
                          double mdyx = sum_dy_xhat / double(n2);
                          for (std::size_t gi2 = 0; gi2 < gsz; ++gi2) {
                              const double* xr = xv2.data.data() + (gi2 * c2 + ch) * s;
                              const double* gr = g.data.data() + (gi2 * c2 + ch) * s;
                              double* dr = dx.data.data() + (gi2 * c2 + ch) * s;
                              for (std::size_t i = 0; i < s; ++i) {
                                  double xh = (xr[i] - mn) * inv;
                                  dr[i] = k * (gr[i] - mdy - xh * mdyx);
                              }
                          }
                      }
                      tp.accumulate(xi, dx);
                      tp.accumulate(gi, dgamma);
                      tp.accumulate(bi, dbeta);
                  },
                  "batch_norm_train");
}

Var op_batch_norm_eval(Tape& t, Var x, Var gamma, Var beta, const BnRunning& running,
                       double eps) {
    const Tensor& xv = t.value(x);
    Tensor out =
        batch_norm_apply(xv, running.mean, running.var, t.value(gamma), t.value(beta), eps);
    int xi = x.index, gi = gamma.index, bi = beta.index;
    Tensor mean = running.mean, var = running.var;
    return t.push(std::move(out), {xi, gi, bi},
                  [xi, gi, bi, mean, var, eps](Tape& tp, int self) {
                      const Tensor& g = tp.node(self).grad;
                      const Tensor& xv2 = tp.node(xi).value;
                      const Tensor& gm = tp.node(gi).value;
                      std::size_t gsz = xv2.shape[0], c2 = xv2.shape[1];
                      std::size_t s = xv2.size() / (gsz * c2);
                      Tensor dx = Tensor::zeros(xv2.shape);
                      Tensor dgamma = Tensor::zeros({c2});
                      Tensor dbeta = Tensor::zeros({c2});
                      for (std::size_t ch = 0; ch < c2; ++ch) {
                          double inv = 1.0 / std::sqrt(var.data[ch] + eps);
                          double mn = mean.data[ch];
                          double k = gm.data[ch] * inv;
                          double sdy = 0.0, sdyx = 0.0;
                          for (std::size_t gi2 = 0; gi2 < gsz; ++gi2) {
                              const double* xr = xv2.data.data() + (gi2 * c2 + ch) * s;
                              const double* gr = g.data.data() + (gi2 * c2 + ch) * s;
                              double* dr = dx.data.data() + (gi2 * c2 + ch) * s;
                              for (std::size_t i = 0; i < s; ++i) {
                                  dr[i] = k * gr[i];
                                  sdy += gr[i];
                                  sdyx += gr[i] * (xr[i] - mn) * inv;
                              }
                          }
                          dgamma.data[ch] = sdyx;
                          dbeta.data[ch] = sdy;
                      }
                      tp.accumulate(xi, dx);
                      tp.accumulate(gi, dgamma);
                      tp.accumulate(bi, dbeta);
                  },
                  "batch_norm_eval");
}

Var op_concat0(Tape& t, const std::vector<Var>& parts) {
    if (parts.empty()) throw InvalidArgument("concat0: empty part list");
    const Tensor& first = t.value(parts[0]);
    std::vector<std::size_t> rest(first.shape.begin() + 1, first.shape.end());
    std::size_t rows = 0;
    std::vector<int> parents;
    for (Var p : parts) {
        const Tensor& v = t.value(p);
        std::vector<std::size_t> r2(v.shape.begin() + 1, v.shape.end());
        if (r2 != rest) throw DimensionError("concat0: trailing dims mismatch");
        rows += v.shape[0];
        parents.push_back(p.index);
    }
    std::vector<std::size_t> oshape = {rows};
    oshape.insert(oshape.end(), rest.begin(), rest.end());
    Tensor out = Tensor::zeros(oshape);
    std::size_t off = 0;
    for (Var p : parts) {
        const Tensor& v = t.value(p);
        std::copy(v.data.begin(), v.data.end(), out.data.begin() + long(off));
        off += v.size();
    }
    return t.push(std::move(out), parents,
                  [](Tape& tp, int self) {
                      const Tensor& g = tp.node(self).grad;
                      std::size_t off2 = 0;
                      for (int p : tp.node(self).parents) {
                          std::size_t n = tp.node(p).value.size();
                          tp.accumulate(p, g.data.data() + off2, n);
                          off2 += n;
                      }
                  },
                  "concat0");
}

Var op_slice0(Tape& t, Var x, std::size_t offset, std::size_t count) {
    const Tensor& xv = t.value(x);
    if (xv.rank() < 1 || offset + count > xv.shape[0])
        throw DimensionError("slice0: range out of bounds");
    std::size_t rowsz = xv.size() / xv.shape[0];
    std::vector<std::size_t> oshape = xv.shape;
    oshape[0] = count;
    Tensor out = Tensor::zeros(oshape);
    std::copy(xv.data.begin() + long(offset * rowsz),
              xv.data.begin() + long((offset + count) * rowsz), out.data.begin());
    int xi = x.index;
    return t.push(std::move(out), {xi},
                  [xi, offset, rowsz, count](Tape& tp, int self) {
                      const Tensor& g = tp.node(self).grad;
                      const Tensor& xv2 = tp.node(xi).value;
                      Tensor dx = Tensor::zeros(xv2.shape);
                      std::copy(g.data.begin(), g.data.end(),
                                dx.data.begin() + long(offset * rowsz));
                      (void)count;
                      tp.accumulate(xi, dx);
                  },
                  "slice0");
}

Var op_sum_all(Tape& t, Var x) {
    const Tensor& xv = t.value(x);
    Tensor out = Tensor::scalar(xv.sum());
    int xi = x.index;
    return t.push(std::move(out), {xi},
                  [xi](Tape& tp, int self) {
                      double g = tp.node(self).grad.data[0];
                      const Tensor& xv2 = tp.node(xi).value;
                      Tensor dx = Tensor::full(xv2.shape, g);
                      tp.accumulate(xi, dx);
                  },
                  "sum_all");
}

Var op_mean_all(Tape& t, Var x) {
    const Tensor& xv = t.value(x);
    double inv = 1.0 / double(xv.size());
    Tensor out = Tensor::scalar(xv.sum() * inv);
    int xi = x.index;
    return t.push(std::move(out), {xi},
                  [xi, inv](Tape& tp, int self) {
                      double g = tp.node(self).grad.data[0] * inv;
                      Tensor dx = Tensor::full(tp.node(xi).value.shape, g);
                      tp.accumulate(xi, dx);
                  },
                  "mean_all");
}

Tensor softmax_rows(const Tensor& logits, double temperature) {
    std::size_t b = logits.rank() == 2 ? logits.shape[0] : 1;
    std::size_t k = logits.rank() == 2 ? logits.shape[1] : logits.size();
    Tensor out = Tensor::zeros(logits.shape);
    for (std::size_t i = 0; i < b; ++i) {
        const double* z = logits.data.data() + i * k;
        double* p = out.data.data() + i * k;
        double zmax = z[0];
        for (std::size_t j = 1; j < k; ++j) zmax = std::max(zmax, z[j]);
        double denom = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            p[j] = std::exp((z[j] - zmax) / temperature);
            denom += p[j];
        }
        for (std::size_t j = 0; j < k; ++j) p[j] /= denom;
    }
    return out;
}

Var op_softmax_cross_entropy(Tape& t, Var logits, const std::vector<uint32_t>& labels) {
    const Tensor& zv = t.value(logits);
    if (zv.rank() != 2) throw DimensionError("cross_entropy: logits must be [B,K]");
    std::size_t b = zv.shape[0], k = zv.shape[1];
    if (labels.size() != b) throw InvalidArgument("cross_entropy: label count mismatch");
    for (uint32_t l : labels)
        if (l >= k)
            throw InvalidArgument("cross_entropy: label " + std::to_string(l) +
                                  " out of range for " + std::to_string(k) + " classes");
    double total = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        const double* z = zv.data.data() + i * k;
        double zmax = z[0];
        for (std::size_t j = 1; j < k; ++j) zmax = std::max(zmax, z[j]);
        double lse = 0.0;
        for (std::size_t j = 0; j < k; ++j) lse += std::exp(z[j] - zmax);
        total += std::log(lse) + zmax - z[labels[i]];
    }
    Tensor out = Tensor::scalar(total / double(b));
    int zi = logits.index;
    std::vector<uint32_t> labs = labels;
    return t.push(std::move(out), {zi},
                  [zi, labs](Tape& tp, int self) {
                      double g = tp.node(self).grad.data[0];
                      const Tensor& zv2 = tp.node(zi).value;
                      std::size_t b2 = zv2.shape[0], k2 = zv2.shape[1];
                      Tensor p = softmax_rows(zv2);
                      double scale = g / double(b2);
                      for (std::size_t i = 0; i < b2; ++i) {
                          double* pr = p.data.data() + i * k2;
                          pr[labs[i]] -= 1.0;
                          for (std::size_t j = 0; j < k2; ++j) pr[j] *= scale;
                      }
                      tp.accumulate(zi, p);
                  },
                  "softmax_cross_entropy");
}

Var op_distill_cross_entropy(Tape& t, Var student_logits, const Tensor& teacher_logits,
                             double temperature) {
    if (temperature <= 0.0) throw InvalidArgument("distill: temperature must be positive");
    const Tensor& zv = t.value(student_logits);
    if (!zv.same_shape(teacher_logits))
        throw DimensionError("distill: student/teacher logit shape mismatch");
    std::size_t b = zv.rank() == 2 ? zv.shape[0] : 1;
    std::size_t k = zv.size() / b;
    Tensor p = softmax_rows(teacher_logits, temperature);
    double total = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        const double* z = zv.data.data() + i * k;
        const double* pr = p.data.data() + i * k;
        double zmax = z[0];
        for (std::size_t j = 1; j < k; ++j) zmax = std::max(zmax, z[j]);
        double lse = 0.0;
        for (std::size_t j = 0; j < k; ++j) lse += std::exp((z[j] - zmax) / temperature);
        double logden = std::log(lse);
        for (std::size_t j = 0; j < k; ++j)
            total -= pr[j] * ((z[j] - zmax) / temperature - logden);
    }
    Tensor out = Tensor::scalar(total / double(b));
    int zi = student_logits.index;
    return t.push(std::move(out), {zi},
                  [zi, p, temperature](Tape& tp, int self) {
                      double g = tp.node(self).grad.data[0];
                      const Tensor& zv2 = tp.node(zi).value;
                      std::size_t b2 = zv2.rank() == 2 ? zv2.shape[0] : 1;
                      std::size_t k2 = zv2.size() / b2;
                      Tensor q = softmax_rows(zv2, temperature);
                      double scale = g / (double(b2) * temperature);
                      Tensor dz = Tensor::zeros(zv2.shape);
                      for (std::size_t i = 0; i < b2 * k2; ++i)
                          dz.data[i] = scale * (q.data[i] - p.data[i]);
                      tp.accumulate(zi, dz);
                  },
                  "distill_cross_entropy");
}

}  // namespace cognisnn
