#include "detnas/nn_ops.hpp"

#include <algorithm>
#include <cmath>

#include "detnas/errors.hpp"

namespace detnas::nn {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw ShapeError(msg);
}

template <typename T>
void check_conv_args(const TensorT<T>& x, const TensorT<T>& w, int stride, int groups) {
    require(x.rank() == 4, "conv2d: input must be rank 4, got " + x.shape_str());
    require(w.rank() == 4, "conv2d: weight must be rank 4, got " + w.shape_str());
    require(stride == 1 || stride == 2, "conv2d: stride must be 1 or 2");
    const int cin = x.dim(1);
    require(groups == 1 || groups == cin, "conv2d: groups must be 1 or in_channels");
    require(cin % groups == 0 && w.dim(0) % groups == 0,
            "conv2d: groups must divide channels, x " + x.shape_str() + " w " + w.shape_str());
    require(w.dim(1) == cin / groups,
            "conv2d: weight in-channels mismatch, x " + x.shape_str() + " w " + w.shape_str());
    require(w.dim(2) == w.dim(3), "conv2d: kernel must be square, w " + w.shape_str());
}

}  // namespace

// ---------------------------------------------------------------------------
// conv2d

template <typename T>
TensorT<T> conv2d(const TensorT<T>& x, const TensorT<T>& w, int stride, int groups) {
    check_conv_args(x, w, stride, groups);
    const int n_batch = x.dim(0), cin = x.dim(1), in_h = x.dim(2), in_w = x.dim(3);
    const int cout = w.dim(0), k = w.dim(2), pad = k / 2;
    const int out_h = (in_h + 2 * pad - k) / stride + 1;
    const int out_w = (in_w + 2 * pad - k) / stride + 1;
    TensorT<T> y({n_batch, cout, out_h, out_w});

    const T* xp = x.data();
    const T* wp = w.data();
    T* yp = y.data();
    const size_t x_plane = static_cast<size_t>(in_h) * in_w;
    const size_t y_plane = static_cast<size_t>(out_h) * out_w;

    if (k == 1 && stride == 1 && groups == 1) {
        // Pointwise: y[n,co,:] = sum_ci w[co,ci] * x[n,ci,:]
        for (int n = 0; n < n_batch; ++n) {
            const T* xn = xp + static_cast<size_t>(n) * cin * x_plane;
            T* yn = yp + static_cast<size_t>(n) * cout * y_plane;
            for (int co = 0; co < cout; ++co) {
                T* yrow = yn + static_cast<size_t>(co) * y_plane;
                for (int ci = 0; ci < cin; ++ci) {
                    const T wv = wp[static_cast<size_t>(co) * cin + ci];
                    const T* xrow = xn + static_cast<size_t>(ci) * x_plane;
                    for (size_t p = 0; p < y_plane; ++p) yrow[p] += wv * xrow[p];
                }
            }
        }
        return y;
    }

    if (groups == cin && cout == cin) {
        // Depthwise: per-channel kxk correlation.
        for (int n = 0; n < n_batch; ++n) {
            for (int c = 0; c < cin; ++c) {
                const T* xc = xp + (static_cast<size_t>(n) * cin + c) * x_plane;
                const T* wc = wp + static_cast<size_t>(c) * k * k;
                T* yc = yp + (static_cast<size_t>(n) * cin + c) * y_plane;
                for (int ho = 0; ho < out_h; ++ho) {
                    for (int wo = 0; wo < out_w; ++wo) {
                        T acc = 0;
                        const int h0 = ho * stride - pad, w0 = wo * stride - pad;
                        for (int kh = 0; kh < k; ++kh) {
                            const int h = h0 + kh;
                            if (h < 0 || h >= in_h) continue;
                            for (int kw = 0; kw < k; ++kw) {
                                const int iw = w0 + kw;
                                if (iw < 0 || iw >= in_w) continue;
                                acc += xc[static_cast<size_t>(h) * in_w + iw] * wc[kh * k + kw];
                            }
                        }
                        yc[static_cast<size_t>(ho) * out_w + wo] = acc;
                    }
                }
            }
        }
        return y;
    }

    // Generic grouped convolution.
    const int group_in = cin / groups, group_out = cout / groups;
    for (int n = 0; n < n_batch; ++n) {
        for (int co = 0; co < cout; ++co) {
            const int g = co / group_out;
            T* yc = yp + (static_cast<size_t>(n) * cout + co) * y_plane;
            for (int ho = 0; ho < out_h; ++ho) {
                for (int wo = 0; wo < out_w; ++wo) {
                    T acc = 0;
                    const int h0 = ho * stride - pad, w0 = wo * stride - pad;
                    for (int cig = 0; cig < group_in; ++cig) {
                        const int ci = g * group_in + cig;
                        const T* xc = xp + (static_cast<size_t>(n) * cin + ci) * x_plane;
                        const T* wc = wp + (static_cast<size_t>(co) * group_in + cig) * k * k;
                        for (int kh = 0; kh < k; ++kh) {
                            const int h = h0 + kh;
                            if (h < 0 || h >= in_h) continue;
                            for (int kw = 0; kw < k; ++kw) {
                                const int iw = w0 + kw;
                                if (iw < 0 || iw >= in_w) continue;
                                acc += xc[static_cast<size_t>(h) * in_w + iw] * wc[kh * k + kw];
                            }
                        }
                    }
                    yc[static_cast<size_t>(ho) * out_w + wo] = acc;
                }
            }
        }
    }
    return y;
}

template <typename T>
void conv2d_backward(const TensorT<T>& x, const TensorT<T>& w, int stride, int groups,
                     const TensorT<T>& gy, TensorT<T>& gx, TensorT<T>& gw) {
    check_conv_args(x, w, stride, groups);
    const int n_batch = x.dim(0), cin = x.dim(1), in_h = x.dim(2), in_w = x.dim(3);
    const int cout = w.dim(0), k = w.dim(2), pad = k / 2;
    const int out_h = (in_h + 2 * pad - k) / stride + 1;
    const int out_w = (in_w + 2 * pad - k) / stride + 1;
    require(gy.rank() == 4 && gy.dim(0) == n_batch && gy.dim(1) == cout && gy.dim(2) == out_h &&
                gy.dim(3) == out_w,
            "conv2d_backward: upstream gradient " + gy.shape_str() + " does not match output shape");

    gx = TensorT<T>({n_batch, cin, in_h, in_w});
    gw = TensorT<T>({w.dim(0), w.dim(1), k, k});
    const T* xp = x.data();
    const T* wp = w.data();
    const T* gyp = gy.data();
    T* gxp = gx.data();
    T* gwp = gw.data();
    const size_t x_plane = static_cast<size_t>(in_h) * in_w;
    const size_t y_plane = static_cast<size_t>(out_h) * out_w;

    if (k == 1 && stride == 1 && groups == 1) {
        for (int n = 0; n < n_batch; ++n) {
            const T* xn = xp + static_cast<size_t>(n) * cin * x_plane;
            const T* gyn = gyp + static_cast<size_t>(n) * cout * y_plane;
            T* gxn = gxp + static_cast<size_t>(n) * cin * x_plane;
            for (int co = 0; co < cout; ++co) {
                const T* gyrow = gyn + static_cast<size_t>(co) * y_plane;
                for (int ci = 0; ci < cin; ++ci) {
                    const T wv = wp[static_cast<size_t>(co) * cin + ci];
                    const T* xrow = xn + static_cast<size_t>(ci) * x_plane;
                    T* gxrow = gxn + static_cast<size_t>(ci) * x_plane;
                    T acc = 0;
                    for (size_t p = 0; p < y_plane; ++p) {
                        gxrow[p] += wv * gyrow[p];
                        acc += gyrow[p] * xrow[p];
                    }
                    gwp[static_cast<size_t>(co) * cin + ci] += acc;
                }
            }
        }
        return;
    }

    const int group_in = cin / groups, group_out = cout / groups;
    for (int n = 0; n < n_batch; ++n) {
        for (int co = 0; co < cout; ++co) {
            const int g = co / group_out;
            const T* gyc = gyp + (static_cast<size_t>(n) * cout + co) * y_plane;
            for (int ho = 0; ho < out_h; ++ho) {
                for (int wo = 0; wo < out_w; ++wo) {
                    const T gv = gyc[static_cast<size_t>(ho) * out_w + wo];
                    const int h0 = ho * stride - pad, w0 = wo * stride - pad;
                    for (int cig = 0; cig < group_in; ++cig) {
                        const int ci = g * group_in + cig;
                        const T* xc = xp + (static_cast<size_t>(n) * cin + ci) * x_plane;
                        T* gxc = gxp + (static_cast<size_t>(n) * cin + ci) * x_plane;
                        const T* wc = wp + (static_cast<size_t>(co) * group_in + cig) * k * k;
                        T* gwc = gwp + (static_cast<size_t>(co) * group_in + cig) * k * k;
                        for (int kh = 0; kh < k; ++kh) {
                            const int h = h0 + kh;
                            if (h < 0 || h >= in_h) continue;
                            for (int kw = 0; kw < k; ++kw) {
                                const int iw = w0 + kw;
                                if (iw < 0 || iw >= in_w) continue;
                                const size_t xi = static_cast<size_t>(h) * in_w + iw;
                                gxc[xi] += gv * wc[kh * k + kw];
                                gwc[kh * k + kw] += gv * xc[xi];
                            }
                        }
                    }
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// batch norm

namespace {

template <typename T>
void check_bn_args(const TensorT<T>& x, const TensorT<T>& scale, const TensorT<T>& shift) {
    require(x.rank() == 4, "batch_norm: input must be rank 4, got " + x.shape_str());
    const int c = x.dim(1);
    require(scale.rank() == 1 && scale.dim(0) == c,
            "batch_norm: scale " + scale.shape_str() + " does not match channels of " + x.shape_str());
    require(shift.rank() == 1 && shift.dim(0) == c,
            "batch_norm: shift " + shift.shape_str() + " does not match channels of " + x.shape_str());
}

}  // namespace

template <typename T>
TensorT<T> batch_norm_train(const TensorT<T>& x, const TensorT<T>& scale, const TensorT<T>& shift,
                            T eps, TensorT<T>* xhat_cache, std::vector<T>& batch_mean,
                            std::vector<T>& batch_var) {
    check_bn_args(x, scale, shift);
    const int n_batch = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const size_t plane = static_cast<size_t>(h) * w;
    const size_t count = static_cast<size_t>(n_batch) * plane;

    batch_mean.assign(static_cast<size_t>(c), T(0));
    batch_var.assign(static_cast<size_t>(c), T(0));
    const T* xp = x.data();
    for (int ch = 0; ch < c; ++ch) {
        double sum = 0.0, sumsq = 0.0;
        for (int n = 0; n < n_batch; ++n) {
            const T* row = xp + (static_cast<size_t>(n) * c + ch) * plane;
            for (size_t p = 0; p < plane; ++p) {
                const double v = static_cast<double>(row[p]);
                sum += v;
                sumsq += v * v;
            }
        }
        const double mean = sum / static_cast<double>(count);
        const double var = std::max(0.0, sumsq / static_cast<double>(count) - mean * mean);
        batch_mean[static_cast<size_t>(ch)] = static_cast<T>(mean);
        batch_var[static_cast<size_t>(ch)] = static_cast<T>(var);
    }

    TensorT<T> y(x.dims());
    if (xhat_cache) *xhat_cache = TensorT<T>(x.dims());
    T* yp = y.data();
    T* xh = xhat_cache ? xhat_cache->data() : nullptr;
    for (int n = 0; n < n_batch; ++n) {
        for (int ch = 0; ch < c; ++ch) {
            const T inv_std = T(1) / std::sqrt(batch_var[static_cast<size_t>(ch)] + eps);
            const T m = batch_mean[static_cast<size_t>(ch)];
            const T a = scale[static_cast<size_t>(ch)] * inv_std;
            const T b = shift[static_cast<size_t>(ch)];
            const size_t base = (static_cast<size_t>(n) * c + ch) * plane;
            for (size_t p = 0; p < plane; ++p) {
                const T xv = xp[base + p];
                if (xh) xh[base + p] = (xv - m) * inv_std;
                yp[base + p] = a * (xv - m) + b;
            }
        }
    }
    return y;
}

template <typename T>
TensorT<T> batch_norm_eval(const TensorT<T>& x, const TensorT<T>& scale, const TensorT<T>& shift,
                           const TensorT<T>& running_mean, const TensorT<T>& running_var, T eps) {
    check_bn_args(x, scale, shift);
    const int n_batch = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    require(running_mean.rank() == 1 && running_mean.dim(0) == c && running_var.dim(0) == c,
            "batch_norm_eval: running stats do not match channels of " + x.shape_str());
    const size_t plane = static_cast<size_t>(h) * w;
    TensorT<T> y(x.dims());
    const T* xp = x.data();
    T* yp = y.data();
    for (int n = 0; n < n_batch; ++n) {
        for (int ch = 0; ch < c; ++ch) {
            const T inv_std = T(1) / std::sqrt(running_var[static_cast<size_t>(ch)] + eps);
            const T a = scale[static_cast<size_t>(ch)] * inv_std;
            const T b = shift[static_cast<size_t>(ch)] - a * running_mean[static_cast<size_t>(ch)];
            const size_t base = (static_cast<size_t>(n) * c + ch) * plane;
            for (size_t p = 0; p < plane; ++p) yp[base + p] = a * xp[base + p] + b;
        }
    }
    return y;
}

template <typename T>
void batch_norm_train_backward(const TensorT<T>& xhat, const std::vector<T>& batch_var,
                               const TensorT<T>& scale, T eps, const TensorT<T>& gy,
                               TensorT<T>& gx, TensorT<T>& gscale, TensorT<T>& gshift) {
    require(xhat.same_shape(gy), "batch_norm_backward: gy " + gy.shape_str() + " vs cache " + xhat.shape_str());
    const int n_batch = xhat.dim(0), c = xhat.dim(1), h = xhat.dim(2), w = xhat.dim(3);
    const size_t plane = static_cast<size_t>(h) * w;
    const double count = static_cast<double>(n_batch) * static_cast<double>(plane);

    gx = TensorT<T>(xhat.dims());
    gscale = TensorT<T>({c});
    gshift = TensorT<T>({c});
    const T* xh = xhat.data();
    const T* gyp = gy.data();
    T* gxp = gx.data();

    for (int ch = 0; ch < c; ++ch) {
        double sum_gy = 0.0, sum_gy_xhat = 0.0;
        for (int n = 0; n < n_batch; ++n) {
            const size_t base = (static_cast<size_t>(n) * c + ch) * plane;
            for (size_t p = 0; p < plane; ++p) {
                sum_gy += static_cast<double>(gyp[base + p]);
                sum_gy_xhat += static_cast<double>(gyp[base + p]) * static_cast<double>(xh[base + p]);
            }
        }
        gshift[static_cast<size_t>(ch)] = static_cast<T>(sum_gy);
        gscale[static_cast<size_t>(ch)] = static_cast<T>(sum_gy_xhat);
        const T inv_std = T(1) / std::sqrt(batch_var[static_cast<size_t>(ch)] + eps);
        const T a = scale[static_cast<size_t>(ch)] * inv_std;
        const T mean_gy = static_cast<T>(sum_gy / count);
        const T mean_gy_xhat = static_cast<T>(sum_gy_xhat / count);
        for (int n = 0; n < n_batch; ++n) {
            const size_t base = (static_cast<size_t>(n) * c + ch) * plane;
            for (size_t p = 0; p < plane; ++p)
                gxp[base + p] = a * (gyp[base + p] - mean_gy - xh[base + p] * mean_gy_xhat);
        }
    }
}

// ---------------------------------------------------------------------------
// elementwise

template <typename T>
TensorT<T> relu(const TensorT<T>& x) {
    TensorT<T> y(x.dims());
    for (size_t i = 0; i < x.numel(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
    return y;
}

template <typename T>
TensorT<T> relu_backward(const TensorT<T>& x, const TensorT<T>& gy) {
    require(x.same_shape(gy), "relu_backward: gy " + gy.shape_str() + " vs x " + x.shape_str());
    TensorT<T> gx(x.dims());
    for (size_t i = 0; i < x.numel(); ++i) gx[i] = x[i] > T(0) ? gy[i] : T(0);
    return gx;
}

template <typename T>
TensorT<T> sigmoid(const TensorT<T>& x) {
    TensorT<T> y(x.dims());
    for (size_t i = 0; i < x.numel(); ++i) y[i] = T(1) / (T(1) + std::exp(-x[i]));
    return y;
}

template <typename T>
TensorT<T> sigmoid_backward(const TensorT<T>& y, const TensorT<T>& gy) {
    require(y.same_shape(gy), "sigmoid_backward: gy " + gy.shape_str() + " vs y " + y.shape_str());
    TensorT<T> gx(y.dims());
    for (size_t i = 0; i < y.numel(); ++i) gx[i] = gy[i] * y[i] * (T(1) - y[i]);
    return gx;
}

// ---------------------------------------------------------------------------
// channel plumbing

template <typename T>
std::pair<TensorT<T>, TensorT<T>> channel_split(const TensorT<T>& x) {
    require(x.rank() == 4, "channel_split: input must be rank 4, got " + x.shape_str());
    const int c = x.dim(1);
    require(c % 2 == 0, "channel_split: channel count must be even, got " + x.shape_str());
    const int n_batch = x.dim(0), half = c / 2;
    const size_t plane = static_cast<size_t>(x.dim(2)) * x.dim(3);
    TensorT<T> a({n_batch, half, x.dim(2), x.dim(3)});
    TensorT<T> b({n_batch, half, x.dim(2), x.dim(3)});
    for (int n = 0; n < n_batch; ++n) {
        const T* src = x.data() + static_cast<size_t>(n) * c * plane;
        std::copy(src, src + static_cast<size_t>(half) * plane,
                  a.data() + static_cast<size_t>(n) * half * plane);
        std::copy(src + static_cast<size_t>(half) * plane, src + static_cast<size_t>(c) * plane,
                  b.data() + static_cast<size_t>(n) * half * plane);
    }
    return {std::move(a), std::move(b)};
}

template <typename T>
TensorT<T> concat_channels(const TensorT<T>& a, const TensorT<T>& b) {
    require(a.rank() == 4 && b.rank() == 4 && a.dim(0) == b.dim(0) && a.dim(2) == b.dim(2) &&
                a.dim(3) == b.dim(3),
            "concat_channels: incompatible shapes " + a.shape_str() + " and " + b.shape_str());
    const int n_batch = a.dim(0), ca = a.dim(1), cb = b.dim(1);
    const size_t plane = static_cast<size_t>(a.dim(2)) * a.dim(3);
    TensorT<T> y({n_batch, ca + cb, a.dim(2), a.dim(3)});
    for (int n = 0; n < n_batch; ++n) {
        T* dst = y.data() + static_cast<size_t>(n) * (ca + cb) * plane;
        std::copy(a.data() + static_cast<size_t>(n) * ca * plane,
                  a.data() + static_cast<size_t>(n + 1) * ca * plane, dst);
        std::copy(b.data() + static_cast<size_t>(n) * cb * plane,
                  b.data() + static_cast<size_t>(n + 1) * cb * plane,
                  dst + static_cast<size_t>(ca) * plane);
    }
    return y;
}

template <typename T>
TensorT<T> channel_shuffle(const TensorT<T>& x, int groups) {
    require(x.rank() == 4, "channel_shuffle: input must be rank 4, got " + x.shape_str());
    const int c = x.dim(1);
    require(groups > 0 && c % groups == 0,
            "channel_shuffle: groups must divide channels, got " + x.shape_str());
    const int n_batch = x.dim(0), per_group = c / groups;
    const size_t plane = static_cast<size_t>(x.dim(2)) * x.dim(3);
    TensorT<T> y(x.dims());
    for (int n = 0; n < n_batch; ++n) {
        for (int co = 0; co < c; ++co) {
            const int ci = (co % groups) * per_group + co / groups;
            std::copy(x.data() + (static_cast<size_t>(n) * c + ci) * plane,
                      x.data() + (static_cast<size_t>(n) * c + ci + 1) * plane,
                      y.data() + (static_cast<size_t>(n) * c + co) * plane);
        }
    }
    return y;
}

// ---------------------------------------------------------------------------
// pooling

template <typename T>
TensorT<T> max_pool(const TensorT<T>& x, int kernel, int stride, MaxPoolCache* cache) {
    require(x.rank() == 4, "max_pool: input must be rank 4, got " + x.shape_str());
    const int n_batch = x.dim(0), c = x.dim(1), in_h = x.dim(2), in_w = x.dim(3);
    const int pad = kernel / 2;
    const int out_h = (in_h + 2 * pad - kernel) / stride + 1;
    const int out_w = (in_w + 2 * pad - kernel) / stride + 1;
    TensorT<T> y({n_batch, c, out_h, out_w});
    if (cache) {
        cache->in_dims = x.dims();
        cache->argmax.assign(y.numel(), 0);
    }
    const T* xp = x.data();
    T* yp = y.data();
    size_t oi = 0;
    for (int n = 0; n < n_batch; ++n) {
        for (int ch = 0; ch < c; ++ch) {
            const size_t base = (static_cast<size_t>(n) * c + ch) * in_h * in_w;
            for (int ho = 0; ho < out_h; ++ho) {
                for (int wo = 0; wo < out_w; ++wo, ++oi) {
                    T best = T(0);
                    size_t best_idx = 0;
                    bool found = false;
                    for (int kh = 0; kh < kernel; ++kh) {
                        const int h = ho * stride - pad + kh;
                        if (h < 0 || h >= in_h) continue;
                        for (int kw = 0; kw < kernel; ++kw) {
                            const int iw = wo * stride - pad + kw;
                            if (iw < 0 || iw >= in_w) continue;
                            const size_t idx = base + static_cast<size_t>(h) * in_w + iw;
                            if (!found || xp[idx] > best) {
                                best = xp[idx];
                                best_idx = idx;
                                found = true;
                            }
                        }
                    }
                    yp[oi] = best;
                    if (cache) cache->argmax[oi] = best_idx;
                }
            }
        }
    }
    return y;
}

template <typename T>
TensorT<T> max_pool_backward(const MaxPoolCache& cache, const TensorT<T>& gy) {
    require(gy.numel() == cache.argmax.size(), "max_pool_backward: gy " + gy.shape_str() +
                                                   " does not match cached output size");
    TensorT<T> gx(cache.in_dims);
    for (size_t i = 0; i < cache.argmax.size(); ++i) gx[cache.argmax[i]] += gy[i];
    return gx;
}

template <typename T>
TensorT<T> global_avg_pool(const TensorT<T>& x) {
    require(x.rank() == 4, "global_avg_pool: input must be rank 4, got " + x.shape_str());
    const int n_batch = x.dim(0), c = x.dim(1);
    const size_t plane = static_cast<size_t>(x.dim(2)) * x.dim(3);
    TensorT<T> y({n_batch, c});
    const T* xp = x.data();
    for (int n = 0; n < n_batch; ++n) {
        for (int ch = 0; ch < c; ++ch) {
            double acc = 0.0;
            const size_t base = (static_cast<size_t>(n) * c + ch) * plane;
            for (size_t p = 0; p < plane; ++p) acc += static_cast<double>(xp[base + p]);
            y[static_cast<size_t>(n) * c + ch] = static_cast<T>(acc / static_cast<double>(plane));
        }
    }
    return y;
}

template <typename T>
TensorT<T> global_avg_pool_backward(const std::vector<int>& in_dims, const TensorT<T>& gy) {
    require(in_dims.size() == 4, "global_avg_pool_backward: cached input must be rank 4");
    const int n_batch = in_dims[0], c = in_dims[1];
    require(gy.rank() == 2 && gy.dim(0) == n_batch && gy.dim(1) == c,
            "global_avg_pool_backward: gy " + gy.shape_str() + " does not match input channels");
    const size_t plane = static_cast<size_t>(in_dims[2]) * in_dims[3];
    TensorT<T> gx(in_dims);
    for (int n = 0; n < n_batch; ++n) {
        for (int ch = 0; ch < c; ++ch) {
            const T v = gy[static_cast<size_t>(n) * c + ch] / static_cast<T>(plane);
            const size_t base = (static_cast<size_t>(n) * c + ch) * plane;
            for (size_t p = 0; p < plane; ++p) gx[base + p] = v;
        }
    }
    return gx;
}

// ---------------------------------------------------------------------------
// fully connected

template <typename T>
TensorT<T> fully_connected(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b) {
    require(x.rank() == 2, "fully_connected: input must be rank 2, got " + x.shape_str());
    require(w.rank() == 2 && w.dim(1) == x.dim(1),
            "fully_connected: weight " + w.shape_str() + " does not match input " + x.shape_str());
    require(b.rank() == 1 && b.dim(0) == w.dim(0),
            "fully_connected: bias " + b.shape_str() + " does not match weight " + w.shape_str());
    const int n_batch = x.dim(0), in_f = x.dim(1), out_f = w.dim(0);
    TensorT<T> y({n_batch, out_f});
    for (int n = 0; n < n_batch; ++n) {
        const T* xr = x.data() + static_cast<size_t>(n) * in_f;
        for (int o = 0; o < out_f; ++o) {
            const T* wr = w.data() + static_cast<size_t>(o) * in_f;
            T acc = b[static_cast<size_t>(o)];
            for (int f = 0; f < in_f; ++f) acc += xr[f] * wr[f];
            y[static_cast<size_t>(n) * out_f + o] = acc;
        }
    }
    return y;
}

template <typename T>
void fully_connected_backward(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& gy,
                              TensorT<T>& gx, TensorT<T>& gw, TensorT<T>& gb) {
    const int n_batch = x.dim(0), in_f = x.dim(1), out_f = w.dim(0);
    require(gy.rank() == 2 && gy.dim(0) == n_batch && gy.dim(1) == out_f,
            "fully_connected_backward: gy " + gy.shape_str() + " does not match output shape");
    gx = TensorT<T>({n_batch, in_f});
    gw = TensorT<T>({out_f, in_f});
    gb = TensorT<T>({out_f});
    for (int n = 0; n < n_batch; ++n) {
        const T* xr = x.data() + static_cast<size_t>(n) * in_f;
        const T* gyr = gy.data() + static_cast<size_t>(n) * out_f;
        T* gxr = gx.data() + static_cast<size_t>(n) * in_f;
        for (int o = 0; o < out_f; ++o) {
            const T g = gyr[o];
            const T* wr = w.data() + static_cast<size_t>(o) * in_f;
            T* gwr = gw.data() + static_cast<size_t>(o) * in_f;
            for (int f = 0; f < in_f; ++f) {
                gxr[f] += g * wr[f];
                gwr[f] += g * xr[f];
            }
            gb[static_cast<size_t>(o)] += g;
        }
    }
}

// ---------------------------------------------------------------------------
// losses

template <typename T>
T softmax_cross_entropy(const TensorT<T>& logits, const std::vector<int>& labels, TensorT<T>* probs) {
    require(logits.rank() == 2, "softmax_cross_entropy: logits must be rank 2, got " + logits.shape_str());
    const int n_batch = logits.dim(0), k = logits.dim(1);
    require(static_cast<int>(labels.size()) == n_batch,
            "softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for batch " +
                std::to_string(n_batch));
    TensorT<T> p(logits.dims());
    double loss = 0.0;
    for (int n = 0; n < n_batch; ++n) {
        const T* row = logits.data() + static_cast<size_t>(n) * k;
        T* pr = p.data() + static_cast<size_t>(n) * k;
        T m = row[0];
        for (int j = 1; j < k; ++j) m = std::max(m, row[j]);
        double z = 0.0;
        for (int j = 0; j < k; ++j) {
            pr[j] = std::exp(row[j] - m);
            z += static_cast<double>(pr[j]);
        }
        for (int j = 0; j < k; ++j) pr[j] = static_cast<T>(pr[j] / z);
        const int y = labels[static_cast<size_t>(n)];
        require(y >= 0 && y < k, "softmax_cross_entropy: label out of range");
        loss -= static_cast<double>(row[y] - m) - std::log(z);
    }
    if (probs) *probs = std::move(p);
    return static_cast<T>(loss / n_batch);
}

template <typename T>
TensorT<T> softmax_cross_entropy_backward(const TensorT<T>& probs, const std::vector<int>& labels) {
    const int n_batch = probs.dim(0), k = probs.dim(1);
    TensorT<T> g(probs.dims());
    const T inv_n = T(1) / static_cast<T>(n_batch);
    for (int n = 0; n < n_batch; ++n) {
        for (int j = 0; j < k; ++j) {
            const size_t i = static_cast<size_t>(n) * k + j;
            g[i] = (probs[i] - (j == labels[static_cast<size_t>(n)] ? T(1) : T(0))) * inv_n;
        }
    }
    return g;
}

template <typename T>
T smooth_l1(const TensorT<T>& pred, const TensorT<T>& target) {
    require(pred.same_shape(target),
            "smooth_l1: pred " + pred.shape_str() + " vs target " + target.shape_str());
    const int n_batch = pred.dim(0);
    double loss = 0.0;
    for (size_t i = 0; i < pred.numel(); ++i) {
        const double d = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
        const double a = std::abs(d);
        loss += a <= 1.0 ? 0.5 * d * d : a - 0.5;
    }
    return static_cast<T>(loss / n_batch);
}

template <typename T>
TensorT<T> smooth_l1_backward(const TensorT<T>& pred, const TensorT<T>& target) {
    require(pred.same_shape(target),
            "smooth_l1_backward: pred " + pred.shape_str() + " vs target " + target.shape_str());
    const int n_batch = pred.dim(0);
    TensorT<T> g(pred.dims());
    const T inv_n = T(1) / static_cast<T>(n_batch);
    for (size_t i = 0; i < pred.numel(); ++i) {
        const T d = pred[i] - target[i];
        g[i] = (std::abs(d) <= T(1) ? d : (d > T(0) ? T(1) : T(-1))) * inv_n;
    }
    return g;
}

// ---------------------------------------------------------------------------
// explicit instantiations

#define DETNAS_INSTANTIATE_OPS(T)                                                                  \
    template TensorT<T> conv2d<T>(const TensorT<T>&, const TensorT<T>&, int, int);                 \
    template void conv2d_backward<T>(const TensorT<T>&, const TensorT<T>&, int, int,               \
                                     const TensorT<T>&, TensorT<T>&, TensorT<T>&);                 \
    template TensorT<T> batch_norm_train<T>(const TensorT<T>&, const TensorT<T>&,                  \
                                            const TensorT<T>&, T, TensorT<T>*, std::vector<T>&,    \
                                            std::vector<T>&);                                      \
    template TensorT<T> batch_norm_eval<T>(const TensorT<T>&, const TensorT<T>&, const TensorT<T>&,\
                                           const TensorT<T>&, const TensorT<T>&, T);               \
    template void batch_norm_train_backward<T>(const TensorT<T>&, const std::vector<T>&,           \
                                               const TensorT<T>&, T, const TensorT<T>&,            \
                                               TensorT<T>&, TensorT<T>&, TensorT<T>&);             \
    template TensorT<T> relu<T>(const TensorT<T>&);                                                \
    template TensorT<T> relu_backward<T>(const TensorT<T>&, const TensorT<T>&);                    \
    template TensorT<T> sigmoid<T>(const TensorT<T>&);                                             \
    template TensorT<T> sigmoid_backward<T>(const TensorT<T>&, const TensorT<T>&);                 \
    template std::pair<TensorT<T>, TensorT<T>> channel_split<T>(const TensorT<T>&);                \
    template TensorT<T> concat_channels<T>(const TensorT<T>&, const TensorT<T>&);                  \
    template TensorT<T> channel_shuffle<T>(const TensorT<T>&, int);                                \
    template TensorT<T> max_pool<T>(const TensorT<T>&, int, int, MaxPoolCache*);                   \
    template TensorT<T> max_pool_backward<T>(const MaxPoolCache&, const TensorT<T>&);              \
    template TensorT<T> global_avg_pool<T>(const TensorT<T>&);                                     \
    template TensorT<T> global_avg_pool_backward<T>(const std::vector<int>&, const TensorT<T>&);   \
    template TensorT<T> fully_connected<T>(const TensorT<T>&, const TensorT<T>&, const TensorT<T>&);\
    template void fully_connected_backward<T>(const TensorT<T>&, const TensorT<T>&,                \
                                              const TensorT<T>&, TensorT<T>&, TensorT<T>&,         \
                                              TensorT<T>&);                                        \
    template T softmax_cross_entropy<T>(const TensorT<T>&, const std::vector<int>&, TensorT<T>*);  \
    template TensorT<T> softmax_cross_entropy_backward<T>(const TensorT<T>&, const std::vector<int>&); \
    template T smooth_l1<T>(const TensorT<T>&, const TensorT<T>&);                                 \
    template TensorT<T> smooth_l1_backward<T>(const TensorT<T>&, const TensorT<T>&);

DETNAS_INSTANTIATE_OPS(float)
DETNAS_INSTANTIATE_OPS(double)

#undef DETNAS_INSTANTIATE_OPS

}  // namespace detnas::nn
