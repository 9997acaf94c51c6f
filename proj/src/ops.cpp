#include "lvgpt/ops.hpp"

#include <cmath>
#include <limits>

namespace lvgpt {

namespace {

template <typename T>
using Impl = detail::TensorImpl<T>;

// Grad buffer of an op input, or null when it does not take gradient.
template <typename T>
T* grad_of(const Tensor<T>& t) {
    return t.requires_grad() ? t.impl()->grad_buffer() : nullptr;
}

template <typename T>
void require_rank(const Tensor<T>& t, std::size_t rank, const char* op) {
    if (t.rank() != rank) {
        throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         ", got shape " + to_string(t.shape()));
    }
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                         to_string(b.shape()));
    }
}

template <typename T>
std::size_t last_dim(const Tensor<T>& t, const char* op) {
    if (t.rank() == 0) throw ShapeError(std::string(op) + ": scalar input has no last axis");
    return t.shape().back();
}

constexpr double kGeluCoeff = 0.7978845608028654;  // sqrt(2 / pi)

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
        throw ShapeError("matmul: incompatible shapes " + to_string(a.shape()) + " x " +
                         to_string(b.shape()));
    }
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<T> c(m * n, T(0));
    const T* A = a.data().data();
    const T* B = b.data().data();
    for (std::size_t i = 0; i < m; ++i) {
        T* crow = c.data() + i * n;
        for (std::size_t t = 0; t < k; ++t) {
            const T av = A[i * k + t];
            const T* brow = B + t * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    return Tensor<T>::make_result({m, n}, std::move(c), "matmul", {a, b}, [a, b, m, k, n](Impl<T>& out) {
        const T* G = out.grad.data();
        const T* A = a.data().data();
        const T* B = b.data().data();
        if (T* gA = grad_of(a)) {
            for (std::size_t i = 0; i < m; ++i) {
                const T* grow = G + i * n;
                for (std::size_t t = 0; t < k; ++t) {
                    const T* brow = B + t * n;
                    T acc = T(0);
                    for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                    gA[i * k + t] += acc;
                }
            }
        }
        if (T* gB = grad_of(b)) {
            for (std::size_t i = 0; i < m; ++i) {
                const T* grow = G + i * n;
                for (std::size_t t = 0; t < k; ++t) {
                    const T av = A[i * k + t];
                    T* gbrow = gB + t * n;
                    for (std::size_t j = 0; j < n; ++j) gbrow[j] += av * grow[j];
                }
            }
        }
    });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a, b, "add");
    std::vector<T> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
    return Tensor<T>::make_result(a.shape(), std::move(out), "add", {a, b}, [a, b](Impl<T>& o) {
        for (const Tensor<T>* in : {&a, &b}) {
            if (T* g = grad_of(*in)) {
                for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
            }
        }
    });
}

template <typename T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias) {
    const std::size_t n = last_dim(x, "add_bias");
    if (bias.rank() != 1 || bias.dim(0) != n) {
        throw ShapeError("add_bias: bias " + to_string(bias.shape()) + " does not match last axis of " +
                         to_string(x.shape()));
    }
    std::vector<T> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + bias[i % n];
    return Tensor<T>::make_result(x.shape(), std::move(out), "add_bias", {x, bias},
                                  [x, bias, n](Impl<T>& o) {
                                      if (T* g = grad_of(x)) {
                                          for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
                                      }
                                      if (T* g = grad_of(bias)) {
                                          for (std::size_t i = 0; i < o.grad.size(); ++i) g[i % n] += o.grad[i];
                                      }
                                  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a, b, "mul");
    std::vector<T> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
    return Tensor<T>::make_result(a.shape(), std::move(out), "mul", {a, b}, [a, b](Impl<T>& o) {
        if (T* g = grad_of(a)) {
            for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * b[i];
        }
        if (T* g = grad_of(b)) {
            for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * a[i];
        }
    });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
    std::vector<T> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * factor;
    return Tensor<T>::make_result(x.shape(), std::move(out), "scale", {x}, [x, factor](Impl<T>& o) {
        if (T* g = grad_of(x)) {
            for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * factor;
        }
    });
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
    const T c = T(kGeluCoeff);
    std::vector<T> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const T v = x[i];
        out[i] = T(0.5) * v * (T(1) + std::tanh(c * (v + T(0.044715) * v * v * v)));
    }
    return Tensor<T>::make_result(x.shape(), std::move(out), "gelu", {x}, [x, c](Impl<T>& o) {
        T* g = grad_of(x);
        if (!g) return;
        for (std::size_t i = 0; i < o.grad.size(); ++i) {
            const T v = x[i];
            const T u = c * (v + T(0.044715) * v * v * v);
            const T th = std::tanh(u);
            const T du = c * (T(1) + T(3) * T(0.044715) * v * v);
            const T d = T(0.5) * (T(1) + th) + T(0.5) * v * (T(1) - th * th) * du;
            g[i] += o.grad[i] * d;
        }
    });
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x) {
    const std::size_t d = last_dim(x, "softmax");
    if (d == 0) throw ShapeError("softmax: empty last axis");
    const std::size_t rows = x.numel() / d;
    std::vector<T> out(x.numel());
    for (std::size_t r = 0; r < rows; ++r) {
        const T* in = x.data().data() + r * d;
        T* y = out.data() + r * d;
        T mx = -std::numeric_limits<T>::infinity();
        for (std::size_t j = 0; j < d; ++j) {
            if (std::isnan(in[j])) throw ValueError("softmax: NaN input");
            mx = std::max(mx, in[j]);
        }
        T total = T(0);
        for (std::size_t j = 0; j < d; ++j) {
            y[j] = std::exp(in[j] - mx);
            total += y[j];
        }
        for (std::size_t j = 0; j < d; ++j) y[j] /= total;
    }
    auto y_copy = out;
    return Tensor<T>::make_result(x.shape(), std::move(out), "softmax", {x},
                                  [x, y = std::move(y_copy), d, rows](Impl<T>& o) {
                                      T* g = grad_of(x);
                                      if (!g) return;
                                      for (std::size_t r = 0; r < rows; ++r) {
                                          const T* yr = y.data() + r * d;
                                          const T* gr = o.grad.data() + r * d;
                                          T dot = T(0);
                                          for (std::size_t j = 0; j < d; ++j) dot += yr[j] * gr[j];
                                          for (std::size_t j = 0; j < d; ++j) g[r * d + j] += yr[j] * (gr[j] - dot);
                                      }
                                  });
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, double eps) {
    const std::size_t d = last_dim(x, "layer_norm");
    if (gamma.shape() != Shape{d} || beta.shape() != Shape{d}) {
        throw ShapeError("layer_norm: gamma " + to_string(gamma.shape()) + " / beta " +
                         to_string(beta.shape()) + " do not match last axis of " + to_string(x.shape()));
    }
    const std::size_t rows = x.numel() / d;
    std::vector<T> out(x.numel());
    std::vector<T> xhat(x.numel());
    std::vector<T> rstd(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const T* in = x.data().data() + r * d;
        T mu = T(0);
        for (std::size_t j = 0; j < d; ++j) mu += in[j];
        mu /= T(d);
        T var = T(0);
        for (std::size_t j = 0; j < d; ++j) var += (in[j] - mu) * (in[j] - mu);
        var /= T(d);
        const T rs = T(1) / std::sqrt(var + T(eps));
        rstd[r] = rs;
        for (std::size_t j = 0; j < d; ++j) {
            const T h = (in[j] - mu) * rs;
            xhat[r * d + j] = h;
            out[r * d + j] = h * gamma[j] + beta[j];
        }
    }
    return Tensor<T>::make_result(
        x.shape(), std::move(out), "layer_norm", {x, gamma, beta},
        [x, gamma, beta, d, rows, xhat = std::move(xhat), rstd = std::move(rstd)](Impl<T>& o) {
            T* gx = grad_of(x);
            T* gg = grad_of(gamma);
            T* gb = grad_of(beta);
            for (std::size_t r = 0; r < rows; ++r) {
                const T* go = o.grad.data() + r * d;
                const T* h = xhat.data() + r * d;
                if (gg || gb) {
                    for (std::size_t j = 0; j < d; ++j) {
                        if (gg) gg[j] += go[j] * h[j];
                        if (gb) gb[j] += go[j];
                    }
                }
                if (gx) {
                    T mean_dh = T(0), mean_dh_h = T(0);
                    for (std::size_t j = 0; j < d; ++j) {
                        const T dh = go[j] * gamma[j];
                        mean_dh += dh;
                        mean_dh_h += dh * h[j];
                    }
                    mean_dh /= T(d);
                    mean_dh_h /= T(d);
                    for (std::size_t j = 0; j < d; ++j) {
                        const T dh = go[j] * gamma[j];
                        gx[r * d + j] += rstd[r] * (dh - mean_dh - h[j] * mean_dh_h);
                    }
                }
            }
        });
}

template <typename T>
Tensor<T> embedding_lookup(const Tensor<T>& table, std::span<const std::int64_t> ids) {
    require_rank(table, 2, "embedding_lookup");
    const std::size_t v = table.dim(0), d = table.dim(1);
    std::vector<T> out(ids.size() * d);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= v) {
            throw ValueError("embedding_lookup: id " + std::to_string(ids[i]) + " out of range for table of " +
                             std::to_string(v) + " rows");
        }
        std::copy_n(table.data().data() + ids[i] * d, d, out.data() + i * d);
    }
    std::vector<std::int64_t> idv(ids.begin(), ids.end());
    return Tensor<T>::make_result({ids.size(), d}, std::move(out), "embedding_lookup", {table},
                                  [table, idv = std::move(idv), d](Impl<T>& o) {
                                      T* g = grad_of(table);
                                      if (!g) return;
                                      for (std::size_t i = 0; i < idv.size(); ++i) {
                                          T* row = g + idv[i] * d;
                                          for (std::size_t j = 0; j < d; ++j) row[j] += o.grad[i * d + j];
                                      }
                                  });
}

template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const std::int64_t> labels) {
    if (logits.rank() != 1 && logits.rank() != 2) {
        throw ShapeError("cross_entropy: logits must be [C] or [B, C], got " + to_string(logits.shape()));
    }
    const std::size_t c = logits.shape().back();
    const std::size_t b = logits.rank() == 2 ? logits.dim(0) : 1;
    if (labels.size() != b) {
        throw ShapeError("cross_entropy: " + std::to_string(b) + " logit rows but " +
                         std::to_string(labels.size()) + " labels");
    }
    std::vector<T> probs(b * c);
    T loss = T(0);
    for (std::size_t r = 0; r < b; ++r) {
        if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= c) {
            throw ValueError("cross_entropy: label " + std::to_string(labels[r]) + " outside [0, " +
                             std::to_string(c) + ")");
        }
        const T* z = logits.data().data() + r * c;
        T mx = *std::max_element(z, z + c);
        T total = T(0);
        for (std::size_t j = 0; j < c; ++j) total += std::exp(z[j] - mx);
        const T log_total = std::log(total) + mx;
        for (std::size_t j = 0; j < c; ++j) probs[r * c + j] = std::exp(z[j] - log_total);
        loss += log_total - z[labels[r]];
    }
    loss /= T(b);
    std::vector<std::int64_t> lab(labels.begin(), labels.end());
    return Tensor<T>::make_result({}, {loss}, "cross_entropy", {logits},
                                  [logits, probs = std::move(probs), lab = std::move(lab), b, c](Impl<T>& o) {
                                      T* g = grad_of(logits);
                                      if (!g) return;
                                      const T s = o.grad[0] / T(b);
                                      for (std::size_t r = 0; r < b; ++r) {
                                          for (std::size_t j = 0; j < c; ++j) {
                                              const T onehot = static_cast<std::int64_t>(j) == lab[r] ? T(1) : T(0);
                                              g[r * c + j] += s * (probs[r * c + j] - onehot);
                                          }
                                      }
                                  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
    T total = T(0);
    for (T v : x.data()) total += v;
    return Tensor<T>::make_result({}, {total}, "sum", {x}, [x](Impl<T>& o) {
        if (T* g = grad_of(x)) {
            for (std::size_t i = 0; i < x.numel(); ++i) g[i] += o.grad[0];
        }
    });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
    if (x.numel() == 0) throw ShapeError("mean of empty tensor");
    return scale(sum(x), T(1) / T(x.numel()));
}

template <typename T>
Tensor<T> concat_rows(const Tensor<T>& a, const Tensor<T>& b) {
    require_rank(a, 2, "concat_rows");
    require_rank(b, 2, "concat_rows");
    if (a.dim(1) != b.dim(1)) {
        throw ShapeError("concat_rows: width mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
    }
    std::vector<T> out;
    out.reserve(a.numel() + b.numel());
    out.insert(out.end(), a.data().begin(), a.data().end());
    out.insert(out.end(), b.data().begin(), b.data().end());
    const std::size_t na = a.numel();
    return Tensor<T>::make_result({a.dim(0) + b.dim(0), a.dim(1)}, std::move(out), "concat_rows", {a, b},
                                  [a, b, na](Impl<T>& o) {
                                      if (T* g = grad_of(a)) {
                                          for (std::size_t i = 0; i < na; ++i) g[i] += o.grad[i];
                                      }
                                      if (T* g = grad_of(b)) {
                                          for (std::size_t i = 0; i < b.numel(); ++i) g[i] += o.grad[na + i];
                                      }
                                  });
}

template <typename T>
Tensor<T> slice_rows(const Tensor<T>& x, std::size_t begin, std::size_t count) {
    require_rank(x, 2, "slice_rows");
    if (begin + count > x.dim(0)) {
        throw ShapeError("slice_rows: rows [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") out of range for " + to_string(x.shape()));
    }
    const std::size_t d = x.dim(1);
    std::vector<T> out(x.data().begin() + begin * d, x.data().begin() + (begin + count) * d);
    return Tensor<T>::make_result({count, d}, std::move(out), "slice_rows", {x}, [x, begin, d](Impl<T>& o) {
        if (T* g = grad_of(x)) {
            for (std::size_t i = 0; i < o.grad.size(); ++i) g[begin * d + i] += o.grad[i];
        }
    });
}

template <typename T>
Tensor<T> stack(std::span<const Tensor<T>> xs) {
    if (xs.empty()) throw ShapeError("stack: no inputs");
    const Shape& inner = xs[0].shape();
    const std::size_t n = xs[0].numel();
    std::vector<T> out;
    out.reserve(n * xs.size());
    for (const auto& t : xs) {
        if (t.shape() != inner) {
            throw ShapeError("stack: shape mismatch " + to_string(inner) + " vs " + to_string(t.shape()));
        }
        out.insert(out.end(), t.data().begin(), t.data().end());
    }
    Shape shape{xs.size()};
    shape.insert(shape.end(), inner.begin(), inner.end());
    std::vector<Tensor<T>> inputs(xs.begin(), xs.end());
    return Tensor<T>::make_result(std::move(shape), std::move(out), "stack", inputs, [inputs, n](Impl<T>& o) {
        for (std::size_t k = 0; k < inputs.size(); ++k) {
            if (T* g = grad_of(inputs[k])) {
                for (std::size_t i = 0; i < n; ++i) g[i] += o.grad[k * n + i];
            }
        }
    });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& x) {
    require_rank(x, 2, "transpose");
    const std::size_t r = x.dim(0), c = x.dim(1);
    std::vector<T> out(x.numel());
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[j * r + i] = x[i * c + j];
    return Tensor<T>::make_result({c, r}, std::move(out), "transpose", {x}, [x, r, c](Impl<T>& o) {
        if (T* g = grad_of(x)) {
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) g[i * c + j] += o.grad[j * r + i];
        }
    });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
    if (numel(shape) != x.numel()) {
        throw ShapeError("reshape: cannot view " + to_string(x.shape()) + " as " + to_string(shape));
    }
    std::vector<T> out(x.data().begin(), x.data().end());
    return Tensor<T>::make_result(std::move(shape), std::move(out), "reshape", {x}, [x](Impl<T>& o) {
        if (T* g = grad_of(x)) {
            for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
        }
    });
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, std::size_t stride,
                 std::size_t padding) {
    require_rank(x, 3, "conv2d");
    require_rank(w, 4, "conv2d");
    const std::size_t cin = x.dim(0), h = x.dim(1), wd = x.dim(2);
    const std::size_t cout = w.dim(0), k = w.dim(2);
    if (w.dim(1) != cin || w.dim(3) != k) {
        throw ShapeError("conv2d: weight " + to_string(w.shape()) + " incompatible with input " +
                         to_string(x.shape()));
    }
    if (b.shape() != Shape{cout}) {
        throw ShapeError("conv2d: bias " + to_string(b.shape()) + " does not match " + std::to_string(cout) +
                         " output channels");
    }
    if (stride == 0 || h + 2 * padding < k || wd + 2 * padding < k) {
        throw ShapeError("conv2d: kernel/stride/padding do not fit input " + to_string(x.shape()));
    }
    const std::size_t ho = (h + 2 * padding - k) / stride + 1;
    const std::size_t wo = (wd + 2 * padding - k) / stride + 1;
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(padding);

    std::vector<T> out(cout * ho * wo);
    const T* X = x.data().data();
    const T* W = w.data().data();
    for (std::size_t o = 0; o < cout; ++o) {
        T* oplane = out.data() + o * ho * wo;
        std::fill(oplane, oplane + ho * wo, b[o]);
        for (std::size_t c = 0; c < cin; ++c) {
            const T* xplane = X + c * h * wd;
            for (std::size_t ky = 0; ky < k; ++ky) {
                for (std::size_t kx = 0; kx < k; ++kx) {
                    const T wv = W[((o * cin + c) * k + ky) * k + kx];
                    for (std::size_t oy = 0; oy < ho; ++oy) {
                        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - pad;
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                        for (std::size_t ox = 0; ox < wo; ++ox) {
                            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - pad;
                            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(wd)) continue;
                            oplane[oy * wo + ox] += wv * xplane[iy * wd + ix];
                        }
                    }
                }
            }
        }
    }
    return Tensor<T>::make_result(
        {cout, ho, wo}, std::move(out), "conv2d", {x, w, b},
        [x, w, b, cin, h, wd, cout, k, ho, wo, stride, pad](Impl<T>& o) {
            const T* G = o.grad.data();
            const T* X = x.data().data();
            const T* W = w.data().data();
            T* gx = grad_of(x);
            T* gw = grad_of(w);
            T* gb = grad_of(b);
            for (std::size_t oc = 0; oc < cout; ++oc) {
                const T* gplane = G + oc * ho * wo;
                if (gb) {
                    for (std::size_t i = 0; i < ho * wo; ++i) gb[oc] += gplane[i];
                }
                for (std::size_t c = 0; c < cin; ++c) {
                    const T* xplane = X + c * h * wd;
                    for (std::size_t ky = 0; ky < k; ++ky) {
                        for (std::size_t kx = 0; kx < k; ++kx) {
                            const std::size_t widx = ((oc * cin + c) * k + ky) * k + kx;
                            const T wv = W[widx];
                            T wacc = T(0);
                            for (std::size_t oy = 0; oy < ho; ++oy) {
                                const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - pad;
                                if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                                for (std::size_t ox = 0; ox < wo; ++ox) {
                                    const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - pad;
                                    if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(wd)) continue;
                                    const T gv = gplane[oy * wo + ox];
                                    wacc += gv * xplane[iy * wd + ix];
                                    if (gx) gx[c * h * wd + iy * wd + ix] += gv * wv;
                                }
                            }
                            if (gw) gw[widx] += wacc;
                        }
                    }
                }
            }
        });
}

template <typename T>
Tensor<T> causal_attention(const Tensor<T>& qkv, std::size_t n_heads) {
    require_rank(qkv, 2, "causal_attention");
    const std::size_t len = qkv.dim(0);
    if (n_heads == 0 || qkv.dim(1) % (3 * n_heads) != 0) {
        throw ShapeError("causal_attention: width " + std::to_string(qkv.dim(1)) + " not divisible into " +
                         std::to_string(n_heads) + " heads of q|k|v");
    }
    const std::size_t d = qkv.dim(1) / 3;
    const std::size_t hd = d / n_heads;
    const std::size_t stride = 3 * d;
    const T inv_scale = T(1) / std::sqrt(T(hd));
    const T* Q = qkv.data().data();

    // probs[h][i][j], zero for j > i.
    std::vector<T> probs(n_heads * len * len, T(0));
    std::vector<T> out(len * d, T(0));
    for (std::size_t hh = 0; hh < n_heads; ++hh) {
        const std::size_t qoff = hh * hd, koff = d + hh * hd, voff = 2 * d + hh * hd;
        for (std::size_t i = 0; i < len; ++i) {
            T* p = probs.data() + (hh * len + i) * len;
            const T* qi = Q + i * stride + qoff;
            T mx = -std::numeric_limits<T>::infinity();
            for (std::size_t j = 0; j <= i; ++j) {
                const T* kj = Q + j * stride + koff;
                T s = T(0);
                for (std::size_t t = 0; t < hd; ++t) s += qi[t] * kj[t];
                s *= inv_scale;
                p[j] = s;
                mx = std::max(mx, s);
            }
            T total = T(0);
            for (std::size_t j = 0; j <= i; ++j) {
                p[j] = std::exp(p[j] - mx);
                total += p[j];
            }
            T* oi = out.data() + i * d + hh * hd;
            for (std::size_t j = 0; j <= i; ++j) {
                p[j] /= total;
                const T* vj = Q + j * stride + voff;
                for (std::size_t t = 0; t < hd; ++t) oi[t] += p[j] * vj[t];
            }
        }
    }
    return Tensor<T>::make_result(
        {len, d}, std::move(out), "causal_attention", {qkv},
        [qkv, probs = std::move(probs), len, d, hd, n_heads, stride, inv_scale](Impl<T>& o) {
            T* g = grad_of(qkv);
            if (!g) return;
            const T* Q = qkv.data().data();
            const T* G = o.grad.data();
            std::vector<T> dp(len);
            for (std::size_t hh = 0; hh < n_heads; ++hh) {
                const std::size_t qoff = hh * hd, koff = d + hh * hd, voff = 2 * d + hh * hd;
                for (std::size_t i = 0; i < len; ++i) {
                    const T* p = probs.data() + (hh * len + i) * len;
                    const T* gi = G + i * d + hh * hd;
                    T dot = T(0);
                    for (std::size_t j = 0; j <= i; ++j) {
                        const T* vj = Q + j * stride + voff;
                        T* gvj = g + j * stride + voff;
                        T acc = T(0);
                        for (std::size_t t = 0; t < hd; ++t) {
                            acc += gi[t] * vj[t];
                            gvj[t] += p[j] * gi[t];
                        }
                        dp[j] = acc;
                        dot += p[j] * acc;
                    }
                    const T* qi = Q + i * stride + qoff;
                    T* gqi = g + i * stride + qoff;
                    for (std::size_t j = 0; j <= i; ++j) {
                        const T ds = p[j] * (dp[j] - dot) * inv_scale;
                        const T* kj = Q + j * stride + koff;
                        T* gkj = g + j * stride + koff;
                        for (std::size_t t = 0; t < hd; ++t) {
                            gqi[t] += ds * kj[t];
                            gkj[t] += ds * qi[t];
                        }
                    }
                }
            }
        });
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p, std::mt19937_64* rng) {
    if (p < 0.0 || p >= 1.0) throw ValueError("dropout: rate must be in [0, 1)");
    if (p == 0.0 || rng == nullptr) return x;
    std::bernoulli_distribution keep(1.0 - p);
    const T s = T(1.0 / (1.0 - p));
    std::vector<T> mask(x.numel());
    for (auto& m : mask) m = keep(*rng) ? s : T(0);
    std::vector<T> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * mask[i];
    return Tensor<T>::make_result(x.shape(), std::move(out), "dropout", {x}, [x, mask = std::move(mask)](Impl<T>& o) {
        if (T* g = grad_of(x)) {
            for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * mask[i];
        }
    });
}

#define LVGPT_INSTANTIATE_OPS(T)                                                                         \
    template Tensor<T> matmul<T>(const Tensor<T>&, const Tensor<T>&);                                     \
    template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);                                        \
    template Tensor<T> add_bias<T>(const Tensor<T>&, const Tensor<T>&);                                   \
    template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&);                                        \
    template Tensor<T> scale<T>(const Tensor<T>&, T);                                                     \
    template Tensor<T> gelu<T>(const Tensor<T>&);                                                         \
    template Tensor<T> softmax<T>(const Tensor<T>&);                                                      \
    template Tensor<T> layer_norm<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, double);       \
    template Tensor<T> embedding_lookup<T>(const Tensor<T>&, std::span<const std::int64_t>);              \
    template Tensor<T> cross_entropy<T>(const Tensor<T>&, std::span<const std::int64_t>);                 \
    template Tensor<T> sum<T>(const Tensor<T>&);                                                          \
    template Tensor<T> mean<T>(const Tensor<T>&);                                                         \
    template Tensor<T> concat_rows<T>(const Tensor<T>&, const Tensor<T>&);                                \
    template Tensor<T> slice_rows<T>(const Tensor<T>&, std::size_t, std::size_t);                         \
    template Tensor<T> stack<T>(std::span<const Tensor<T>>);                                              \
    template Tensor<T> transpose<T>(const Tensor<T>&);                                                    \
    template Tensor<T> reshape<T>(const Tensor<T>&, Shape);                                               \
    template Tensor<T> conv2d<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::size_t,      \
                                 std::size_t);                                                            \
    template Tensor<T> causal_attention<T>(const Tensor<T>&, std::size_t);                                \
    template Tensor<T> dropout<T>(const Tensor<T>&, double, std::mt19937_64*);

LVGPT_INSTANTIATE_OPS(float)
LVGPT_INSTANTIATE_OPS(double)

}  // namespace lvgpt
