#include "tadc/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>

#include "tadc/error.hpp"
#include "tadc/kernels.hpp"

namespace tadc::ops {
namespace {

using ImplPtr = std::shared_ptr<detail::TensorImpl>;

bool tracking(std::initializer_list<const Tensor*> inputs) {
    if (GradTape::active() == nullptr) return false;
    return std::any_of(inputs.begin(), inputs.end(),
                       [](const Tensor* t) { return t->requires_grad(); });
}

Tensor result(Shape shape, std::vector<float> values, bool track) {
    Tensor out = make_tensor(std::move(shape), std::move(values));
    if (track) out.set_requires_grad(true);
    return out;
}

void record(const Tensor& out, GradTape::BackwardFn fn) {
    GradTape::active()->record(out.impl_ptr(), std::move(fn));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                             to_string(b.shape()));
    }
}

void transpose_into(const float* src, std::size_t rows, std::size_t cols, float* dst) {
    constexpr std::size_t kBlock = 32;
    for (std::size_t i0 = 0; i0 < rows; i0 += kBlock) {
        const std::size_t i1 = std::min(rows, i0 + kBlock);
        for (std::size_t j0 = 0; j0 < cols; j0 += kBlock) {
            const std::size_t j1 = std::min(cols, j0 + kBlock);
            for (std::size_t i = i0; i < i1; ++i) {
                for (std::size_t j = j0; j < j1; ++j) dst[j * rows + i] = src[i * cols + j];
            }
        }
    }
}

std::vector<float> transposed(const float* src, std::size_t rows, std::size_t cols) {
    std::vector<float> out(rows * cols);
    transpose_into(src, rows, cols, out.data());
    return out;
}

// Output element i reads input element index[i]; backward scatters back.
Tensor gather_flat(const Tensor& x, std::vector<std::uint32_t> index, Shape out_shape) {
    const bool track = tracking({&x});
    const auto xs = x.data();
    std::vector<float> values(index.size());
    for (std::size_t i = 0; i < index.size(); ++i) values[i] = xs[index[i]];
    Tensor out = result(std::move(out_shape), std::move(values), track);
    if (track) {
        ImplPtr xi = x.impl_ptr();
        ImplPtr oi = out.impl_ptr();
        record(out, [xi, oi, index = std::move(index)] {
            auto gx = xi->grad_buffer();
            const auto& go = oi->grad;
            for (std::size_t i = 0; i < index.size(); ++i) gx[index[i]] += go[i];
        });
    }
    return out;
}

enum class Binary { Add, Sub, Mul, Div };

Tensor binary(const Tensor& a, const Tensor& b, Binary kind, const char* name) {
    require_same_shape(a, b, name);
    const bool track = tracking({&a, &b});
    const std::size_t n = a.size();
    std::vector<float> out(n);
    const auto& k = kernels::active();
    const float* pa = a.data().data();
    const float* pb = b.data().data();
    switch (kind) {
        case Binary::Add:
            k.add(n, pa, pb, out.data());
            break;
        case Binary::Sub:
            k.sub(n, pa, pb, out.data());
            break;
        case Binary::Mul:
            k.mul(n, pa, pb, out.data());
            break;
        case Binary::Div:
            for (std::size_t i = 0; i < n; ++i) out[i] = pa[i] / pb[i];
            break;
    }
    Tensor res = result(a.shape(), std::move(out), track);
    if (!track) return res;
    ImplPtr ai = a.impl_ptr();
    ImplPtr bi = b.impl_ptr();
    ImplPtr oi = res.impl_ptr();
    record(res, [ai, bi, oi, kind, n] {
        const auto& k = kernels::active();
        const float* go = oi->grad.data();
        switch (kind) {
            case Binary::Add:
                if (ai->requires_grad) k.axpy(n, 1.0f, go, ai->grad_buffer().data());
                if (bi->requires_grad) k.axpy(n, 1.0f, go, bi->grad_buffer().data());
                break;
            case Binary::Sub:
                if (ai->requires_grad) k.axpy(n, 1.0f, go, ai->grad_buffer().data());
                if (bi->requires_grad) k.axpy(n, -1.0f, go, bi->grad_buffer().data());
                break;
            case Binary::Mul: {
                std::vector<float> tmp(n);
                if (ai->requires_grad) {
                    k.mul(n, go, bi->data.data(), tmp.data());
                    k.axpy(n, 1.0f, tmp.data(), ai->grad_buffer().data());
                }
                if (bi->requires_grad) {
                    k.mul(n, go, ai->data.data(), tmp.data());
                    k.axpy(n, 1.0f, tmp.data(), bi->grad_buffer().data());
                }
                break;
            }
            case Binary::Div: {
                const float* pa = ai->data.data();
                const float* pb = bi->data.data();
                if (ai->requires_grad) {
                    auto ga = ai->grad_buffer();
                    for (std::size_t i = 0; i < n; ++i) ga[i] += go[i] / pb[i];
                }
                if (bi->requires_grad) {
                    auto gb = bi->grad_buffer();
                    for (std::size_t i = 0; i < n; ++i) gb[i] -= go[i] * pa[i] / (pb[i] * pb[i]);
                }
                break;
            }
        }
    });
    return res;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, Binary::Add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, Binary::Sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, Binary::Mul, "mul"); }
Tensor div(const Tensor& a, const Tensor& b) { return binary(a, b, Binary::Div, "div"); }

Tensor square(const Tensor& x) {
    const bool track = tracking({&x});
    const std::size_t n = x.size();
    std::vector<float> out(n);
    kernels::active().mul(n, x.data().data(), x.data().data(), out.data());
    Tensor res = result(x.shape(), std::move(out), track);
    if (track) {
        ImplPtr xi = x.impl_ptr();
        ImplPtr oi = res.impl_ptr();
        record(res, [xi, oi, n] {
            auto gx = xi->grad_buffer();
            for (std::size_t i = 0; i < n; ++i) gx[i] += 2.0f * xi->data[i] * oi->grad[i];
        });
    }
    return res;
}

Tensor add_scalar(const Tensor& x, float s) {
    const bool track = tracking({&x});
    std::vector<float> out(x.data().begin(), x.data().end());
    for (float& v : out) v += s;
    Tensor res = result(x.shape(), std::move(out), track);
    if (track) {
        ImplPtr xi = x.impl_ptr();
        ImplPtr oi = res.impl_ptr();
        record(res, [xi, oi] {
            kernels::active().axpy(oi->grad.size(), 1.0f, oi->grad.data(), xi->grad_buffer().data());
        });
    }
    return res;
}

Tensor scale(const Tensor& x, float s) {
    const bool track = tracking({&x});
    std::vector<float> out(x.size());
    kernels::active().scale(x.size(), s, x.data().data(), out.data());
    Tensor res = result(x.shape(), std::move(out), track);
    if (track) {
        ImplPtr xi = x.impl_ptr();
        ImplPtr oi = res.impl_ptr();
        record(res, [xi, oi, s] {
            kernels::active().axpy(oi->grad.size(), s, oi->grad.data(), xi->grad_buffer().data());
        });
    }
    return res;
}

namespace {

std::size_t last_dim_checked(const Tensor& x, const Tensor& v, const char* op) {
    if (v.rank() != 1 || x.shape().back() != v.dim(0)) {
        throw DimensionError(std::string(op) + ": vector " + to_string(v.shape()) +
                             " does not match last axis of " + to_string(x.shape()));
    }
    return v.dim(0);
}

}  // namespace

Tensor add_rowvec(const Tensor& x, const Tensor& v) {
    const std::size_t d = last_dim_checked(x, v, "add_rowvec");
    const std::size_t rows = x.size() / d;
    const bool track = tracking({&x, &v});
    std::vector<float> out(x.size());
    const auto& k = kernels::active();
    for (std::size_t r = 0; r < rows; ++r) {
        k.add(d, x.data().data() + r * d, v.data().data(), out.data() + r * d);
    }
    Tensor res = result(x.shape(), std::move(out), track);
    if (track) {
        ImplPtr xi = x.impl_ptr();
        ImplPtr vi = v.impl_ptr();
        ImplPtr oi = res.impl_ptr();
        record(res, [xi, vi, oi, rows, d] {
            const auto& k = kernels::active();
            const float* go = oi->grad.data();
            if (xi->requires_grad) k.axpy(rows * d, 1.0f, go, xi->grad_buffer().data());
            if (vi->requires_grad) {
                float* gv = vi->grad_buffer().data();
                for (std::size_t r = 0; r < rows; ++r) k.axpy(d, 1.0f, go + r * d, gv);
            }
        });
    }
    return res;
}

Tensor mul_rowvec(const Tensor& x, const Tensor& v) {
    const std::size_t d = last_dim_checked(x, v, "mul_rowvec");
    const std::size_t rows = x.size() / d;
    const bool track = tracking({&x, &v});
    std::vector<float> out(x.size());
    const auto& k = kernels::active();
    for (std::size_t r = 0; r < rows; ++r) {
        k.mul(d, x.data().data() + r * d, v.data().data(), out.data() + r * d);
    }
    Tensor res = result(x.shape(), std::move(out), track);
    if (track) {
        ImplPtr xi = x.impl_ptr();
        ImplPtr vi = v.impl_ptr();
        ImplPtr oi = res.impl_ptr();
        record(res, [xi, vi, oi, rows, d] {
            const float* go = oi->grad.data();
            if (xi->requires_grad) {
                auto gx = xi->grad_buffer();
                for (std::size_t r = 0; r < rows; ++r) {
                    for (std::size_t j = 0; j < d; ++j) gx[r * d + j] += go[r * d + j] * vi->data[j];
                }
            }
            if (vi->requires_grad) {
                auto gv = vi->grad_buffer();
                for (std::size_t r = 0; r < rows; ++r) {
                    for (std::size_t j = 0; j < d; ++j) gv[j] += go[r * d + j] * xi->data[r * d + j];
                }
            }
        });
    }
    return res;
}

namespace {

// Backward rules for c = a*b with a[m,k], b[k,n], shared by matmul and linear.
void matmul_backward(const ImplPtr& ai, const ImplPtr& bi, const float* go, std::size_t m,
                     std::size_t k, std::size_t n) {
    const auto& kt = kernels::active();
    if (ai->requires_grad) {
        const auto bt = transposed(bi->data.data(), k, n);
        kt.gemm(m, k, n, go, bt.data(), ai->grad_buffer().data(), true);
    }
    if (bi->requires_grad) {
        const auto at = transposed(ai->data.data(), m, k);
        kt.gemm(k, n, m, at.data(), go, bi->grad_buffer().data(), true);
    }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
        throw DimensionError("matmul: incompatible shapes " + to_string(a.shape()) + " and " +
                             to_string(b.shape()));
    }
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    const bool track = tracking({&a, &b});
    std::vector<float> out(m * n);
    kernels::active().gemm(m, n, k, a.data().data(), b.data().data(), out.data(), false);
    Tensor res = result({m, n}, std::move(out), track);
    if (track) {
        ImplPtr ai = a.impl_ptr();
        ImplPtr bi = b.impl_ptr();
        ImplPtr oi = res.impl_ptr();
        record(res, [ai, bi, oi, m, k, n] { matmul_backward(ai, bi, oi->grad.data(), m, k, n); });
    }
    return res;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
    if (x.rank() != 2 || w.rank() != 2 || x.dim(1) != w.dim(0)) {
        throw DimensionError("linear: incompatible shapes " + to_string(x.shape()) + " and " +
                             to_string(w.shape()));
    }
    const std::size_t m = x.dim(0), k = x.dim(1), n = w.dim(1);
    if (bias.rank() != 1 || bias.dim(0) != n) {
        throw DimensionError("linear: bias " + to_string(bias.shape()) + " does not match output width " +
                             std::to_string(n));
    }
    const bool track = tracking({&x, &w, &bias});
    std::vector<float> out(m * n);
    const float* pb = bias.data().data();
    for (std::size_t r = 0; r < m; ++r) std::copy(pb, pb + n, out.data() + r * n);
    kernels::active().gemm(m, n, k, x.data().data(), w.data().data(), out.data(), true);
    Tensor res = result({m, n}, std::move(out), track);
    if (track) {
        ImplPtr xi = x.impl_ptr();
        ImplPtr wi = w.impl_ptr();
        ImplPtr bi = bias.impl_ptr();
        ImplPtr oi = res.impl_ptr();
        record(res, [xi, wi, bi, oi, m, k, n] {
            const float* go = oi->grad.data();
            matmul_backward(xi, wi, go, m, k, n);
            if (bi->requires_grad) {
                float* gb = bi->grad_buffer().data();
                const auto& kt = kernels::active();
                for (std::size_t r = 0; r < m; ++r) kt.axpy(n, 1.0f, go + r * n, gb);
            }
        });
    }
    return res;
}

Tensor bmm(const Tensor& a, const Tensor& b, bool transpose_b) {
    if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0) ||
        a.dim(2) != (transpose_b ? b.dim(2) : b.dim(1))) {
        throw DimensionError(std::string("bmm: incompatible shapes ") + to_string(a.shape()) + " and " +
                             to_string(b.shape()) + (transpose_b ? " (b transposed)" : ""));
    }
    const std::size_t g = a.dim(0), m = a.dim(1), k = a.dim(2);
    const std::size_t n = transpose_b ? b.dim(1) : b.dim(2);
    const bool track = tracking({&a, &b});
    std::vector<float> out(g * m * n);
    const auto& kt = kernels::active();
    std::vector<float> bt(transpose_b ? k * n : 0);
    for (std::size_t i = 0; i < g; ++i) {
        const float* pa = a.data().data() + i * m * k;
        const float* pb = b.data().data() + i * k * n;
        if (transpose_b) {
            transpose_into(pb, n, k, bt.data());
            pb = bt.data();
        }
        kt.gemm(m, n, k, pa, pb, out.data() + i * m * n, false);
    }
    Tensor res = result({g, m, n}, std::move(out), track);
    if (track) {
        ImplPtr ai = a.impl_ptr();
        ImplPtr bi = b.impl_ptr();
        ImplPtr oi = res.impl_ptr();
        record(res, [ai, bi, oi, g, m, k, n, transpose_b] {
            const auto& kt = kernels::active();
            std::vector<float> scratch(std::max({m * k, k * n, m * n}));
            for (std::size_t i = 0; i < g; ++i) {
                const float* pa = ai->data.data() + i * m * k;
                const float* pb = bi->data.data() + i * k * n;
                const float* go = oi->grad.data() + i * m * n;
                if (!transpose_b) {
                    if (ai->requires_grad) {
                        transpose_into(pb, k, n, scratch.data());
                        kt.gemm(m, k, n, go, scratch.data(), ai->grad_buffer().data() + i * m * k, true);
                    }
                    if (bi->requires_grad) {
                        transpose_into(pa, m, k, scratch.data());
                        kt.gemm(k, n, m, scratch.data(), go, bi->grad_buffer().data() + i * k * n, true);
                    }
                } else {
                    // c = a * b^T with b[n,k]: da = dc * b, db = dc^T * a
                    if (ai->requires_grad) {
                        kt.gemm(m, k, n, go, pb, ai->grad_buffer().data() + i * m * k, true);
                    }
                    if (bi->requires_grad) {
                        transpose_into(go, m, n, scratch.data());
                        kt.gemm(n, k, m, scratch.data(), pa, bi->grad_buffer().data() + i * n * k, true);
                    }
                }
            }
        });
    }
    return res;
}

Tensor transpose(const Tensor& x) {
    if (x.rank() != 2) throw DimensionError("transpose: expected a matrix, got " + to_string(x.shape()));
    return permute(x, {1, 0});
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (numel(shape) != x.size()) {
        throw DimensionError("reshape: cannot view " + to_string(x.shape()) + " as " + to_string(shape));
    }
    const bool track = tracking({&x});
    Tensor res = result(std::move(shape), std::vector<float>(x.data().begin(), x.data().end()), track);
    if (track) {
        ImplPtr xi = x.impl_ptr();
        ImplPtr oi = res.impl_ptr();
        record(res, [xi, oi] {
            kernels::active().axpy(oi->grad.size(), 1.0f, oi->grad.data(), xi->grad_buffer().data());
        });
    }
    return res;
}

Tensor permute(const Tensor& x, const std::vector<std::size_t>& axes) {
    const Shape& in = x.shape();
    const std::size_t r = in.size();
    if (axes.size() != r) {
        throw DimensionError("permute: " + std::to_string(axes.size()) + " axes for shape " + to_string(in));
    }
    std::vector<bool> seen(r, false);
    for (std::size_t a : axes) {
        if (a >= r || seen[a]) throw IndexError("permute: invalid axis order for shape " + to_string(in));
        seen[a] = true;
    }
    std::vector<std::size_t> in_strides(r, 1);
    for (std::size_t i = r; i-- > 1;) in_strides[i - 1] = in_strides[i] * in[i];
    Shape out_shape(r);
    std::vector<std::size_t> stride_of_out(r);
    for (std::size_t i = 0; i < r; ++i) {
        out_shape[i] = in[axes[i]];
        stride_of_out[i] = in_strides[axes[i]];
    }
    const std::size_t n = x.size();
    std::vector<std::uint32_t> index(n);
    std::vector<std::size_t> counter(r, 0);
    std::size_t offset = 0;
    for (std::size_t i = 0; i < n; ++i) {
        index[i] = static_cast<std::uint32_t>(offset);
        for (std::size_t ax = r; ax-- > 0;) {
            ++counter[ax];
            offset += stride_of_out[ax];
            if (counter[ax] < out_shape[ax]) break;
            offset -= stride_of_out[ax] * out_shape[ax];
            counter[ax] = 0;
        }
    }
    return gather_flat(x, std::move(index), std::move(out_shape));
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
    if (x.rank() < 1 || begin >= end || end > x.dim(0)) {
        throw IndexError("slice_rows: range [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") invalid for shape " + to_string(x.shape()));
    }
    const std::size_t row = x.size() / x.dim(0);
    Shape shape = x.shape();
    shape[0] = end - begin;
    const bool track = tracking({&x});
    const float* p = x.data().data();
    Tensor res = result(std::move(shape), std::vector<float>(p + begin * row, p + end * row), track);
    if (track) {
        ImplPtr xi = x.impl_ptr();
        ImplPtr oi = res.impl_ptr();
        record(res, [xi, oi, begin, row] {
            kernels::active().axpy(oi->grad.size(), 1.0f, oi->grad.data(),
                                   xi->grad_buffer().data() + begin * row);
        });
    }
    return res;
}

Tensor softmax(const Tensor& x, std::size_t axis) {
    if (axis >= x.rank()) {
        throw IndexError("softmax: axis " + std::to_string(axis) + " out of range for " + to_string(x.shape()));
    }
    const Shape& s = x.shape();
    const std::size_t len = s[axis];
    std::size_t inner = 1;
    for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
    const std::size_t outer = x.size() / (len * inner);
    const bool track = tracking({&x});
    const float* px = x.data().data();
    std::vector<float> out(x.size());
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
            const std::size_t base = o * len * inner + in;
            float mx = px[base];
            for (std::size_t t = 1; t < len; ++t) mx = std::max(mx, px[base + t * inner]);
            double total = 0.0;
            for (std::size_t t = 0; t < len; ++t) {
                const float e = std::exp(px[base + t * inner] - mx);
                out[base + t * inner] = e;
                total += e;
            }
            const float inv = static_cast<float>(1.0 / total);
            for (std::size_t t = 0; t < len; ++t) out[base + t * inner] *= inv;
        }
    }
    Tensor res = result(s, std::move(out), track);
    if (track) {
        ImplPtr xi = x.impl_ptr();
        ImplPtr oi = res.impl_ptr();
        record(res, [xi, oi, outer, inner, len] {
            auto gx = xi->grad_buffer();
            const auto& y = oi->data;
            const auto& gy = oi->grad;
            for (std::size_t o = 0; o < outer; ++o) {
                for (std::size_t in = 0; in < inner; ++in) {
                    const std::size_t base = o * len * inner + in;
                    double dot = 0.0;
                    for (std::size_t t = 0; t < len; ++t) {
                        dot += static_cast<double>(gy[base + t * inner]) * y[base + t * inner];
                    }
                    const float fdot = static_cast<float>(dot);
                    for (std::size_t t = 0; t < len; ++t) {
                        const std::size_t i = base + t * inner;
                        gx[i] += y[i] * (gy[i] - fdot);
                    }
                }
            }
        });
    }
    return res;
}

Tensor layernorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps) {
    const std::size_t d = last_dim_checked(x, gamma, "layernorm");
    last_dim_checked(x, beta, "layernorm");
    const std::size_t rows = x.size() / d;
    const bool track = tracking({&x, &gamma, &beta});
    const float* px = x.data().data();
    const float* pg = gamma.data().data();
    const float* pb = beta.data().data();
    std::vector<float> out(x.size());
    std::vector<float> xhat(track ? x.size() : 0);
    std::vector<float> rstd(track ? rows : 0);
    for (std::size_t r = 0; r < rows; ++r) {
        const float* row = px + r * d;
        double mu = 0.0;
        for (std::size_t j = 0; j < d; ++j) mu += row[j];
        mu /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double c = row[j] - mu;
            var += c * c;
        }
        var /= static_cast<double>(d);
        const float rs = static_cast<float>(1.0 / std::sqrt(var + eps));
        const float fmu = static_cast<float>(mu);
        for (std::size_t j = 0; j < d; ++j) {
            const float h = (row[j] - fmu) * rs;
            out[r * d + j] = h * pg[j] + pb[j];
            if (track) xhat[r * d + j] = h;
        }
        if (track) rstd[r] = rs;
    }
    Tensor res = result(x.shape(), std::move(out), track);
    if (track) {
        ImplPtr xi = x.impl_ptr();
        ImplPtr gi = gamma.impl_ptr();
        ImplPtr bi = beta.impl_ptr();
        ImplPtr oi = res.impl_ptr();
        record(res, [xi, gi, bi, oi, rows, d, xhat = std::move(xhat), rstd = std::move(rstd)] {
            const auto& gy = oi->grad;
            if (gi->requires_grad || bi->requires_grad) {
                std::vector<double> dg(d, 0.0), db(d, 0.0);
                for (std::size_t r = 0; r < rows; ++r) {
                    for (std::size_t j = 0; j < d; ++j) {
                        dg[j] += static_cast<double>(gy[r * d + j]) * xhat[r * d + j];
                        db[j] += gy[r * d + j];
                    }
                }
                if (gi->requires_grad) {
                    auto g = gi->grad_buffer();
                    for (std::size_t j = 0; j < d; ++j) g[j] += static_cast<float>(dg[j]);
                }
                if (bi->requires_grad) {
                    auto g = bi->grad_buffer();
                    for (std::size_t j = 0; j < d; ++j) g[j] += static_cast<float>(db[j]);
                }
            }
            if (xi->requires_grad) {
                auto gx = xi->grad_buffer();
                const auto& gamma_v = gi->data;
                std::vector<float> dxhat(d);
                for (std::size_t r = 0; r < rows; ++r) {
                    double mean_d = 0.0, mean_dx = 0.0;
                    for (std::size_t j = 0; j < d; ++j) {
                        dxhat[j] = gy[r * d + j] * gamma_v[j];
                        mean_d += dxhat[j];
                        mean_dx += static_cast<double>(dxhat[j]) * xhat[r * d + j];
                    }
                    const float md = static_cast<float>(mean_d / d);
                    const float mdx = static_cast<float>(mean_dx / d);
                    for (std::size_t j = 0; j < d; ++j) {
                        gx[r * d + j] += rstd[r] * (dxhat[j] - md - xhat[r * d + j] * mdx);
                    }
                }
            }
        });
    }
    return res;
}

Tensor gelu(const Tensor& x) {
    const bool track = tracking({&x});
    const std::size_t n = x.size();
    std::vector<float> out(n);
    const float* px = x.data().data();
    constexpr float kInvSqrt2 = 0.70710678118654752f;
    for (std::size_t i = 0; i < n; ++i) out[i] = 0.5f * px[i] * (1.0f + std::erf(px[i] * kInvSqrt2));
    Tensor res = result(x.shape(), std::move(out), track);
    if (track) {
        ImplPtr xi = x.impl_ptr();
        ImplPtr oi = res.impl_ptr();
        record(res, [xi, oi, n] {
            constexpr float kInvSqrt2Pi = 0.39894228040143268f;
            constexpr float kInvSqrt2 = 0.70710678118654752f;
            auto gx = xi->grad_buffer();
            for (std::size_t i = 0; i < n; ++i) {
                const float v = xi->data[i];
                const float cdf = 0.5f * (1.0f + std::erf(v * kInvSqrt2));
                const float pdf = kInvSqrt2Pi * std::exp(-0.5f * v * v);
                gx[i] += oi->grad[i] * (cdf + v * pdf);
            }
        });
    }
    return res;
}

namespace {
inline float stable_sigmoid(float z) {
    if (z >= 0.0f) return 1.0f / (1.0f + std::exp(-z));
    const float e = std::exp(z);
    return e / (1.0f + e);
}
}  // namespace

Tensor sigmoid(const Tensor& x) {
    const bool track = tracking({&x});
    std::vector<float> out(x.size());
    const float* px = x.data().data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = stable_sigmoid(px[i]);
    Tensor res = result(x.shape(), std::move(out), track);
    if (track) {
        ImplPtr xi = x.impl_ptr();
        ImplPtr oi = res.impl_ptr();
        record(res, [xi, oi] {
            auto gx = xi->grad_buffer();
            for (std::size_t i = 0; i < gx.size(); ++i) {
                const float y = oi->data[i];
                gx[i] += oi->grad[i] * y * (1.0f - y);
            }
        });
    }
    return res;
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> indices) {
    if (x.rank() != 2) throw DimensionError("gather_rows: expected a matrix, got " + to_string(x.shape()));
    if (indices.empty()) throw IndexError("gather_rows: empty index list");
    const std::size_t n = x.dim(0), d = x.dim(1);
    std::vector<std::uint32_t> index(indices.size() * d);
    for (std::size_t r = 0; r < indices.size(); ++r) {
        if (indices[r] >= n) {
            throw IndexError("gather_rows: index " + std::to_string(indices[r]) + " out of range for " +
                             std::to_string(n) + " rows");
        }
        for (std::size_t j = 0; j < d; ++j) index[r * d + j] = static_cast<std::uint32_t>(indices[r] * d + j);
    }
    return gather_flat(x, std::move(index), {indices.size(), d});
}

Tensor scatter_rows(const Tensor& x, std::span<const std::size_t> indices, std::size_t size) {
    if (x.rank() != 2 || x.dim(0) != indices.size()) {
        throw DimensionError("scatter_rows: " + std::to_string(indices.size()) + " indices for rows of " +
                             to_string(x.shape()));
    }
    const std::size_t d = x.dim(1);
    for (std::size_t idx : indices) {
        if (idx >= size) {
            throw IndexError("scatter_rows: index " + std::to_string(idx) + " out of range for " +
                             std::to_string(size) + " rows");
        }
    }
    const bool track = tracking({&x});
    std::vector<float> out(size * d, 0.0f);
    const float* px = x.data().data();
    for (std::size_t r = 0; r < indices.size(); ++r) {
        for (std::size_t j = 0; j < d; ++j) out[indices[r] * d + j] += px[r * d + j];
    }
    Tensor res = result({size, d}, std::move(out), track);
    if (track) {
        ImplPtr xi = x.impl_ptr();
        ImplPtr oi = res.impl_ptr();
        record(res, [xi, oi, d, idx = std::vector<std::size_t>(indices.begin(), indices.end())] {
            auto gx = xi->grad_buffer();
            for (std::size_t r = 0; r < idx.size(); ++r) {
                for (std::size_t j = 0; j < d; ++j) gx[r * d + j] += oi->grad[idx[r] * d + j];
            }
        });
    }
    return res;
}

Tensor repeat_row(const Tensor& v, std::size_t count) {
    if (v.rank() != 1) throw DimensionError("repeat_row: expected a vector, got " + to_string(v.shape()));
    const std::size_t d = v.dim(0);
    std::vector<std::uint32_t> index(count * d);
    for (std::size_t r = 0; r < count; ++r) {
        for (std::size_t j = 0; j < d; ++j) index[r * d + j] = static_cast<std::uint32_t>(j);
    }
    return gather_flat(v, std::move(index), {count, d});
}

Tensor sum(const Tensor& x) {
    const bool track = tracking({&x});
    double total = 0.0;
    for (float v : x.data()) total += v;
    Tensor res = result({1}, {static_cast<float>(total)}, track);
    if (track) {
        ImplPtr xi = x.impl_ptr();
        ImplPtr oi = res.impl_ptr();
        record(res, [xi, oi] {
            const float g = oi->grad[0];
            for (float& v : xi->grad_buffer()) v += g;
        });
    }
    return res;
}

Tensor mean(const Tensor& x) {
    const bool track = tracking({&x});
    double total = 0.0;
    for (float v : x.data()) total += v;
    const std::size_t n = x.size();
    Tensor res = result({1}, {static_cast<float>(total / static_cast<double>(n))}, track);
    if (track) {
        ImplPtr xi = x.impl_ptr();
        ImplPtr oi = res.impl_ptr();
        record(res, [xi, oi, n] {
            const float g = oi->grad[0] / static_cast<float>(n);
            for (float& v : xi->grad_buffer()) v += g;
        });
    }
    return res;
}

namespace {

inline std::size_t mirror(std::ptrdiff_t i, std::ptrdiff_t n) {
    if (i < 0) return static_cast<std::size_t>(-i - 1);
    if (i >= n) return static_cast<std::size_t>(2 * n - i - 1);
    return static_cast<std::size_t>(i);
}

// One separable pass along rows (horizontal=true) or columns.
void blur_pass(const float* src, float* dst, std::size_t planes, std::size_t h, std::size_t w,
               std::span<const float> kernel, bool horizontal) {
    const auto radius = static_cast<std::ptrdiff_t>(kernel.size() / 2);
    const auto hh = static_cast<std::ptrdiff_t>(h);
    const auto ww = static_cast<std::ptrdiff_t>(w);
    for (std::size_t p = 0; p < planes; ++p) {
        const float* s = src + p * h * w;
        float* d = dst + p * h * w;
        for (std::ptrdiff_t i = 0; i < hh; ++i) {
            for (std::ptrdiff_t j = 0; j < ww; ++j) {
                float acc = 0.0f;
                for (std::ptrdiff_t t = -radius; t <= radius; ++t) {
                    const float wt = kernel[static_cast<std::size_t>(t + radius)];
                    acc += horizontal ? wt * s[i * ww + static_cast<std::ptrdiff_t>(mirror(j + t, ww))]
                                      : wt * s[static_cast<std::ptrdiff_t>(mirror(i + t, hh)) * ww + j];
                }
                d[i * ww + j] = acc;
            }
        }
    }
}

// Adjoint of blur_pass: dst (+)= pass^T(src).
void blur_pass_adjoint(const float* src, float* dst, std::size_t planes, std::size_t h, std::size_t w,
                       std::span<const float> kernel, bool horizontal) {
    const auto radius = static_cast<std::ptrdiff_t>(kernel.size() / 2);
    const auto hh = static_cast<std::ptrdiff_t>(h);
    const auto ww = static_cast<std::ptrdiff_t>(w);
    for (std::size_t p = 0; p < planes; ++p) {
        const float* s = src + p * h * w;
        float* d = dst + p * h * w;
        for (std::ptrdiff_t i = 0; i < hh; ++i) {
            for (std::ptrdiff_t j = 0; j < ww; ++j) {
                const float g = s[i * ww + j];
                for (std::ptrdiff_t t = -radius; t <= radius; ++t) {
                    const float wt = kernel[static_cast<std::size_t>(t + radius)];
                    if (horizontal) {
                        d[i * ww + static_cast<std::ptrdiff_t>(mirror(j + t, ww))] += wt * g;
                    } else {
                        d[static_cast<std::ptrdiff_t>(mirror(i + t, hh)) * ww + j] += wt * g;
                    }
                }
            }
        }
    }
}

}  // namespace

Tensor blur2d(const Tensor& x, std::span<const float> kernel) {
    if (x.rank() != 3) throw DimensionError("blur2d: expected [P,H,W], got " + to_string(x.shape()));
    if (kernel.empty() || kernel.size() % 2 == 0) {
        throw ConfigError("blur2d: kernel length must be odd, got " + std::to_string(kernel.size()));
    }
    const std::size_t planes = x.dim(0), h = x.dim(1), w = x.dim(2);
    if (kernel.size() > h || kernel.size() > w) {
        throw ConfigError("blur2d: window " + std::to_string(kernel.size()) + " larger than image " +
                          std::to_string(h) + "x" + std::to_string(w));
    }
    const bool track = tracking({&x});
    std::vector<float> tmp(x.size()), out(x.size());
    blur_pass(x.data().data(), tmp.data(), planes, h, w, kernel, true);
    blur_pass(tmp.data(), out.data(), planes, h, w, kernel, false);
    Tensor res = result(x.shape(), std::move(out), track);
    if (track) {
        ImplPtr xi = x.impl_ptr();
        ImplPtr oi = res.impl_ptr();
        record(res, [xi, oi, planes, h, w, k = std::vector<float>(kernel.begin(), kernel.end())] {
            std::vector<float> gtmp(oi->grad.size(), 0.0f);
            blur_pass_adjoint(oi->grad.data(), gtmp.data(), planes, h, w, k, false);
            blur_pass_adjoint(gtmp.data(), xi->grad_buffer().data(), planes, h, w, k, true);
        });
    }
    return res;
}

Tensor bce_with_logits(const Tensor& logits, const Tensor& targets, float pos_weight) {
    require_same_shape(logits, targets, "bce_with_logits");
    const bool track = tracking({&logits});
    const float* z = logits.data().data();
    const float* m = targets.data().data();
    const std::size_t n = logits.size();
    auto softplus = [](double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); };
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        total += static_cast<double>(pos_weight) * m[i] * softplus(-static_cast<double>(z[i])) +
                 (1.0 - m[i]) * softplus(static_cast<double>(z[i]));
    }
    Tensor res = result({1}, {static_cast<float>(total / static_cast<double>(n))}, track);
    if (track) {
        ImplPtr li = logits.impl_ptr();
        ImplPtr ti = targets.impl_ptr();
        ImplPtr oi = res.impl_ptr();
        record(res, [li, ti, oi, n, pos_weight] {
            const float g = oi->grad[0] / static_cast<float>(n);
            auto gz = li->grad_buffer();
            for (std::size_t i = 0; i < n; ++i) {
                const float p = stable_sigmoid(li->data[i]);
                const float t = ti->data[i];
                gz[i] += g * (pos_weight * t * (p - 1.0f) + (1.0f - t) * p);
            }
        });
    }
    return res;
}

}  // namespace tadc::ops
