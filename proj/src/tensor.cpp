#include "specbench/tensor.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "specbench/error.hpp"

namespace specbench::nn {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

std::size_t numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::span<const double> data)
    : shape_(std::move(shape)), data_(data.begin(), data.end()) {
    require(numel(shape_) == data_.size(), ErrorCode::ShapeMismatch,
            "tensor data size " + std::to_string(data_.size()) + " does not match shape " + shape_str(shape_));
}

Tensor::Tensor(Shape shape, Buffer data) : shape_(std::move(shape)), data_(std::move(data)) {
    require(numel(shape_) == data_.size(), ErrorCode::ShapeMismatch,
            "tensor data size " + std::to_string(data_.size()) + " does not match shape " + shape_str(shape_));
}

double Tensor::item() const {
    require(data_.size() == 1, ErrorCode::ShapeMismatch, "item() on tensor of shape " + shape_str(shape_));
    return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
    require(numel(shape) == data_.size(), ErrorCode::ShapeMismatch,
            "cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    return Tensor(std::move(shape), data_);
}

// ------------------------------------------------------------------ Tape

const Tensor& Var::value() const { return tape->value(id); }
bool Var::requires_grad() const { return tape->requires_grad(id); }

Var Tape::constant(Tensor value) {
    nodes_.push_back(Node{std::move(value), {}, false, false, {}, {}});
    return Var{this, nodes_.size() - 1};
}

Var Tape::leaf(Tensor value, bool requires_grad) {
    nodes_.push_back(Node{std::move(value), {}, requires_grad, false, {}, {}});
    return Var{this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::vector<std::size_t> inputs, Backward backward) {
    bool needs = false;
    for (auto i : inputs) needs = needs || nodes_[i].requires_grad;
    Node node{std::move(value), {}, needs, false, std::move(inputs), {}};
    if (needs) node.backward = std::move(backward);
    nodes_.push_back(std::move(node));
    return Var{this, nodes_.size() - 1};
}

Tensor Tape::take_grad(std::size_t id) {
    Node& n = nodes_[id];
    if (!n.has_grad) return Tensor(n.value.shape(), 0.0);
    n.has_grad = false;
    return std::move(n.grad);
}

Tensor& Tape::grad(std::size_t id) {
    Node& n = nodes_[id];
    if (!n.has_grad) {
        n.grad = Tensor(n.value.shape(), 0.0);
        n.has_grad = true;
    }
    return n.grad;
}

void Tape::backward(Var loss) {
    require(loss.tape == this, ErrorCode::InvalidArgument, "loss belongs to another tape");
    if (nodes_[loss.id].value.size() != 1) {
        fail(ErrorCode::NonScalarLoss, "loss has shape " + shape_str(nodes_[loss.id].value.shape()));
    }
    grad(loss.id)[0] += 1.0;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (n.has_grad && n.backward) n.backward(*this, i);
    }
}

namespace {

Tape& tape_of(Var a, Var b) {
    require(a.tape != nullptr && a.tape == b.tape, ErrorCode::InvalidArgument, "operands live on different tapes");
    return *a.tape;
}

void accumulate(Tape& t, std::size_t id, const Tensor& g) {
    if (!t.requires_grad(id)) return;
    auto& dst = t.grad(id);
    auto d = dst.data();
    auto s = g.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

// ---------------------------------------------------------------- broadcasting

struct Broadcast {
    Shape out;
    std::vector<std::size_t> stride_a;  // per output axis, 0 where broadcast
    std::vector<std::size_t> stride_b;
};

std::vector<std::size_t> strides_for(const Shape& s) {
    std::vector<std::size_t> st(s.size(), 1);
    for (std::size_t i = s.size(); i-- > 1;) st[i - 1] = st[i] * s[i];
    return st;
}

Broadcast plan_broadcast(const Shape& a, const Shape& b) {
    const std::size_t r = std::max(a.size(), b.size());
    Broadcast p;
    p.out.resize(r);
    p.stride_a.assign(r, 0);
    p.stride_b.assign(r, 0);
    const auto sa = strides_for(a);
    const auto sb = strides_for(b);
    for (std::size_t i = 0; i < r; ++i) {
        const std::size_t ia = i + a.size() >= r ? i + a.size() - r : SIZE_MAX;
        const std::size_t ib = i + b.size() >= r ? i + b.size() - r : SIZE_MAX;
        const std::size_t da = ia == SIZE_MAX ? 1 : a[ia];
        const std::size_t db = ib == SIZE_MAX ? 1 : b[ib];
        if (da != db && da != 1 && db != 1) {
            fail(ErrorCode::ShapeMismatch, "cannot broadcast " + shape_str(a) + " with " + shape_str(b));
        }
        p.out[i] = std::max(da, db);
        if (ia != SIZE_MAX && da != 1) p.stride_a[i] = sa[ia];
        if (ib != SIZE_MAX && db != 1) p.stride_b[i] = sb[ib];
    }
    return p;
}

/// Calls f(out_index, a_index, b_index) for every output element.
template <typename F>
void for_each_broadcast(const Broadcast& p, F&& f) {
    const std::size_t r = p.out.size();
    const std::size_t total = numel(p.out);
    if (total == 0) return;
    if (r == 0) {
        f(0, 0, 0);
        return;
    }
    std::vector<std::size_t> idx(r, 0);
    std::size_t ia = 0, ib = 0;
    const std::size_t inner = p.out[r - 1];
    const std::size_t sa = p.stride_a[r - 1], sb = p.stride_b[r - 1];
    for (std::size_t o = 0; o < total; o += inner) {
        for (std::size_t j = 0; j < inner; ++j) f(o + j, ia + j * sa, ib + j * sb);
        // advance odometer over the outer axes
        for (std::size_t ax = r - 1; ax-- > 0;) {
            ++idx[ax];
            ia += p.stride_a[ax];
            ib += p.stride_b[ax];
            if (idx[ax] < p.out[ax]) break;
            ia -= p.stride_a[ax] * p.out[ax];
            ib -= p.stride_b[ax] * p.out[ax];
            idx[ax] = 0;
        }
    }
}

template <typename Fwd, typename GradA, typename GradB>
Var binary_op(Var a, Var b, Fwd fwd, GradA ga, GradB gb) {
    Tape& t = tape_of(a, b);
    const Tensor& va = a.value();
    const Tensor& vb = b.value();
    Tensor out;
    if (va.shape() == vb.shape()) {
        out = Tensor(va.shape());
        auto o = out.data();
        auto x = va.data();
        auto y = vb.data();
        for (std::size_t i = 0; i < o.size(); ++i) o[i] = fwd(x[i], y[i]);
        return t.record(std::move(out), {a.id, b.id}, [ga, gb, ia = a.id, ib = b.id](Tape& tp, std::size_t self) {
            const auto& g = tp.grad(self).data();
            const auto& x = tp.value(ia).data();
            const auto& y = tp.value(ib).data();
            if (tp.requires_grad(ia)) {
                auto d = tp.grad(ia).data();
                for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * ga(x[i], y[i]);
            }
            if (tp.requires_grad(ib)) {
                auto d = tp.grad(ib).data();
                for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * gb(x[i], y[i]);
            }
        });
    }
    const Broadcast p = plan_broadcast(va.shape(), vb.shape());
    out = Tensor(p.out);
    {
        auto o = out.data();
        auto x = va.data();
        auto y = vb.data();
        for_each_broadcast(p, [&](std::size_t io, std::size_t i1, std::size_t i2) { o[io] = fwd(x[i1], y[i2]); });
    }
    return t.record(std::move(out), {a.id, b.id}, [p, ga, gb, ia = a.id, ib = b.id](Tape& tp, std::size_t self) {
        const auto g = tp.grad(self).data();
        const auto x = tp.value(ia).data();
        const auto y = tp.value(ib).data();
        if (tp.requires_grad(ia)) {
            auto d = tp.grad(ia).data();
            for_each_broadcast(p, [&](std::size_t io, std::size_t i1, std::size_t i2) { d[i1] += g[io] * ga(x[i1], y[i2]); });
        }
        if (tp.requires_grad(ib)) {
            auto d = tp.grad(ib).data();
            for_each_broadcast(p, [&](std::size_t io, std::size_t i1, std::size_t i2) { d[i2] += g[io] * gb(x[i1], y[i2]); });
        }
    });
}

template <typename Fwd, typename Deriv>
Var unary_op(Var a, Fwd fwd, Deriv deriv) {
    Tape& t = *a.tape;
    const Tensor& va = a.value();
    Tensor out(va.shape());
    auto o = out.data();
    auto x = va.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = fwd(x[i]);
    return t.record(std::move(out), {a.id}, [deriv, ia = a.id](Tape& tp, std::size_t self) {
        const auto g = tp.grad(self).data();
        const auto x = tp.value(ia).data();
        const auto y = tp.value(self).data();
        auto d = tp.grad(ia).data();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * deriv(x[i], y[i]);
    });
}

}  // namespace

// ------------------------------------------------------------------ elementwise

Var add(Var a, Var b) {
    const Tensor& va = a.value();
    const Tensor& vb = b.value();
    // Fast path for bias-style broadcast: b's shape is a suffix of a's.
    if (va.rank() > vb.rank() && vb.size() > 0 && va.size() % vb.size() == 0 &&
        std::equal(vb.shape().begin(), vb.shape().end(), va.shape().end() - static_cast<long>(vb.rank()))) {
        Tape& t = tape_of(a, b);
        Tensor out = va;
        const std::size_t inner = vb.size();
        auto o = out.data();
        auto y = vb.data();
        for (std::size_t i = 0; i < o.size(); i += inner)
            for (std::size_t j = 0; j < inner; ++j) o[i + j] += y[j];
        return t.record(std::move(out), {a.id, b.id}, [inner, ia = a.id, ib = b.id](Tape& tp, std::size_t self) {
            const auto& g = tp.grad(self);
            accumulate(tp, ia, g);
            if (tp.requires_grad(ib)) {
                auto d = tp.grad(ib).data();
                auto gd = g.data();
                for (std::size_t i = 0; i < gd.size(); i += inner)
                    for (std::size_t j = 0; j < inner; ++j) d[j] += gd[i + j];
            }
        });
    }
    return binary_op(
        a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
        [](double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
    return binary_op(
        a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
        [](double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
    return binary_op(
        a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
        [](double x, double) { return x; });
}

Var div(Var a, Var b) {
    return binary_op(
        a, b, [](double x, double y) { return x / y; }, [](double, double y) { return 1.0 / y; },
        [](double x, double y) { return -x / (y * y); });
}

Var add_scalar(Var a, double s) {
    return unary_op(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var mul_scalar(Var a, double s) {
    return unary_op(a, [s](double x) { return x * s; }, [s](double, double) { return s; });
}

Var neg(Var a) { return mul_scalar(a, -1.0); }

Var relu(Var a) {
    return unary_op(a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var tanh(Var a) {
    return unary_op(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var exp(Var a) {
    return unary_op(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
    return unary_op(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var sqrt(Var a) {
    return unary_op(a, [](double x) { return std::sqrt(x); }, [](double, double y) { return 0.5 / y; });
}

Var abs(Var a) {
    return unary_op(
        a, [](double x) { return std::fabs(x); },
        [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var softplus(Var a) {
    return unary_op(
        a, [](double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); },
        [](double x, double) { return 1.0 / (1.0 + std::exp(-x)); });
}

Var lgamma(Var a) {
    return unary_op(a, [](double x) { return lanczos_lgamma(x); }, [](double x, double) { return digamma(x); });
}

Var power(Var a, double p) {
    return unary_op(
        a, [p](double x) { return std::pow(x, p); }, [p](double x, double) { return p * std::pow(x, p - 1.0); });
}

Var huber(Var r, double delta) {
    return unary_op(
        r,
        [delta](double x) {
            const double ax = std::fabs(x);
            return ax <= delta ? 0.5 * x * x : delta * (ax - 0.5 * delta);
        },
        [delta](double x, double) { return std::fabs(x) <= delta ? x : (x > 0.0 ? delta : -delta); });
}

// ------------------------------------------------------------------ matmul

Var matmul(Var a, Var b, bool ta, bool tb) {
    Tape& t = tape_of(a, b);
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    require(sa.size() >= 2 && sb.size() >= 2, ErrorCode::ShapeMismatch, "matmul needs operands of rank >= 2");

    std::size_t batch = 1;
    Shape out_shape;
    bool shared_b = false;
    if (sb.size() == 2 && sa.size() > 2 && !ta) {
        shared_b = true;  // a[..., M, K] x b[K, N]: fold leading axes into M
    } else {
        require(sa.size() == sb.size() && std::equal(sa.begin(), sa.end() - 2, sb.begin()), ErrorCode::ShapeMismatch,
                "matmul batch dims differ: " + shape_str(sa) + " x " + shape_str(sb));
        for (std::size_t i = 0; i + 2 < sa.size(); ++i) batch *= sa[i];
    }
    const std::size_t ar = sa[sa.size() - 2], ac = sa[sa.size() - 1];
    const std::size_t br = sb[sb.size() - 2], bc = sb[sb.size() - 1];
    std::size_t m = ta ? ac : ar;
    const std::size_t k = ta ? ar : ac;
    const std::size_t kb = tb ? bc : br;
    const std::size_t n = tb ? br : bc;
    require(k == kb, ErrorCode::ShapeMismatch, "matmul inner dims differ: " + shape_str(sa) + " x " + shape_str(sb));
    if (shared_b) m = numel(sa) / k;

    out_shape.assign(sa.begin(), sa.end() - 1);
    if (ta) out_shape.back() = ac;
    out_shape.push_back(n);
    if (!shared_b) out_shape[out_shape.size() - 2] = m;

    Tensor out(out_shape);
    const std::size_t a_rows = shared_b ? m : ar, a_cols = ac;
    const std::size_t a_step = shared_b ? 0 : ar * ac, b_step = shared_b ? 0 : br * bc, c_step = m * n;
    for (std::size_t i = 0; i < batch; ++i) {
        CMapMat A(a.value().data().data() + i * a_step, static_cast<long>(a_rows), static_cast<long>(a_cols));
        CMapMat B(b.value().data().data() + i * b_step, static_cast<long>(br), static_cast<long>(bc));
        MapMat C(out.data().data() + i * c_step, static_cast<long>(m), static_cast<long>(n));
        if (!ta && !tb) C.noalias() = A * B;
        else if (ta && !tb) C.noalias() = A.transpose() * B;
        else if (!ta && tb) C.noalias() = A * B.transpose();
        else C.noalias() = A.transpose() * B.transpose();
    }
    t.add_matmul_macs(batch * m * n * k);

    return t.record(std::move(out), {a.id, b.id},
                    [=, ia = a.id, ib = b.id](Tape& tp, std::size_t self) {
                        const double* g = tp.grad(self).data().data();
                        const double* av = tp.value(ia).data().data();
                        const double* bv = tp.value(ib).data().data();
                        double* ga = tp.requires_grad(ia) ? tp.grad(ia).data().data() : nullptr;
                        double* gb = tp.requires_grad(ib) ? tp.grad(ib).data().data() : nullptr;
                        for (std::size_t i = 0; i < batch; ++i) {
                            CMapMat G(g + i * c_step, static_cast<long>(m), static_cast<long>(n));
                            CMapMat A(av + i * a_step, static_cast<long>(a_rows), static_cast<long>(a_cols));
                            CMapMat B(bv + i * b_step, static_cast<long>(br), static_cast<long>(bc));
                            if (ga) {
                                MapMat GA(ga + i * a_step, static_cast<long>(a_rows), static_cast<long>(a_cols));
                                if (!ta && !tb) GA.noalias() += G * B.transpose();
                                else if (ta && !tb) GA.noalias() += B * G.transpose();
                                else if (!ta && tb) GA.noalias() += G * B;
                                else GA.noalias() += B.transpose() * G.transpose();
                            }
                            if (gb) {
                                MapMat GB(gb + i * b_step, static_cast<long>(br), static_cast<long>(bc));
                                if (!ta && !tb) GB.noalias() += A.transpose() * G;
                                else if (ta && !tb) GB.noalias() += A * G;
                                else if (!ta && tb) GB.noalias() += G.transpose() * A;
                                else GB.noalias() += G.transpose() * A.transpose();
                            }
                        }
                    });
}

// ------------------------------------------------------------------ row-wise ops

Var softmax(Var a) {
    Tape& t = *a.tape;
    const Tensor& x = a.value();
    require(x.rank() >= 1, ErrorCode::ShapeMismatch, "softmax needs rank >= 1");
    const std::size_t n = x.shape().back();
    Tensor out(x.shape());
    auto xd = x.data();
    auto od = out.data();
    for (std::size_t r = 0; r < x.size(); r += n) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, xd[r + j]);
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += (od[r + j] = std::exp(xd[r + j] - mx));
        for (std::size_t j = 0; j < n; ++j) od[r + j] /= s;
    }
    return t.record(std::move(out), {a.id}, [n, ia = a.id](Tape& tp, std::size_t self) {
        const auto g = tp.grad(self).data();
        const auto y = tp.value(self).data();
        auto d = tp.grad(ia).data();
        for (std::size_t r = 0; r < y.size(); r += n) {
            double dot = 0.0;
            for (std::size_t j = 0; j < n; ++j) dot += g[r + j] * y[r + j];
            for (std::size_t j = 0; j < n; ++j) d[r + j] += y[r + j] * (g[r + j] - dot);
        }
    });
}

Var layer_norm(Var a, double eps) {
    Tape& t = *a.tape;
    const Tensor& x = a.value();
    require(x.rank() >= 1, ErrorCode::ShapeMismatch, "layer_norm needs rank >= 1");
    const std::size_t n = x.shape().back();
    const std::size_t rows = x.size() / n;
    Tensor out(x.shape());
    std::vector<double> inv_std(rows);
    auto xd = x.data();
    auto od = out.data();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = xd.data() + r * n;
        double mu = 0.0;
        for (std::size_t j = 0; j < n; ++j) mu += xr[j];
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t j = 0; j < n; ++j) var += (xr[j] - mu) * (xr[j] - mu);
        var /= static_cast<double>(n);
        inv_std[r] = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < n; ++j) od[r * n + j] = (xr[j] - mu) * inv_std[r];
    }
    return t.record(std::move(out), {a.id}, [n, inv_std = std::move(inv_std), ia = a.id](Tape& tp, std::size_t self) {
        const auto g = tp.grad(self).data();
        const auto y = tp.value(self).data();
        auto d = tp.grad(ia).data();
        const double inv_n = 1.0 / static_cast<double>(n);
        for (std::size_t r = 0; r < inv_std.size(); ++r) {
            double mg = 0.0, mgy = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                mg += g[r * n + j];
                mgy += g[r * n + j] * y[r * n + j];
            }
            mg *= inv_n;
            mgy *= inv_n;
            for (std::size_t j = 0; j < n; ++j) {
                d[r * n + j] += inv_std[r] * (g[r * n + j] - mg - y[r * n + j] * mgy);
            }
        }
    });
}

// ------------------------------------------------------------------ reductions

Var sum(Var a, std::size_t axis, bool keepdim) {
    Tape& t = *a.tape;
    const Shape& s = a.shape();
    require(axis < s.size(), ErrorCode::ShapeMismatch, "sum axis out of range for " + shape_str(s));
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
    for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
    const std::size_t n = s[axis];
    Shape os = s;
    if (keepdim) os[axis] = 1;
    else os.erase(os.begin() + static_cast<long>(axis));
    Tensor out(os, 0.0);
    auto x = a.value().data();
    auto o = out.data();
    for (std::size_t p = 0; p < outer; ++p)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t q = 0; q < inner; ++q) o[p * inner + q] += x[(p * n + j) * inner + q];
    return t.record(std::move(out), {a.id}, [outer, inner, n, ia = a.id](Tape& tp, std::size_t self) {
        const auto g = tp.grad(self).data();
        auto d = tp.grad(ia).data();
        for (std::size_t p = 0; p < outer; ++p)
            for (std::size_t j = 0; j < n; ++j)
                for (std::size_t q = 0; q < inner; ++q) d[(p * n + j) * inner + q] += g[p * inner + q];
    });
}

Var mean(Var a, std::size_t axis, bool keepdim) {
    const double n = static_cast<double>(a.shape().at(axis));
    return mul_scalar(sum(a, axis, keepdim), 1.0 / n);
}

Var sum_all(Var a) {
    Tape& t = *a.tape;
    double s = 0.0;
    for (double v : a.value().data()) s += v;
    return t.record(Tensor::scalar(s), {a.id}, [ia = a.id](Tape& tp, std::size_t self) {
        const double g = tp.grad(self)[0];
        for (auto& d : tp.grad(ia).data()) d += g;
    });
}

Var mean_all(Var a) { return mul_scalar(sum_all(a), 1.0 / static_cast<double>(a.value().size())); }

// ------------------------------------------------------------------ layout

Var concat(const std::vector<Var>& parts, std::size_t axis) {
    require(!parts.empty(), ErrorCode::InvalidArgument, "concat of nothing");
    Tape& t = *parts.front().tape;
    const Shape& s0 = parts.front().shape();
    require(axis < s0.size(), ErrorCode::ShapeMismatch, "concat axis out of range");
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= s0[i];
    for (std::size_t i = axis + 1; i < s0.size(); ++i) inner *= s0[i];
    std::vector<std::size_t> lens;
    std::vector<std::size_t> ids;
    std::size_t total = 0;
    for (const auto& p : parts) {
        require(p.tape == &t, ErrorCode::InvalidArgument, "concat operands on different tapes");
        const Shape& s = p.shape();
        bool ok = s.size() == s0.size();
        for (std::size_t i = 0; ok && i < s.size(); ++i) ok = (i == axis) || s[i] == s0[i];
        require(ok, ErrorCode::ShapeMismatch, "concat shapes differ off-axis: " + shape_str(s) + " vs " + shape_str(s0));
        lens.push_back(s[axis]);
        ids.push_back(p.id);
        total += s[axis];
    }
    Shape os = s0;
    os[axis] = total;
    Tensor out(os);
    auto o = out.data();
    std::size_t offset = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        auto x = parts[k].value().data();
        const std::size_t block = lens[k] * inner;
        for (std::size_t p = 0; p < outer; ++p)
            std::copy_n(x.begin() + static_cast<long>(p * block), block,
                        o.begin() + static_cast<long>(p * total * inner + offset * inner));
        offset += lens[k];
    }
    return t.record(std::move(out), ids, [outer, inner, total, lens, ids](Tape& tp, std::size_t self) {
        const auto g = tp.grad(self).data();
        std::size_t offset = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
            const std::size_t block = lens[k] * inner;
            if (tp.requires_grad(ids[k])) {
                auto d = tp.grad(ids[k]).data();
                for (std::size_t p = 0; p < outer; ++p)
                    for (std::size_t j = 0; j < block; ++j) d[p * block + j] += g[p * total * inner + offset * inner + j];
            }
            offset += lens[k];
        }
    });
}

Var slice(Var a, std::size_t axis, std::size_t start, std::size_t length) {
    Tape& t = *a.tape;
    const Shape& s = a.shape();
    require(axis < s.size() && start + length <= s[axis], ErrorCode::ShapeMismatch,
            "slice [" + std::to_string(start) + ", " + std::to_string(start + length) + ") out of range for " +
                shape_str(s));
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
    for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
    const std::size_t n = s[axis];
    Shape os = s;
    os[axis] = length;
    Tensor out(os);
    auto x = a.value().data();
    auto o = out.data();
    for (std::size_t p = 0; p < outer; ++p)
        std::copy_n(x.begin() + static_cast<long>((p * n + start) * inner), length * inner,
                    o.begin() + static_cast<long>(p * length * inner));
    return t.record(std::move(out), {a.id}, [outer, inner, n, start, length, ia = a.id](Tape& tp, std::size_t self) {
        const auto g = tp.grad(self).data();
        auto d = tp.grad(ia).data();
        for (std::size_t p = 0; p < outer; ++p)
            for (std::size_t j = 0; j < length * inner; ++j) d[(p * n + start) * inner + j] += g[p * length * inner + j];
    });
}

Var reshape(Var a, Shape shape) {
    Tape& t = *a.tape;
    Tensor out = a.value().reshaped(std::move(shape));
    return t.record(std::move(out), {a.id}, [ia = a.id](Tape& tp, std::size_t self) {
        const auto g = tp.grad(self).data();
        auto d = tp.grad(ia).data();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
    });
}

namespace {

/// Walks the output in row-major order; `src_strides` are input strides listed in
/// output-axis order. Gathers src into out, or scatter-adds out into src.
void permute_walk(double* src, double* out, const Shape& out_shape, const std::vector<std::size_t>& src_strides,
                  bool scatter) {
    const std::size_t r = out_shape.size();
    const std::size_t total = numel(out_shape);
    if (total == 0) return;
    if (r == 0) {
        if (scatter) src[0] += out[0];
        else out[0] = src[0];
        return;
    }
    std::vector<std::size_t> idx(r, 0);
    std::size_t base = 0;
    const std::size_t inner = out_shape[r - 1];
    const std::size_t is = src_strides[r - 1];
    for (std::size_t o = 0; o < total; o += inner) {
        if (scatter) {
            for (std::size_t j = 0; j < inner; ++j) src[base + j * is] += out[o + j];
        } else {
            for (std::size_t j = 0; j < inner; ++j) out[o + j] = src[base + j * is];
        }
        for (std::size_t ax = r - 1; ax-- > 0;) {
            ++idx[ax];
            base += src_strides[ax];
            if (idx[ax] < out_shape[ax]) break;
            base -= src_strides[ax] * out_shape[ax];
            idx[ax] = 0;
        }
    }
}

}  // namespace

Var permute(Var a, const std::vector<std::size_t>& perm) {
    Tape& t = *a.tape;
    const Shape& s = a.shape();
    require(perm.size() == s.size(), ErrorCode::ShapeMismatch, "permutation rank mismatch");
    const auto st = strides_for(s);
    Shape os(s.size());
    std::vector<std::size_t> src_strides(s.size());
    for (std::size_t i = 0; i < perm.size(); ++i) {
        require(perm[i] < s.size(), ErrorCode::ShapeMismatch, "permutation index out of range");
        os[i] = s[perm[i]];
        src_strides[i] = st[perm[i]];
    }
    Tensor out(os);
    Tensor src = a.value();
    permute_walk(src.data().data(), out.data().data(), os, src_strides, false);
    return t.record(std::move(out), {a.id}, [os, src_strides, ia = a.id](Tape& tp, std::size_t self) {
        double* d = tp.grad(ia).data().data();
        permute_walk(d, tp.grad(self).data().data(), os, src_strides, true);
    });
}

Var transpose(Var a, std::size_t axis0, std::size_t axis1) {
    std::vector<std::size_t> perm(a.shape().size());
    std::iota(perm.begin(), perm.end(), 0);
    std::swap(perm.at(axis0), perm.at(axis1));
    return permute(a, perm);
}

Var gather_rows(Var table, const std::vector<std::size_t>& indices) {
    Tape& t = *table.tape;
    const Shape& s = table.shape();
    require(s.size() == 2, ErrorCode::ShapeMismatch, "gather_rows needs a 2-D table");
    const std::size_t d = s[1];
    Tensor out(Shape{indices.size(), d});
    auto x = table.value().data();
    auto o = out.data();
    for (std::size_t i = 0; i < indices.size(); ++i) {
        require(indices[i] < s[0], ErrorCode::ShapeMismatch, "gather index out of range");
        std::copy_n(x.begin() + static_cast<long>(indices[i] * d), d, o.begin() + static_cast<long>(i * d));
    }
    return t.record(std::move(out), {table.id}, [indices, d, ia = table.id](Tape& tp, std::size_t self) {
        const auto g = tp.grad(self).data();
        auto dd = tp.grad(ia).data();
        for (std::size_t i = 0; i < indices.size(); ++i)
            for (std::size_t j = 0; j < d; ++j) dd[indices[i] * d + j] += g[i * d + j];
    });
}

Var detach(Var a) { return a.tape->constant(a.value()); }

// ------------------------------------------------------------------ special functions

double lanczos_lgamma(double x) {
    // Lanczos approximation, g = 7, n = 9.
    static constexpr double kCoef[9] = {0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
                                        771.32342877765313,   -176.61502916214059,   12.507343278686905,
                                        -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};
    constexpr double kPi = 3.14159265358979323846;
    if (x < 0.5) {
        // Reflection: Gamma(x) Gamma(1 - x) = pi / sin(pi x)
        return std::log(kPi / std::fabs(std::sin(kPi * x))) - lanczos_lgamma(1.0 - x);
    }
    x -= 1.0;
    double a = kCoef[0];
    const double tt = x + 7.5;
    for (int i = 1; i < 9; ++i) a += kCoef[i] / (x + static_cast<double>(i));
    return 0.5 * std::log(2.0 * kPi) + (x + 0.5) * std::log(tt) - tt + std::log(a);
}

double digamma(double x) {
    double result = 0.0;
    if (x <= 0.0 && std::floor(x) == x) return std::numeric_limits<double>::quiet_NaN();
    if (x < 0.0) {
        constexpr double kPi = 3.14159265358979323846;
        return digamma(1.0 - x) - kPi / std::tan(kPi * x);
    }
    while (x < 6.0) {
        result -= 1.0 / x;
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    result += std::log(x) - 0.5 * inv -
              inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 / 132.0))));
    return result;
}

// ------------------------------------------------------------------ Adam

void adam_step(std::vector<Parameter>& params, const std::vector<Tensor>& grads, OptimState& state,
               const AdamConfig& cfg) {
    require(grads.size() == params.size(), ErrorCode::ShapeMismatch, "one gradient per parameter required");
    if (state.m.empty()) {
        for (const auto& p : params) {
            state.m.emplace_back(p.value.shape(), 0.0);
            state.v.emplace_back(p.value.shape(), 0.0);
        }
    }
    require(state.m.size() == params.size(), ErrorCode::ShapeMismatch, "optimizer state does not match parameters");
    for (std::size_t i = 0; i < params.size(); ++i) {
        require(grads[i].shape() == params[i].value.shape() && state.m[i].shape() == params[i].value.shape(),
                ErrorCode::ShapeMismatch, "gradient shape mismatch for parameter '" + params[i].name + "'");
    }
    ++state.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    using Arr = Eigen::Map<Eigen::ArrayXd>;
    using CArr = Eigen::Map<const Eigen::ArrayXd>;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto n = static_cast<Eigen::Index>(params[i].value.size());
        Arr w(params[i].value.data().data(), n);
        CArr g(grads[i].data().data(), n);
        Arr m(state.m[i].data().data(), n);
        Arr v(state.v[i].data().data(), n);
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.square();
        w -= cfg.lr * (m / bc1) / ((v / bc2).sqrt() + cfg.eps);
    }
}

}  // namespace specbench::nn
