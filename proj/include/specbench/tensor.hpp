#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace specbench::nn {

using Shape = std::vector<std::size_t>;

/// 64-byte aligned storage for tensor data.
template <typename T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t alignment{64};

    AlignedAllocator() = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), alignment)); }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, alignment); }

    template <typename U>
    bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

using Buffer = std::vector<double, AlignedAllocator<double>>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major array of doubles.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::span<const double> data);
    Tensor(Shape shape, Buffer data);
    Tensor(Shape shape, std::initializer_list<double> data) : Tensor(std::move(shape), std::span<const double>(data)) {}

    static Tensor scalar(double v) { return Tensor(Shape{}, {v}); }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t size() const { return data_.size(); }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double item() const;
    Tensor reshaped(Shape shape) const;

    bool operator==(const Tensor& other) const = default;

private:
    Shape shape_;
    Buffer data_;
};

class Tape;

/// Handle to a node recorded on a Tape.
struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    std::size_t dim(std::size_t i) const { return value().dim(i); }
    bool requires_grad() const;
};

/// Records primitive ops in creation order; backward() replays them in reverse.
/// A tape and its nodes belong to one worker.
class Tape {
public:
    using Backward = std::function<void(Tape&, std::size_t self)>;

    Var constant(Tensor value);
    Var leaf(Tensor value, bool requires_grad = true);

    /// Appends a computed node. `backward` is dropped when no input needs a gradient.
    Var record(Tensor value, std::vector<std::size_t> inputs, Backward backward);

    const Tensor& value(std::size_t id) const { return nodes_[id].value; }
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

    /// Gradient buffer of a node (zero-filled on first access).
    Tensor& grad(std::size_t id);
    const Tensor& grad(Var v) { return grad(v.id); }
    /// Moves a gradient out of the tape (call after backward()).
    Tensor take_grad(std::size_t id);

    void backward(Var loss);

    std::size_t size() const { return nodes_.size(); }

    /// Multiply-accumulate count of recorded matmuls (for analytic cost cross-checks).
    std::size_t matmul_macs() const { return matmul_macs_; }
    void add_matmul_macs(std::size_t n) { matmul_macs_ += n; }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        bool has_grad = false;
        std::vector<std::size_t> inputs;
        Backward backward;
    };
    std::vector<Node> nodes_;
    std::size_t matmul_macs_ = 0;
};

// ---- primitives -------------------------------------------------------
// Elementwise binary ops broadcast numpy-style.

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);

Var add_scalar(Var a, double s);
Var mul_scalar(Var a, double s);
Var neg(Var a);

/// a[..., M, K] x b[K, N], or batched a[..., M, K] x b[..., M', ...] with equal
/// batch dims. Transposes apply to the last two axes.
Var matmul(Var a, Var b, bool transpose_a = false, bool transpose_b = false);

Var relu(Var a);
Var tanh(Var a);
Var exp(Var a);
Var log(Var a);
Var sqrt(Var a);
Var abs(Var a);
Var softplus(Var a);
Var lgamma(Var a);
Var power(Var a, double exponent);
Var huber(Var residual, double delta);

Var softmax(Var a);                        ///< over the last axis
Var layer_norm(Var a, double eps = 1e-5);  ///< normalizes the last axis, no affine

Var sum(Var a, std::size_t axis, bool keepdim = false);
Var mean(Var a, std::size_t axis, bool keepdim = false);
Var sum_all(Var a);
Var mean_all(Var a);

Var concat(const std::vector<Var>& parts, std::size_t axis);
Var slice(Var a, std::size_t axis, std::size_t start, std::size_t length);
Var reshape(Var a, Shape shape);
Var permute(Var a, const std::vector<std::size_t>& perm);
Var transpose(Var a, std::size_t axis0, std::size_t axis1);

/// Rows of `table` [V, D] picked by `indices`; result [indices.size(), D].
Var gather_rows(Var table, const std::vector<std::size_t>& indices);

/// Same value, no gradient flow.
Var detach(Var a);

// ---- numerics shared with losses ---------------------------------------

double lanczos_lgamma(double x);
double digamma(double x);

// ---- optimizer ---------------------------------------------------------

struct Parameter {
    std::string name;
    Tensor value;
};

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct OptimState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    long step = 0;
};

/// Bias-corrected Adam update, in place.
void adam_step(std::vector<Parameter>& params, const std::vector<Tensor>& grads, OptimState& state,
               const AdamConfig& cfg = {});

}  // namespace specbench::nn
