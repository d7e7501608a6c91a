#pragma once

// Dense row-major float tensors with reverse-mode differentiation.
//
// A Tensor is a cheap handle onto shared storage. Operations record
// themselves on the GradTape that is active on the calling thread, but only
// when at least one input requires a gradient; with no tape active every op
// is a plain forward computation.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace tadc {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

namespace detail {

struct TensorImpl {
    Shape shape;
    std::vector<float> data;
    std::vector<float> grad;  // empty until a gradient flows in
    bool requires_grad = false;

    /// Gradient buffer, allocated as zeros on first use.
    std::span<float> grad_buffer();
};

}  // namespace detail

class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, float value);
    static Tensor from(Shape shape, std::vector<float> values);
    static Tensor scalar(float value);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t size() const;

    std::span<const float> data() const;
    /// Direct write access; intended for leaf tensors (parameters, inputs).
    std::span<float> mutable_data();
    float item() const;
    float at(std::size_t flat_index) const { return data()[flat_index]; }

    bool requires_grad() const;
    Tensor& set_requires_grad(bool value);

    bool has_grad() const;
    std::span<const float> grad() const;
    std::span<float> mutable_grad();
    void zero_grad();

    /// Deep copy of the values, detached from any graph.
    Tensor clone() const;

    detail::TensorImpl& impl() const { return *impl_; }
    const std::shared_ptr<detail::TensorImpl>& impl_ptr() const { return impl_; }

private:
    explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}
    friend Tensor make_tensor(Shape shape, std::vector<float> values);

    std::shared_ptr<detail::TensorImpl> impl_;
};

Tensor make_tensor(Shape shape, std::vector<float> values);

/// Ordered record of differentiable operations.
///
/// Operations are appended in execution order, so every node's inputs precede
/// it; backward() walks the list once in reverse. Constructing a tape makes it
/// the active tape of the current thread until it is destroyed.
class GradTape {
public:
    GradTape();
    ~GradTape();
    GradTape(const GradTape&) = delete;
    GradTape& operator=(const GradTape&) = delete;

    static GradTape* active();

    using BackwardFn = std::function<void()>;

    void record(std::shared_ptr<detail::TensorImpl> output, BackwardFn backward);

    /// Seeds d(loss)/d(loss) = 1 and propagates. loss must hold exactly one value.
    void backward(const Tensor& loss);

    std::size_t size() const { return nodes_.size(); }
    /// Number of nodes whose backward rule ran in the last backward().
    std::size_t visited() const { return visited_; }

private:
    struct Node {
        std::shared_ptr<detail::TensorImpl> output;
        BackwardFn backward;
    };
    std::vector<Node> nodes_;
    GradTape* previous_ = nullptr;
    std::size_t visited_ = 0;
};

}  // namespace tadc
