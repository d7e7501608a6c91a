#include "tadc/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "tadc/error.hpp"

namespace tadc {

std::size_t numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string to_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

std::span<float> detail::TensorImpl::grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), 0.0f);
    return grad;
}

Tensor make_tensor(Shape shape, std::vector<float> values) {
    for (std::size_t d : shape) {
        if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + to_string(shape));
    }
    if (numel(shape) != values.size()) {
        throw DimensionError("shape " + to_string(shape) + " needs " + std::to_string(numel(shape)) +
                             " values, got " + std::to_string(values.size()));
    }
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(values);
    return Tensor(std::move(impl));
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0f); }

Tensor Tensor::full(Shape shape, float value) {
    const std::size_t n = numel(shape);
    return make_tensor(std::move(shape), std::vector<float>(n, value));
}

Tensor Tensor::from(Shape shape, std::vector<float> values) {
    return make_tensor(std::move(shape), std::move(values));
}

Tensor Tensor::scalar(float value) { return make_tensor({1}, {value}); }

const Shape& Tensor::shape() const { return impl_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
    if (axis >= impl_->shape.size()) {
        throw IndexError("axis " + std::to_string(axis) + " out of range for shape " +
                         to_string(impl_->shape));
    }
    return impl_->shape[axis];
}

std::size_t Tensor::size() const { return impl_->data.size(); }

std::span<const float> Tensor::data() const { return impl_->data; }

std::span<float> Tensor::mutable_data() { return impl_->data; }

float Tensor::item() const {
    if (impl_->data.size() != 1) {
        throw DimensionError("item() needs a single-element tensor, got " + to_string(impl_->shape));
    }
    return impl_->data[0];
}

bool Tensor::requires_grad() const { return impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool value) {
    impl_->requires_grad = value;
    return *this;
}

bool Tensor::has_grad() const { return !impl_->grad.empty(); }

std::span<const float> Tensor::grad() const { return impl_->grad; }

std::span<float> Tensor::mutable_grad() { return impl_->grad_buffer(); }

void Tensor::zero_grad() { impl_->grad.clear(); }

Tensor Tensor::clone() const { return make_tensor(impl_->shape, impl_->data); }

namespace {
thread_local GradTape* t_active_tape = nullptr;
}

GradTape::GradTape() : previous_(t_active_tape) { t_active_tape = this; }

GradTape::~GradTape() { t_active_tape = previous_; }

GradTape* GradTape::active() { return t_active_tape; }

void GradTape::record(std::shared_ptr<detail::TensorImpl> output, BackwardFn backward) {
    nodes_.push_back(Node{std::move(output), std::move(backward)});
}

void GradTape::backward(const Tensor& loss) {
    if (loss.size() != 1) {
        throw DimensionError("backward() needs a scalar loss, got shape " + to_string(loss.shape()));
    }
    auto grad = loss.impl().grad_buffer();
    grad[0] += 1.0f;
    visited_ = 0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        // Nodes the loss does not depend on never received a gradient.
        if (it->output->grad.empty()) continue;
        it->backward();
        ++visited_;
    }
}

}  // namespace tadc
