#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "ohs/rng.hpp"

namespace ohs::nn {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

using MatF = Mat<float>;
using VecF = Vec<float>;

// Parameter storage is 64-byte aligned so vectorized kernels see the same
// lane split on every run; heap-dependent alignment would otherwise make
// results differ at the last ulp between runs.
template <typename T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::size_t alignment = 64;

    AlignedAllocator() = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U>&) {}

    T* allocate(std::size_t n) {
        return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t(alignment)));
    }
    void deallocate(T* p, std::size_t) noexcept {
        ::operator delete(p, std::align_val_t(alignment));
    }
    template <typename U>
    bool operator==(const AlignedAllocator<U>&) const {
        return true;
    }
};

template <typename T>
using AlignedVec = std::vector<T, AlignedAllocator<T>>;

inline constexpr double kLayerNormEps = 1e-5;

// Residual-block MLP:
//   h = elu(W_in x + b_in)
//   per block: h <- h + layernorm(W2 elu(W1 h + b1) + b2) * gain + bias
//   y = W_out h + b_out
struct MlpShape {
    int input_dim = 0;
    int output_dim = 0;
    int hidden_size = 0;
    int num_blocks = 0;

    bool operator==(const MlpShape&) const = default;

    std::size_t block_param_count() const {
        auto h = static_cast<std::size_t>(hidden_size);
        return 2 * (h * h + h) + 2 * h;
    }
    std::size_t param_count() const {
        auto i = static_cast<std::size_t>(input_dim);
        auto o = static_cast<std::size_t>(output_dim);
        auto h = static_cast<std::size_t>(hidden_size);
        return h * i + h + static_cast<std::size_t>(num_blocks) * block_param_count() + o * h + o;
    }

    // flat segment offsets, in declared order
    std::size_t input_w_off() const { return 0; }
    std::size_t input_b_off() const {
        return static_cast<std::size_t>(hidden_size) * input_dim;
    }
    std::size_t blocks_off() const { return input_b_off() + hidden_size; }
    std::size_t block_off(int k) const { return blocks_off() + k * block_param_count(); }
    std::size_t output_w_off() const { return block_off(num_blocks); }
    std::size_t output_b_off() const {
        return output_w_off() + static_cast<std::size_t>(output_dim) * hidden_size;
    }
};

// Flat parameter store with named segments. Also used as the gradient
// container (same layout).
template <typename T>
struct MlpParamsT {
    MlpShape shape;
    AlignedVec<T> data;

    MlpParamsT() = default;
    explicit MlpParamsT(MlpShape s) : shape(s), data(s.param_count(), T(0)) {}

    using MatMap = Eigen::Map<Mat<T>>;
    using CMatMap = Eigen::Map<const Mat<T>>;
    using VecMap = Eigen::Map<Vec<T>>;
    using CVecMap = Eigen::Map<const Vec<T>>;

    // weight matrices are (rows = outputs, cols = inputs)
    MatMap input_w() { return {data.data(), shape.hidden_size, shape.input_dim}; }
    CMatMap input_w() const { return {data.data(), shape.hidden_size, shape.input_dim}; }
    VecMap input_b() { return {data.data() + shape.input_b_off(), shape.hidden_size}; }
    CVecMap input_b() const { return {data.data() + shape.input_b_off(), shape.hidden_size}; }

    MatMap block_w1(int k) {
        return {data.data() + shape.block_off(k), shape.hidden_size, shape.hidden_size};
    }
    CMatMap block_w1(int k) const {
        return {data.data() + shape.block_off(k), shape.hidden_size, shape.hidden_size};
    }
    VecMap block_b1(int k) { return {b1_ptr(k), shape.hidden_size}; }
    CVecMap block_b1(int k) const { return {b1_ptr(k), shape.hidden_size}; }
    MatMap block_w2(int k) {
        return {b1_ptr(k) + shape.hidden_size, shape.hidden_size, shape.hidden_size};
    }
    CMatMap block_w2(int k) const {
        return {b1_ptr(k) + shape.hidden_size, shape.hidden_size, shape.hidden_size};
    }
    VecMap block_b2(int k) { return {b2_ptr(k), shape.hidden_size}; }
    CVecMap block_b2(int k) const { return {b2_ptr(k), shape.hidden_size}; }
    VecMap block_ln_gain(int k) { return {b2_ptr(k) + shape.hidden_size, shape.hidden_size}; }
    CVecMap block_ln_gain(int k) const {
        return {b2_ptr(k) + shape.hidden_size, shape.hidden_size};
    }
    VecMap block_ln_bias(int k) { return {b2_ptr(k) + 2 * shape.hidden_size, shape.hidden_size}; }
    CVecMap block_ln_bias(int k) const {
        return {b2_ptr(k) + 2 * shape.hidden_size, shape.hidden_size};
    }

    MatMap output_w() {
        return {data.data() + shape.output_w_off(), shape.output_dim, shape.hidden_size};
    }
    CMatMap output_w() const {
        return {data.data() + shape.output_w_off(), shape.output_dim, shape.hidden_size};
    }
    VecMap output_b() { return {data.data() + shape.output_b_off(), shape.output_dim}; }
    CVecMap output_b() const { return {data.data() + shape.output_b_off(), shape.output_dim}; }

    bool all_finite() const {
        CVecMap v(data.data(), static_cast<Eigen::Index>(data.size()));
        return v.allFinite();
    }

private:
    T* b1_ptr(int k) {
        return data.data() + shape.block_off(k) +
               static_cast<std::size_t>(shape.hidden_size) * shape.hidden_size;
    }
    const T* b1_ptr(int k) const {
        return data.data() + shape.block_off(k) +
               static_cast<std::size_t>(shape.hidden_size) * shape.hidden_size;
    }
    T* b2_ptr(int k) {
        return b1_ptr(k) + static_cast<std::size_t>(shape.hidden_size) * shape.hidden_size +
               shape.hidden_size;
    }
    const T* b2_ptr(int k) const {
        return b1_ptr(k) + static_cast<std::size_t>(shape.hidden_size) * shape.hidden_size +
               shape.hidden_size;
    }
};

using MlpParams = MlpParamsT<float>;

// Activations kept from the forward pass for the backward pass.
template <typename T>
struct MlpCache {
    Mat<T> input;       // B x in
    Mat<T> pre_input;   // B x h, before elu
    std::vector<Mat<T>> block_in;   // B x h, input to each block
    std::vector<Mat<T>> pre1;       // B x h, before elu
    std::vector<Mat<T>> pre_ln;     // B x h, after W2, before layernorm
    std::vector<Mat<T>> xhat;       // B x h, normalized rows
    std::vector<Vec<T>> inv_std;    // B, per-row 1/sqrt(var+eps)
    Mat<T> last_hidden;             // B x h, input to the output layer
};

// Seeded init: linear weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases 0,
// layer-norm gain 1, layer-norm bias 0. Draw order is segment order with
// row-major traversal inside each weight matrix.
template <typename T>
MlpParamsT<T> init_mlp(MlpShape shape, Rng& rng);

template <typename T>
Mat<T> mlp_forward(const MlpParamsT<T>& params, const Mat<T>& input);

template <typename T>
Mat<T> mlp_forward(const MlpParamsT<T>& params, const Mat<T>& input, MlpCache<T>& cache);

// Reverse-mode gradients of sum(output .* upstream) w.r.t. every parameter;
// optionally also w.r.t. the input batch.
template <typename T>
MlpParamsT<T> mlp_backward(const MlpParamsT<T>& params, const MlpCache<T>& cache,
                           const Mat<T>& upstream, Mat<T>* input_grad = nullptr);

// single-vector conveniences
template <typename T>
Vec<T> mlp_forward_vec(const MlpParamsT<T>& params, const Vec<T>& input);

template <typename T>
MlpParamsT<T> backprop(const MlpParamsT<T>& params, const Vec<T>& input, const Vec<T>& upstream,
                       Vec<T>* input_grad = nullptr);

template <typename T>
struct AdamStateT {
    std::vector<T> m;  // first moments
    std::vector<T> v;  // second moments
    std::int64_t step = 0;
    T beta1 = T(0.9);
    T beta2 = T(0.999);
    T eps = T(1e-8);

    AdamStateT() = default;
    explicit AdamStateT(std::size_t n) : m(n, T(0)), v(n, T(0)) {}
};

using AdamState = AdamStateT<float>;

// One Adam update with bias correction. Throws TrainingError on non-finite
// gradients.
template <typename T>
void adam_step(AdamStateT<T>& state, T* params, const T* grads, std::size_t n, T lr);

template <typename T>
void adam_step(AdamStateT<T>& state, std::vector<T>& params, const std::vector<T>& grads, T lr) {
    if (params.size() != grads.size()) throw std::invalid_argument("adam_step: size mismatch");
    adam_step(state, params.data(), grads.data(), params.size(), lr);
}

template <typename T>
void adam_step(AdamStateT<T>& state, AlignedVec<T>& params, const AlignedVec<T>& grads, T lr) {
    if (params.size() != grads.size()) throw std::invalid_argument("adam_step: size mismatch");
    adam_step(state, params.data(), grads.data(), params.size(), lr);
}

}  // namespace ohs::nn
