#include "ohs/nn.hpp"

#include <cmath>

#include "ohs/errors.hpp"

namespace ohs::nn {

namespace {

template <typename T>
void elu_inplace(Mat<T>& x) {
    x = x.unaryExpr([](T v) { return v > T(0) ? v : std::expm1(v); });
}

// derivative of elu given the pre-activation
template <typename T>
Mat<T> elu_grad(const Mat<T>& pre) {
    return pre.unaryExpr([](T v) { return v > T(0) ? T(1) : std::exp(v); });
}

template <typename T>
void fill_uniform_fanin(Eigen::Map<Mat<T>> w, Rng& rng) {
    const T bound = T(1) / std::sqrt(static_cast<T>(w.cols()));
    for (Eigen::Index r = 0; r < w.rows(); ++r)
        for (Eigen::Index c = 0; c < w.cols(); ++c)
            w(r, c) = static_cast<T>(rng.uniform(-bound, bound));
}

}  // namespace

template <typename T>
MlpParamsT<T> init_mlp(MlpShape shape, Rng& rng) {
    MlpParamsT<T> p(shape);
    fill_uniform_fanin<T>(p.input_w(), rng);
    for (int k = 0; k < shape.num_blocks; ++k) {
        fill_uniform_fanin<T>(p.block_w1(k), rng);
        fill_uniform_fanin<T>(p.block_w2(k), rng);
        p.block_ln_gain(k).setOnes();
    }
    fill_uniform_fanin<T>(p.output_w(), rng);
    return p;
}

template <typename T>
Mat<T> mlp_forward(const MlpParamsT<T>& params, const Mat<T>& input, MlpCache<T>& cache) {
    const auto& s = params.shape;
    if (input.cols() != s.input_dim)
        throw std::invalid_argument("mlp_forward: input has " + std::to_string(input.cols()) +
                                    " columns, expected " + std::to_string(s.input_dim));
    const Eigen::Index batch = input.rows();
    const T eps = T(kLayerNormEps);

    cache.input = input;
    cache.block_in.resize(s.num_blocks);
    cache.pre1.resize(s.num_blocks);
    cache.pre_ln.resize(s.num_blocks);
    cache.xhat.resize(s.num_blocks);
    cache.inv_std.resize(s.num_blocks);

    cache.pre_input.noalias() = input * params.input_w().transpose();
    cache.pre_input.rowwise() += params.input_b().transpose();
    Mat<T> h = cache.pre_input;
    elu_inplace(h);

    for (int k = 0; k < s.num_blocks; ++k) {
        cache.block_in[k] = h;
        cache.pre1[k].noalias() = h * params.block_w1(k).transpose();
        cache.pre1[k].rowwise() += params.block_b1(k).transpose();
        Mat<T> a = cache.pre1[k];
        elu_inplace(a);
        cache.pre_ln[k].noalias() = a * params.block_w2(k).transpose();
        cache.pre_ln[k].rowwise() += params.block_b2(k).transpose();

        // row-wise layer norm with biased variance
        const Mat<T>& z = cache.pre_ln[k];
        Vec<T> mean = z.rowwise().mean();
        Mat<T> centered = z.colwise() - mean;
        Vec<T> var = centered.array().square().rowwise().mean();
        cache.inv_std[k] = (var.array() + eps).rsqrt();
        cache.xhat[k] = centered.array().colwise() * cache.inv_std[k].array();

        Mat<T> normed = cache.xhat[k].array().rowwise() *
                        params.block_ln_gain(k).transpose().array();
        normed.rowwise() += params.block_ln_bias(k).transpose();
        h += normed;
    }

    cache.last_hidden = h;
    Mat<T> out(batch, s.output_dim);
    out.noalias() = h * params.output_w().transpose();
    out.rowwise() += params.output_b().transpose();
    return out;
}

template <typename T>
Mat<T> mlp_forward(const MlpParamsT<T>& params, const Mat<T>& input) {
    MlpCache<T> cache;
    return mlp_forward(params, input, cache);
}

template <typename T>
MlpParamsT<T> mlp_backward(const MlpParamsT<T>& params, const MlpCache<T>& cache,
                           const Mat<T>& upstream, Mat<T>* input_grad) {
    const auto& s = params.shape;
    if (upstream.cols() != s.output_dim || upstream.rows() != cache.input.rows())
        throw std::invalid_argument("mlp_backward: upstream shape mismatch");

    MlpParamsT<T> g(s);
    g.output_w().noalias() = upstream.transpose() * cache.last_hidden;
    g.output_b() = upstream.colwise().sum();

    Mat<T> dh = upstream * params.output_w();  // B x h

    for (int k = s.num_blocks - 1; k >= 0; --k) {
        // residual: dh flows both through the block and straight through
        const Mat<T>& dn = dh;
        g.block_ln_gain(k) = (dn.array() * cache.xhat[k].array()).colwise().sum();
        g.block_ln_bias(k) = dn.colwise().sum();

        Mat<T> dxhat = dn.array().rowwise() * params.block_ln_gain(k).transpose().array();
        Vec<T> mean_dxhat = dxhat.rowwise().mean();
        Vec<T> mean_dxhat_xhat = (dxhat.array() * cache.xhat[k].array()).rowwise().mean();
        Mat<T> dz = ((dxhat.colwise() - mean_dxhat).array() -
                     cache.xhat[k].array().colwise() * mean_dxhat_xhat.array())
                        .colwise() *
                    cache.inv_std[k].array();

        Mat<T> act1 = cache.pre1[k];
        elu_inplace(act1);
        g.block_w2(k).noalias() = dz.transpose() * act1;
        g.block_b2(k) = dz.colwise().sum();

        Mat<T> da = dz * params.block_w2(k);
        Mat<T> dpre1 = da.array() * elu_grad(cache.pre1[k]).array();
        g.block_w1(k).noalias() = dpre1.transpose() * cache.block_in[k];
        g.block_b1(k) = dpre1.colwise().sum();

        dh = dh + (dpre1 * params.block_w1(k)).eval();
    }

    Mat<T> dpre_in = dh.array() * elu_grad(cache.pre_input).array();
    g.input_w().noalias() = dpre_in.transpose() * cache.input;
    g.input_b() = dpre_in.colwise().sum();
    if (input_grad) input_grad->noalias() = dpre_in * params.input_w();
    return g;
}

template <typename T>
Vec<T> mlp_forward_vec(const MlpParamsT<T>& params, const Vec<T>& input) {
    Mat<T> x = input.transpose();
    return mlp_forward(params, x).row(0);
}

template <typename T>
MlpParamsT<T> backprop(const MlpParamsT<T>& params, const Vec<T>& input, const Vec<T>& upstream,
                       Vec<T>* input_grad) {
    MlpCache<T> cache;
    Mat<T> x = input.transpose();
    mlp_forward(params, x, cache);
    Mat<T> up = upstream.transpose();
    Mat<T> ig;
    auto g = mlp_backward(params, cache, up, input_grad ? &ig : nullptr);
    if (input_grad) *input_grad = ig.row(0);
    return g;
}

// Plain loop: together with -ffp-contract=off this keeps the update bitwise
// reproducible whatever the buffers' alignment.
template <typename T>
void adam_step(AdamStateT<T>& state, T* params, const T* grads, std::size_t n, T lr) {
    if (state.m.empty()) {
        state.m.assign(n, T(0));
        state.v.assign(n, T(0));
    }
    if (state.m.size() != n) throw std::invalid_argument("adam_step: moment size mismatch");
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(grads[i]))
            throw ohs::TrainingError("adam_step: non-finite gradients");

    state.step += 1;
    const T one_minus_b1 = T(1) - state.beta1;
    const T one_minus_b2 = T(1) - state.beta2;
    const T bc1 = T(1) - std::pow(state.beta1, static_cast<T>(state.step));
    const T bc2 = T(1) - std::pow(state.beta2, static_cast<T>(state.step));
    T* m = state.m.data();
    T* v = state.v.data();
    for (std::size_t i = 0; i < n; ++i) {
        const T g = grads[i];
        m[i] = state.beta1 * m[i] + one_minus_b1 * g;
        v[i] = state.beta2 * v[i] + one_minus_b2 * (g * g);
        params[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + state.eps);
    }
}

#define OHS_NN_INSTANTIATE(T)                                                             \
    template MlpParamsT<T> init_mlp<T>(MlpShape, Rng&);                                   \
    template Mat<T> mlp_forward<T>(const MlpParamsT<T>&, const Mat<T>&);                  \
    template Mat<T> mlp_forward<T>(const MlpParamsT<T>&, const Mat<T>&, MlpCache<T>&);    \
    template MlpParamsT<T> mlp_backward<T>(const MlpParamsT<T>&, const MlpCache<T>&,      \
                                           const Mat<T>&, Mat<T>*);                       \
    template Vec<T> mlp_forward_vec<T>(const MlpParamsT<T>&, const Vec<T>&);              \
    template MlpParamsT<T> backprop<T>(const MlpParamsT<T>&, const Vec<T>&, const Vec<T>&, \
                                       Vec<T>*);                                          \
    template void adam_step<T>(AdamStateT<T>&, T*, const T*, std::size_t, T);

OHS_NN_INSTANTIATE(float)
OHS_NN_INSTANTIATE(double)

#undef OHS_NN_INSTANTIATE

}  // namespace ohs::nn
