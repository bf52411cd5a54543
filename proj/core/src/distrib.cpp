#include "ohs/distrib.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ohs {

void AtomGrid::validate() const {
    if (!(v_min < v_max)) throw std::invalid_argument("AtomGrid: v_min must be < v_max");
    if (n_atoms < 2) throw std::invalid_argument("AtomGrid: n_atoms must be >= 2");
}

CategoricalDistribution CategoricalDistribution::uniform(const AtomGrid& g) {
    g.validate();
    return {g, Eigen::VectorXd::Constant(g.n_atoms, 1.0 / g.n_atoms)};
}

void CategoricalDistribution::validate() const {
    grid.validate();
    if (probs.size() != grid.n_atoms)
        throw std::invalid_argument("CategoricalDistribution: probs size mismatch");
    if ((probs.array() < 0.0).any())
        throw std::invalid_argument("CategoricalDistribution: negative probability");
    if (std::abs(probs.sum() - 1.0) > 1e-6)
        throw std::invalid_argument("CategoricalDistribution: probabilities must sum to 1");
}

double dist_mean(const CategoricalDistribution& dist) {
    return dist.probs.dot(dist.grid.atoms());
}

CategoricalDistribution project(double reward, double discount,
                                const CategoricalDistribution& target) {
    const AtomGrid& g = target.grid;
    const double dz = g.delta();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(g.n_atoms);
    for (int i = 0; i < g.n_atoms; ++i) {
        const double p = target.probs[i];
        if (p == 0.0) continue;
        const double tz = std::clamp(reward + discount * g.atom(i), g.v_min, g.v_max);
        // clamp the grid coordinate too: rounding may push it past the ends
        const double b = std::clamp((tz - g.v_min) / dz, 0.0, double(g.n_atoms - 1));
        const int lo = static_cast<int>(std::floor(b));
        const int hi = static_cast<int>(std::ceil(b));
        if (lo == hi) {
            out[lo] += p;
        } else {
            out[lo] += p * (hi - b);
            out[hi] += p * (b - lo);
        }
    }
    return {g, std::move(out)};
}

template <typename T>
nn::Vec<T> softmax(const nn::Vec<T>& logits) {
    const T m = logits.maxCoeff();
    nn::Vec<T> e = (logits.array() - m).exp();
    return e / e.sum();
}

template <typename T>
std::pair<T, nn::Vec<T>> cross_entropy_loss(const nn::Vec<T>& pred_logits,
                                            const nn::Vec<T>& target_probs) {
    if (pred_logits.size() != target_probs.size())
        throw std::invalid_argument("cross_entropy_loss: length mismatch");
    const T m = pred_logits.maxCoeff();
    nn::Vec<T> shifted = pred_logits.array() - m;
    const T log_z = std::log(shifted.array().exp().sum());
    nn::Vec<T> log_probs = shifted.array() - log_z;
    const T loss = -target_probs.dot(log_probs);
    nn::Vec<T> grad = (log_probs.array().exp() - target_probs.array()).matrix();
    return {loss, std::move(grad)};
}

std::pair<double, double> scalar_td_loss(double pred_q, double target_q) {
    const double diff = pred_q - target_q;
    return {0.5 * diff * diff, diff};
}

template nn::Vec<float> softmax<float>(const nn::Vec<float>&);
template nn::Vec<double> softmax<double>(const nn::Vec<double>&);
template std::pair<float, nn::Vec<float>> cross_entropy_loss<float>(const nn::Vec<float>&,
                                                                    const nn::Vec<float>&);
template std::pair<double, nn::Vec<double>> cross_entropy_loss<double>(const nn::Vec<double>&,
                                                                       const nn::Vec<double>&);

}  // namespace ohs
