#pragma once

#include <Eigen/Core>
#include <utility>

#include "ohs/nn.hpp"

namespace ohs {

// Evenly spaced value support z_0..z_{n-1}.
struct AtomGrid {
    double v_min = 0.0;
    double v_max = 1.0;
    int n_atoms = 51;

    bool operator==(const AtomGrid&) const = default;

    double delta() const { return (v_max - v_min) / (n_atoms - 1); }
    double atom(int i) const { return v_min + i * delta(); }
    Eigen::VectorXd atoms() const {
        return Eigen::VectorXd::LinSpaced(n_atoms, v_min, v_max);
    }
    void validate() const;
};

struct CategoricalDistribution {
    AtomGrid grid;
    Eigen::VectorXd probs;

    static CategoricalDistribution uniform(const AtomGrid& g);
    void validate() const;
};

double dist_mean(const CategoricalDistribution& dist);

// Distributional Bellman target: each atom moves to
// clamp(reward + discount * z_i, v_min, v_max) and its mass is split linearly
// between the two neighboring atoms of the output grid.
CategoricalDistribution project(double reward, double discount,
                                const CategoricalDistribution& target);

// loss = -sum_i t_i log softmax(logits)_i; gradient w.r.t. logits is
// softmax(logits) - target.
template <typename T>
std::pair<T, nn::Vec<T>> cross_entropy_loss(const nn::Vec<T>& pred_logits,
                                            const nn::Vec<T>& target_probs);

template <typename T>
nn::Vec<T> softmax(const nn::Vec<T>& logits);

// Squared-error variant for the non-distributional critic. The target is a
// constant; no gradient flows through it.
std::pair<double, double> scalar_td_loss(double pred_q, double target_q);

}  // namespace ohs
