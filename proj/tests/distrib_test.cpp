#include "ohs/distrib.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "ohs/rng.hpp"

using namespace ohs;

namespace {

// Independent per-atom two-neighbor mass allocation, written from the
// transport definition without reusing the implementation's helpers.
Eigen::VectorXd oracle_project(double reward, double discount, const AtomGrid& g,
                               const Eigen::VectorXd& probs) {
    const int n = g.n_atoms;
    const double dz = (g.v_max - g.v_min) / (n - 1);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
        double z = g.v_min + i * dz;
        double tz = reward + discount * z;
        if (tz <= g.v_min) {
            out[0] += probs[i];
            continue;
        }
        if (tz >= g.v_max) {
            out[n - 1] += probs[i];
            continue;
        }
        double pos = (tz - g.v_min) / dz;
        int lo = static_cast<int>(pos);
        double frac = pos - lo;
        if (frac == 0.0) {
            out[lo] += probs[i];
        } else {
            out[lo] += probs[i] * (1.0 - frac);
            out[lo + 1] += probs[i] * frac;
        }
    }
    return out;
}

CategoricalDistribution random_dist(const AtomGrid& g, Rng& rng) {
    Eigen::VectorXd p(g.n_atoms);
    for (int i = 0; i < g.n_atoms; ++i) p[i] = rng.uniform(0.0, 1.0);
    p /= p.sum();
    return {g, p};
}

}  // namespace

TEST(AtomGrid, ValidationAndSpacing) {
    AtomGrid g{-2.0, 2.0, 5};
    g.validate();
    EXPECT_DOUBLE_EQ(g.delta(), 1.0);
    EXPECT_DOUBLE_EQ(g.atom(0), -2.0);
    EXPECT_DOUBLE_EQ(g.atom(4), 2.0);
    EXPECT_THROW((AtomGrid{1.0, 1.0, 5}).validate(), std::invalid_argument);
    EXPECT_THROW((AtomGrid{0.0, 1.0, 1}).validate(), std::invalid_argument);
}

TEST(DistMean, PointMassOnAtom) {
    AtomGrid g{0.0, 10.0, 11};
    Eigen::VectorXd p = Eigen::VectorXd::Zero(11);
    p[7] = 1.0;
    EXPECT_DOUBLE_EQ(dist_mean({g, p}), 7.0);
}

TEST(DistMean, UniformOnSymmetricGridIsZero) {
    AtomGrid g{-1.0, 1.0, 51};
    auto d = CategoricalDistribution::uniform(g);
    EXPECT_NEAR(dist_mean(d), 0.0, 1e-12);
}

TEST(DistMean, MatchesBruteForceDotProduct) {
    Rng rng(4);
    AtomGrid g{-3.0, 7.0, 41};
    for (int trial = 0; trial < 100; ++trial) {
        auto d = random_dist(g, rng);
        double expected = 0.0;
        for (int i = 0; i < g.n_atoms; ++i) expected += d.probs[i] * (g.v_min + i * g.delta());
        EXPECT_NEAR(dist_mean(d), expected, 1e-9);
    }
}

TEST(DistMean, LinearInProbs) {
    Rng rng(5);
    AtomGrid g{-1.0, 4.0, 21};
    auto a = random_dist(g, rng);
    auto b = random_dist(g, rng);
    const double lambda = 0.3;
    CategoricalDistribution mix{g, lambda * a.probs + (1 - lambda) * b.probs};
    EXPECT_NEAR(dist_mean(mix), lambda * dist_mean(a) + (1 - lambda) * dist_mean(b), 1e-12);
}

TEST(Project, ZeroRewardUnitDiscountIsIdentity) {
    Rng rng(6);
    AtomGrid g{-2.0, 2.0, 31};
    auto d = random_dist(g, rng);
    auto out = project(0.0, 1.0, d);
    for (int i = 0; i < g.n_atoms; ++i) EXPECT_NEAR(out.probs[i], d.probs[i], 1e-12);
}

TEST(Project, SaturatesToTopAtomWhenRewardPushesAboveRange) {
    AtomGrid g{0.0, 1.0, 11};
    Rng rng(7);
    auto d = random_dist(g, rng);
    auto out = project(5.0, 0.9, d);  // 5 + 0.9*z >= v_max for every atom
    EXPECT_NEAR(out.probs[g.n_atoms - 1], 1.0, 1e-12);
    for (int i = 0; i + 1 < g.n_atoms; ++i) EXPECT_EQ(out.probs[i], 0.0);
}

TEST(Project, TerminalDiscountCollapsesToRewardAtom) {
    AtomGrid g{0.0, 1.0, 11};
    Rng rng(8);
    auto d = random_dist(g, rng);
    auto out = project(0.35, 0.0, d);
    // all mass lands between the atoms bracketing 0.35
    EXPECT_NEAR(out.probs[3], 0.5, 1e-9);
    EXPECT_NEAR(out.probs[4], 0.5, 1e-9);
    EXPECT_NEAR(out.probs.sum(), 1.0, 1e-12);
}

TEST(Project, MatchesStraightLineOracleOnRandomTriples) {
    Rng rng(2024);
    double max_dev = 0.0, max_mass_dev = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        AtomGrid g{rng.uniform(-5.0, 0.0), rng.uniform(0.5, 6.0),
                   3 + static_cast<int>(rng.below(60))};
        auto d = random_dist(g, rng);
        const double r = rng.uniform(-4.0, 4.0);
        const double discount = rng.uniform(0.0, 1.0);
        auto got = project(r, discount, d);
        auto expected = oracle_project(r, discount, g, d.probs);
        max_dev = std::max(max_dev, (got.probs - expected).cwiseAbs().maxCoeff());
        max_mass_dev = std::max(max_mass_dev, std::abs(got.probs.sum() - 1.0));
    }
    EXPECT_LT(max_dev, 1e-9);
    EXPECT_LT(max_mass_dev, 1e-9);
}

TEST(Project, PreservesTransportedMeanWithoutClamping) {
    Rng rng(31);
    AtomGrid g{-10.0, 10.0, 51};
    for (int trial = 0; trial < 200; ++trial) {
        // keep transported support well inside the grid
        const double r = rng.uniform(-1.0, 1.0);
        const double discount = rng.uniform(0.0, 0.8);
        auto d = random_dist(g, rng);
        auto out = project(r, discount, d);
        EXPECT_LE(std::abs(dist_mean(out) - (r + discount * dist_mean(d))),
                  g.delta() / 2 + 1e-9);
    }
}

TEST(CrossEntropy, GradientZeroAtMatchingDistribution) {
    Rng rng(9);
    nn::Vec<double> logits(7);
    for (int i = 0; i < 7; ++i) logits[i] = rng.uniform(-2, 2);
    nn::Vec<double> target = softmax<double>(logits);
    auto [loss, grad] = cross_entropy_loss<double>(logits, target);
    for (int i = 0; i < 7; ++i) EXPECT_NEAR(grad[i], 0.0, 1e-12);
    // at the minimum the loss equals the target entropy
    double entropy = 0.0;
    for (int i = 0; i < 7; ++i) entropy -= target[i] * std::log(target[i]);
    EXPECT_NEAR(loss, entropy, 1e-12);
}

TEST(CrossEntropy, OneHotHighMarginLossVanishes) {
    nn::Vec<double> logits(5);
    logits << 30.0, 0.0, -1.0, 2.0, 1.0;
    nn::Vec<double> target = nn::Vec<double>::Zero(5);
    target[0] = 1.0;
    auto [loss, grad] = cross_entropy_loss<double>(logits, target);
    EXPECT_LT(loss, 1e-9);
    (void)grad;
}

TEST(CrossEntropy, MatchesFiniteDifferences) {
    Rng rng(10);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 4 + static_cast<int>(rng.below(8));
        nn::Vec<double> logits(n), target(n);
        for (int i = 0; i < n; ++i) logits[i] = rng.uniform(-3, 3);
        for (int i = 0; i < n; ++i) target[i] = rng.uniform(0, 1);
        target /= target.sum();
        auto [loss, grad] = cross_entropy_loss<double>(logits, target);
        (void)loss;
        for (int i = 0; i < n; ++i) {
            nn::Vec<double> lp = logits, lm = logits;
            lp[i] += 1e-6;
            lm[i] -= 1e-6;
            const double fd = (cross_entropy_loss<double>(lp, target).first -
                               cross_entropy_loss<double>(lm, target).first) /
                              2e-6;
            const double denom = std::max({std::abs(fd), std::abs(grad[i]), 1e-6});
            EXPECT_LT(std::abs(grad[i] - fd) / denom, 1e-5);
        }
    }
}

TEST(CrossEntropy, NeverBelowTargetEntropy) {
    Rng rng(12);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 3 + static_cast<int>(rng.below(10));
        nn::Vec<double> logits(n), target(n);
        for (int i = 0; i < n; ++i) logits[i] = rng.uniform(-4, 4);
        for (int i = 0; i < n; ++i) target[i] = rng.uniform(0, 1);
        target /= target.sum();
        double entropy = 0.0;
        for (int i = 0; i < n; ++i) entropy -= target[i] * std::log(target[i]);
        EXPECT_GE(cross_entropy_loss<double>(logits, target).first, entropy - 1e-12);
    }
}

TEST(ScalarTdLoss, HandExamplesAndFiniteDifferences) {
    auto [l0, g0] = scalar_td_loss(1.5, 1.5);
    EXPECT_EQ(l0, 0.0);
    EXPECT_EQ(g0, 0.0);

    auto [l1, g1] = scalar_td_loss(3.0, 1.0);
    EXPECT_DOUBLE_EQ(l1, 2.0);
    EXPECT_DOUBLE_EQ(g1, 2.0);

    Rng rng(13);
    for (int trial = 0; trial < 50; ++trial) {
        const double pred = rng.uniform(-5, 5), target = rng.uniform(-5, 5);
        auto [loss, grad] = scalar_td_loss(pred, target);
        (void)loss;
        const double h = 1e-6;
        const double fd =
            (scalar_td_loss(pred + h, target).first - scalar_td_loss(pred - h, target).first) /
            (2 * h);
        EXPECT_NEAR(grad, fd, 1e-8);
    }
}
