#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "unlearn/nn/losses.hpp"

using namespace unlearn;

namespace {

Tensor logits_of(std::vector<std::vector<double>> rows) {
    const std::size_t n = rows.front().size();
    std::vector<double> v;
    for (auto& r : rows) v.insert(v.end(), r.begin(), r.end());
    return Tensor({rows.size(), n}, std::move(v));
}

ProbDist dist_of(std::vector<std::vector<double>> rows) {
    ProbDist p{rows.size(), rows.front().size(), {}};
    for (auto& r : rows) p.probs.insert(p.probs.end(), r.begin(), r.end());
    return p;
}

// Oracle: direct long-double evaluation of exp(z/tau) / sum exp(z/tau), no max shift.
std::vector<double> naive_softmax(const std::vector<double>& z, double tau) {
    long double s = 0;
    for (double v : z) s += std::exp(static_cast<long double>(v) / tau);
    std::vector<double> out;
    for (double v : z) out.push_back(static_cast<double>(std::exp(static_cast<long double>(v) / tau) / s));
    return out;
}

} // namespace

TEST(Softmax, SymmetricPair) {
    const auto p = softmax_with_temperature(logits_of({{0, 0}}), 1.0);
    EXPECT_DOUBLE_EQ(p.probs[0], 0.5);
    EXPECT_DOUBLE_EQ(p.probs[1], 0.5);
}

TEST(Softmax, HugeTemperatureIsUniform) {
    const auto p = softmax_with_temperature(logits_of({{1, 2, 3}}), 1e6);
    for (double v : p.probs) EXPECT_NEAR(v, 1.0 / 3.0, 1e-5);
}

TEST(Softmax, TemperatureTwo) {
    const auto p = softmax_with_temperature(logits_of({{2, 0}}), 2.0);
    const double e = std::exp(1.0);
    EXPECT_NEAR(p.probs[0], e / (e + 1), 1e-12);
    EXPECT_NEAR(p.probs[1], 1 / (e + 1), 1e-12);
    EXPECT_NEAR(p.probs[0], 0.73106, 1e-5);
}

TEST(Softmax, MatchesNaiveOracle) {
    Rng rng = make_rng({17});
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> z(7);
        for (double& v : z) v = uniform(rng, -20, 20);
        const double tau = uniform(rng, 0.5, 5.0);
        const auto p = softmax_with_temperature(logits_of({z}), tau);
        const auto ref = naive_softmax(z, tau);
        for (std::size_t j = 0; j < z.size(); ++j) EXPECT_NEAR(p.probs[j], ref[j], 1e-12 + 1e-10 * ref[j]);
    }
}

TEST(Softmax, RejectsNonPositiveTemperature) {
    EXPECT_THROW(softmax_with_temperature(logits_of({{1, 2}}), 0.0), std::invalid_argument);
    EXPECT_THROW(softmax_with_temperature(logits_of({{1, 2}}), -1.0), std::invalid_argument);
}

TEST(SoftmaxProperty, RowsSumToOneAndNonNegative) {
    Rng rng = make_rng({1});
    for (int trial = 0; trial < 2000; ++trial) {
        const double tau = std::exp(uniform(rng, std::log(0.1), std::log(100.0)));
        std::vector<double> z(10);
        for (double& v : z) v = uniform(rng, -100, 100);
        const auto p = softmax_with_temperature(logits_of({z}), tau);
        const double sum = std::accumulate(p.probs.begin(), p.probs.end(), 0.0);
        ASSERT_NEAR(sum, 1.0, 1e-9) << "tau=" << tau;
        for (double v : p.probs) ASSERT_GE(v, 0.0) << "tau=" << tau;
    }
}

TEST(SoftmaxProperty, PreservesArgmax) {
    Rng rng = make_rng({2});
    for (int trial = 0; trial < 2000; ++trial) {
        const double tau = uniform(rng, 0.1, 100.0);
        std::vector<double> z(10);
        for (double& v : z) v = uniform(rng, -50, 50);
        const auto p = softmax_with_temperature(logits_of({z}), tau);
        ASSERT_EQ(std::max_element(p.probs.begin(), p.probs.end()) - p.probs.begin(),
                  std::max_element(z.begin(), z.end()) - z.begin());
    }
}

TEST(KL, IdentityIsZero) {
    const auto p = dist_of({{0.2, 0.3, 0.5}});
    EXPECT_NEAR(kl_divergence(p, p), 0.0, 1e-12);
}

TEST(KL, PointMassAgainstUniform) {
    EXPECT_NEAR(kl_divergence(dist_of({{1, 0}}), dist_of({{0.5, 0.5}})), std::log(2.0), 1e-12);
    EXPECT_NEAR(kl_divergence(dist_of({{1, 0}}), dist_of({{0.5, 0.5}})), 0.693147, 1e-6);
}

TEST(KL, BatchMean) {
    const auto p = dist_of({{1, 0}, {0.5, 0.5}});
    const auto q = dist_of({{0.5, 0.5}, {0.5, 0.5}});
    EXPECT_NEAR(kl_divergence(p, q), std::log(2.0) / 2, 1e-12);
}

TEST(KL, ShapeMismatchThrows) {
    EXPECT_THROW(kl_divergence(dist_of({{0.5, 0.5}}), dist_of({{0.2, 0.3, 0.5}})), ShapeError);
}

TEST(KLProperty, NonNegativeAndZeroOnlyWhenEqual) {
    Rng rng = make_rng({3});
    for (int trial = 0; trial < 10000; ++trial) {
        std::vector<double> zp(5), zq(5);
        for (double& v : zp) v = uniform(rng, -5, 5);
        for (double& v : zq) v = uniform(rng, -5, 5);
        const auto p = softmax_with_temperature(logits_of({zp}), 1.0);
        const auto q = softmax_with_temperature(logits_of({zq}), 1.0);
        ASSERT_GE(kl_divergence(p, q), 0.0);
        ASSERT_NEAR(kl_divergence(p, p), 0.0, 1e-12);
    }
}

TEST(KLToTeacher, GradientFormula) {
    const auto teacher = dist_of({{0.7, 0.2, 0.1}, {0.1, 0.1, 0.8}});
    const Tensor z = logits_of({{0.3, -1.0, 2.0}, {1.0, 0.0, -0.5}});
    const double tau = 2.0;
    const auto r = kl_to_teacher(teacher, z, tau);
    const auto q = softmax_with_temperature(z, tau);
    EXPECT_NEAR(r.value, kl_divergence(teacher, q), 1e-14);
    for (std::size_t k = 0; k < 6; ++k) EXPECT_NEAR(r.grad_logits[k], (q.probs[k] - teacher.probs[k]) / (tau * 2), 1e-15);
    const auto scaled = kl_to_teacher(teacher, z, tau, true);
    EXPECT_NEAR(scaled.value, 4.0 * r.value, 1e-14);
    EXPECT_NEAR(scaled.grad_logits[0], 4.0 * r.grad_logits[0], 1e-15);
}

TEST(CrossEntropy, UniformLogits) {
    const auto r = cross_entropy(Tensor({1, 10}, 0.0), std::vector<int>{4});
    EXPECT_NEAR(r.value, std::log(10.0), 1e-12);
    EXPECT_NEAR(r.value, 2.302585, 1e-6);
}

TEST(CrossEntropy, SaturatedCorrect) {
    Tensor z({1, 10}, 0.0);
    z[3] = 1e3;
    EXPECT_LT(cross_entropy(z, std::vector<int>{3}).value, 1e-6);
}

TEST(CrossEntropy, TwoClassValue) {
    const auto r = cross_entropy(logits_of({{1, 0}}), std::vector<int>{1});
    EXPECT_NEAR(r.value, -std::log(1 / (1 + std::exp(1.0))), 1e-12);
    EXPECT_NEAR(r.value, 1.313262, 1e-6);
}

TEST(CrossEntropy, GradientAtUniformTwoClass) {
    const auto r = cross_entropy(logits_of({{0, 0}}), std::vector<int>{0});
    EXPECT_DOUBLE_EQ(r.grad_logits[0], -0.5);
    EXPECT_DOUBLE_EQ(r.grad_logits[1], 0.5);
}

TEST(CrossEntropy, OutOfRangeLabelThrows) {
    EXPECT_THROW(cross_entropy(logits_of({{1, 0}}), std::vector<int>{2}), std::out_of_range);
    EXPECT_THROW(cross_entropy(logits_of({{1, 0}}), std::vector<int>{-1}), std::out_of_range);
}

TEST(CrossEntropyProperty, EqualsKLFromOneHot) {
    Rng rng = make_rng({4});
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> z(6);
        for (double& v : z) v = uniform(rng, -10, 10);
        const int y = static_cast<int>(uniform_index(rng, 6));
        std::vector<double> onehot(6, 0.0);
        onehot[static_cast<std::size_t>(y)] = 1.0;
        const double kl = kl_divergence(dist_of({onehot}), softmax_with_temperature(logits_of({z}), 1.0));
        ASSERT_NEAR(cross_entropy(logits_of({z}), std::vector<int>{y}).value, kl, 1e-9);
    }
}

TEST(TotalLoss, Linearity) {
    EXPECT_DOUBLE_EQ(total_loss(1.0, 0.5, 0.0), 1.0);
    EXPECT_DOUBLE_EQ(total_loss(1.0, 0.5, 1.0), 1.5);
    EXPECT_DOUBLE_EQ(total_loss(0.0, 0.7, 2.0), 1.4);
}

TEST(TotalLoss, AlphaZeroBitEqualsCrossEntropy) {
    const Tensor z = logits_of({{0.3, -1.0, 2.0}, {1.0, 0.0, -0.5}});
    const auto ce = cross_entropy(z, std::vector<int>{2, 0});
    const auto kl = kl_to_teacher(dist_of({{0.7, 0.2, 0.1}, {0.1, 0.1, 0.8}}), z, 2.0);
    const auto t = total_loss(ce, kl, 0.0);
    EXPECT_EQ(t.value, ce.value);
    EXPECT_EQ(t.grad_logits.values, ce.grad_logits.values);
    const auto t1 = total_loss(ce, kl, 0.5);
    EXPECT_DOUBLE_EQ(t1.value, ce.value + 0.5 * kl.value);
    for (std::size_t k = 0; k < 6; ++k)
        EXPECT_DOUBLE_EQ(t1.grad_logits[k], ce.grad_logits[k] + 0.5 * kl.grad_logits[k]);
}
