#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "test_util.hpp"

using namespace lqmvkl;

TEST(Svm, IdentityKernelExample) {
    const std::vector<int> y{1, -1};
    const auto m = svm_fit(Eigen::MatrixXd::Identity(2, 2), y, 1.0);
    ASSERT_EQ(m.alpha.size(), 2u);
    EXPECT_NEAR(m.alpha[0], 1.0, 1e-6);
    EXPECT_NEAR(m.alpha[1], 1.0, 1e-6);
    EXPECT_NEAR(m.bias, 0.0, 1e-6);
    EXPECT_EQ(svm_predict(m, Eigen::MatrixXd::Identity(2, 2)), y);
}

TEST(Svm, IdealKernelSeparatesPerfectly) {
    const auto y = lqmvkl::testing::alternating_labels(20);
    const TargetKernel t(y);
    const Eigen::MatrixXd k = (t.matrix().array() + 1.0) / 2.0;
    const auto m = svm_fit(k, y, 1.0);
    EXPECT_EQ(accuracy(svm_predict(m, k), y), 1.0);
}

TEST(Svm, ContradictoryDuplicatesGiveChance) {
    // Two copies of the same point with opposite labels.
    const std::vector<int> y{1, -1};
    const Eigen::MatrixXd k = Eigen::MatrixXd::Ones(2, 2);
    const auto m = svm_fit(k, y, 1.0);
    EXPECT_DOUBLE_EQ(accuracy(svm_predict(m, k), y), 0.5);
}

TEST(Svm, DualFeasibilityAndCachedDecisions) {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        const auto x = lqmvkl::testing::random_features(30, 3, rng);
        const auto k = gaussian_kernel_matrix(x, 1.0);
        std::vector<int> y(30);
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = x(static_cast<Eigen::Index>(i), 0) + x(static_cast<Eigen::Index>(i), 1) > 3.0 ? 1 : -1;
        y[0] = 1;
        y[1] = -1;
        const double c = trial % 2 == 0 ? 1.0 : 0.1;
        const auto m = svm_fit(k, y, c);
        double balance = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            EXPECT_GE(m.alpha[i], 0.0);
            EXPECT_LE(m.alpha[i], c + 1e-12);
            balance += m.alpha[i] * y[i];
        }
        EXPECT_NEAR(balance, 0.0, 1e-9);
        const auto dec = svm_decision_values(m, k);
        ASSERT_EQ(dec.size(), m.train_decision.size());
        for (std::size_t i = 0; i < dec.size(); ++i) EXPECT_EQ(dec[i], m.train_decision[i]);
    }
}

TEST(Svm, LabelFlipNegatesPredictions) {
    std::mt19937_64 rng(2);
    const auto x = lqmvkl::testing::random_features(24, 2, rng);
    const auto k = gaussian_kernel_matrix(x, 1.0);
    std::vector<int> y(24), flipped(24);
    for (std::size_t i = 0; i < y.size(); ++i) {
        y[i] = x(static_cast<Eigen::Index>(i), 0) > 1.5 ? 1 : -1;
        flipped[i] = -y[i];
    }
    const auto a = svm_fit(k, y, 1.0), b = svm_fit(k, flipped, 1.0);
    const auto xt = lqmvkl::testing::random_features(40, 2, rng);
    const auto kc = gaussian_cross_kernel_matrix(xt, x, 1.0);
    const auto da = svm_decision_values(a, kc), db = svm_decision_values(b, kc);
    const auto pa = svm_predict(a, kc), pb = svm_predict(b, kc);
    for (std::size_t i = 0; i < da.size(); ++i) {
        // Both fits stop at the SMO tolerance, so decisions agree only to that order.
        EXPECT_NEAR(da[i], -db[i], 1e-2);
        if (std::abs(da[i]) > 1e-2) {
            EXPECT_EQ(pa[i], -pb[i]);
        }
    }
}

TEST(Svm, ZeroKernelRowFollowsBias) {
    SvmModel m;
    m.alpha = {0.5, 0.5};
    m.labels = {1, -1};
    m.support = {0, 1};
    m.bias = 0.25;
    EXPECT_EQ(svm_predict(m, Eigen::MatrixXd::Zero(1, 2)), std::vector<int>{1});
    m.bias = 0.0;
    EXPECT_EQ(svm_predict(m, Eigen::MatrixXd::Zero(1, 2)), std::vector<int>{1});
    m.bias = -0.25;
    EXPECT_EQ(svm_predict(m, Eigen::MatrixXd::Zero(1, 2)), std::vector<int>{-1});
}

TEST(Svm, Errors) {
    const std::vector<int> y{1, -1};
    EXPECT_THROW(svm_fit(Eigen::MatrixXd::Identity(3, 3), y, 1.0), std::invalid_argument);
    EXPECT_THROW(svm_fit(Eigen::MatrixXd::Identity(2, 2), y, 0.0), std::invalid_argument);
    const std::vector<int> one_class{1, 1};
    EXPECT_THROW(svm_fit(Eigen::MatrixXd::Identity(2, 2), one_class, 1.0), std::invalid_argument);
    const std::vector<int> bad{1, 0};
    EXPECT_THROW(svm_fit(Eigen::MatrixXd::Identity(2, 2), bad, 1.0), std::invalid_argument);
    const auto m = svm_fit(Eigen::MatrixXd::Identity(2, 2), y, 1.0);
    EXPECT_THROW(svm_predict(m, Eigen::MatrixXd::Zero(1, 3)), std::invalid_argument);
}

TEST(Accuracy, Examples) {
    EXPECT_DOUBLE_EQ(accuracy(std::vector<int>{1, -1, 1, 1}, std::vector<int>{1, -1, -1, 1}), 0.75);
    EXPECT_DOUBLE_EQ(accuracy(std::vector<int>{1}, std::vector<int>{-1}), 0.0);
    EXPECT_THROW(accuracy(std::vector<int>{1}, std::vector<int>{1, 1}), std::invalid_argument);
    EXPECT_THROW(accuracy(std::vector<int>{}, std::vector<int>{}), std::invalid_argument);
}

TEST(SvmModelIo, RoundTrip) {
    std::mt19937_64 rng(3);
    const auto x = lqmvkl::testing::random_features(16, 2, rng);
    const auto k = gaussian_kernel_matrix(x, 1.0);
    const auto y = lqmvkl::testing::alternating_labels(16);
    const auto m = svm_fit(k, y, 1.0);
    std::stringstream ss;
    write_svm_model(ss, m);
    const auto back = read_svm_model(ss);
    EXPECT_EQ(back.alpha, m.alpha);
    EXPECT_EQ(back.labels, m.labels);
    EXPECT_EQ(back.support, m.support);
    EXPECT_EQ(back.bias, m.bias);
    EXPECT_EQ(back.c, m.c);
    EXPECT_EQ(svm_decision_values(back, k), svm_decision_values(m, k));
    std::stringstream bad("c 1\nbias x\n");
    EXPECT_THROW(read_svm_model(bad), std::runtime_error);
}
