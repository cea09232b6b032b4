#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "test_util.hpp"

using namespace lqmvkl;
using lqmvkl::testing::pi;

namespace {

const qsim::AnsatzParams zero_beta({0.0}, {0.0});

double fd_kernel(std::span<const double> xi, std::span<const double> xj, std::vector<double> theta, std::size_t k,
                 double h) {
    auto up = theta, down = theta;
    up[k] += h;
    down[k] -= h;
    return (quantum_kernel_value(xi, xj, qsim::AnsatzParams::from_flat(up)) -
            quantum_kernel_value(xi, xj, qsim::AnsatzParams::from_flat(down))) /
           (2 * h);
}

}  // namespace

TEST(QuantumKernel, SingleQubitMatchesCosineSquared) {
    auto k = [](double a, double b) { return quantum_kernel_value(std::vector<double>{a}, std::vector<double>{b}, zero_beta); };
    EXPECT_NEAR(k(0.0, pi), 0.0, 1e-12);
    EXPECT_NEAR(k(0.0, pi / 2), 0.5, 1e-12);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-pi, pi), beta(0.0, 2 * pi);
    for (int t = 0; t < 50; ++t) {
        const double a = u(rng), b = u(rng);
        const double want = std::pow(std::cos((a - b) / 2), 2);
        EXPECT_NEAR(k(a, b), want, 1e-12);
        // At d = 1, P = 1 the mixing rotation cancels in the overlap.
        const qsim::AnsatzParams any({beta(rng)}, {beta(rng)});
        EXPECT_NEAR(quantum_kernel_value(std::vector<double>{a}, std::vector<double>{b}, any), want, 1e-12);
    }
}

TEST(QuantumKernel, SelfOverlapAndSymmetry) {
    std::mt19937_64 rng(2);
    for (int t = 0; t < 30; ++t) {
        const auto params = lqmvkl::testing::random_ansatz(3, rng);
        const auto x = lqmvkl::testing::random_features(2, 4, rng);
        EXPECT_NEAR(quantum_kernel_value(row_span(x, 0), row_span(x, 0), params), 1.0, 1e-12);
        const double ab = quantum_kernel_value(row_span(x, 0), row_span(x, 1), params);
        const double ba = quantum_kernel_value(row_span(x, 1), row_span(x, 0), params);
        EXPECT_NEAR(ab, ba, 1e-12);
        EXPECT_GE(ab, 0.0);
        EXPECT_LE(ab, 1.0);
    }
    EXPECT_THROW(quantum_kernel_value(std::vector<double>{0.1}, std::vector<double>{0.1, 0.2}, zero_beta),
                 std::invalid_argument);
}

TEST(QuantumKernel, MatrixExample) {
    FeatureMatrix x(3, 1);
    x << 0.0, pi / 2, pi;
    const auto k = quantum_kernel_matrix(x, zero_beta);
    Eigen::Matrix3d want;
    want << 1, .5, 0, .5, 1, .5, 0, .5, 1;
    EXPECT_LT((k - want).cwiseAbs().maxCoeff(), 1e-12);

    FeatureMatrix same(2, 2);
    same << 0.3, 0.4, 0.3, 0.4;
    EXPECT_LT((quantum_kernel_matrix(same, zero_beta) - Eigen::Matrix2d::Ones()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_THROW(quantum_kernel_matrix(FeatureMatrix(1, 2), zero_beta), std::invalid_argument);
}

TEST(QuantumKernel, CachedStatesAgreeWithOverlapCircuit) {
    std::mt19937_64 rng(3);
    const auto params = lqmvkl::testing::random_ansatz(4, rng);
    const auto x = lqmvkl::testing::random_features(7, 5, rng);
    const auto k = quantum_kernel_matrix(x, params);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = 0; j < x.rows(); ++j)
            EXPECT_NEAR(k(i, j), quantum_kernel_value(row_span(x, i), row_span(x, j), params), 1e-12);
}

TEST(QuantumKernel, SymmetricRangePsd) {
    std::mt19937_64 rng(4);
    for (int t = 0; t < 10; ++t) {
        const auto params = lqmvkl::testing::random_ansatz(1 + t % 4, rng);
        const auto x = lqmvkl::testing::random_features(20, 2 + t % 5, rng);
        const auto k = quantum_kernel_matrix(x, params);
        EXPECT_LE((k - k.transpose()).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_GE(k.minCoeff(), 0.0);
        EXPECT_LE(k.maxCoeff(), 1.0);
        EXPECT_GE(lqmvkl::testing::min_eigenvalue(k), -1e-8);
    }
}

TEST(QuantumKernel, PermutationEquivariance) {
    std::mt19937_64 rng(5);
    const auto params = lqmvkl::testing::random_ansatz(2, rng);
    const auto x = lqmvkl::testing::random_features(9, 3, rng);
    std::vector<int> perm(9);
    for (int i = 0; i < 9; ++i) perm[static_cast<std::size_t>(i)] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    FeatureMatrix xp(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) xp.row(i) = x.row(perm[static_cast<std::size_t>(i)]);
    const auto k = quantum_kernel_matrix(x, params), kp = quantum_kernel_matrix(xp, params);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = 0; j < x.rows(); ++j)
            EXPECT_EQ(kp(i, j), k(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]));
}

TEST(QuantumKernel, CrossKernel) {
    std::mt19937_64 rng(6);
    const auto params = lqmvkl::testing::random_ansatz(2, rng);
    const auto x = lqmvkl::testing::random_features(6, 3, rng);
    EXPECT_LT((cross_kernel_matrix(x, x, params) - quantum_kernel_matrix(x, params)).cwiseAbs().maxCoeff(), 1e-12);

    FeatureMatrix train(2, 1), test(1, 1);
    train << 0.0, pi;
    test << pi / 2;
    const auto c = cross_kernel_matrix(test, train, zero_beta);
    EXPECT_NEAR(c(0, 0), 0.5, 1e-12);
    EXPECT_NEAR(c(0, 1), 0.5, 1e-12);
    EXPECT_THROW(cross_kernel_matrix(FeatureMatrix(1, 2), train, zero_beta), std::invalid_argument);
}

TEST(QuantumKernelGradient, ZeroAtIdenticalInputs) {
    std::mt19937_64 rng(7);
    const auto params = lqmvkl::testing::random_ansatz(3, rng);
    const std::vector<double> x{0.4, 1.2, 2.2};
    EXPECT_LT(quantum_kernel_gradient(x, x, params).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(QuantumKernelGradient, BetaDerivativeVanishesForOneQubit) {
    std::mt19937_64 rng(8);
    for (int t = 0; t < 10; ++t) {
        const auto params = lqmvkl::testing::random_ansatz(1, rng);
        const auto x = lqmvkl::testing::random_features(2, 1, rng);
        const auto g = quantum_kernel_gradient(row_span(x, 0), row_span(x, 1), params);
        EXPECT_NEAR(g[0], 0.0, 1e-12);
    }
}

// Parameter shift, statevector tangents and central differences on 50
// random instances with d <= 4, P <= 3.
TEST(QuantumKernelGradient, ThreeWayAgreement) {
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<std::size_t> dim(1, 4), depth(1, 3);
    for (int t = 0; t < 50; ++t) {
        const auto d = dim(rng), p = depth(rng);
        const auto params = lqmvkl::testing::random_ansatz(p, rng);
        const auto x = lqmvkl::testing::random_features(2, d, rng);
        const auto shift = quantum_kernel_gradient(row_span(x, 0), row_span(x, 1), params);
        const EncodedDataset enc(x, params, true);
        const auto block = enc.gradient_matrix();
        ASSERT_EQ(static_cast<std::size_t>(shift.size()), 2 * p);
        for (std::size_t k = 0; k < 2 * p; ++k) {
            const double fd = fd_kernel(row_span(x, 0), row_span(x, 1), params.flat(), k, 1e-5);
            const double g = shift[static_cast<Eigen::Index>(k)];
            EXPECT_LE(std::abs(g - fd), 1e-5 * std::abs(fd) + 1e-8) << "trial " << t << " k " << k;
            EXPECT_NEAR(block[k](0, 1), g, 1e-10) << "trial " << t << " k " << k;
            EXPECT_EQ(block[k](0, 1), block[k](1, 0));
            EXPECT_EQ(block[k](0, 0), 0.0);
        }
    }
}

TEST(GaussianKernel, Examples) {
    FeatureMatrix x(2, 1);
    x << 0.0, 2.0;
    EXPECT_DOUBLE_EQ(mean_pairwise_distance(x), 2.0);
    const auto k = gaussian_kernel_matrix(x);
    EXPECT_DOUBLE_EQ(k(0, 0), 1.0);
    EXPECT_NEAR(k(0, 1), std::exp(-0.5), 1e-15);

    FeatureMatrix line(3, 1);
    line << 0.0, 1.0, 2.0;
    const auto kl = gaussian_kernel_matrix(line);
    EXPECT_EQ(kl, kl.transpose());
    EXPECT_GE(lqmvkl::testing::min_eigenvalue(kl), -1e-8);
}

TEST(GaussianKernel, DegenerateBandwidth) {
    FeatureMatrix same(3, 2);
    same.setConstant(0.7);
    EXPECT_THROW(gaussian_kernel_matrix(same), std::invalid_argument);
    EXPECT_THROW(gaussian_kernel_matrix(FeatureMatrix(1, 2)), std::invalid_argument);
}

TEST(GaussianKernel, RandomPropertiesAndCrossAgreement) {
    std::mt19937_64 rng(10);
    const auto x = lqmvkl::testing::random_features(25, 4, rng);
    const double sigma = mean_pairwise_distance(x);
    const auto k = gaussian_kernel_matrix(x, sigma);
    EXPECT_LE((k - k.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_GT(k.minCoeff(), 0.0);
    EXPECT_LE(k.maxCoeff(), 1.0);
    EXPECT_GE(lqmvkl::testing::min_eigenvalue(k), -1e-8);
    EXPECT_LT((gaussian_cross_kernel_matrix(x, x, sigma) - k).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(CombineKernels, Examples) {
    const Eigen::Matrix3d i3 = Eigen::Matrix3d::Identity(), ones = Eigen::Matrix3d::Ones();
    const std::vector<KernelMatrix> one{i3};
    EXPECT_EQ(combine_kernels(one, std::vector<double>{1.0}), i3);
    const std::vector<KernelMatrix> two{i3, ones};
    const auto c = combine_kernels(two, std::vector<double>{0.5, 0.5});
    EXPECT_DOUBLE_EQ(c(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(c(0, 1), 0.5);
    EXPECT_THROW(combine_kernels(two, std::vector<double>{1.0}), std::invalid_argument);
    const std::vector<KernelMatrix> bad{i3, Eigen::Matrix2d::Identity()};
    EXPECT_THROW(combine_kernels(bad, std::vector<double>{0.5, 0.5}), std::invalid_argument);
    EXPECT_THROW(combine_kernels(std::vector<KernelMatrix>{}, std::vector<double>{}), std::invalid_argument);

    ViewKernelSet set{two, {}, {{"a", 1}, {"b", 1}}};
    EXPECT_EQ(combine_kernels(set, std::vector<double>{0.5, 0.5}), c);
}

TEST(CombineKernels, ConicCombinationStaysPsd) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> w(0.0, 1.0);
    for (int t = 0; t < 20; ++t) {
        std::vector<KernelMatrix> views;
        std::vector<double> weights;
        for (int m = 0; m < 4; ++m) {
            views.push_back(lqmvkl::testing::random_psd(8, rng, 3));
            weights.push_back(w(rng));
        }
        EXPECT_GE(lqmvkl::testing::min_eigenvalue(combine_kernels(views, weights)), -1e-8);
    }
}

TEST(KernelIo, RoundTrip) {
    std::mt19937_64 rng(12);
    const auto k = quantum_kernel_matrix(lqmvkl::testing::random_features(5, 3, rng), lqmvkl::testing::random_ansatz(2, rng));
    std::stringstream ss;
    write_kernel_matrix(ss, k);
    EXPECT_EQ(read_kernel_matrix(ss), k);
    std::stringstream broken("2 2\n1 0\n0");
    EXPECT_THROW(read_kernel_matrix(broken), std::runtime_error);
}
