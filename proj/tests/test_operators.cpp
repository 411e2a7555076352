#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mildlab/error.hpp"
#include "mildlab/operators.hpp"

using namespace mildlab;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double c : v) x[i++] = c;
    return x;
}

HVector seeded_vector(int d, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n;
    HVector x(d);
    for (int k = 0; k < d; ++k) x[k] = n(rng);
    return x;
}

// Direct dense solve of (I + lambda A) y = x, independent of the spectral path.
HVector lu_resolvent(const SpectralOperator& op, double lambda, const HVector& x) {
    const int d = op.dimension();
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(d, d) + lambda * op.matrix();
    return m.partialPivLu().solve(x);
}

}  // namespace

TEST(Resolvent, ScalarValue) {
    auto op = SpectralOperator::diagonal(vec({2.0}));
    EXPECT_DOUBLE_EQ(resolvent(op, 0.5, vec({1.0}))[0], 0.5);
}

TEST(Resolvent, ZeroOperatorIsIdentity) {
    auto op = SpectralOperator::diagonal(Eigen::VectorXd::Zero(3));
    HVector x = seeded_vector(3, 1);
    for (double lambda : {1e-3, 1.0, 1e3}) EXPECT_EQ(resolvent(op, lambda, x), x);
}

TEST(Resolvent, DenseMatchesLinearSolve) {
    auto op = SpectralOperator::dense_seeded(vec({1.0, 3.0}), 42);
    HVector x = seeded_vector(2, 42);
    EXPECT_LT((resolvent(op, 0.25, x) - lu_resolvent(op, 0.25, x)).norm(), 1e-10);
}

TEST(Resolvent, LambdaGuard) {
    auto op = SpectralOperator::diagonal(vec({-0.5, 1.0}), 0.5);
    EXPECT_THROW(resolvent(op, 2.0, vec({1.0, 1.0})), LambdaOutOfRange);
    EXPECT_THROW(resolvent(op, 3.0, vec({1.0, 1.0})), LambdaOutOfRange);
    EXPECT_THROW(resolvent(op, 0.0, vec({1.0, 1.0})), LambdaOutOfRange);
    EXPECT_NO_THROW(resolvent(op, 1.9, vec({1.0, 1.0})));
    EXPECT_THROW(resolvent(op, 0.5, vec({1.0})), DimensionMismatch);
}

TEST(Yosida, ScalarValue) {
    auto op = SpectralOperator::diagonal(vec({2.0}));
    EXPECT_DOUBLE_EQ(yosida_apply(op, 0.5, vec({1.0}))[0], 1.0);
}

TEST(Yosida, ConvergesToEigenvalue) {
    const double a = 7.0;
    auto op = SpectralOperator::diagonal(vec({a}));
    double prev = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= 8; ++k) {
        const double err = std::abs(yosida_apply(op, std::pow(10.0, -k), vec({1.0}))[0] - a);
        EXPECT_LT(err, prev);
        prev = err;
    }
    EXPECT_LT(prev, 1e-6);
}

TEST(Yosida, DenseEqualsAComposedWithResolvent) {
    auto op = SpectralOperator::dense_seeded(vec({0.5, 2.0, 9.0, 40.0}), 3);
    HVector x = seeded_vector(4, 42);
    for (double lambda : {1e-3, 0.1, 2.0}) {
        HVector oracle = op.matrix() * lu_resolvent(op, lambda, x);
        EXPECT_LT((yosida_apply(op, lambda, x) - oracle).norm(), 1e-10 * (1.0 + oracle.norm()));
    }
}

TEST(Semigroup, ScalarValue) {
    auto op = SpectralOperator::diagonal(vec({1.0}));
    EXPECT_NEAR(semigroup_apply(op, std::log(2.0), vec({1.0}))[0], 0.5, 1e-15);
}

TEST(Semigroup, TimeZeroIsIdentity) {
    auto op = SpectralOperator::dense_seeded(vec({1.0, 2.0, 3.0}), 9);
    HVector x = seeded_vector(3, 2);
    EXPECT_LT((semigroup_apply(op, 0.0, x) - x).norm(), 1e-14);
    EXPECT_THROW(semigroup_apply(op, -1e-3, x), NegativeTime);
}

TEST(Semigroup, Law) {
    auto op = SpectralOperator::heat(6);
    HVector x = seeded_vector(6, 7);
    HVector lhs = semigroup_apply(op, 0.3, semigroup_apply(op, 0.7, x));
    EXPECT_LT((lhs - semigroup_apply(op, 1.0, x)).norm(), 1e-12);
}

TEST(YosidaSemigroup, ClosedForms) {
    auto op = SpectralOperator::diagonal(vec({2.0}));
    EXPECT_NEAR(yosida_semigroup_apply(op, 0.5, 1.0, vec({1.0}))[0], std::exp(-1.0), 1e-15);
    auto op5 = SpectralOperator::diagonal(vec({5.0}));
    EXPECT_NEAR(yosida_semigroup_apply(op5, 0.1, 0.4, vec({2.0}))[0], 2.0 * std::exp(-0.4 * 5.0 / 1.5), 1e-14);
}

TEST(YosidaSemigroup, ApproachesSemigroup) {
    auto op = SpectralOperator::heat(3);
    HVector x = seeded_vector(3, 5);
    double prev = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= 7; ++k) {
        const double err = (yosida_semigroup_apply(op, std::pow(10.0, -k), 0.1, x) - semigroup_apply(op, 0.1, x)).norm();
        EXPECT_LE(err, prev);
        prev = err;
    }
    EXPECT_LT(prev, 1e-5);
}

TEST(Properties, RandomCases) {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int c = 0; c < 100; ++c) {
        const int d = 1 + c % 6;
        const double eta = (c % 3 == 0) ? 0.0 : 0.5 * u(rng);
        Eigen::VectorXd a(d);
        for (int k = 0; k < d; ++k) a[k] = -eta + 50.0 * u(rng) * u(rng);
        const bool dense = c % 2 == 1;
        auto op = dense ? SpectralOperator::dense_seeded(a, 100 + c, eta) : SpectralOperator::diagonal(a, eta);
        const double tol = dense ? 1e-10 : 1e-12;
        const double lambda = (eta > 0.0 ? 0.9 / eta : 10.0) * u(rng) + 1e-6;
        HVector x = seeded_vector(d, 500 + c);

        HVector j = resolvent(op, lambda, x);
        HVector ay = yosida_apply(op, lambda, x);
        const double scale = 1.0 + ay.norm() + x.norm() / lambda;
        EXPECT_LT((ay - (x - j) / lambda).norm(), tol * scale);
        EXPECT_LT((ay - op.matrix() * j).norm(), tol * scale);

        const double bound = 1.0 / (1.0 - lambda * eta);
        EXPECT_LE(j.norm(), bound * x.norm() * (1.0 + 1e-12));
        EXPECT_LE(ay.norm(), bound * (op.matrix() * x).norm() * (1.0 + 1e-12) + 1e-12);

        const double t = u(rng), s = u(rng);
        HVector law = semigroup_apply(op, t, semigroup_apply(op, s, x)) - semigroup_apply(op, t + s, x);
        EXPECT_LT(law.norm(), tol * (1.0 + std::exp(eta * (t + s)) * x.norm()));
        EXPECT_LE(semigroup_apply(op, t, x).norm(), std::exp(eta * t) * x.norm() * (1.0 + 1e-12));
        if (eta == 0.0) {
            EXPECT_LE(yosida_semigroup_apply(op, lambda, t, x).norm(), x.norm() * (1.0 + 1e-12));
        }
    }
}

TEST(Properties, ResolventApproachesIdentity) {
    auto op = SpectralOperator::dense_seeded(vec({0.1, 1.0, 10.0, 100.0}), 11);
    for (unsigned seed = 0; seed < 10; ++seed) {
        HVector x = seeded_vector(4, seed);
        double prev = std::numeric_limits<double>::infinity();
        for (int k = 0; k <= 8; ++k) {
            const double err = (resolvent(op, std::pow(10.0, -k), x) - x).norm();
            EXPECT_LT(err, prev);
            prev = err;
        }
    }
}

TEST(QuasiMonotone, Examples) {
    auto pos = check_quasi_monotone(SpectralOperator::diagonal(vec({1, 2, 3})), 200, 1);
    EXPECT_TRUE(pos.ok);
    EXPECT_GE(pos.worst_margin, 1.0 - 1e-12);
    auto edge = check_quasi_monotone(SpectralOperator::diagonal(vec({-0.5, 1}), 0.5), 200, 1);
    EXPECT_TRUE(edge.ok);
    EXPECT_GE(edge.worst_margin, -1e-12);
    auto bad = check_quasi_monotone(SpectralOperator::diagonal(vec({-1, 2}), 0.5), 200, 1);
    EXPECT_FALSE(bad.ok);
    EXPECT_NEAR(bad.worst_margin, -0.5, 1e-12);
}

TEST(QuasiMonotone, DenseViolationFoundThroughBasis) {
    auto op = SpectralOperator::dense_seeded(vec({-2.0, 5.0, 5.0}), 8, 1.0);
    auto r = check_quasi_monotone(op, 10, 3);
    EXPECT_FALSE(r.ok);
    EXPECT_NEAR(r.worst_margin, -1.0, 1e-10);
}

TEST(ResolventDistance, YosidaScalarClosedForm) {
    auto fam = OperatorFamily::yosida(SpectralOperator::diagonal(vec({2.0})));
    for (int n : {1, 2, 5, 50}) {
        const double bn = 2.0 / (1.0 + 2.0 / n);
        const double expect = std::abs(1.0 / (1.0 + 0.5 * bn) - 0.5);
        EXPECT_NEAR(strong_resolvent_distance(fam, n, 0.5, {vec({1.0})}), expect, 1e-15);
    }
}

TEST(ResolventDistance, ConstantFamilyIsZero) {
    auto fam = OperatorFamily::constant(SpectralOperator::heat(4));
    EXPECT_EQ(strong_resolvent_distance(fam, 7, 0.3, {seeded_vector(4, 1)}), 0.0);
}

TEST(ResolventDistance, GalerkinFixesLowModes) {
    Eigen::VectorXd a = Eigen::VectorXd::LinSpaced(10, 1.0, 10.0);
    auto fam = OperatorFamily::galerkin(SpectralOperator::diagonal(a));
    HVector h = HVector::Zero(10);
    h[0] = 1.3;
    for (int n = 1; n <= 12; ++n) EXPECT_EQ(strong_resolvent_distance(fam, n, 0.5, {h}), 0.0);
}

TEST(ResolventDistance, YosidaFamilyMonotoneToZero) {
    auto fam = OperatorFamily::yosida(SpectralOperator::dense_seeded(vec({1, 4, 9, 16}), 4));
    std::vector<HVector> tests{seeded_vector(4, 1), seeded_vector(4, 2), seeded_vector(4, 3)};
    double prev = std::numeric_limits<double>::infinity();
    for (int n = 1; n <= 4096; n *= 2) {
        const double dist = strong_resolvent_distance(fam, n, 0.2, tests);
        EXPECT_LE(dist, prev);
        prev = dist;
    }
    // Distance is O(lambda_n) = O(1/n).
    EXPECT_LT(prev, 2e-3);
}

TEST(ResolventDistance, LambdaAboveLambda0) {
    auto fam = OperatorFamily::spectral_perturbation(SpectralOperator::diagonal(vec({-0.5, 1.0}), 0.5));
    EXPECT_DOUBLE_EQ(fam.lambda0(), 1.0);
    EXPECT_THROW(strong_resolvent_distance(fam, 1, 1.0, {vec({1, 1})}), LambdaOutOfRange);
}

TEST(Family, MembersStayInEtaClass) {
    auto limit = SpectralOperator::diagonal(vec({-0.5, 0.0, 3.0}), 0.5);
    for (auto fam : {OperatorFamily::spectral_perturbation(limit, {2.0, 1.0}), OperatorFamily::galerkin(limit)}) {
        for (int n = 1; n <= 8; ++n) {
            auto m = fam.member(n);
            EXPECT_LE(m.eta(), limit.eta());
            EXPECT_TRUE(m.quasi_monotone());
        }
    }
    EXPECT_THROW(OperatorFamily::yosida(limit), NotQuasiMonotone);
    EXPECT_THROW(OperatorFamily::constant(SpectralOperator::diagonal(vec({-1.0}), 0.5)), NotQuasiMonotone);
}

TEST(Shift, Examples) {
    auto op = SpectralOperator::diagonal(vec({-0.5, 1.0}), 0.5);
    auto s = shift_operator(op);
    EXPECT_EQ(s.op.eta(), 0.0);
    EXPECT_DOUBLE_EQ(s.op.eigenvalues()[0], 0.0);
    EXPECT_DOUBLE_EQ(s.op.eigenvalues()[1], 1.5);
    EXPECT_DOUBLE_EQ(s.drift_shift, -0.5);

    auto plain = SpectralOperator::diagonal(vec({1.0, 2.0}));
    auto same = shift_operator(plain);
    EXPECT_EQ(same.op.eigenvalues(), plain.eigenvalues());
    EXPECT_EQ(same.drift_shift, 0.0);
}

TEST(Shift, RoundTripSemigroup) {
    auto op = SpectralOperator::dense_seeded(vec({-0.5, 0.2, 4.0}), 21, 0.5);
    auto s = shift_operator(op);
    HVector x = seeded_vector(3, 8);
    for (double t : {0.0, 0.1, 1.0, 3.0}) {
        HVector back = std::exp(0.5 * t) * semigroup_apply(s.op, t, x);
        EXPECT_LT((back - semigroup_apply(op, t, x)).norm(), 1e-10 * (1.0 + x.norm() * std::exp(0.5 * t)));
    }
}

TEST(Operator, RejectsBadInput) {
    EXPECT_THROW(SpectralOperator::diagonal(Eigen::VectorXd()), InvalidOperator);
    EXPECT_THROW(SpectralOperator::diagonal(vec({1.0}), -0.1), InvalidOperator);
    Eigen::MatrixXd skew(2, 2);
    skew << 1.0, 0.1, 0.0, 1.0;
    EXPECT_THROW(SpectralOperator::dense(vec({1, 2}), skew), InvalidOperator);
}
