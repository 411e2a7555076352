#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "mildlab/error.hpp"
#include "mildlab/parallel.hpp"
#include "mildlab/random.hpp"
#include "mildlab/solver.hpp"

using namespace mildlab;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double c : v) x[i++] = c;
    return x;
}

EvolutionProblem wiener_problem(SpectralOperator op, DriftMap drift, DiffusionMap diffusion, Eigen::VectorXd q,
                                HVector u0, TimeGrid grid) {
    return {std::move(op), std::move(drift), MartingaleCoupling{std::move(diffusion), QWienerDriver{std::move(q)}},
            InitialDatum{std::move(u0)}, grid};
}

EvolutionProblem prm_problem(SpectralOperator op, DriftMap drift, JumpMap jump, HVector u0, TimeGrid grid,
                             double p = 2.0) {
    return {std::move(op), std::move(drift), PoissonCoupling{std::move(jump)}, InitialDatum{std::move(u0)}, grid, p};
}

struct Moments {
    double mean = 0.0, var = 0.0;
};

Moments moments(const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v;
    const double m = s / x.size();
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return {m, ss / (x.size() - 1)};
}

}  // namespace

TEST(Martingale, PureSemigroup) {
    TimeGrid grid(1.0, 20);
    auto p = wiener_problem(SpectralOperator::diagonal(vec({0.5, 3.0})), DriftMap::zero(), DiffusionMap::zero(2, 2),
                            vec({1.0, 1.0}), vec({1.0, -2.0}), grid);
    auto path = solve_mild_martingale(p, sample_wiener_path({vec({1.0, 1.0})}, grid, 1));
    for (int k = 0; k <= 20; ++k) {
        EXPECT_NEAR(path(k, 0), std::exp(-0.5 * grid.time(k)), 1e-14);
        EXPECT_NEAR(path(k, 1), -2.0 * std::exp(-3.0 * grid.time(k)), 1e-14);
    }
}

TEST(Martingale, OrnsteinUhlenbeckVariance) {
    TimeGrid grid(1.0, 200);
    auto p = wiener_problem(SpectralOperator::diagonal(vec({1.0})), DriftMap::zero(),
                            builtin_diffusion("additive_constant", {1.0, {}, {}}, Eigen::MatrixXd::Identity(1, 1), 1),
                            vec({1.0}), vec({0.0}), grid);
    const int n = 4000;
    std::vector<double> end(n);
    for (int i = 0; i < n; ++i) end[i] = solve_mild_martingale(p, sample_wiener_path({vec({1.0})}, grid, stream_id(3, 0, i)))(200, 0);
    const Moments m = moments(end);
    const double exact = (1.0 - std::exp(-2.0)) / 2.0;
    EXPECT_NEAR(m.var, exact, 3.0 * exact * std::sqrt(2.0 / n));
}

TEST(Martingale, OpaqueLinearDriftFirstOrder) {
    const double a = 1.0, c = 0.7, u0 = 2.0;
    DriftMap opaque("opaque", [c](const HVector& u) -> HVector { return c * u; }, c);
    const double exact = std::exp(-(a + c)) * u0;
    double prev = 0.0;
    for (int steps : {20, 40, 80, 160}) {
        TimeGrid grid(1.0, steps);
        auto p = wiener_problem(SpectralOperator::diagonal(vec({a})), opaque, DiffusionMap::zero(1, 1), vec({1.0}),
                                vec({u0}), grid);
        const double err = std::abs(solve_mild_martingale(p, sample_wiener_path({vec({1.0})}, grid, 1))(steps, 0) - exact);
        if (prev > 0.0) {
            EXPECT_NEAR(prev / err, 2.0, 0.1);
        }
        prev = err;
    }
}

TEST(Martingale, DeclaredLinearPartIsExact) {
    TimeGrid grid(1.0, 7);
    auto p = wiener_problem(SpectralOperator::diagonal(vec({1.0, 4.0})), builtin_drift("linear", {0.7, {}, {}}, 2),
                            DiffusionMap::zero(2, 1), vec({1.0}), vec({2.0, 1.0}), grid);
    auto path = solve_mild_martingale(p, sample_wiener_path({vec({1.0})}, grid, 1));
    EXPECT_NEAR(path(7, 0), 2.0 * std::exp(-1.7), 1e-14);
    EXPECT_NEAR(path(7, 1), std::exp(-4.7), 1e-14);
}

TEST(Martingale, ZeroNoiseMatchesDeterministic) {
    TimeGrid grid(2.0, 50);
    auto op = SpectralOperator::dense_seeded(vec({0.0, 1.0, 9.0}), 5);
    FamilyParams b;
    b.offset = vec({0.3, -1.0, 2.0});
    auto p = wiener_problem(op, builtin_drift("additive_constant", b, 3), DiffusionMap::zero(3, 2), vec({1.0, 1.0}),
                            vec({1.0, 2.0, 3.0}), grid);
    auto lhs = solve_mild_martingale(p, sample_wiener_path({vec({1.0, 1.0})}, grid, 4));
    auto rhs = solve_deterministic(op, [&](double) -> HVector { return -b.offset; }, vec({1.0, 2.0, 3.0}), grid);
    EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Martingale, QuasiContractive) {
    TimeGrid grid(3.0, 30);
    auto op = SpectralOperator::dense_seeded(vec({-0.4, 0.0, 2.0}), 6, 0.4);
    auto p = wiener_problem(op, DriftMap::zero(), DiffusionMap::zero(3, 1), vec({1.0}), vec({1.0, -1.0, 0.5}), grid);
    auto path = solve_mild_martingale(p, sample_wiener_path({vec({1.0})}, grid, 1));
    const double n0 = vec({1.0, -1.0, 0.5}).norm();
    for (int k = 0; k <= 30; ++k) EXPECT_LE(path.row(k).norm(), std::exp(0.4 * grid.time(k)) * n0 * (1 + 1e-12));
}

TEST(Martingale, GridRefinementConsistency) {
    auto op = SpectralOperator::heat(3);
    auto diff = builtin_diffusion("additive_constant", {1.0, {}, {}}, Eigen::MatrixXd::Identity(3, 3), 3);
    const int n = 400;
    std::vector<double> gap_coarse(n), gap_fine(n);
    for (int i = 0; i < n; ++i) {
        auto finest = sample_wiener_path({vec({1, 1, 1})}, TimeGrid(1.0, 200), stream_id(8, 0, i));
        DiscretePath sol[3];
        for (int level = 0; level < 3; ++level) {
            const int factor = 4 >> level;  // 50, 100, 200 steps
            auto noise = coarsen(finest, factor);
            auto p = wiener_problem(op, DriftMap::zero(), diff, vec({1, 1, 1}), vec({1, 1, 1}), noise.grid);
            sol[level] = solve_mild_martingale(p, noise);
        }
        double g0 = 0.0, g1 = 0.0;
        for (int k = 0; k <= 50; ++k) {
            g0 = std::max(g0, (sol[0].row(k) - sol[1].row(2 * k)).norm());
            g1 = std::max(g1, (sol[1].row(2 * k) - sol[2].row(4 * k)).norm());
        }
        gap_coarse[i] = g0 * g0;
        gap_fine[i] = g1 * g1;
    }
    const double ratio = std::sqrt(moments(gap_coarse).mean / moments(gap_fine).mean);
    // Strong order 1/2 gives sqrt(2); allow a wide band.
    EXPECT_GT(ratio, 1.15);
    EXPECT_LT(ratio, 2.2);
}

TEST(Martingale, Mismatches) {
    TimeGrid grid(1.0, 4);
    auto p = wiener_problem(SpectralOperator::diagonal(vec({1.0})), DriftMap::zero(), DiffusionMap::zero(1, 1),
                            vec({1.0}), vec({0.0}), grid);
    EXPECT_THROW(solve_mild_martingale(p, sample_prm_path({vec({1.0}), vec({1.0})}, grid, 1)), DriverMismatch);
    EXPECT_THROW(solve_mild_martingale(p, sample_wiener_path({vec({1.0})}, TimeGrid(1.0, 5), 1)), DriverMismatch);
    EXPECT_THROW(solve_mild_poisson(p, sample_wiener_path({vec({1.0})}, grid, 1)), DriverMismatch);
    auto mult = wiener_problem(SpectralOperator::diagonal(vec({1.0})), DriftMap::zero(),
                               builtin_diffusion("diagonal_multiplicative", {0.5, {}, {}}, Eigen::MatrixXd::Identity(1, 1), 1),
                               vec({1.0}), vec({0.0}), grid);
    mult.p = 4.0;
    EXPECT_THROW(mult.validate(), HypothesisViolated);
    mult.p = 2.0;
    EXPECT_NO_THROW(mult.validate());
    auto bad = wiener_problem(SpectralOperator::diagonal(vec({-1.0}), 0.5), DriftMap::zero(), DiffusionMap::zero(1, 1),
                              vec({1.0}), vec({0.0}), grid);
    EXPECT_THROW(bad.validate(), NotQuasiMonotone);
}

TEST(Poisson, ZeroIntensityMatchesDeterministic) {
    TimeGrid grid(1.0, 30);
    PoissonRandomMeasureDriver marks{vec({1.0, -1.0}), vec({0.0, 0.0})};
    auto g = builtin_jump("diagonal_multiplicative", {0.5, vec({1.0, 1.0}), {}}, marks, 2.0, 2);
    FamilyParams b;
    b.offset = vec({1.0, 0.5});
    auto op = SpectralOperator::diagonal(vec({2.0, 5.0}));
    auto p = prm_problem(op, builtin_drift("additive_constant", b, 2), g, vec({1.0, 1.0}), grid);
    auto lhs = solve_mild_poisson(p, sample_prm_path(marks, grid, 2));
    auto rhs = solve_deterministic(op, [&](double) -> HVector { return -b.offset; }, vec({1.0, 1.0}), grid);
    EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Poisson, ConstantJumpsPathwiseAndMean) {
    TimeGrid grid(2.0, 10);
    PoissonRandomMeasureDriver marks{vec({1.0}), vec({1.5})};
    FamilyParams gp;
    gp.offset = vec({0.4, -0.2});
    auto g = builtin_jump("additive_constant", gp, marks, 2.0, 2);
    auto p = prm_problem(SpectralOperator::diagonal(vec({0.0, 0.0})), DriftMap::zero(), g, vec({1.0, 1.0}), grid);
    const int n = 4000;
    std::vector<double> end(n);
    for (int i = 0; i < n; ++i) {
        auto noise = sample_prm_path(marks, grid, stream_id(10, 0, i));
        auto path = solve_mild_poisson(p, noise);
        const double count = static_cast<double>(noise.events.size());
        HVector exact = vec({1.0, 1.0}) + gp.offset * (count - 1.5 * 2.0);
        ASSERT_LT((path.row(10).transpose() - exact).norm(), 1e-12);
        end[i] = path(10, 0);
    }
    const Moments m = moments(end);
    EXPECT_NEAR(m.mean, 1.0, 3.0 * std::sqrt(m.var / n));
}

TEST(Poisson, LinearMeanEquation) {
    TimeGrid grid(1.0, 40);
    PoissonRandomMeasureDriver marks{vec({1.0}), vec({1.0})};
    FamilyParams gp;
    gp.offset = vec({1.0, 0.0});
    auto g = builtin_jump("additive_constant", gp, marks, 2.0, 2);
    auto p = prm_problem(SpectralOperator::diagonal(vec({1.0, 1.0})), DriftMap::zero(), g, vec({0.5, 1.0}), grid);
    const int n = 4000;
    std::vector<double> end(n);
    for (int i = 0; i < n; ++i) end[i] = solve_mild_poisson(p, sample_prm_path(marks, grid, stream_id(11, 0, i)))(40, 0);
    const Moments m = moments(end);
    // Mean solves u' + u = 0.
    EXPECT_NEAR(m.mean, 0.5 * std::exp(-1.0), 3.0 * std::sqrt(m.var / n));
}

TEST(Poisson, OutputIsPostJump) {
    TimeGrid grid(1.0, 4);
    PoissonRandomMeasureDriver marks{vec({2.0}), vec({1.0})};
    auto g = builtin_jump("additive_constant", {1.0, {}, {}}, marks, 2.0, 1);
    auto p = prm_problem(SpectralOperator::diagonal(vec({0.0})), DriftMap::zero(), g, vec({0.0}), grid);
    NoisePath noise;
    noise.kind = NoiseKind::prm;
    noise.grid = grid;
    noise.weights = marks.weights;
    noise.events = {{0.5, 0}, {1.0, 0}};
    auto path = solve_mild_poisson(p, noise);
    // Compensator -m z t = -2t; jumps of +2 at t = 0.5 and t = 1.
    EXPECT_NEAR(path(2, 0), -1.0 + 2.0, 1e-14);
    EXPECT_NEAR(path(4, 0), -2.0 + 4.0, 1e-14);
}

TEST(Deterministic, Examples) {
    auto op1 = SpectralOperator::diagonal(vec({1.0}));
    auto unit = [](double) -> HVector { return vec({1.0}); };
    TimeGrid grid(1.0, 10);
    EXPECT_NEAR(solve_deterministic(op1, unit, vec({0.0}), grid)(10, 0), 1.0 - std::exp(-1.0), 1e-14);
    auto decay = solve_deterministic(op1, [](double) -> HVector { return vec({0.0}); }, vec({3.0}), grid);
    EXPECT_NEAR(decay(10, 0), 3.0 * std::exp(-1.0), 1e-14);
    auto op0 = SpectralOperator::diagonal(vec({0.0}));
    for (int steps : {10, 100, 1000}) {
        TimeGrid g(2.0, steps);
        const double u = solve_deterministic(op0, [](double t) -> HVector { return vec({t}); }, vec({0.0}), g)(steps, 0);
        EXPECT_NEAR(u, 2.0, 2.0 * g.dt() * 1.0001);
    }
}

TEST(Convolution, ZeroIntegrand) {
    TimeGrid grid(1.0, 10);
    auto y = stochastic_convolution(SpectralOperator::heat(2), [](double) { return Eigen::MatrixXd::Zero(2, 1); },
                                    sample_wiener_path({vec({1.0})}, grid, 1));
    EXPECT_EQ(y.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Convolution, ScalarDirectSummation) {
    TimeGrid grid(1.0, 25);
    const double a = 2.5;
    auto noise = sample_wiener_path({vec({0.8})}, grid, 12);
    auto b = [](double t) { return Eigen::MatrixXd::Constant(1, 1, 1.0 + std::sin(3.0 * t)); };
    auto y = stochastic_convolution(SpectralOperator::diagonal(vec({a})), b, noise);
    for (int k = 0; k <= 25; ++k) {
        double direct = 0.0;
        for (int j = 0; j < k; ++j) direct += std::exp(-a * (grid.time(k) - grid.time(j))) * b(grid.time(j))(0, 0) * noise.increments(j, 0);
        EXPECT_NEAR(y(k, 0), direct, 1e-12);
    }
}

TEST(Convolution, MatchesSolverWithZeroDrift) {
    TimeGrid grid(1.0, 30);
    auto op = SpectralOperator::dense_seeded(vec({1.0, 2.0, 7.0}), 13);
    Eigen::MatrixXd b0(3, 2);
    b0 << 1, 0, 0.5, 1, -1, 2;
    auto noise = sample_wiener_path({vec({1.0, 0.3})}, grid, 9);
    auto y = stochastic_convolution(op, [&](double) { return b0; }, noise);
    FamilyParams bp;
    bp.matrix = b0;
    auto p = wiener_problem(op, DriftMap::zero(), builtin_diffusion("additive_constant", bp, vec({1.0, 0.3}).asDiagonal(), 3),
                            vec({1.0, 0.3}), HVector::Zero(3), grid);
    EXPECT_LT((y - solve_mild_martingale(p, noise)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Convolution, ItoIsometryWithoutSemigroup) {
    TimeGrid grid(1.0, 10);
    Eigen::VectorXd q = vec({1.0, 0.5});
    auto b = [](double t) {
        Eigen::MatrixXd m(2, 2);
        m << 1.0, t, 0.0, t < 0.5 ? 1.0 : -2.0;
        return m;
    };
    double expected = 0.0;
    for (int k = 0; k < 10; ++k) expected += (b(grid.time(k)) * q.cwiseSqrt().asDiagonal()).squaredNorm() * grid.dt();
    const int n = 10000;
    std::vector<double> sq(n);
    auto zero_op = SpectralOperator::diagonal(vec({0.0, 0.0}));
    for (int i = 0; i < n; ++i) sq[i] = stochastic_convolution(zero_op, b, sample_wiener_path({q}, grid, stream_id(14, 0, i))).row(10).squaredNorm();
    const Moments m = moments(sq);
    EXPECT_NEAR(m.mean, expected, 3.0 * std::sqrt(m.var / n));
}

TEST(Convolution, PoissonDirectSum) {
    TimeGrid grid(1.0, 8);
    PoissonRandomMeasureDriver marks{vec({-1.0, 2.0}), vec({2.0, 1.0})};
    auto noise = sample_prm_path(marks, grid, 77);
    ASSERT_FALSE(noise.events.empty());
    // A = 0: Y(T) = sum of jumps - T * sum_z g(z) m(z) for time-independent g.
    auto g = [](double, double z) -> HVector { return vec({z, z * z}); };
    auto y = stochastic_convolution(SpectralOperator::diagonal(vec({0.0, 0.0})), g, marks, noise);
    HVector expect = HVector::Zero(2);
    for (const auto& e : noise.events) expect += g(e.time, marks.marks[e.mark]);
    for (int i = 0; i < 2; ++i) expect -= marks.weights[i] * g(0.0, marks.marks[i]);
    EXPECT_LT((y.row(8).transpose() - expect).norm(), 1e-12);
}

TEST(Hp, TrivialEnsembles) {
    PathEnsemble zero;
    zero.grid = TimeGrid(1.0, 3);
    zero.paths.assign(5, DiscretePath::Zero(4, 2));
    zero.streams.assign(5, 0);
    EXPECT_EQ(hp_norm_estimate(zero, 2.0).value, 0.0);
    PathEnsemble constant = zero;
    for (auto& p : constant.paths) p.rowwise() = vec({0.0, 2.0}).transpose();
    for (double p : {2.0, 3.0, 4.0}) EXPECT_NEAR(hp_norm_estimate(constant, p).value, 2.0, 1e-15);
    EXPECT_NEAR(difference_hp(constant, zero, 2.0).value, 2.0, 1e-15);
    EXPECT_EQ(difference_hp(constant, constant, 2.0).value, 0.0);
    PathEnsemble other = zero;
    other.streams[3] = 9;
    EXPECT_THROW(difference_hp(zero, other, 2.0), CouplingMismatch);
}

TEST(Hp, DoubleEntryOnOrnsteinUhlenbeck) {
    TimeGrid grid(1.0, 50);
    auto p = wiener_problem(SpectralOperator::diagonal(vec({1.0, 3.0})), DriftMap::zero(),
                            builtin_diffusion("additive_constant", {1.0, {}, {}}, Eigen::MatrixXd::Identity(2, 2), 2),
                            vec({1.0, 1.0}), vec({0.5, 0.0}), grid);
    auto ens = simulate_ensemble(p, 300, 21);
    for (double pe : {2.0, 4.0}) {
        double acc = 0.0;
        std::vector<double> vals;
        for (const auto& path : ens.paths) {
            double sup = 0.0;
            for (int k = 0; k <= 50; ++k) sup = std::max(sup, std::sqrt(path(k, 0) * path(k, 0) + path(k, 1) * path(k, 1)));
            vals.push_back(std::pow(sup, pe));
            acc += vals.back();
        }
        const double mean = acc / vals.size();
        auto est = hp_norm_estimate(ens, pe);
        EXPECT_NEAR(est.value, std::pow(mean, 1.0 / pe), 1e-12);
        double ss = 0.0;
        for (double v : vals) ss += (v - mean) * (v - mean);
        const double se_mean = std::sqrt(ss / (vals.size() - 1) / vals.size());
        EXPECT_NEAR(est.std_error, se_mean * std::pow(mean, 1.0 / pe - 1.0) / pe, 1e-12);
    }
}

TEST(Ensemble, WorkerCountInvariance) {
    TimeGrid grid(1.0, 20);
    PoissonRandomMeasureDriver marks{vec({-1.0, 0.5, 1.0}), vec({1.0, 2.0, 1.0})};
    auto g = builtin_jump("diagonal_multiplicative", {0.3, vec({0.1, 0.1}), {}}, marks, 4.0, 2);
    auto p = prm_problem(SpectralOperator::heat(2), builtin_drift("saturating_sigmoid", {1.0, {}, {}}, 2), g,
                         vec({1.0, 1.0}), grid, 4.0);
    p.initial.stddev = 0.2;
    set_worker_count(1);
    auto a = simulate_ensemble(p, 64, 5, 2);
    set_worker_count(4);
    auto b = simulate_ensemble(p, 64, 5, 2);
    set_worker_count(0);
    for (std::size_t i = 0; i < a.paths.size(); ++i) EXPECT_EQ(a.paths[i], b.paths[i]);
    EXPECT_EQ(hp_norm_estimate(a, 4.0).value, hp_norm_estimate(b, 4.0).value);
}

TEST(Csv, EnsembleAndSummary) {
    PathEnsemble ens;
    ens.grid = TimeGrid(1.0, 2);
    ens.paths.push_back(DiscretePath::Zero(3, 2));
    ens.paths[0](2, 1) = 0.1;
    ens.streams = {1};
    std::ostringstream os;
    write_ensemble_csv(os, ens);
    EXPECT_EQ(os.str(), "path_id,t,coord_0,coord_1\n0,0,0,0\n0,0.5,0,0\n0,1,0,0.1\n");
    std::ostringstream ss;
    write_summary_csv(ss, {{"h2", 0.25, 0.01}});
    EXPECT_EQ(ss.str(), "statistic,value,stderr\nh2,0.25,0.01\n");
}
