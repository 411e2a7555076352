#include <algorithm>
#include <cmath>

#include "mildlab/convergence.hpp"
#include "mildlab/error.hpp"
#include "mildlab/parallel.hpp"
#include "mildlab/random.hpp"

namespace mildlab {

namespace {

void require_linear(const EvolutionProblem& problem) {
    problem.validate();
    if (!problem.drift.is_zero()) throw HypothesisViolated("linear sweeps need f = 0");
    if (!problem.is_additive()) throw HypothesisViolated("linear sweeps need noise independent of the state");
}

// |y_perturbed - y|_{H_p} with both solves on streams (seed, sweep_index, i).
HpEstimate linear_pair_error(const EvolutionProblem& problem, const SpectralOperator& perturbed, int paths,
                             std::uint64_t seed, int sweep_index) {
    EvolutionProblem other = problem;
    other.op = perturbed;
    other.validate();
    const NoiseDriver driver = problem.driver();
    std::vector<double> sups(static_cast<std::size_t>(paths));
    parallel_for(sups.size(), [&](std::size_t i) {
        const std::uint64_t stream = stream_id(seed, static_cast<std::uint64_t>(sweep_index), i);
        const NoisePath path = sample_path(driver, problem.grid, stream);
        const DiscretePath y = solve_mild(problem, path);
        const DiscretePath yp = solve_mild(other, path);
        sups[i] = (yp - y).rowwise().norm().maxCoeff();
    });
    return hp_from_sups(sups, problem.p);
}

void fill_metadata(ConvergenceReport& r, const EvolutionProblem& problem, int paths, std::uint64_t seed) {
    r.p = problem.p;
    r.base_seed = seed;
    r.paths = paths;
    r.steps = problem.grid.steps();
    r.horizon = problem.grid.horizon();
}

}  // namespace

ConvergenceReport run_yosida_sweep(const YosidaSweepSetup& setup) {
    require_linear(setup.problem);
    if (setup.paths < 2) throw std::invalid_argument("sweeps need at least two paths");
    for (std::size_t j = 1; j < setup.lambdas.size(); ++j)
        if (!(setup.lambdas[j] < setup.lambdas[j - 1])) throw std::invalid_argument("lambda list must decrease");
    ConvergenceReport r;
    r.theorem_id = setup.theorem_id;
    r.param_name = "lambda";
    r.tolerance = setup.tolerance;
    r.family = "yosida";
    fill_metadata(r, setup.problem, setup.paths, setup.base_seed);
    for (std::size_t j = 0; j < setup.lambdas.size(); ++j) {
        const double lambda = setup.lambdas[j];
        const HpEstimate e = linear_pair_error(setup.problem, yosida_operator(setup.problem.op, lambda), setup.paths,
                                               setup.base_seed, static_cast<int>(j));
        r.points.push_back({lambda, e.value, e.std_error});
    }
    finalize_report(r);
    return r;
}

ConvergenceReport run_resolvent_sweep(const ResolventSweepSetup& setup) {
    require_linear(setup.problem);
    if (setup.paths < 2) throw std::invalid_argument("sweeps need at least two paths");
    const int d = setup.problem.op.dimension();
    if (setup.family.limit().dimension() != d) throw DimensionMismatch("family limit dimension differs from problem");
    EvolutionProblem limit_problem = setup.problem;
    limit_problem.op = setup.family.limit();

    double lambda = setup.resolvent_lambda;
    if (!(lambda > 0.0)) lambda = std::min(0.5, 0.5 * setup.family.lambda0());
    const std::vector<HVector> tests = setup.test_vectors.empty() ? default_probes(d, setup.base_seed) : setup.test_vectors;

    ConvergenceReport r;
    r.theorem_id = setup.theorem_id;
    r.param_name = "n";
    r.tolerance = setup.tolerance;
    r.family = setup.family.describe();
    fill_metadata(r, setup.problem, setup.paths, setup.base_seed);

    std::vector<double> distances;
    for (int n : setup.ns) distances.push_back(strong_resolvent_distance(setup.family, n, lambda, tests));
    for (std::size_t j = 1; j < distances.size(); ++j)
        if (distances[j] > distances[j - 1] * (1.0 + 1e-9) + 1e-14)
            throw FamilyNotConvergent("resolvent distance increases from n=" + std::to_string(setup.ns[j - 1]) +
                                      " to n=" + std::to_string(setup.ns[j]));

    for (std::size_t j = 0; j < setup.ns.size(); ++j) {
        const int n = setup.ns[j];
        const HpEstimate e =
            linear_pair_error(limit_problem, setup.family.member(n), setup.paths, setup.base_seed, static_cast<int>(j));
        r.points.push_back({static_cast<double>(n), e.value, e.std_error, distances[j]});
    }
    r.notes.push_back("resolvent distances at lambda=" + format_number(lambda));
    finalize_report(r);
    return r;
}

ConvergenceReport run_trotter_kato(const TrotterKatoSetup& setup) {
    const SpectralOperator& a = setup.family.limit();
    const int d = a.dimension();
    if (setup.initial.limit.stddev != 0.0) throw std::invalid_argument("deterministic problems need a fixed u_0");
    if (setup.forcing_rate.scale != 0.0 && setup.forcing_direction.size() != d)
        throw DimensionMismatch("forcing perturbation has wrong dimension");

    const TimeGrid& grid = setup.grid;
    DiscretePath reference(grid.steps() + 1, d);
    if (setup.exact) {
        for (int k = 0; k <= grid.steps(); ++k) reference.row(k) = setup.exact(grid.time(k)).transpose();
    } else {
        reference = solve_deterministic(a, setup.forcing, setup.initial.limit.mean, grid);
    }

    ConvergenceReport r;
    r.theorem_id = setup.theorem_id;
    r.param_name = "n";
    r.p = std::numeric_limits<double>::infinity();
    r.tolerance = setup.tolerance;
    r.family = setup.family.describe();
    r.steps = grid.steps();
    r.horizon = grid.horizon();
    r.paths = 1;
    for (int n : setup.ns) {
        const double rn = setup.forcing_rate.scale == 0.0 ? 0.0 : setup.forcing_rate(n);
        Forcing fn = setup.forcing;
        if (rn != 0.0) {
            fn = [f = setup.forcing, dir = setup.forcing_direction, rn](double t) -> HVector { return f(t) + rn * dir; };
        }
        const DiscretePath un = solve_deterministic(setup.family.member(n), fn, setup.initial.member(n).mean, grid);
        r.points.push_back({static_cast<double>(n), (un - reference).rowwise().norm().maxCoeff(), 0.0});
    }
    finalize_report(r);
    return r;
}

}  // namespace mildlab
