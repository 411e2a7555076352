#include "mildlab/solver.hpp"

#include <charconv>
#include <cmath>
#include <ostream>

#include "mildlab/error.hpp"
#include "mildlab/parallel.hpp"
#include "mildlab/random.hpp"
#include "mildlab/statistics.hpp"

namespace mildlab {

HVector InitialDatum::sample(std::uint64_t stream) const {
    if (stddev == 0.0) return mean;
    Rng rng(substream(stream, kInitialTag));
    std::normal_distribution<double> normal;
    HVector x = mean;
    for (Eigen::Index k = 0; k < x.size(); ++k) x[k] += stddev * normal(rng);
    return x;
}

InitialDatum InitialSequence::member(int n) const {
    InitialDatum d = limit;
    const double r = rate(n);
    if (r != 0.0) {
        if (direction.size() != limit.mean.size()) throw DimensionMismatch("initial perturbation has wrong dimension");
        d.mean = limit.mean + r * direction;
    }
    return d;
}

bool EvolutionProblem::is_additive() const {
    if (const auto* m = std::get_if<MartingaleCoupling>(&coupling)) return m->diffusion.additive();
    return std::get<PoissonCoupling>(coupling).jump.additive();
}

NoiseDriver EvolutionProblem::driver() const {
    if (const auto* m = std::get_if<MartingaleCoupling>(&coupling)) {
        return std::visit([](const auto& d) -> NoiseDriver { return d; }, m->driver);
    }
    return std::get<PoissonCoupling>(coupling).jump.marks();
}

const MartingaleCoupling& EvolutionProblem::martingale() const {
    if (!is_martingale()) throw DriverMismatch("problem has PRM coupling");
    return std::get<MartingaleCoupling>(coupling);
}

const PoissonCoupling& EvolutionProblem::poisson() const {
    if (is_martingale()) throw DriverMismatch("problem has martingale coupling");
    return std::get<PoissonCoupling>(coupling);
}

void EvolutionProblem::validate() const {
    op.require_quasi_monotone();
    const int d = op.dimension();
    if (initial.mean.size() != d) throw DimensionMismatch("initial datum dimension differs from operator");
    if (!(p >= 2.0)) throw std::invalid_argument("p must be >= 2");
    if (const auto* m = std::get_if<MartingaleCoupling>(&coupling)) {
        if (m->diffusion.dim_k() != driver_dim(m->driver)) throw DriverMismatch("diffusion acts on a different K");
        if (p > 2.0 && !m->diffusion.additive())
            throw HypothesisViolated("martingale equations with p > 2 need additive noise");
        const Eigen::MatrixXd b = m->diffusion(initial.mean);
        if (b.rows() != d) throw DimensionMismatch("diffusion range differs from H");
    } else {
        const auto& g = std::get<PoissonCoupling>(coupling).jump;
        if (g.at_mark(0, initial.mean).size() != d) throw DimensionMismatch("jump range differs from H");
    }
}

Propagator::Propagator(const SpectralOperator& op, double linear_shift)
    : spectrum_(op.eigenvalues().array() + linear_shift), dense_(op.is_dense()) {
    if (dense_) basis_ = op.basis();
    work_.resize(spectrum_.size());
    work2_.resize(spectrum_.size());
}

void Propagator::set_step(double h) {
    if (h == h_) return;
    if (!(h >= 0.0)) throw NegativeTime("negative step");
    h_ = h;
    const Eigen::Index d = spectrum_.size();
    decay_.resize(d);
    phi_.resize(d);
    for (Eigen::Index k = 0; k < d; ++k) {
        const double a = spectrum_[k];
        decay_[k] = std::exp(-h * a);
        phi_[k] = a == 0.0 ? h : -std::expm1(-h * a) / a;
    }
}

void Propagator::advance(HVector& u, const HVector& drift, const HVector& kick) const {
    if (!dense_) {
        u.array() = decay_.array() * (u + kick).array() - phi_.array() * drift.array();
        return;
    }
    work_.noalias() = basis_.transpose() * (u + kick);
    work2_.noalias() = basis_.transpose() * drift;
    work_.array() = decay_.array() * work_.array() - phi_.array() * work2_.array();
    u.noalias() = basis_ * work_;
}

void Propagator::advance(HVector& u, const HVector& drift) const {
    if (!dense_) {
        u.array() = decay_.array() * u.array() - phi_.array() * drift.array();
        return;
    }
    work_.noalias() = basis_.transpose() * u;
    work2_.noalias() = basis_.transpose() * drift;
    work_.array() = decay_.array() * work_.array() - phi_.array() * work2_.array();
    u.noalias() = basis_ * work_;
}

namespace {

void check_path(const EvolutionProblem& problem, const NoisePath& path) {
    if (!(path.grid == problem.grid)) throw DriverMismatch("noise path grid differs from the problem grid");
}

}  // namespace

DiscretePath solve_mild_martingale(const EvolutionProblem& problem, const NoisePath& path) {
    const auto& coupling = problem.martingale();
    if (!path.is_martingale()) throw DriverMismatch("martingale problem needs a martingale noise path");
    check_path(problem, path);
    if (path.increments.cols() != coupling.diffusion.dim_k()) throw DriverMismatch("noise dimension differs from K");
    const TimeGrid& grid = problem.grid;
    const int d = problem.op.dimension();
    Propagator prop(problem.op, problem.drift.linear_part());
    prop.set_step(grid.dt());

    DiscretePath out(grid.steps() + 1, d);
    HVector u = problem.initial.sample(path.stream);
    out.row(0) = u.transpose();
    const bool no_drift = problem.drift.is_zero();
    const HVector zero = HVector::Zero(d);
    HVector kick(d);
    for (int k = 0; k < grid.steps(); ++k) {
        kick.noalias() = coupling.diffusion(u) * path.increments.row(k).transpose();
        if (no_drift) prop.advance(u, zero, kick);
        else prop.advance(u, problem.drift.remainder(u), kick);
        out.row(k + 1) = u.transpose();
    }
    return out;
}

DiscretePath solve_mild_poisson(const EvolutionProblem& problem, const NoisePath& path) {
    const auto& jump = problem.poisson().jump;
    if (path.kind != NoiseKind::prm) throw DriverMismatch("PRM problem needs a PRM noise path");
    check_path(problem, path);
    const TimeGrid& grid = problem.grid;
    const int d = problem.op.dimension();
    Propagator prop(problem.op, problem.drift.linear_part());

    DiscretePath out(grid.steps() + 1, d);
    HVector u = problem.initial.sample(path.stream);
    out.row(0) = u.transpose();
    auto drift = [&](const HVector& x) -> HVector { return problem.drift.remainder(x) + jump.compensator(x); };
    std::size_t e = 0;
    double t = 0.0;
    for (int k = 0; k < grid.steps(); ++k) {
        const double t_end = grid.time(k + 1);
        for (;;) {
            const bool event = e < path.events.size() && path.events[e].time <= t_end;
            const double next = event ? path.events[e].time : t_end;
            if (next > t) {
                prop.set_step(next - t);
                prop.advance(u, drift(u));
                t = next;
            }
            if (!event) break;
            u += jump.at_mark(path.events[e].mark, u);
            ++e;
        }
        t = t_end;
        out.row(k + 1) = u.transpose();
    }
    return out;
}

DiscretePath solve_mild(const EvolutionProblem& problem, const NoisePath& path) {
    return problem.is_martingale() ? solve_mild_martingale(problem, path) : solve_mild_poisson(problem, path);
}

DiscretePath solve_deterministic(const SpectralOperator& op, const Forcing& forcing, const HVector& u0,
                                 const TimeGrid& grid) {
    if (u0.size() != op.dimension()) throw DimensionMismatch("initial datum dimension differs from operator");
    Propagator prop(op);
    prop.set_step(grid.dt());
    DiscretePath out(grid.steps() + 1, op.dimension());
    HVector u = u0;
    out.row(0) = u.transpose();
    for (int k = 0; k < grid.steps(); ++k) {
        prop.advance(u, -forcing(grid.time(k)));
        out.row(k + 1) = u.transpose();
    }
    return out;
}

DiscretePath stochastic_convolution(const SpectralOperator& op, const DiffusionIntegrand& integrand,
                                    const NoisePath& path) {
    if (!path.is_martingale()) throw DriverMismatch("martingale convolution needs a martingale path");
    const TimeGrid& grid = path.grid;
    const int d = op.dimension();
    Propagator prop(op);
    prop.set_step(grid.dt());
    DiscretePath out(grid.steps() + 1, d);
    HVector y = HVector::Zero(d);
    const HVector zero = HVector::Zero(d);
    out.row(0) = y.transpose();
    for (int k = 0; k < grid.steps(); ++k) {
        const HVector kick = integrand(grid.time(k)) * path.increments.row(k).transpose();
        prop.advance(y, zero, kick);
        out.row(k + 1) = y.transpose();
    }
    return out;
}

DiscretePath stochastic_convolution(const SpectralOperator& op, const JumpIntegrand& integrand,
                                    const PoissonRandomMeasureDriver& driver, const NoisePath& path) {
    if (path.kind != NoiseKind::prm) throw DriverMismatch("PRM convolution needs a PRM path");
    driver.validate();
    const TimeGrid& grid = path.grid;
    const int d = op.dimension();
    Propagator prop(op);
    DiscretePath out(grid.steps() + 1, d);
    HVector y = HVector::Zero(d);
    out.row(0) = y.transpose();
    auto compensator = [&](double s) {
        HVector c = HVector::Zero(d);
        for (int i = 0; i < driver.mark_count(); ++i) c += driver.weights[i] * integrand(s, driver.marks[i]);
        return c;
    };
    std::size_t e = 0;
    double t = 0.0;
    for (int k = 0; k < grid.steps(); ++k) {
        const double t_end = grid.time(k + 1);
        for (;;) {
            const bool event = e < path.events.size() && path.events[e].time <= t_end;
            const double next = event ? path.events[e].time : t_end;
            if (next > t) {
                prop.set_step(next - t);
                prop.advance(y, compensator(t));
                t = next;
            }
            if (!event) break;
            y += integrand(path.events[e].time, driver.marks[path.events[e].mark]);
            ++e;
        }
        t = t_end;
        out.row(k + 1) = y.transpose();
    }
    return out;
}

PathEnsemble simulate_ensemble(const EvolutionProblem& problem, int paths, std::uint64_t base_seed, int sweep_index) {
    if (paths < 1) throw std::invalid_argument("ensemble needs at least one path");
    problem.validate();
    PathEnsemble ens;
    ens.grid = problem.grid;
    ens.base_seed = base_seed;
    ens.sweep_index = sweep_index;
    ens.scheme = problem.is_martingale() ? "exponential-euler" : "jump-adapted-exponential-euler";
    ens.paths.resize(static_cast<std::size_t>(paths));
    ens.streams.resize(static_cast<std::size_t>(paths));
    const NoiseDriver driver = problem.driver();
    parallel_for(static_cast<std::size_t>(paths), [&](std::size_t i) {
        const std::uint64_t stream = stream_id(base_seed, static_cast<std::uint64_t>(sweep_index), i);
        ens.streams[i] = stream;
        ens.paths[i] = solve_mild(problem, sample_path(driver, problem.grid, stream));
    });
    return ens;
}

HpEstimate hp_from_sups(const std::vector<double>& sups, double p) {
    HpEstimate est;
    if (sups.empty()) return est;
    std::vector<double> powered(sups.size());
    for (std::size_t i = 0; i < sups.size(); ++i) powered[i] = std::pow(sups[i], p);
    const MeanEstimate m = estimate_mean(powered);
    est.moment = m.mean;
    est.moment_std_error = m.std_error;
    if (m.mean > 0.0) {
        est.value = std::pow(m.mean, 1.0 / p);
        est.std_error = m.std_error * est.value / (p * m.mean);
    }
    return est;
}

namespace {

int last_index(const TimeGrid& grid, std::optional<int> upto) {
    const int k = upto.value_or(grid.steps());
    if (k < 0 || k > grid.steps()) throw std::out_of_range("grid index out of range");
    return k;
}

}  // namespace

HpEstimate hp_norm_estimate(const PathEnsemble& ensemble, double p, std::optional<int> upto) {
    if (ensemble.paths.size() < 2) throw std::invalid_argument("H_p estimate needs at least two paths");
    const int k = last_index(ensemble.grid, upto);
    std::vector<double> sups(ensemble.paths.size());
    for (std::size_t i = 0; i < sups.size(); ++i) sups[i] = ensemble.paths[i].topRows(k + 1).rowwise().norm().maxCoeff();
    return hp_from_sups(sups, p);
}

HpEstimate difference_hp(const PathEnsemble& a, const PathEnsemble& b, double p, std::optional<int> upto) {
    if (!(a.grid == b.grid)) throw CouplingMismatch("ensembles live on different grids");
    if (a.paths.size() != b.paths.size()) throw CouplingMismatch("ensembles have different sizes");
    if (a.streams != b.streams) throw CouplingMismatch("ensembles were driven by different noise streams");
    if (a.paths.size() < 2) throw std::invalid_argument("H_p estimate needs at least two paths");
    const int k = last_index(a.grid, upto);
    std::vector<double> sups(a.paths.size());
    for (std::size_t i = 0; i < sups.size(); ++i)
        sups[i] = (a.paths[i].topRows(k + 1) - b.paths[i].topRows(k + 1)).rowwise().norm().maxCoeff();
    return hp_from_sups(sups, p);
}

std::string format_number(double x) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    if (ec != std::errc()) return "nan";
    return std::string(buf, ptr);
}

void write_ensemble_csv(std::ostream& os, const PathEnsemble& ensemble) {
    const int d = ensemble.paths.empty() ? 0 : static_cast<int>(ensemble.paths.front().cols());
    os << "path_id,t";
    for (int j = 0; j < d; ++j) os << ",coord_" << j;
    os << "\n";
    for (std::size_t i = 0; i < ensemble.paths.size(); ++i) {
        const auto& path = ensemble.paths[i];
        for (Eigen::Index k = 0; k < path.rows(); ++k) {
            os << i << "," << format_number(ensemble.grid.time(static_cast<int>(k)));
            for (int j = 0; j < d; ++j) os << "," << format_number(path(k, j));
            os << "\n";
        }
    }
}

void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows) {
    os << "statistic,value,stderr\n";
    for (const auto& r : rows) os << r.statistic << "," << format_number(r.value) << "," << format_number(r.std_error) << "\n";
}

}  // namespace mildlab
