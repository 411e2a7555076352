#include <array>
#include <cmath>

#include "mildlab/convergence.hpp"
#include "mildlab/error.hpp"
#include "mildlab/parallel.hpp"
#include "mildlab/random.hpp"
#include "mildlab/statistics.hpp"

namespace mildlab {

namespace {

// Quantities tracked by the coupled runner, each as a running sup along the grid.
enum Quantity : int {
    kFull,        // v - u
    kInitial,     // S_n u_0n - S u_0
    kInitialOp,   // (S_n - S) u_0
    kDrift,       // S_n * f_n(v) - S * f(u)
    kDriftCoef,   // S_n * (f_n(u) - f(u))
    kDriftOp,     // (S_n - S) * f(u)
    kNoise,       // S_n <> B_n(v) - S <> B(u)
    kNoiseCoef,   // S_n <> (B_n(u) - B(u))
    kNoiseOp,     // (S_n - S) <> B(u)
    kQuantities
};

enum Partial : int { kOnlyInitial, kOnlyOperator, kOnlyDrift, kOnlyNoise, kPartials };

struct MemberSetup {
    EvolutionProblem problem;
    std::array<EvolutionProblem, kPartials> partials;
};

EvolutionProblem limit_problem(const SemilinearSweepSetup& setup) {
    EvolutionProblem p = setup.problem;
    p.op = setup.family.limit();
    p.drift = setup.drift.limit;
    p.initial = setup.initial.limit;
    if (p.is_martingale()) {
        if (!setup.diffusion) throw std::invalid_argument("martingale sweep needs a diffusion sequence");
        std::get<MartingaleCoupling>(p.coupling).diffusion = setup.diffusion->limit;
    } else {
        if (!setup.jump) throw std::invalid_argument("PRM sweep needs a jump sequence");
        std::get<PoissonCoupling>(p.coupling).jump = setup.jump->limit;
    }
    return p;
}

void set_noise(EvolutionProblem& p, const SemilinearSweepSetup& setup, int n) {
    if (p.is_martingale()) std::get<MartingaleCoupling>(p.coupling).diffusion = setup.diffusion->member(n);
    else std::get<PoissonCoupling>(p.coupling).jump = setup.jump->member(n);
}

MemberSetup member_setup(const EvolutionProblem& base, const SemilinearSweepSetup& setup, int n) {
    MemberSetup m{base, {base, base, base, base}};
    m.problem.op = setup.family.member(n);
    m.problem.drift = setup.drift.member(n);
    m.problem.initial = setup.initial.member(n);
    set_noise(m.problem, setup, n);
    m.partials[kOnlyInitial].initial = m.problem.initial;
    m.partials[kOnlyOperator].op = m.problem.op;
    m.partials[kOnlyDrift].drift = m.problem.drift;
    set_noise(m.partials[kOnlyNoise], setup, n);
    m.problem.validate();
    for (auto& p : m.partials) p.validate();
    return m;
}

struct PathRecord {
    std::vector<double> sup_p;  // kQuantities x (steps + 1), running sup raised to p
    std::array<double, kQuantities> sup_final{};
    std::array<double, kPartials> partial_sup{};
    double initial_gap_p = 0.0;  // |u_0n - u_0|^p
};

// Advances u, v and the nine decomposition components along one noise path.
class CoupledRun {
public:
    CoupledRun(const EvolutionProblem& limit, const EvolutionProblem& member, const NoisePath& path)
        : lim_(limit), mem_(member), path_(path), prop_(limit.op, limit.drift.linear_part()),
          prop_n_(member.op, member.drift.linear_part()) {
        const HVector u0 = limit.initial.sample(path.stream);
        const HVector u0n = member.initial.sample(path.stream);
        const int d = limit.op.dimension();
        zero_ = HVector::Zero(d);
        u_ = L_ = Lx_ = u0;
        v_ = Ln_ = u0n;
        D_ = Dn_ = Dnu_ = Dfu_ = N_ = Nn_ = Nnu_ = Nfu_ = zero_;
        initial_gap_ = (u0n - u0).norm();
    }

    double initial_gap() const { return initial_gap_; }
    const HVector& u() const { return u_; }

    std::array<double, kQuantities> norms() const {
        return {(v_ - u_).norm(),     (Ln_ - L_).norm(),    (Lx_ - L_).norm(),
                (Dn_ - D_).norm(),    (Dnu_ - Dfu_).norm(), (Dfu_ - D_).norm(),
                (Nn_ - N_).norm(),    (Nnu_ - Nfu_).norm(), (Nfu_ - N_).norm()};
    }

    void martingale_step(int k) {
        const auto& b = lim_.martingale().diffusion;
        const auto& bn = mem_.martingale().diffusion;
        const HVector dm = path_.increments.row(k).transpose();
        const HVector bu = b(u_) * dm, bnv = bn(v_) * dm, bnu = bn(u_) * dm;
        const HVector fu = lim_.drift.remainder(u_), fnv = mem_.drift.remainder(v_), fnu = mem_.drift.remainder(u_);
        const double h = path_.grid.dt();
        prop_.set_step(h);
        prop_n_.set_step(h);
        prop_.advance(u_, fu, bu);
        prop_n_.advance(v_, fnv, bnv);
        prop_.advance(L_, zero_);
        prop_n_.advance(Ln_, zero_);
        prop_n_.advance(Lx_, zero_);
        prop_.advance(D_, -fu);
        prop_n_.advance(Dn_, -fnv);
        prop_n_.advance(Dnu_, -fnu);
        prop_n_.advance(Dfu_, -fu);
        prop_.advance(N_, zero_, bu);
        prop_n_.advance(Nn_, zero_, bnv);
        prop_n_.advance(Nnu_, zero_, bnu);
        prop_n_.advance(Nfu_, zero_, bu);
    }

    // Drift and compensator frozen at the left end of a sub-interval of length h.
    void poisson_flow(double h) {
        const auto& g = lim_.poisson().jump;
        const auto& gn = mem_.poisson().jump;
        const HVector fu = lim_.drift.remainder(u_), fnv = mem_.drift.remainder(v_), fnu = mem_.drift.remainder(u_);
        const HVector cu = g.compensator(u_), cnv = gn.compensator(v_), cnu = gn.compensator(u_);
        prop_.set_step(h);
        prop_n_.set_step(h);
        prop_.advance(u_, fu + cu);
        prop_n_.advance(v_, fnv + cnv);
        prop_.advance(L_, zero_);
        prop_n_.advance(Ln_, zero_);
        prop_n_.advance(Lx_, zero_);
        prop_.advance(D_, -fu);
        prop_n_.advance(Dn_, -fnv);
        prop_n_.advance(Dnu_, -fnu);
        prop_n_.advance(Dfu_, -fu);
        prop_.advance(N_, cu);
        prop_n_.advance(Nn_, cnv);
        prop_n_.advance(Nnu_, cnu);
        prop_n_.advance(Nfu_, cu);
    }

    void poisson_jump(int mark) {
        const HVector gu = lim_.poisson().jump.at_mark(mark, u_);
        const HVector gnv = mem_.poisson().jump.at_mark(mark, v_);
        const HVector gnu = mem_.poisson().jump.at_mark(mark, u_);
        u_ += gu;
        v_ += gnv;
        N_ += gu;
        Nn_ += gnv;
        Nnu_ += gnu;
        Nfu_ += gu;
    }

    double effective_eta_n() const { return prop_n_.effective_eta(); }

private:
    const EvolutionProblem& lim_;
    const EvolutionProblem& mem_;
    const NoisePath& path_;
    Propagator prop_, prop_n_;
    HVector zero_;
    HVector u_, v_, L_, Ln_, Lx_, D_, Dn_, Dnu_, Dfu_, N_, Nn_, Nnu_, Nfu_;
    double initial_gap_ = 0.0;
};

PathRecord run_path(const EvolutionProblem& limit, const MemberSetup& member, const NoisePath& path, double p,
                    bool partials) {
    const TimeGrid& grid = limit.grid;
    const int steps = grid.steps();
    PathRecord rec;
    rec.sup_p.assign(static_cast<std::size_t>(kQuantities) * (steps + 1), 0.0);
    CoupledRun run(limit, member.problem, path);
    rec.initial_gap_p = std::pow(run.initial_gap(), p);
    DiscretePath u(steps + 1, limit.op.dimension());
    u.row(0) = run.u().transpose();

    std::array<double, kQuantities> sup{};
    auto record = [&](int k) {
        const auto q = run.norms();
        for (int j = 0; j < kQuantities; ++j) {
            sup[j] = std::max(sup[j], q[j]);
            rec.sup_p[static_cast<std::size_t>(j) * (steps + 1) + k] = std::pow(sup[j], p);
        }
    };
    record(0);

    if (limit.is_martingale()) {
        for (int k = 0; k < steps; ++k) {
            run.martingale_step(k);
            u.row(k + 1) = run.u().transpose();
            record(k + 1);
        }
    } else {
        std::size_t e = 0;
        double t = 0.0;
        for (int k = 0; k < steps; ++k) {
            const double t_end = grid.time(k + 1);
            for (;;) {
                const bool event = e < path.events.size() && path.events[e].time <= t_end;
                const double next = event ? path.events[e].time : t_end;
                if (next > t) {
                    run.poisson_flow(next - t);
                    t = next;
                }
                if (!event) break;
                run.poisson_jump(path.events[e].mark);
                ++e;
            }
            t = t_end;
            u.row(k + 1) = run.u().transpose();
            record(k + 1);
        }
    }
    rec.sup_final = sup;
    if (partials) {
        for (int j = 0; j < kPartials; ++j) {
            const DiscretePath w = solve_mild(member.partials[j], path);
            rec.partial_sup[j] = (w - u).rowwise().norm().maxCoeff();
        }
    }
    return rec;
}

void audit_hypotheses(const SemilinearSweepSetup& setup, const EvolutionProblem& limit) {
    const int d = limit.op.dimension();
    audit_sequence(setup.drift, setup.ns, d, setup.base_seed);
    if (limit.is_martingale()) {
        audit_sequence(*setup.diffusion, setup.ns, d, driver_covariance(limit.martingale().driver), setup.base_seed);
    } else {
        audit_sequence(*setup.jump, setup.ns, d, setup.base_seed);
    }
}

double lipschitz_of(const EvolutionProblem& p) {
    if (p.is_martingale()) return p.martingale().diffusion.lipschitz();
    return p.poisson().jump.lipschitz();
}

SemilinearResult run_coupled_sweep(const SemilinearSweepSetup& setup) {
    if (setup.paths < 2) throw std::invalid_argument("sweeps need at least two paths");
    const EvolutionProblem limit = limit_problem(setup);
    limit.validate();
    audit_hypotheses(setup, limit);

    const double p = limit.p;
    const TimeGrid& grid = limit.grid;
    const int steps = grid.steps();
    const NoiseDriver driver = limit.driver();

    SemilinearResult result;
    ConvergenceReport& r = result.report;
    r.theorem_id = setup.theorem_id;
    r.param_name = "n";
    r.p = p;
    r.tolerance = setup.tolerance;
    r.family = setup.family.describe();
    r.base_seed = setup.base_seed;
    r.paths = setup.paths;
    r.steps = steps;
    r.horizon = grid.horizon();

    LemmaConstants& c = result.constants;
    c.p = p;
    c.horizon = grid.horizon();
    c.dt = grid.dt();
    c.noise_lemma = limit.is_martingale() ? "lemma_tre" : "lemma_treppe";
    c.martingale = limit.is_martingale();
    c.audit_points = setup.audit_points;

    for (std::size_t j = 0; j < setup.ns.size(); ++j) {
        const int n = setup.ns[j];
        const MemberSetup member = member_setup(limit, setup, n);
        {
            const Propagator pn(member.problem.op, member.problem.drift.linear_part());
            c.eta = std::max(c.eta, pn.effective_eta());
        }
        c.drift_lipschitz = std::max(c.drift_lipschitz, member.problem.drift.lipschitz() +
                                                            std::abs(member.problem.drift.linear_part()));
        c.noise_lipschitz = std::max(c.noise_lipschitz, lipschitz_of(member.problem));

        std::vector<PathRecord> records(static_cast<std::size_t>(setup.paths));
        parallel_for(records.size(), [&](std::size_t i) {
            const std::uint64_t stream = stream_id(setup.base_seed, j, i);
            const NoisePath path = sample_path(driver, grid, stream);
            records[i] = run_path(limit, member, path, p, setup.partial_solves);
        });

        auto column = [&](auto get) {
            std::vector<double> x(records.size());
            for (std::size_t i = 0; i < records.size(); ++i) x[i] = get(records[i]);
            return x;
        };
        auto final_hp = [&](int q) { return hp_from_sups(column([q](const PathRecord& rr) { return rr.sup_final[q]; }), p); };

        DecompositionRow row;
        row.n = n;
        row.full = final_hp(kFull);
        row.initial_term = final_hp(kInitial);
        row.drift_term = final_hp(kDrift);
        row.noise_term = final_hp(kNoise);
        const double full = row.full.value;
        row.triangle_ok =
            full <= (row.initial_term.value + row.drift_term.value + row.noise_term.value) * (1.0 + 1e-12) + 1e-300;
        if (setup.partial_solves) {
            std::array<HpEstimate*, kPartials> slots{&row.only_initial, &row.only_operator, &row.only_drift,
                                                     &row.only_noise};
            double sum = 0.0;
            for (int q = 0; q < kPartials; ++q) {
                *slots[q] = hp_from_sups(column([q](const PathRecord& rr) { return rr.partial_sup[q]; }), p);
                sum += slots[q]->value;
            }
            row.partial_ok = full <= 3.0 * sum * (1.0 + 1e-12);
        } else {
            row.partial_ok = true;
        }
        result.decomposition.push_back(row);
        r.points.push_back({static_cast<double>(n), row.full.value, row.full.std_error});

        LemmaTrace tr;
        tr.n = n;
        const MeanEstimate gap = estimate_mean(column([](const PathRecord& rr) { return rr.initial_gap_p; }));
        const double eta_n = Propagator(member.problem.op, member.problem.drift.linear_part()).effective_eta();
        const double cp = std::pow(2.0, p - 1.0), c3 = std::pow(3.0, p - 1.0);
        for (int k = 0; k <= steps; ++k) {
            auto moment = [&](int q) {
                const std::size_t at = static_cast<std::size_t>(q) * (steps + 1) + k;
                return estimate_mean(column([at](const PathRecord& rr) { return rr.sup_p[at]; }));
            };
            const MeanEstimate full_k = moment(kFull);
            tr.error.push_back(full_k.mean);
            tr.error_se.push_back(full_k.std_error);
            tr.initial_lhs.push_back(moment(kInitial).mean);
            tr.initial_bound.push_back(cp * (std::exp(p * eta_n * grid.time(k)) * gap.mean + moment(kInitialOp).mean));
            tr.drift_lhs.push_back(moment(kDrift).mean);
            tr.drift_delta.push_back(c3 * (moment(kDriftCoef).mean + moment(kDriftOp).mean));
            tr.noise_lhs.push_back(moment(kNoise).mean);
            tr.noise_delta.push_back(c3 * (moment(kNoiseCoef).mean + moment(kNoiseOp).mean));
        }
        result.traces.push_back(std::move(tr));
    }

    const double T = grid.horizon();
    c.gamma_drift = std::pow(3.0, p - 1.0) * std::exp(p * c.eta * T) * std::pow(T, p - 1.0) *
                    std::pow(c.drift_lipschitz, p);
    if (limit.is_martingale()) {
        // p > 2 only occurs with additive noise, where the Lipschitz constant is 0.
        c.gamma_noise =
            std::pow(3.0, p - 1.0) * maximal_inequality_constant(c.eta, T) * std::pow(c.noise_lipschitz, 2.0);
    } else {
        c.gamma_noise = std::pow(3.0, p - 1.0) * jump_inequality_constant(p, c.eta, T, true) * 2.0 *
                        std::pow(c.noise_lipschitz, p);
    }
    finalize_report(r);
    bool decomposition_ok = true;
    for (const auto& row : result.decomposition) decomposition_ok = decomposition_ok && row.triangle_ok && row.partial_ok;
    if (!decomposition_ok) r.notes.push_back("decomposition consistency failed");
    r.pass = r.pass && decomposition_ok;
    return result;
}

}  // namespace

SemilinearResult run_semilinear_sweep(const SemilinearSweepSetup& setup) { return run_coupled_sweep(setup); }

SemilinearResult run_additive_sweep(const SemilinearSweepSetup& setup) {
    const EvolutionProblem limit = limit_problem(setup);
    const bool additive = limit.is_martingale() ? setup.diffusion->limit.additive() && setup.diffusion->direction.additive()
                                                : setup.jump->limit.additive() && setup.jump->direction.additive();
    if (!additive) throw HypothesisViolated("additive sweep needs noise coefficients independent of the state");
    return run_coupled_sweep(setup);
}

EvolutionProblem shift_problem(const EvolutionProblem& problem) {
    const ShiftedOperator shifted = shift_operator(problem.op);
    EvolutionProblem out = problem;
    out.op = shifted.op;
    FamilyParams unit;
    unit.scale = 1.0;
    out.drift = DriftMap::combine(problem.drift, builtin_drift("linear", unit, problem.op.dimension()),
                                  shifted.drift_shift);
    return out;
}

double eta_shift_gap(const EvolutionProblem& problem, int paths, std::uint64_t base_seed) {
    problem.validate();
    const EvolutionProblem shifted = shift_problem(problem);
    shifted.validate();
    const NoiseDriver driver = problem.driver();
    std::vector<double> gaps(static_cast<std::size_t>(paths));
    parallel_for(gaps.size(), [&](std::size_t i) {
        const NoisePath path = sample_path(driver, problem.grid, stream_id(base_seed, 0, i));
        gaps[i] = (solve_mild(problem, path) - solve_mild(shifted, path)).cwiseAbs().maxCoeff();
    });
    return *std::max_element(gaps.begin(), gaps.end());
}

}  // namespace mildlab
