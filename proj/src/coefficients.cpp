#include "mildlab/coefficients.hpp"

#include <algorithm>
#include <cmath>

#include "mildlab/error.hpp"

namespace mildlab {

namespace {

constexpr double kBoundSlack = 1e-8;

void check_bound(double estimate, double declared, const std::string& name) {
    if (estimate > declared * (1.0 + kBoundSlack) + 1e-300) {
        throw BoundViolated("sampled Lipschitz quotient " + std::to_string(estimate) + " exceeds declared bound " +
                            std::to_string(declared) + " for " + name);
    }
}

}  // namespace

DriftMap::DriftMap(std::string name, Fn evaluate, double lipschitz, double linear_part)
    : name_(std::move(name)), fn_(std::move(evaluate)), lipschitz_(lipschitz), linear_part_(linear_part) {
    if (!(lipschitz >= 0.0) || !std::isfinite(lipschitz)) throw std::invalid_argument("Lipschitz bound must be >= 0");
    if (std::abs(linear_part) > lipschitz * (1.0 + kBoundSlack))
        throw std::invalid_argument("linear part exceeds the Lipschitz bound");
}

DriftMap DriftMap::zero() {
    DriftMap f("zero", [](const HVector& u) { return HVector::Zero(u.size()); }, 0.0);
    f.zero_ = true;
    return f;
}

HVector DriftMap::remainder(const HVector& u) const {
    if (linear_part_ == 0.0) return fn_(u);
    return fn_(u) - linear_part_ * u;
}

DriftMap DriftMap::combine(const DriftMap& f, const DriftMap& g, double r) {
    if (r == 0.0 || g.is_zero()) return f;
    DriftMap out(f.name_ + "+r*" + g.name_,
                 [f, g, r](const HVector& u) -> HVector { return f(u) + r * g(u); },
                 f.lipschitz_ + std::abs(r) * g.lipschitz_, f.linear_part_ + r * g.linear_part_);
    return out;
}

DiffusionMap::DiffusionMap(std::string name, Fn evaluate, double lipschitz, bool additive, int dim_k)
    : name_(std::move(name)), fn_(std::move(evaluate)), lipschitz_(lipschitz), additive_(additive), dim_k_(dim_k) {
    if (!(lipschitz >= 0.0) || !std::isfinite(lipschitz)) throw std::invalid_argument("Lipschitz bound must be >= 0");
    if (additive && lipschitz != 0.0) throw std::invalid_argument("additive diffusion must have zero Lipschitz bound");
    if (dim_k < 1) throw std::invalid_argument("dim_K must be >= 1");
}

DiffusionMap DiffusionMap::zero(int dim, int dim_k) {
    return DiffusionMap("zero", [dim, dim_k](const HVector&) { return Eigen::MatrixXd::Zero(dim, dim_k); }, 0.0,
                        true, dim_k);
}

DiffusionMap DiffusionMap::combine(const DiffusionMap& b, const DiffusionMap& g, double r) {
    if (r == 0.0) return b;
    if (b.dim_k_ != g.dim_k_) throw DimensionMismatch("diffusion maps act on different K");
    return DiffusionMap(b.name_ + "+r*" + g.name_,
                        [b, g, r](const HVector& u) -> Eigen::MatrixXd { return b(u) + r * g(u); },
                        b.lipschitz_ + std::abs(r) * g.lipschitz_, b.additive_ && g.additive_, b.dim_k_);
}

JumpMap::JumpMap(std::string name, Fn evaluate, double lipschitz, PoissonRandomMeasureDriver marks, double p,
                 bool additive)
    : name_(std::move(name)),
      fn_(std::move(evaluate)),
      lipschitz_(lipschitz),
      marks_(std::move(marks)),
      p_(p),
      additive_(additive) {
    marks_.validate();
    if (!(p >= 2.0)) throw std::invalid_argument("p must be >= 2");
    if (!(lipschitz >= 0.0) || !std::isfinite(lipschitz)) throw std::invalid_argument("Lipschitz bound must be >= 0");
    if (additive && lipschitz != 0.0) throw std::invalid_argument("additive jump map must have zero Lipschitz bound");
}

HVector JumpMap::compensator(const HVector& u) const {
    HVector acc = HVector::Zero(u.size());
    for (int i = 0; i < marks_.mark_count(); ++i) acc += marks_.weights[i] * at_mark(i, u);
    return acc;
}

double JumpMap::distance(const HVector& u, const JumpMap& other, const HVector& v) const {
    std::vector<HVector> diff;
    for (int i = 0; i < marks_.mark_count(); ++i) diff.push_back(at_mark(i, u) - other.at_mark(i, v));
    return l2_lp_mark_norm(diff, marks_.weights, p_);
}

JumpMap JumpMap::combine(const JumpMap& g, const JumpMap& h, double r) {
    if (r == 0.0) return g;
    if (g.marks_.marks != h.marks_.marks || g.marks_.weights != h.marks_.weights)
        throw DimensionMismatch("jump maps live on different mark spaces");
    return JumpMap(g.name_ + "+r*" + h.name_,
                   [g, h, r](double z, const HVector& u) -> HVector { return g(z, u) + r * h(z, u); },
                   g.lipschitz_ + std::abs(r) * h.lipschitz_, g.marks_, g.p_, g.additive_ && h.additive_);
}

double l2_mark_norm(const std::vector<HVector>& values, const Eigen::VectorXd& weights) {
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) s += weights[static_cast<Eigen::Index>(i)] * values[i].squaredNorm();
    return std::sqrt(s);
}

double lp_mark_norm(const std::vector<HVector>& values, const Eigen::VectorXd& weights, double p) {
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i)
        s += weights[static_cast<Eigen::Index>(i)] * std::pow(values[i].norm(), p);
    return std::pow(s, 1.0 / p);
}

double l2_lp_mark_norm(const std::vector<HVector>& values, const Eigen::VectorXd& weights, double p) {
    return std::max(l2_mark_norm(values, weights), lp_mark_norm(values, weights, p));
}

double hs_q_norm(const Eigen::MatrixXd& phi, const Eigen::MatrixXd& q) {
    const double s = (phi * q * phi.transpose()).trace();
    return std::sqrt(std::max(0.0, s));
}

DriftMap builtin_drift(const std::string& name, const FamilyParams& params, int dim) {
    const double c = params.scale;
    if (name == "linear") {
        return DriftMap("linear", [c](const HVector& u) -> HVector { return c * u; }, std::abs(c), c);
    }
    if (name == "saturating_sigmoid") {
        if (!(c > 0.0)) throw std::invalid_argument("saturating_sigmoid needs s > 0");
        return DriftMap("saturating_sigmoid",
                        [c](const HVector& u) -> HVector { return c * (u.array() / c).tanh().matrix(); }, 1.0);
    }
    if (name == "clipped_quadratic") {
        if (!(c > 0.0)) throw std::invalid_argument("clipped_quadratic needs r > 0");
        return DriftMap("clipped_quadratic",
                        [c](const HVector& u) -> HVector { return u.array().square().min(c * c).matrix(); },
                        2.0 * c);
    }
    if (name == "additive_constant") {
        HVector b = params.offset.size() ? params.offset : HVector::Constant(dim, c);
        if (b.size() != dim) throw DimensionMismatch("additive_constant drift has wrong dimension");
        return DriftMap("additive_constant", [b](const HVector&) -> HVector { return b; }, 0.0);
    }
    throw UnknownFamily("unknown drift family: " + name);
}

DiffusionMap builtin_diffusion(const std::string& name, const FamilyParams& params, const Eigen::MatrixXd& q, int dim) {
    if (q.rows() != q.cols() || q.rows() < 1) throw DimensionMismatch("Q must be square");
    const int dim_k = static_cast<int>(q.rows());
    if (name == "diagonal_multiplicative") {
        if (dim_k != dim) throw DimensionMismatch("diagonal_multiplicative needs dim_K = d");
        const double sigma = params.scale;
        HVector b = params.offset.size() ? params.offset : HVector::Zero(dim);
        if (b.size() != dim) throw DimensionMismatch("offset has wrong dimension");
        // |sigma diag(u - v) Q^{1/2}|_HS^2 = sigma^2 sum_j (u_j - v_j)^2 Q_jj.
        const double lip = std::abs(sigma) * std::sqrt(q.diagonal().maxCoeff());
        return DiffusionMap("diagonal_multiplicative",
                            [sigma, b](const HVector& u) -> Eigen::MatrixXd { return (b + sigma * u).asDiagonal(); },
                            lip, sigma == 0.0, dim_k);
    }
    if (name == "additive_constant") {
        Eigen::MatrixXd b0 = params.matrix.size() ? params.matrix : params.scale * Eigen::MatrixXd::Identity(dim, dim_k);
        if (b0.rows() != dim || b0.cols() != dim_k) throw DimensionMismatch("B_0 must be d x dim_K");
        return DiffusionMap("additive_constant", [b0](const HVector&) -> Eigen::MatrixXd { return b0; }, 0.0, true,
                            dim_k);
    }
    throw UnknownFamily("unknown diffusion family: " + name);
}

JumpMap builtin_jump(const std::string& name, const FamilyParams& params, const PoissonRandomMeasureDriver& marks,
                     double p, int dim) {
    marks.validate();
    std::vector<HVector> zvals;
    for (int i = 0; i < marks.mark_count(); ++i) zvals.push_back(HVector::Constant(1, marks.marks[i]));
    const double znorm = l2_lp_mark_norm(zvals, marks.weights, p);
    if (name == "diagonal_multiplicative") {
        const double sigma = params.scale;
        HVector b = params.offset.size() ? params.offset : HVector::Zero(dim);
        if (b.size() != dim) throw DimensionMismatch("offset has wrong dimension");
        // |z sigma (u - v)| = |z| |sigma| |u - v| per mark.
        return JumpMap("diagonal_multiplicative",
                       [sigma, b](double z, const HVector& u) -> HVector { return z * (sigma * u + b); },
                       std::abs(sigma) * znorm, marks, p, sigma == 0.0);
    }
    if (name == "additive_constant") {
        HVector b = params.offset.size() ? params.offset : HVector::Constant(dim, params.scale);
        if (b.size() != dim) throw DimensionMismatch("offset has wrong dimension");
        return JumpMap("additive_constant", [b](double z, const HVector&) -> HVector { return z * b; }, 0.0, marks, p,
                       true);
    }
    throw UnknownFamily("unknown jump family: " + name);
}

Coefficient builtin_family(const std::string& name, CoefficientRole role, const FamilyParams& params,
                           const CoefficientContext& context) {
    switch (role) {
        case CoefficientRole::drift: return builtin_drift(name, params, context.dim);
        case CoefficientRole::diffusion: {
            Eigen::MatrixXd q = context.q.size() ? context.q : Eigen::MatrixXd::Identity(context.dim, context.dim);
            return builtin_diffusion(name, params, q, context.dim);
        }
        case CoefficientRole::jump:
            if (!context.marks) throw DriverMismatch("jump coefficients need a PRM mark set");
            return builtin_jump(name, params, *context.marks, context.p, context.dim);
    }
    throw UnknownFamily("unknown coefficient role");
}

PairSampler default_pair_sampler(int dim) {
    return [dim](Rng& rng) {
        std::normal_distribution<double> normal;
        std::uniform_real_distribution<double> expo(-6.0, 1.0);
        std::uniform_real_distribution<double> mag(-3.0, 1.0);
        HVector u(dim), dir(dim);
        for (int k = 0; k < dim; ++k) u[k] = normal(rng);
        for (int k = 0; k < dim; ++k) dir[k] = normal(rng);
        const double un = u.norm(), dn = dir.norm();
        if (un > 0.0) u *= std::pow(10.0, mag(rng)) / un;
        if (dn > 0.0) dir *= std::pow(10.0, expo(rng)) / dn;
        return std::make_pair(u, HVector(u + dir));
    };
}

namespace {

template <class Quotient>
double max_quotient(const PairSampler& sampler, int pairs, std::uint64_t rng_seed, Quotient quotient) {
    if (pairs < 1) throw std::invalid_argument("pairs must be >= 1");
    Rng rng(splitmix64(rng_seed));
    double best = 0.0;
    for (int i = 0; i < pairs; ++i) {
        auto [u, v] = sampler(rng);
        const double gap = (u - v).norm();
        if (gap == 0.0) continue;
        best = std::max(best, quotient(u, v) / gap);
    }
    return best;
}

}  // namespace

double estimate_lipschitz(const DriftMap& map, const PairSampler& sampler, int pairs, std::uint64_t rng_seed) {
    const double est = max_quotient(sampler, pairs, rng_seed,
                                    [&](const HVector& u, const HVector& v) { return (map(u) - map(v)).norm(); });
    check_bound(est, map.lipschitz(), map.name());
    return est;
}

double estimate_lipschitz(const DiffusionMap& map, const Eigen::MatrixXd& q, const PairSampler& sampler, int pairs,
                          std::uint64_t rng_seed) {
    const double est = max_quotient(sampler, pairs, rng_seed, [&](const HVector& u, const HVector& v) {
        return hs_q_norm(map(u) - map(v), q);
    });
    check_bound(est, map.lipschitz(), map.name());
    return est;
}

double estimate_lipschitz(const JumpMap& map, const PairSampler& sampler, int pairs, std::uint64_t rng_seed) {
    const double est = max_quotient(sampler, pairs, rng_seed,
                                    [&](const HVector& u, const HVector& v) { return map.distance(u, map, v); });
    check_bound(est, map.lipschitz(), map.name());
    return est;
}

std::vector<HVector> default_probes(int dim, std::uint64_t seed) {
    std::vector<HVector> probes{HVector::Zero(dim)};
    Rng rng(splitmix64(seed));
    std::normal_distribution<double> normal;
    for (double radius : {1.0, 1.0, 1.0, 1.0, 10.0, 10.0}) {
        HVector x(dim);
        for (int k = 0; k < dim; ++k) x[k] = normal(rng);
        probes.push_back(x * (radius / x.norm()));
    }
    return probes;
}

std::string to_string(PerturbationMode mode) {
    switch (mode) {
        case PerturbationMode::none: return "none";
        case PerturbationMode::additive_constant: return "additive_constant";
        case PerturbationMode::scale: return "scale";
    }
    return "unknown";
}

PerturbationMode perturbation_mode_from_string(const std::string& name) {
    if (name == "none") return PerturbationMode::none;
    if (name == "additive_constant") return PerturbationMode::additive_constant;
    if (name == "scale") return PerturbationMode::scale;
    throw UnknownFamily("unknown perturbation mode: " + name);
}

namespace {

template <class Map>
CoefficientSequence<Map> build_sequence(const Map& limit, PerturbationMode mode, RateSequence rate,
                                        std::optional<Map> direction) {
    if (mode == PerturbationMode::additive_constant && !direction)
        throw std::invalid_argument("additive_constant perturbation needs a direction");
    if (mode != PerturbationMode::none && rate.scale != 0.0 && !(rate.exponent > 0.0))
        throw std::invalid_argument("perturbation rate must decrease to 0");
    CoefficientSequence<Map> seq{limit, mode == PerturbationMode::additive_constant ? *direction : limit, mode, rate,
                                 0.0};
    if (mode == PerturbationMode::none) seq.rate = RateSequence{0.0, 1.0};
    // r_n is maximal at n = 1.
    seq.uniform_bound = limit.lipschitz() + std::abs(seq.r(1)) * seq.direction.lipschitz();
    return seq;
}

template <class Seq, class Estimate, class Distance>
SequenceAudit run_audit(const Seq& seq, const std::vector<int>& ns, int dim, std::uint64_t seed, Estimate estimate,
                        Distance distance) {
    SequenceAudit audit;
    const auto probes = default_probes(dim, seed);
    const PairSampler sampler = default_pair_sampler(dim);
    for (std::size_t j = 0; j < ns.size(); ++j) {
        double est = 0.0;
        try {
            est = estimate(seq.member(ns[j]), sampler, seed + j);
        } catch (const BoundViolated& e) {
            throw HypothesisViolated(std::string("coefficient sequence member: ") + e.what());
        }
        audit.max_estimate = std::max(audit.max_estimate, est);
        double worst = 0.0;
        for (const auto& h : probes) worst = std::max(worst, distance(ns[j], h));
        audit.max_distance.push_back(worst);
        if (j > 0 && worst > audit.max_distance[j - 1] * (1.0 + 1e-12)) audit.distances_monotone = false;
    }
    audit.lipschitz_ok = audit.max_estimate <= seq.uniform_bound * (1.0 + kBoundSlack);
    if (!audit.lipschitz_ok) throw HypothesisViolated("uniform Lipschitz bound exceeded along the sequence");
    return audit;
}

}  // namespace

DriftSequence make_convergent_sequence(const DriftMap& limit, PerturbationMode mode, RateSequence rate,
                                       std::optional<DriftMap> direction) {
    return build_sequence(limit, mode, rate, std::move(direction));
}

DiffusionSequence make_convergent_sequence(const DiffusionMap& limit, PerturbationMode mode, RateSequence rate,
                                           std::optional<DiffusionMap> direction) {
    return build_sequence(limit, mode, rate, std::move(direction));
}

JumpSequence make_convergent_sequence(const JumpMap& limit, PerturbationMode mode, RateSequence rate,
                                      std::optional<JumpMap> direction) {
    return build_sequence(limit, mode, rate, std::move(direction));
}

double member_distance(const DriftSequence& seq, int n, const HVector& h) {
    return (seq.member(n)(h) - seq.limit(h)).norm();
}

double member_distance(const DiffusionSequence& seq, int n, const HVector& h, const Eigen::MatrixXd& q) {
    return hs_q_norm(seq.member(n)(h) - seq.limit(h), q);
}

double member_distance(const JumpSequence& seq, int n, const HVector& h) {
    return seq.member(n).distance(h, seq.limit, h);
}

SequenceAudit audit_sequence(const DriftSequence& seq, const std::vector<int>& ns, int dim, std::uint64_t seed) {
    return run_audit(
        seq, ns, dim, seed,
        [](const DriftMap& m, const PairSampler& s, std::uint64_t sd) { return estimate_lipschitz(m, s, 2000, sd); },
        [&](int n, const HVector& h) { return member_distance(seq, n, h); });
}

SequenceAudit audit_sequence(const DiffusionSequence& seq, const std::vector<int>& ns, int dim,
                             const Eigen::MatrixXd& q, std::uint64_t seed) {
    return run_audit(
        seq, ns, dim, seed,
        [&](const DiffusionMap& m, const PairSampler& s, std::uint64_t sd) {
            return estimate_lipschitz(m, q, s, 2000, sd);
        },
        [&](int n, const HVector& h) { return member_distance(seq, n, h, q); });
}

SequenceAudit audit_sequence(const JumpSequence& seq, const std::vector<int>& ns, int dim, std::uint64_t seed) {
    return run_audit(
        seq, ns, dim, seed,
        [](const JumpMap& m, const PairSampler& s, std::uint64_t sd) { return estimate_lipschitz(m, s, 2000, sd); },
        [&](int n, const HVector& h) { return member_distance(seq, n, h); });
}

}  // namespace mildlab
