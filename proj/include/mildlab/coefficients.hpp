#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "mildlab/noise.hpp"
#include "mildlab/operators.hpp"
#include "mildlab/random.hpp"
#include "mildlab/types.hpp"

namespace mildlab {

// f: H -> H with declared Lipschitz constant. `linear_part` c declares that
// f(u) = c u + r(u); solvers integrate c exactly and r explicitly.
class DriftMap {
public:
    using Fn = std::function<HVector(const HVector&)>;

    DriftMap(std::string name, Fn evaluate, double lipschitz, double linear_part = 0.0);
    static DriftMap zero();

    HVector operator()(const HVector& u) const { return fn_(u); }
    // f(u) - c u.
    HVector remainder(const HVector& u) const;
    double lipschitz() const { return lipschitz_; }
    double linear_part() const { return linear_part_; }
    const std::string& name() const { return name_; }
    bool is_zero() const { return zero_; }
    double anchor(int dim) const { return fn_(HVector::Zero(dim)).norm(); }
    // N with |f(x)| <= N (1 + |x|).
    double growth_constant(int dim) const { return std::max(lipschitz_, anchor(dim)); }

    // f + r g.
    static DriftMap combine(const DriftMap& f, const DriftMap& g, double r);

private:
    std::string name_;
    Fn fn_;
    double lipschitz_;
    double linear_part_;
    bool zero_ = false;
};

// B: H -> L(K, H) as a d x dim_K matrix. Lipschitz constant in the
// Hilbert-Schmidt norm of (B(u) - B(v)) Q^{1/2}.
class DiffusionMap {
public:
    using Fn = std::function<Eigen::MatrixXd(const HVector&)>;

    DiffusionMap(std::string name, Fn evaluate, double lipschitz, bool additive, int dim_k);
    static DiffusionMap zero(int dim, int dim_k);

    Eigen::MatrixXd operator()(const HVector& u) const { return fn_(u); }
    double lipschitz() const { return lipschitz_; }
    bool additive() const { return additive_; }
    int dim_k() const { return dim_k_; }
    const std::string& name() const { return name_; }

    static DiffusionMap combine(const DiffusionMap& b, const DiffusionMap& g, double r);

private:
    std::string name_;
    Fn fn_;
    double lipschitz_;
    bool additive_;
    int dim_k_;
};

// G: Z x H -> H on the finite mark set of a PRM driver. Lipschitz constant in
// the L_2(Z) cap L_p(Z) norm, the max of the two norms.
class JumpMap {
public:
    using Fn = std::function<HVector(double mark, const HVector&)>;

    JumpMap(std::string name, Fn evaluate, double lipschitz, PoissonRandomMeasureDriver marks, double p,
            bool additive = false);

    HVector operator()(double mark, const HVector& u) const { return fn_(mark, u); }
    HVector at_mark(int i, const HVector& u) const { return fn_(marks_.marks[i], u); }
    double lipschitz() const { return lipschitz_; }
    double p() const { return p_; }
    bool additive() const { return additive_; }
    const PoissonRandomMeasureDriver& marks() const { return marks_; }
    const std::string& name() const { return name_; }

    // sum_i m_i G(z_i, u), the compensator drift.
    HVector compensator(const HVector& u) const;
    // |G(.,u) - H(.,v)| in L_2(Z) cap L_p(Z).
    double distance(const HVector& u, const JumpMap& other, const HVector& v) const;

    static JumpMap combine(const JumpMap& g, const JumpMap& h, double r);

private:
    std::string name_;
    Fn fn_;
    double lipschitz_;
    PoissonRandomMeasureDriver marks_;
    double p_;
    bool additive_;
};

// Norms of a mark-indexed family of H-vectors.
double l2_mark_norm(const std::vector<HVector>& values, const Eigen::VectorXd& weights);
double lp_mark_norm(const std::vector<HVector>& values, const Eigen::VectorXd& weights, double p);
double l2_lp_mark_norm(const std::vector<HVector>& values, const Eigen::VectorXd& weights, double p);

// |Phi Q^{1/2}|_HS.
double hs_q_norm(const Eigen::MatrixXd& phi, const Eigen::MatrixXd& q);

struct FamilyParams {
    double scale = 1.0;   // c, s, r or sigma
    HVector offset;       // b of diagonal_multiplicative, constant of additive_constant (drift/jump)
    Eigen::MatrixXd matrix;  // B_0 of additive_constant (diffusion)
};

enum class CoefficientRole { drift, diffusion, jump };

using Coefficient = std::variant<DriftMap, DiffusionMap, JumpMap>;

DriftMap builtin_drift(const std::string& name, const FamilyParams& params, int dim);
DiffusionMap builtin_diffusion(const std::string& name, const FamilyParams& params, const Eigen::MatrixXd& q, int dim);
JumpMap builtin_jump(const std::string& name, const FamilyParams& params, const PoissonRandomMeasureDriver& marks,
                     double p, int dim);

struct CoefficientContext {
    int dim = 1;
    Eigen::MatrixXd q;                       // diffusion role
    std::optional<PoissonRandomMeasureDriver> marks;  // jump role
    double p = 2.0;
};

Coefficient builtin_family(const std::string& name, CoefficientRole role, const FamilyParams& params,
                           const CoefficientContext& context);

using PairSampler = std::function<std::pair<HVector, HVector>(Rng&)>;

// Pairs at mixed magnitudes and separations, from 1e-6 to 10.
PairSampler default_pair_sampler(int dim);

// Max sampled Lipschitz quotient; BoundViolated if it exceeds the declared bound.
double estimate_lipschitz(const DriftMap& map, const PairSampler& sampler, int pairs, std::uint64_t rng_seed);
double estimate_lipschitz(const DiffusionMap& map, const Eigen::MatrixXd& q, const PairSampler& sampler, int pairs,
                          std::uint64_t rng_seed);
double estimate_lipschitz(const JumpMap& map, const PairSampler& sampler, int pairs, std::uint64_t rng_seed);

// {0, seeded unit vectors, norm-10 vectors}.
std::vector<HVector> default_probes(int dim, std::uint64_t seed);

enum class PerturbationMode { none, additive_constant, scale };
std::string to_string(PerturbationMode mode);
PerturbationMode perturbation_mode_from_string(const std::string& name);

template <class Map>
struct CoefficientSequence {
    Map limit;
    Map direction;  // g in f_n = f + r_n g
    PerturbationMode mode = PerturbationMode::none;
    RateSequence rate{0.0, 1.0};
    double uniform_bound = 0.0;

    double r(int n) const { return mode == PerturbationMode::none ? 0.0 : rate(n); }
    Map member(int n) const { return Map::combine(limit, direction, r(n)); }
};

using DriftSequence = CoefficientSequence<DriftMap>;
using DiffusionSequence = CoefficientSequence<DiffusionMap>;
using JumpSequence = CoefficientSequence<JumpMap>;

// `direction` is required for additive_constant and ignored otherwise.
DriftSequence make_convergent_sequence(const DriftMap& limit, PerturbationMode mode, RateSequence rate,
                                       std::optional<DriftMap> direction = std::nullopt);
DiffusionSequence make_convergent_sequence(const DiffusionMap& limit, PerturbationMode mode, RateSequence rate,
                                           std::optional<DiffusionMap> direction = std::nullopt);
JumpSequence make_convergent_sequence(const JumpMap& limit, PerturbationMode mode, RateSequence rate,
                                      std::optional<JumpMap> direction = std::nullopt);

// Distance of the n-th member to the limit at a probe state.
double member_distance(const DriftSequence& seq, int n, const HVector& h);
double member_distance(const DiffusionSequence& seq, int n, const HVector& h, const Eigen::MatrixXd& q);
double member_distance(const JumpSequence& seq, int n, const HVector& h);

struct SequenceAudit {
    double max_estimate = 0.0;
    std::vector<double> max_distance;  // per audited n, over probes
    bool lipschitz_ok = true;
    bool distances_monotone = true;
};

// Throws HypothesisViolated when a member's sampled quotient exceeds the uniform bound.
SequenceAudit audit_sequence(const DriftSequence& seq, const std::vector<int>& ns, int dim, std::uint64_t seed);
SequenceAudit audit_sequence(const DiffusionSequence& seq, const std::vector<int>& ns, int dim,
                             const Eigen::MatrixXd& q, std::uint64_t seed);
SequenceAudit audit_sequence(const JumpSequence& seq, const std::vector<int>& ns, int dim, std::uint64_t seed);

}  // namespace mildlab
