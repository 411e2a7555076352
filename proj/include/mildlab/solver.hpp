#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mildlab/coefficients.hpp"
#include "mildlab/noise.hpp"
#include "mildlab/operators.hpp"
#include "mildlab/types.hpp"

namespace mildlab {

// u_0 = mean + stddev * xi, xi standard Gaussian drawn from the path's initial sub-stream.
struct InitialDatum {
    HVector mean;
    double stddev = 0.0;
    HVector sample(std::uint64_t stream) const;
};

// u_{0n} = u_0 + r_n c on the same stream.
struct InitialSequence {
    InitialDatum limit;
    HVector direction;
    RateSequence rate{0.0, 1.0};
    InitialDatum member(int n) const;
};

struct MartingaleCoupling {
    DiffusionMap diffusion;
    MartingaleDriver driver;
};

struct PoissonCoupling {
    JumpMap jump;
};

using Coupling = std::variant<MartingaleCoupling, PoissonCoupling>;

struct EvolutionProblem {
    SpectralOperator op;
    DriftMap drift;
    Coupling coupling;
    InitialDatum initial;
    TimeGrid grid;
    double p = 2.0;

    bool is_martingale() const { return std::holds_alternative<MartingaleCoupling>(coupling); }
    bool is_additive() const;
    NoiseDriver driver() const;
    const MartingaleCoupling& martingale() const;
    const PoissonCoupling& poisson() const;
    // Quasi-monotone operator, matching dimensions, p >= 2, p > 2 only with
    // additive martingale coupling.
    void validate() const;
};

// Exponential Euler propagator for u' + (A + c) u = g:
// u <- S(h) u + phi(h) g, phi(h) = (A + c)^{-1}(I - S(h)) (h on zero eigenvalues).
class Propagator {
public:
    Propagator(const SpectralOperator& op, double linear_shift = 0.0);
    void set_step(double h);
    double step() const { return h_; }
    // u <- S(h)(u + kick) - phi(h) drift
    void advance(HVector& u, const HVector& drift, const HVector& kick) const;
    void advance(HVector& u, const HVector& drift) const;
    const Eigen::VectorXd& effective_spectrum() const { return spectrum_; }
    double effective_eta() const { return std::max(0.0, -spectrum_.minCoeff()); }

private:
    Eigen::VectorXd spectrum_;
    Eigen::MatrixXd basis_;
    bool dense_;
    double h_ = -1.0;
    Eigen::VectorXd decay_, phi_;
    mutable Eigen::VectorXd work_, work2_;
};

DiscretePath solve_mild_martingale(const EvolutionProblem& problem, const NoisePath& path);
DiscretePath solve_mild_poisson(const EvolutionProblem& problem, const NoisePath& path);
// Dispatches on the coupling kind.
DiscretePath solve_mild(const EvolutionProblem& problem, const NoisePath& path);

using Forcing = std::function<HVector(double t)>;
// u' + Au = f(t): u_{k+1} = S(dt) u_k + phi(dt) f(t_k).
DiscretePath solve_deterministic(const SpectralOperator& op, const Forcing& forcing, const HVector& u0,
                                 const TimeGrid& grid);

using DiffusionIntegrand = std::function<Eigen::MatrixXd(double t)>;
using JumpIntegrand = std::function<HVector(double t, double mark)>;

// Y_k = sum_{j<k} S(t_k - t_j) B(t_j) dM_j.
DiscretePath stochastic_convolution(const SpectralOperator& op, const DiffusionIntegrand& integrand,
                                    const NoisePath& path);
// Jump sum minus compensator integral, jump-adapted.
DiscretePath stochastic_convolution(const SpectralOperator& op, const JumpIntegrand& integrand,
                                    const PoissonRandomMeasureDriver& driver, const NoisePath& path);

struct PathEnsemble {
    std::vector<DiscretePath> paths;
    TimeGrid grid{1.0, 1};
    std::uint64_t base_seed = 0;
    int sweep_index = 0;
    std::vector<std::uint64_t> streams;
    std::string scheme;
};

// Path i uses stream_id(base_seed, sweep_index, i).
PathEnsemble simulate_ensemble(const EvolutionProblem& problem, int paths, std::uint64_t base_seed,
                               int sweep_index = 0);

struct HpEstimate {
    double value = 0.0;
    double std_error = 0.0;
    double moment = 0.0;            // E sup |u|^p
    double moment_std_error = 0.0;
};

// From per-path sup norms: mean of sup^p, p-th root, delta-method error.
HpEstimate hp_from_sups(const std::vector<double>& sups, double p);
// Sup over grid indices 0..upto (all when omitted).
HpEstimate hp_norm_estimate(const PathEnsemble& ensemble, double p, std::optional<int> upto = std::nullopt);
HpEstimate difference_hp(const PathEnsemble& a, const PathEnsemble& b, double p,
                         std::optional<int> upto = std::nullopt);

// Columns: path_id,t,coord_0..coord_{d-1}.
void write_ensemble_csv(std::ostream& os, const PathEnsemble& ensemble);
struct SummaryRow {
    std::string statistic;
    double value = 0.0;
    double std_error = 0.0;
};
// Columns: statistic,value,stderr.
void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows);

// Shortest round-trip decimal representation; used for every CSV number.
std::string format_number(double x);

}  // namespace mildlab
