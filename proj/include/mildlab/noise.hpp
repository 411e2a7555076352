#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mildlab/types.hpp"

namespace mildlab {

// Uniform grid t_k = k T / steps, k = 0..steps.
class TimeGrid {
public:
    TimeGrid(double horizon, int steps);
    double horizon() const { return horizon_; }
    int steps() const { return steps_; }
    double dt() const { return horizon_ / steps_; }
    // Exact at k = steps.
    double time(int k) const;
    bool operator==(const TimeGrid&) const = default;

private:
    double horizon_;
    int steps_;
};

struct QWienerDriver {
    Eigen::VectorXd q;  // eigenvalues of Q, q_j >= 0
    int dim() const { return static_cast<int>(q.size()); }
};

// Mean-zero jump distribution on K: discrete atoms or a centered Gaussian with
// diagonal covariance.
class JumpLaw {
public:
    static JumpLaw atoms(std::vector<HVector> values, std::vector<double> probabilities);
    static JumpLaw gaussian(Eigen::VectorXd variances);

    int dim() const;
    bool is_gaussian() const { return gaussian_; }
    const std::vector<HVector>& values() const { return values_; }
    const std::vector<double>& probabilities() const { return probs_; }
    const Eigen::VectorXd& variances() const { return variances_; }
    Eigen::MatrixXd second_moment() const;

private:
    bool gaussian_ = false;
    std::vector<HVector> values_;
    std::vector<double> probs_;
    Eigen::VectorXd variances_;
};

struct CompensatedCompoundPoissonDriver {
    double rate = 0.0;
    JumpLaw jumps = JumpLaw::gaussian(Eigen::VectorXd::Ones(1));
    int dim() const { return jumps.dim(); }
    // Q = rate * E[J J^T].
    Eigen::MatrixXd q_effective() const { return rate * jumps.second_moment(); }
};

// Finite mark set z_i with intensities m(z_i) per unit time.
struct PoissonRandomMeasureDriver {
    Eigen::VectorXd marks;
    Eigen::VectorXd weights;
    int mark_count() const { return static_cast<int>(marks.size()); }
    double total_intensity() const { return weights.sum(); }
    void validate() const;
};

using MartingaleDriver = std::variant<QWienerDriver, CompensatedCompoundPoissonDriver>;
using NoiseDriver = std::variant<QWienerDriver, CompensatedCompoundPoissonDriver, PoissonRandomMeasureDriver>;

enum class NoiseKind { wiener, compound_poisson, prm };
std::string to_string(NoiseKind kind);

int driver_dim(const MartingaleDriver& driver);
// Covariance operator Q of hypothesis (Q); d<M,M> = dt and Q_M = Q.
Eigen::MatrixXd driver_covariance(const MartingaleDriver& driver);

struct MarkedEvent {
    double time = 0.0;
    int mark = 0;
};

struct NoisePath {
    NoiseKind kind = NoiseKind::wiener;
    TimeGrid grid{1.0, 1};
    std::uint64_t stream = 0;
    Eigen::MatrixXd increments;      // steps x dim_K; martingale drivers
    Eigen::VectorXd jump_square_sum; // per cell sum of |jump|^2; compound Poisson
    std::vector<MarkedEvent> events; // sorted by time; PRM
    Eigen::VectorXd weights;         // PRM intensities, compensator per cell is dt * weights

    bool is_martingale() const { return kind != NoiseKind::prm; }
    HVector value(int k) const;              // M(t_k)
    double realized_bracket(int k) const;     // [M,M](t_k)
    double predictable_bracket(int k) const;  // <M,M>(t_k) = t_k
    std::vector<int> counts(int mark_count) const;
};

NoisePath sample_wiener_path(const QWienerDriver& driver, const TimeGrid& grid, std::uint64_t rng_seed);
NoisePath sample_compound_poisson_path(const CompensatedCompoundPoissonDriver& driver, const TimeGrid& grid,
                                       std::uint64_t rng_seed);
NoisePath sample_prm_path(const PoissonRandomMeasureDriver& driver, const TimeGrid& grid, std::uint64_t rng_seed);
NoisePath sample_path(const NoiseDriver& driver, const TimeGrid& grid, std::uint64_t rng_seed);
NoisePath sample_path(const MartingaleDriver& driver, const TimeGrid& grid, std::uint64_t rng_seed);

// Sums groups of `factor` consecutive cells; the result lives on the coarser grid.
NoisePath coarsen(const NoisePath& path, int factor);

struct CellCovariance {
    int cell = 0;
    Eigen::MatrixXd estimate;  // E[dM dM^T] / dt
    Eigen::MatrixXd std_error;
    double max_excess_z = 0.0;  // max (estimate - Q)/se; > z_critical means bound violated
    double max_abs_z = 0.0;
    bool bound_ok = true;
    bool equality_ok = true;
};

struct HypothesisQReport {
    std::vector<CellCovariance> cells;
    Eigen::MatrixXd q_declared;
    Eigen::MatrixXd q_pooled;  // mean over cells of the per-cell estimates
    Eigen::MatrixXd q_pooled_std_error;
    double z_critical = 0.0;
    bool pass = true;           // bound holds in every cell
    bool equality_pass = true;  // equality within tolerance in every cell
};

// Needs at least 100 paths; throws DriverMismatch for PRM paths.
HypothesisQReport verify_hypothesis_Q(const MartingaleDriver& driver, std::span<const NoisePath> ensemble);

}  // namespace mildlab
