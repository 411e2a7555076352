#include "mildlab/noise.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "mildlab/error.hpp"
#include "mildlab/random.hpp"
#include "mildlab/statistics.hpp"

namespace mildlab {

TimeGrid::TimeGrid(double horizon, int steps) : horizon_(horizon), steps_(steps) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw std::invalid_argument("horizon must be positive");
    if (steps < 1) throw std::invalid_argument("steps must be >= 1");
}

double TimeGrid::time(int k) const {
    if (k >= steps_) return horizon_;
    return horizon_ * static_cast<double>(k) / static_cast<double>(steps_);
}

JumpLaw JumpLaw::atoms(std::vector<HVector> values, std::vector<double> probabilities) {
    if (values.empty() || values.size() != probabilities.size())
        throw std::invalid_argument("jump law: atoms and probabilities must be non-empty and aligned");
    const Eigen::Index dim = values.front().size();
    double total = 0.0;
    HVector mean = HVector::Zero(dim);
    double scale = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (values[i].size() != dim) throw DimensionMismatch("jump atoms of different dimension");
        if (!(probabilities[i] >= 0.0)) throw std::invalid_argument("negative atom probability");
        total += probabilities[i];
        mean += probabilities[i] * values[i];
        scale = std::max(scale, values[i].norm());
    }
    if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("atom probabilities must sum to 1");
    if (mean.norm() > 1e-12 * (1.0 + scale)) throw std::invalid_argument("jump law must have mean zero");
    JumpLaw law;
    law.values_ = std::move(values);
    law.probs_ = std::move(probabilities);
    return law;
}

JumpLaw JumpLaw::gaussian(Eigen::VectorXd variances) {
    if (variances.size() < 1 || (variances.array() < 0.0).any())
        throw std::invalid_argument("gaussian jump law needs nonnegative variances");
    JumpLaw law;
    law.gaussian_ = true;
    law.variances_ = std::move(variances);
    return law;
}

int JumpLaw::dim() const {
    return static_cast<int>(gaussian_ ? variances_.size() : values_.front().size());
}

Eigen::MatrixXd JumpLaw::second_moment() const {
    if (gaussian_) return variances_.asDiagonal();
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim(), dim());
    for (std::size_t i = 0; i < values_.size(); ++i) m += probs_[i] * values_[i] * values_[i].transpose();
    return m;
}

void PoissonRandomMeasureDriver::validate() const {
    if (marks.size() != weights.size()) throw DimensionMismatch("marks and weights must align");
    if (marks.size() < 1) throw std::invalid_argument("mark set must be non-empty");
    if ((weights.array() < 0.0).any() || !weights.allFinite())
        throw std::invalid_argument("mark intensities must be finite and nonnegative");
}

std::string to_string(NoiseKind kind) {
    switch (kind) {
        case NoiseKind::wiener: return "wiener";
        case NoiseKind::compound_poisson: return "cpoisson";
        case NoiseKind::prm: return "prm";
    }
    return "unknown";
}

int driver_dim(const MartingaleDriver& driver) {
    return std::visit([](const auto& d) { return d.dim(); }, driver);
}

Eigen::MatrixXd driver_covariance(const MartingaleDriver& driver) {
    if (const auto* w = std::get_if<QWienerDriver>(&driver)) return w->q.asDiagonal();
    return std::get<CompensatedCompoundPoissonDriver>(driver).q_effective();
}

HVector NoisePath::value(int k) const {
    if (!is_martingale()) throw DriverMismatch("value() needs a martingale path");
    HVector m = HVector::Zero(increments.cols());
    for (int j = 0; j < k; ++j) m += increments.row(j).transpose();
    return m;
}

double NoisePath::realized_bracket(int k) const {
    if (kind == NoiseKind::compound_poisson) return jump_square_sum.head(k).sum();
    if (kind == NoiseKind::wiener) return increments.topRows(k).squaredNorm();
    throw DriverMismatch("realized_bracket() needs a martingale path");
}

double NoisePath::predictable_bracket(int k) const { return grid.time(k); }

std::vector<int> NoisePath::counts(int mark_count) const {
    std::vector<int> c(static_cast<std::size_t>(mark_count), 0);
    for (const auto& e : events) ++c.at(static_cast<std::size_t>(e.mark));
    return c;
}

NoisePath sample_wiener_path(const QWienerDriver& driver, const TimeGrid& grid, std::uint64_t rng_seed) {
    if ((driver.q.array() < 0.0).any()) throw std::invalid_argument("q must be nonnegative");
    NoisePath path;
    path.kind = NoiseKind::wiener;
    path.grid = grid;
    path.stream = rng_seed;
    const int dim = driver.dim();
    path.increments.resize(grid.steps(), dim);
    Rng rng(substream(rng_seed, kNoiseTag));
    std::normal_distribution<double> normal;
    const Eigen::VectorXd sd = (driver.q * grid.dt()).cwiseSqrt();
    for (int k = 0; k < grid.steps(); ++k)
        for (int j = 0; j < dim; ++j) path.increments(k, j) = sd[j] * normal(rng);
    return path;
}

NoisePath sample_compound_poisson_path(const CompensatedCompoundPoissonDriver& driver, const TimeGrid& grid,
                                       std::uint64_t rng_seed) {
    if (!(driver.rate >= 0.0)) throw std::invalid_argument("rate must be nonnegative");
    NoisePath path;
    path.kind = NoiseKind::compound_poisson;
    path.grid = grid;
    path.stream = rng_seed;
    const int dim = driver.dim();
    path.increments = Eigen::MatrixXd::Zero(grid.steps(), dim);
    path.jump_square_sum = Eigen::VectorXd::Zero(grid.steps());
    if (driver.rate == 0.0) return path;

    Rng rng(substream(rng_seed, kNoiseTag));
    std::poisson_distribution<int> count(driver.rate * grid.dt());
    std::normal_distribution<double> normal;
    const JumpLaw& law = driver.jumps;
    std::discrete_distribution<int> pick;
    Eigen::VectorXd sd;
    if (law.is_gaussian()) {
        sd = law.variances().cwiseSqrt();
    } else {
        pick = std::discrete_distribution<int>(law.probabilities().begin(), law.probabilities().end());
    }
    HVector jump(dim);
    for (int k = 0; k < grid.steps(); ++k) {
        const int n = count(rng);
        for (int e = 0; e < n; ++e) {
            if (law.is_gaussian()) {
                for (int j = 0; j < dim; ++j) jump[j] = sd[j] * normal(rng);
            } else {
                jump = law.values()[static_cast<std::size_t>(pick(rng))];
            }
            path.increments.row(k) += jump.transpose();
            path.jump_square_sum[k] += jump.squaredNorm();
        }
    }
    // Compensation is implicit: the jump law is centered, so rate * E[J] dt = 0.
    return path;
}

NoisePath sample_prm_path(const PoissonRandomMeasureDriver& driver, const TimeGrid& grid, std::uint64_t rng_seed) {
    driver.validate();
    NoisePath path;
    path.kind = NoiseKind::prm;
    path.grid = grid;
    path.stream = rng_seed;
    path.weights = driver.weights;
    Rng rng(substream(rng_seed, kNoiseTag));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double horizon = grid.horizon();
    for (int i = 0; i < driver.mark_count(); ++i) {
        if (driver.weights[i] == 0.0) continue;
        std::poisson_distribution<int> count(driver.weights[i] * horizon);
        const int n = count(rng);
        for (int e = 0; e < n; ++e) {
            // (1 - U) lies in (0, 1], so event times lie in (0, T].
            path.events.push_back({horizon * (1.0 - unit(rng)), i});
        }
    }
    std::sort(path.events.begin(), path.events.end(), [](const MarkedEvent& a, const MarkedEvent& b) {
        return a.time < b.time || (a.time == b.time && a.mark < b.mark);
    });
    return path;
}

NoisePath sample_path(const NoiseDriver& driver, const TimeGrid& grid, std::uint64_t rng_seed) {
    return std::visit(
        [&](const auto& d) -> NoisePath {
            using D = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<D, QWienerDriver>) return sample_wiener_path(d, grid, rng_seed);
            else if constexpr (std::is_same_v<D, CompensatedCompoundPoissonDriver>)
                return sample_compound_poisson_path(d, grid, rng_seed);
            else return sample_prm_path(d, grid, rng_seed);
        },
        driver);
}

NoisePath sample_path(const MartingaleDriver& driver, const TimeGrid& grid, std::uint64_t rng_seed) {
    if (const auto* w = std::get_if<QWienerDriver>(&driver)) return sample_wiener_path(*w, grid, rng_seed);
    return sample_compound_poisson_path(std::get<CompensatedCompoundPoissonDriver>(driver), grid, rng_seed);
}

NoisePath coarsen(const NoisePath& path, int factor) {
    if (factor < 1 || path.grid.steps() % factor != 0) throw std::invalid_argument("factor must divide steps");
    NoisePath out = path;
    out.grid = TimeGrid(path.grid.horizon(), path.grid.steps() / factor);
    if (path.is_martingale()) {
        const int steps = out.grid.steps();
        out.increments = Eigen::MatrixXd::Zero(steps, path.increments.cols());
        if (path.jump_square_sum.size() > 0) out.jump_square_sum = Eigen::VectorXd::Zero(steps);
        for (int k = 0; k < path.grid.steps(); ++k) {
            out.increments.row(k / factor) += path.increments.row(k);
            if (path.jump_square_sum.size() > 0) out.jump_square_sum[k / factor] += path.jump_square_sum[k];
        }
    }
    return out;
}

HypothesisQReport verify_hypothesis_Q(const MartingaleDriver& driver, std::span<const NoisePath> ensemble) {
    if (ensemble.size() < 100) throw std::invalid_argument("verify_hypothesis_Q needs at least 100 paths");
    for (const auto& p : ensemble)
        if (!p.is_martingale()) throw DriverMismatch("hypothesis (Q) concerns martingale drivers");
    const TimeGrid grid = ensemble.front().grid;
    const int dim = driver_dim(driver);
    const int steps = grid.steps();
    const double dt = grid.dt();
    const std::size_t n = ensemble.size();

    HypothesisQReport report;
    report.q_declared = driver_covariance(driver);
    const double tests = static_cast<double>(steps) * dim * (dim + 1) / 2.0;
    report.z_critical = std::sqrt(2.0 * std::log(std::max(tests, 1.0) / 1e-3));
    report.q_pooled = Eigen::MatrixXd::Zero(dim, dim);
    report.q_pooled_std_error = Eigen::MatrixXd::Zero(dim, dim);

    std::vector<double> products(n);
    std::vector<std::vector<double>> pooled(static_cast<std::size_t>(dim * dim), std::vector<double>(n, 0.0));
    for (int k = 0; k < steps; ++k) {
        CellCovariance cell;
        cell.cell = k;
        cell.estimate = Eigen::MatrixXd::Zero(dim, dim);
        cell.std_error = Eigen::MatrixXd::Zero(dim, dim);
        for (int a = 0; a < dim; ++a) {
            for (int b = a; b < dim; ++b) {
                for (std::size_t i = 0; i < n; ++i) {
                    const auto& inc = ensemble[i].increments;
                    if (inc.rows() != steps || inc.cols() != dim) throw DimensionMismatch("path shape differs from driver");
                    products[i] = inc(k, a) * inc(k, b) / dt;
                    pooled[static_cast<std::size_t>(a * dim + b)][i] += products[i] / steps;
                }
                const MeanEstimate e = estimate_mean(products);
                cell.estimate(a, b) = cell.estimate(b, a) = e.mean;
                cell.std_error(a, b) = cell.std_error(b, a) = e.std_error;
                const double diff = e.mean - report.q_declared(a, b);
                double z = 0.0;
                if (e.std_error > 0.0) z = diff / e.std_error;
                else if (std::abs(diff) > 1e-12) z = diff > 0 ? INFINITY : -INFINITY;
                cell.max_excess_z = std::max(cell.max_excess_z, z);
                cell.max_abs_z = std::max(cell.max_abs_z, std::abs(z));
            }
        }
        cell.bound_ok = cell.max_excess_z <= report.z_critical;
        cell.equality_ok = cell.max_abs_z <= report.z_critical;
        report.pass = report.pass && cell.bound_ok;
        report.equality_pass = report.equality_pass && cell.equality_ok;
        report.cells.push_back(std::move(cell));
    }
    for (int a = 0; a < dim; ++a) {
        for (int b = a; b < dim; ++b) {
            const MeanEstimate e = estimate_mean(pooled[static_cast<std::size_t>(a * dim + b)]);
            report.q_pooled(a, b) = report.q_pooled(b, a) = e.mean;
            report.q_pooled_std_error(a, b) = report.q_pooled_std_error(b, a) = e.std_error;
        }
    }
    return report;
}

}  // namespace mildlab
