#include <algorithm>
#include <cmath>

#include "mildlab/convergence.hpp"
#include "mildlab/error.hpp"
#include "mildlab/parallel.hpp"
#include "mildlab/random.hpp"
#include "mildlab/statistics.hpp"

namespace mildlab {

double maximal_inequality_constant(double eta, double horizon) { return 4.0 * std::exp(2.0 * eta * horizon); }

double jump_inequality_constant(double p, double eta, double horizon, bool random_integrand) {
    if (p == 2.0) return 2.0 * std::exp(2.0 * eta * horizon);
    if (p == 4.0) {
        // Doob L^4 constant times the Ito bound E|X_T|^4 <= 8 E int |X|^2 g + 3 E int h.
        const double doob = std::pow(4.0 / 3.0, 4.0);
        const double base = random_integrand ? std::max(64.0 * doob * doob * horizon, 6.0 * doob)
                                             : doob * std::max(8.0 * horizon, 3.0);
        return base * std::exp(4.0 * eta * horizon);
    }
    throw std::invalid_argument("jump inequality constant is available for p = 2 and p = 4 only");
}

namespace {

double effective_eta(const SpectralOperator& op) { return std::max(0.0, -op.eigenvalues().minCoeff()); }

std::vector<int> audit_indices(int steps, int points) {
    std::vector<int> idx;
    points = std::max(1, std::min(points, steps));
    for (int m = 1; m <= points; ++m) {
        const int k = static_cast<int>(std::lround(static_cast<double>(m) * steps / points));
        if (idx.empty() || idx.back() != k) idx.push_back(k);
    }
    return idx;
}

bool deltas_decrease(const std::vector<double>& delta) {
    if (delta.empty()) return true;
    for (std::size_t i = 1; i < delta.size(); ++i)
        if (delta[i] > 1.2 * delta[i - 1]) return false;
    return delta.back() <= delta.front();
}

// LHS <= bound counts as holding; both zero is the unperturbed case.
double relative_margin(double lhs, double bound) {
    if (bound <= 0.0) return lhs <= 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
    return (bound - lhs) / bound;
}

}  // namespace

LemmaAuditReport audit_lemma_estimates(const SemilinearResult& result) {
    const LemmaConstants& c = result.constants;
    const double p = c.p;
    const double c3 = std::pow(3.0, p - 1.0);
    LemmaAuditReport out;
    if (result.traces.empty()) return out;
    const int steps = static_cast<int>(result.traces.front().error.size()) - 1;
    const std::vector<int> audited = audit_indices(steps, c.audit_points);

    auto gamma_drift = [&](double t) {
        return c3 * std::exp(p * c.eta * t) * std::pow(t, p - 1.0) * std::pow(c.drift_lipschitz, p);
    };
    auto gamma_noise = [&](double t) {
        if (c.martingale) return c3 * maximal_inequality_constant(c.eta, t) * c.noise_lipschitz * c.noise_lipschitz;
        return c3 * jump_inequality_constant(p, c.eta, t, true) * 2.0 * std::pow(c.noise_lipschitz, p);
    };

    LemmaAudit uno, due, noise;
    uno.id = "lemma_uno";
    due.id = "lemma_due";
    noise.id = c.noise_lemma;
    for (auto* l : {&uno, &due, &noise}) {
        for (int k : audited) l->audit_times.push_back(k * c.dt);
    }
    uno.gamma_reference = 0.0;
    due.gamma_reference = gamma_drift(c.horizon);
    noise.gamma_reference = gamma_noise(c.horizon);
    for (auto* l : {&uno, &due, &noise}) l->inequality_ok = true;

    std::vector<std::vector<double>> integrals;
    for (const auto& tr : result.traces) {
        std::vector<double> integral(steps + 1, 0.0);
        for (int k = 1; k <= steps; ++k) integral[k] = integral[k - 1] + c.dt * tr.error[k - 1];
        integrals.push_back(integral);
        // Fitted slopes use every grid time so that the Gronwall step below is closed.
        for (int k = 1; k <= steps; ++k) {
            if (integral[k] <= 0.0) continue;
            due.gamma_fitted = std::max(due.gamma_fitted, (tr.drift_lhs[k] - tr.drift_delta[k]) / integral[k]);
            noise.gamma_fitted = std::max(noise.gamma_fitted, (tr.noise_lhs[k] - tr.noise_delta[k]) / integral[k]);
        }
    }

    for (std::size_t j = 0; j < result.traces.size(); ++j) {
        const auto& tr = result.traces[j];
        const auto& integral = integrals[j];
        for (auto* l : {&uno, &due, &noise}) l->ns.push_back(tr.n);
        double m_uno = std::numeric_limits<double>::infinity(), m_due = m_uno, m_noise = m_uno;
        for (int k : audited) {
            const double t = k * c.dt;
            m_uno = std::min(m_uno, relative_margin(tr.initial_lhs[k], tr.initial_bound[k]));
            m_due = std::min(m_due, relative_margin(tr.drift_lhs[k], tr.drift_delta[k] + gamma_drift(t) * integral[k]));
            m_noise =
                std::min(m_noise, relative_margin(tr.noise_lhs[k], tr.noise_delta[k] + gamma_noise(t) * integral[k]));
        }
        uno.min_margin.push_back(m_uno);
        due.min_margin.push_back(m_due);
        noise.min_margin.push_back(m_noise);
        uno.delta_at_horizon.push_back(tr.initial_bound[steps]);
        due.delta_at_horizon.push_back(tr.drift_delta[steps]);
        noise.delta_at_horizon.push_back(tr.noise_delta[steps]);
        uno.inequality_ok = uno.inequality_ok && m_uno >= 0.0;
        due.inequality_ok = due.inequality_ok && m_due >= 0.0;
        noise.inequality_ok = noise.inequality_ok && m_noise >= 0.0;
    }
    for (auto* l : {&uno, &due, &noise}) {
        l->delta_decreasing = deltas_decrease(l->delta_at_horizon);
        l->pass = l->inequality_ok && l->delta_decreasing;
    }

    const double gamma = c3 * (due.gamma_fitted + noise.gamma_fitted);
    out.pass = uno.pass && due.pass && noise.pass;
    for (const auto& tr : result.traces) {
        GronwallRow g;
        g.n = tr.n;
        g.error_power = tr.error[steps];
        g.delta_total = c3 * (tr.initial_bound[steps] + tr.drift_delta[steps] + tr.noise_delta[steps]);
        g.gamma = gamma;
        g.bound = g.delta_total * std::exp(gamma * c.horizon);
        g.ok = g.error_power <= g.bound * (1.0 + 1e-12);
        out.pass = out.pass && g.ok;
        out.gronwall.push_back(g);
    }
    out.lemmas = {uno, due, noise};
    return out;
}

namespace {

// g(A) as a dense matrix.
Eigen::MatrixXd spectral_matrix(const SpectralOperator& op, const std::function<double(double)>& g) {
    const Eigen::VectorXd a = op.eigenvalues();
    Eigen::VectorXd ga(a.size());
    for (Eigen::Index k = 0; k < a.size(); ++k) ga[k] = g(a[k]);
    const Eigen::MatrixXd q = op.basis();
    return q * ga.asDiagonal() * q.transpose();
}

// E|K y_0|^2 for y_0 = m + sigma xi.
double gaussian_second_moment(const Eigen::MatrixXd& k, const InitialDatum& y0) {
    return (k * y0.mean).squaredNorm() + y0.stddev * y0.stddev * k.squaredNorm();
}

double ratio_of(double lhs, double rhs) {
    if (rhs > 0.0) return lhs / rhs;
    return lhs > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
}

}  // namespace

CorollaryReport audit_corollary_utile(const CorollarySetup& setup) {
    const EvolutionProblem& problem = setup.problem;
    problem.validate();
    if (!problem.is_martingale() || !problem.is_additive() || !problem.drift.is_zero())
        throw HypothesisViolated("the corollary audit needs f = 0 and additive martingale noise");
    if (problem.op.eta() != 0.0) throw HypothesisViolated("the corollary audit needs eta = 0");
    if (problem.p != 2.0) throw HypothesisViolated("the corollary audit is stated in H_2");
    if (setup.paths < 2) throw std::invalid_argument("audit needs at least two paths");

    const double T = problem.grid.horizon();
    const Eigen::MatrixXd b = problem.martingale().diffusion(problem.initial.mean);
    const Eigen::MatrixXd q = driver_covariance(problem.martingale().driver);
    const int d = problem.op.dimension();
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(d, d);
    const double y0_moment = gaussian_second_moment(id, problem.initial);
    const double b_norm2 = std::pow(hs_q_norm(b, q), 2.0);
    const NoiseDriver driver = problem.driver();

    CorollaryReport out;
    out.envelope_ok = true;
    for (std::size_t j = 0; j < setup.lambdas.size(); ++j) {
        const double lambda = setup.lambdas[j];
        EvolutionProblem regularized = problem;
        regularized.op = yosida_operator(problem.op, lambda);
        std::vector<double> sups(static_cast<std::size_t>(setup.paths));
        parallel_for(sups.size(), [&](std::size_t i) {
            const NoisePath path = sample_path(driver, problem.grid, stream_id(setup.base_seed, j, i));
            sups[i] = (solve_mild(problem, path) - solve_mild(regularized, path)).rowwise().norm().maxCoeff();
        });
        const HpEstimate lhs = hp_from_sups(sups, 2.0);

        std::vector<double> epsilons{std::pow(lambda, 0.25)};
        epsilons.insert(epsilons.end(), setup.fixed_epsilons.begin(), setup.fixed_epsilons.end());
        for (std::size_t e = 0; e < epsilons.size(); ++e) {
            const double eps = epsilons[e];
            const Eigen::MatrixXd smooth_gap = spectral_matrix(problem.op, [eps](double a) { return eps * a / (1.0 + eps * a); });
            const Eigen::MatrixXd a_j = spectral_matrix(problem.op, [eps](double a) { return a / (1.0 + eps * a); });
            CorollaryRow row;
            row.lambda = lambda;
            row.epsilon = eps;
            row.lhs = lhs.moment;
            row.lhs_se = lhs.moment_std_error;
            row.epsilon_terms = gaussian_second_moment(smooth_gap, problem.initial) + T * std::pow(hs_q_norm(smooth_gap * b, q), 2.0);
            row.lambda_terms = T * lambda * (gaussian_second_moment(a_j, problem.initial) + T * std::pow(hs_q_norm(a_j * b, q), 2.0));
            row.rhs = row.epsilon_terms + row.lambda_terms;
            row.ratio = ratio_of(row.lhs, row.rhs);
            out.fitted_constant = std::max(out.fitted_constant, row.ratio);
            if (e == 0) {
                const double envelope = T * std::sqrt(lambda) * (y0_moment + T * b_norm2);
                out.envelope_ok = out.envelope_ok && row.lambda_terms <= envelope * (1.0 + 1e-12);
                out.envelope_constant = std::max(out.envelope_constant, row.rhs / std::sqrt(lambda));
            }
            out.rows.push_back(row);
        }
    }
    out.pass = out.fitted_constant <= out.reference_constant && out.envelope_ok;
    return out;
}

InequalityReport audit_martingale_maximal_inequality(const std::vector<MartingaleConvolutionCase>& cases, int paths,
                                                     std::uint64_t base_seed) {
    if (paths < 2) throw std::invalid_argument("audit needs at least two paths");
    InequalityReport out;
    out.inequality = "martingale maximal inequality";
    for (std::size_t c = 0; c < cases.size(); ++c) {
        const auto& cs = cases[c];
        const Eigen::MatrixXd q = driver_covariance(cs.driver);
        std::vector<double> sups(static_cast<std::size_t>(paths));
        parallel_for(sups.size(), [&](std::size_t i) {
            const NoisePath path = sample_path(cs.driver, cs.grid, stream_id(base_seed, c, i));
            sups[i] = stochastic_convolution(cs.op, cs.integrand, path).rowwise().norm().maxCoeff();
        });
        const HpEstimate lhs = hp_from_sups(sups, 2.0);
        double rhs = 0.0;
        for (int k = 0; k < cs.grid.steps(); ++k) rhs += cs.grid.dt() * std::pow(hs_q_norm(cs.integrand(cs.grid.time(k)), q), 2.0);
        InequalityRow row{cs.label, lhs.moment, lhs.moment_std_error, rhs, ratio_of(lhs.moment, rhs),
                          maximal_inequality_constant(effective_eta(cs.op), cs.grid.horizon()), false};
        row.violation = row.ratio > row.reference_constant;
        out.violations += row.violation ? 1 : 0;
        out.fitted_constant = std::max(out.fitted_constant, row.ratio);
        out.rows.push_back(row);
    }
    out.pass = out.violations == 0;
    return out;
}

InequalityReport audit_poisson_maximal_inequality(const std::vector<PoissonConvolutionCase>& cases, int paths,
                                                  std::uint64_t base_seed) {
    if (paths < 2) throw std::invalid_argument("audit needs at least two paths");
    InequalityReport out;
    out.inequality = "Poisson maximal inequality";
    for (std::size_t c = 0; c < cases.size(); ++c) {
        const auto& cs = cases[c];
        cs.driver.validate();
        std::vector<double> sups(static_cast<std::size_t>(paths));
        parallel_for(sups.size(), [&](std::size_t i) {
            const NoisePath path = sample_prm_path(cs.driver, cs.grid, stream_id(base_seed, c, i));
            sups[i] = stochastic_convolution(cs.op, cs.integrand, cs.driver, path).rowwise().norm().maxCoeff();
        });
        const HpEstimate lhs = hp_from_sups(sups, cs.p);
        double rhs = 0.0;
        for (int k = 0; k < cs.grid.steps(); ++k) {
            const double t = cs.grid.time(k);
            double lp = 0.0, l2 = 0.0;
            for (int i = 0; i < cs.driver.mark_count(); ++i) {
                const double g = cs.integrand(t, cs.driver.marks[i]).norm();
                lp += cs.driver.weights[i] * std::pow(g, cs.p);
                l2 += cs.driver.weights[i] * g * g;
            }
            rhs += cs.grid.dt() * (lp + std::pow(l2, cs.p / 2.0));
        }
        InequalityRow row{cs.label, lhs.moment, lhs.moment_std_error, rhs, ratio_of(lhs.moment, rhs),
                          jump_inequality_constant(cs.p, effective_eta(cs.op), cs.grid.horizon()), false};
        row.violation = row.ratio > row.reference_constant;
        out.violations += row.violation ? 1 : 0;
        out.fitted_constant = std::max(out.fitted_constant, row.ratio);
        out.rows.push_back(row);
    }
    out.pass = out.violations == 0;
    return out;
}

}  // namespace mildlab
