#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mildlab/coefficients.hpp"
#include "mildlab/operators.hpp"
#include "mildlab/solver.hpp"

namespace mildlab {

struct SweepPoint {
    double param = 0.0;
    double error = 0.0;
    double std_error = 0.0;
    double resolvent_distance = std::numeric_limits<double>::quiet_NaN();
};

struct Tolerance {
    double relative = 0.0;        // final <= relative * first passes
    double absolute = 0.0;        // final <= absolute passes
    double monotone_slack = 1.2;  // consecutive growth allowed beyond noise
    std::optional<std::pair<double, double>> slope_band;
};

struct ConvergenceReport {
    std::string theorem_id;
    std::string param_name;
    double p = 2.0;
    std::vector<SweepPoint> points;
    double slope = std::numeric_limits<double>::quiet_NaN();
    double intercept = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::size_t> window;  // indices used by the fit
    Tolerance tolerance;
    bool monotone = false;
    bool final_ok = false;
    bool slope_ok = true;
    bool pass = false;
    std::optional<double> n_star;  // first param from which error <= absolute tolerance
    std::uint64_t base_seed = 0;
    int paths = 0;
    int steps = 0;
    double horizon = 0.0;
    std::string family;
    std::vector<std::string> notes;
};

// Indices with error > 5 stderr and positive param/error.
std::vector<std::size_t> signal_window(const std::vector<SweepPoint>& points);
// Non-increasing up to `slack` between consecutive points of the signal window.
bool monotone_beyond_noise(const std::vector<SweepPoint>& points, double slack = 1.2);
// Strictly decreasing along the signal window.
bool strictly_decreasing_beyond_noise(const std::vector<SweepPoint>& points);
// Fits log(error) against log(param) over the signal window and applies the tolerance.
void finalize_report(ConvergenceReport& report);

// Columns: theorem_id,sweep_param,error,stderr,slope,slope_window,pass.
void write_report_csv(std::ostream& os, const ConvergenceReport& report);
// Columns: x,y.
void write_plot_csv(std::ostream& os, const ConvergenceReport& report);

struct YosidaSweepSetup {
    std::string theorem_id = "yo2sc";
    EvolutionProblem problem;  // zero drift, additive noise
    std::vector<double> lambdas;
    int paths = 2000;
    std::uint64_t base_seed = 1;
    Tolerance tolerance{0.1, 0.0, 1.2, std::nullopt};
};

struct ResolventSweepSetup {
    std::string theorem_id = "nyo2sc";
    EvolutionProblem problem;  // zero drift, additive noise; operator is the family limit
    OperatorFamily family;
    std::vector<int> ns;
    int paths = 2000;
    std::uint64_t base_seed = 1;
    double resolvent_lambda = 0.0;     // 0 picks min(0.5, lambda0 / 2)
    std::vector<HVector> test_vectors; // empty picks default probes
    Tolerance tolerance{1e-2, 1e-3, 1.2, std::nullopt};
};

ConvergenceReport run_yosida_sweep(const YosidaSweepSetup& setup);
ConvergenceReport run_resolvent_sweep(const ResolventSweepSetup& setup);

struct SemilinearSweepSetup {
    std::string theorem_id = "nyo2";
    EvolutionProblem problem;  // the limit problem
    OperatorFamily family;
    DriftSequence drift;
    std::optional<DiffusionSequence> diffusion;  // martingale coupling
    std::optional<JumpSequence> jump;            // PRM coupling
    InitialSequence initial;
    std::vector<int> ns;
    int paths = 2000;
    std::uint64_t base_seed = 1;
    Tolerance tolerance{0.0, 5e-3, 1.2, std::nullopt};
    bool partial_solves = true;
    int audit_points = 10;
};

// u_n - u = (S_n u_0n - S u_0) - (drift convolutions) + (noise convolutions).
struct DecompositionRow {
    int n = 0;
    HpEstimate full;
    HpEstimate initial_term;
    HpEstimate drift_term;
    HpEstimate noise_term;
    // Errors of problems where only one ingredient is perturbed.
    HpEstimate only_initial, only_operator, only_drift, only_noise;
    bool triangle_ok = false;  // full <= initial + drift + noise terms
    bool partial_ok = false;   // full <= 3 * sum of partial errors
};

// Moments E sup_{s <= t_k} |.|^p along the grid for one sweep point.
struct LemmaTrace {
    int n = 0;
    std::vector<double> error;          // |u_n - u|^p_{H_p(t_k)}
    std::vector<double> error_se;
    std::vector<double> initial_lhs;    // |S_n u_0n - S u_0|^p
    std::vector<double> initial_bound;  // 2^{p-1}(e^{p eta T} E|u_0n - u_0|^p + |(S_n - S)u_0|^p)
    std::vector<double> drift_lhs;
    std::vector<double> drift_delta;    // 3^{p-1}(|S_n*(f_n(u) - f(u))|^p + |(S_n - S)*f(u)|^p)
    std::vector<double> noise_lhs;
    std::vector<double> noise_delta;
};

struct LemmaConstants {
    double p = 2.0;
    double horizon = 1.0;
    double dt = 1.0;
    double eta = 0.0;            // effective quasi-monotonicity shift over all members
    double drift_lipschitz = 0.0;
    double noise_lipschitz = 0.0;
    double gamma_drift = 0.0;    // reference constants of the two Gronwall lemmas
    double gamma_noise = 0.0;
    std::string noise_lemma;     // lemma_tre or lemma_treppe
    bool martingale = true;
    int audit_points = 10;
};

struct SemilinearResult {
    ConvergenceReport report;
    std::vector<DecompositionRow> decomposition;
    std::vector<LemmaTrace> traces;
    LemmaConstants constants;
};

SemilinearResult run_semilinear_sweep(const SemilinearSweepSetup& setup);
// Requires additive noise; p > 2 admitted for martingale drivers.
SemilinearResult run_additive_sweep(const SemilinearSweepSetup& setup);

// A + eta I with drift f - eta u.
EvolutionProblem shift_problem(const EvolutionProblem& problem);
// Max pathwise gap between the direct and the shifted solves.
double eta_shift_gap(const EvolutionProblem& problem, int paths, std::uint64_t base_seed);

struct TrotterKatoSetup {
    std::string theorem_id = "titikaka";
    OperatorFamily family;
    Forcing forcing;
    HVector forcing_direction;      // f_n = f + r_n * direction
    RateSequence forcing_rate{0.0, 1.0};
    InitialSequence initial;
    TimeGrid grid{1.0, 100};
    std::vector<int> ns;
    std::function<HVector(double)> exact;  // closed form of the limit; solver output when empty
    Tolerance tolerance{0.0, 1e-4, 1.0, std::nullopt};
};

ConvergenceReport run_trotter_kato(const TrotterKatoSetup& setup);

struct LemmaAudit {
    std::string id;
    std::vector<double> audit_times;
    std::vector<int> ns;
    std::vector<double> delta_at_horizon;  // per n
    std::vector<double> min_margin;        // per n, over audited t > 0
    double gamma_reference = 0.0;
    double gamma_fitted = 0.0;
    bool inequality_ok = false;
    bool delta_decreasing = false;
    bool pass = false;
};

struct GronwallRow {
    int n = 0;
    double error_power = 0.0;  // |u_n - u|^p_{H_p(T)}
    double delta_total = 0.0;
    double gamma = 0.0;
    double bound = 0.0;        // delta_total e^{gamma T}
    bool ok = false;
};

struct LemmaAuditReport {
    std::vector<LemmaAudit> lemmas;
    std::vector<GronwallRow> gronwall;
    bool pass = false;
};

LemmaAuditReport audit_lemma_estimates(const SemilinearResult& result);

struct CorollarySetup {
    EvolutionProblem problem;  // zero drift, additive martingale noise, eta = 0
    std::vector<double> lambdas;
    std::vector<double> fixed_epsilons;  // audited in addition to eps = lambda^{1/4}
    int paths = 2000;
    std::uint64_t base_seed = 1;
};

struct CorollaryRow {
    double lambda = 0.0;
    double epsilon = 0.0;
    double lhs = 0.0;  // |y - y_lambda|^2_{H_2}
    double lhs_se = 0.0;
    double epsilon_terms = 0.0;
    double lambda_terms = 0.0;  // T lambda (E|A y_0^eps|^2 + int |A B^eps Q^{1/2}|^2)
    double rhs = 0.0;
    double ratio = 0.0;
};

struct CorollaryReport {
    std::vector<CorollaryRow> rows;
    double fitted_constant = 0.0;
    double reference_constant = 48.0;
    double envelope_constant = 0.0;  // max rhs(lambda^{1/4}, lambda) / sqrt(lambda)
    bool envelope_ok = false;         // lambda terms at eps = lambda^{1/4} below T sqrt(lambda)(E|y_0|^2 + int |B Q^{1/2}|^2)
    bool pass = false;
};

CorollaryReport audit_corollary_utile(const CorollarySetup& setup);

struct MartingaleConvolutionCase {
    std::string label;
    SpectralOperator op;
    MartingaleDriver driver;
    DiffusionIntegrand integrand;
    TimeGrid grid{1.0, 100};
};

struct PoissonConvolutionCase {
    std::string label;
    SpectralOperator op;
    PoissonRandomMeasureDriver driver;
    JumpIntegrand integrand;
    double p = 2.0;
    TimeGrid grid{1.0, 100};
};

struct InequalityRow {
    std::string label;
    double lhs = 0.0;
    double lhs_se = 0.0;
    double rhs = 0.0;
    double ratio = 0.0;
    double reference_constant = 0.0;
    bool violation = false;
};

struct InequalityReport {
    std::string inequality;
    std::vector<InequalityRow> rows;
    double fitted_constant = 0.0;
    int violations = 0;
    bool pass = false;
};

// 4 e^{2 eta T}: Doob's inequality on the dilated martingale.
double maximal_inequality_constant(double eta, double horizon);
// Reference constant for the jump inequality, p = 2 or p = 4. Random predictable
// integrands at p = 4 need the self-bounding Doob argument and a larger constant.
double jump_inequality_constant(double p, double eta, double horizon, bool random_integrand = false);

InequalityReport audit_martingale_maximal_inequality(const std::vector<MartingaleConvolutionCase>& cases, int paths,
                                                     std::uint64_t base_seed);
InequalityReport audit_poisson_maximal_inequality(const std::vector<PoissonConvolutionCase>& cases, int paths,
                                                  std::uint64_t base_seed);

}  // namespace mildlab
