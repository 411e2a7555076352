#include "mildlab/operators.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "mildlab/error.hpp"
#include "mildlab/random.hpp"

namespace mildlab {

namespace {

constexpr double kOrthoTol = 1e-10;
constexpr double kMonotoneTol = 1e-10;

void check_dim(const SpectralOperator& op, const HVector& x) {
    if (x.size() != op.dimension()) {
        std::ostringstream os;
        os << "vector of dimension " << x.size() << " for operator of dimension " << op.dimension();
        throw DimensionMismatch(os.str());
    }
}

void check_lambda(const SpectralOperator& op, double lambda) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw LambdaOutOfRange("lambda must be positive and finite");
    if (op.eta() > 0.0 && lambda * op.eta() >= 1.0) throw LambdaOutOfRange("lambda >= 1/eta");
    for (int k = 0; k < op.dimension(); ++k) {
        if (1.0 + lambda * op.eigenvalues()[k] <= 0.0) throw LambdaOutOfRange("I + lambda A is not invertible");
    }
}

void check_time(double t) {
    if (!(t >= 0.0)) throw NegativeTime("negative time");
}

}  // namespace

SpectralOperator SpectralOperator::diagonal(Eigen::VectorXd eigenvalues, double eta) {
    if (eigenvalues.size() < 1) throw InvalidOperator("dimension must be >= 1");
    if (!eigenvalues.allFinite()) throw InvalidOperator("non-finite eigenvalue");
    if (!(eta >= 0.0) || !std::isfinite(eta)) throw InvalidOperator("eta must be finite and >= 0");
    SpectralOperator op;
    op.eigenvalues_ = std::move(eigenvalues);
    op.eta_ = eta;
    return op;
}

SpectralOperator SpectralOperator::dense(Eigen::VectorXd eigenvalues, Eigen::MatrixXd basis, double eta) {
    SpectralOperator op = diagonal(std::move(eigenvalues), eta);
    const Eigen::Index d = op.eigenvalues_.size();
    if (basis.rows() != d || basis.cols() != d) throw DimensionMismatch("basis must be d x d");
    const double defect = (basis.transpose() * basis - Eigen::MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff();
    if (!(defect <= kOrthoTol)) throw InvalidOperator("basis is not orthogonal");
    op.basis_ = std::move(basis);
    op.dense_ = true;
    return op;
}

SpectralOperator SpectralOperator::dense_seeded(Eigen::VectorXd eigenvalues, std::uint64_t basis_seed, double eta) {
    const Eigen::Index d = eigenvalues.size();
    if (d < 1) throw InvalidOperator("dimension must be >= 1");
    Rng rng(splitmix64(basis_seed));
    std::normal_distribution<double> normal;
    Eigen::MatrixXd g(d, d);
    for (Eigen::Index j = 0; j < d; ++j)
        for (Eigen::Index i = 0; i < d; ++i) g(i, j) = normal(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(d, d);
    return dense(std::move(eigenvalues), std::move(q), eta);
}

SpectralOperator SpectralOperator::heat(int d, double eta) {
    if (d < 1) throw InvalidOperator("dimension must be >= 1");
    Eigen::VectorXd a(d);
    for (int k = 0; k < d; ++k) a[k] = (k + 1) * (k + 1) * std::numbers::pi * std::numbers::pi;
    return diagonal(std::move(a), eta);
}

Eigen::MatrixXd SpectralOperator::basis() const {
    if (dense_) return basis_;
    return Eigen::MatrixXd::Identity(dimension(), dimension());
}

Eigen::MatrixXd SpectralOperator::matrix() const {
    if (!dense_) return eigenvalues_.asDiagonal();
    return basis_ * eigenvalues_.asDiagonal() * basis_.transpose();
}

bool SpectralOperator::quasi_monotone() const {
    return eigenvalues_.minCoeff() + eta_ >= -kMonotoneTol;
}

void SpectralOperator::require_quasi_monotone() const {
    if (!quasi_monotone()) throw NotQuasiMonotone("operator has eigenvalue below -eta");
}

HVector SpectralOperator::to_spectral(const HVector& x) const {
    check_dim(*this, x);
    if (!dense_) return x;
    return basis_.transpose() * x;
}

HVector SpectralOperator::from_spectral(const HVector& y) const {
    check_dim(*this, y);
    if (!dense_) return y;
    return basis_ * y;
}

HVector SpectralOperator::apply(const HVector& x) const {
    return spectral_map(x, [](double a) { return a; });
}

SpectralOperator SpectralOperator::with_spectrum(Eigen::VectorXd eigenvalues, double eta) const {
    if (eigenvalues.size() != dimension()) throw DimensionMismatch("spectrum size changed");
    if (dense_) return dense(std::move(eigenvalues), basis_, eta);
    return diagonal(std::move(eigenvalues), eta);
}

HVector SpectralOperator::spectral_map(const HVector& x, const std::function<double(double)>& g) const {
    HVector y = to_spectral(x);
    for (int k = 0; k < dimension(); ++k) y[k] *= g(eigenvalues_[k]);
    return from_spectral(y);
}

HVector resolvent(const SpectralOperator& op, double lambda, const HVector& x) {
    check_dim(op, x);
    check_lambda(op, lambda);
    return op.spectral_map(x, [lambda](double a) { return 1.0 / (1.0 + lambda * a); });
}

HVector yosida_apply(const SpectralOperator& op, double lambda, const HVector& x) {
    check_dim(op, x);
    check_lambda(op, lambda);
    return op.spectral_map(x, [lambda](double a) { return a / (1.0 + lambda * a); });
}

HVector semigroup_apply(const SpectralOperator& op, double t, const HVector& x) {
    check_time(t);
    check_dim(op, x);
    return op.spectral_map(x, [t](double a) { return std::exp(-t * a); });
}

HVector yosida_semigroup_apply(const SpectralOperator& op, double lambda, double t, const HVector& x) {
    check_time(t);
    check_dim(op, x);
    check_lambda(op, lambda);
    return op.spectral_map(x, [lambda, t](double a) { return std::exp(-t * a / (1.0 + lambda * a)); });
}

SpectralOperator yosida_operator(const SpectralOperator& op, double lambda) {
    check_lambda(op, lambda);
    Eigen::VectorXd b = op.eigenvalues().unaryExpr([lambda](double a) { return a / (1.0 + lambda * a); });
    const double eta = op.eta() > 0.0 ? op.eta() / (1.0 - lambda * op.eta()) : 0.0;
    return op.with_spectrum(std::move(b), eta);
}

QuasiMonotoneCheck check_quasi_monotone(const SpectralOperator& op, int samples, std::uint64_t rng_seed) {
    const int d = op.dimension();
    const Eigen::MatrixXd a = op.matrix();
    const Eigen::MatrixXd q = op.basis();
    auto margin = [&](const HVector& x) { return x.dot(a * x) + op.eta() * x.squaredNorm(); };

    double worst = std::numeric_limits<double>::infinity();
    for (int k = 0; k < d; ++k) worst = std::min(worst, margin(q.col(k)));

    Rng rng(splitmix64(rng_seed));
    std::normal_distribution<double> normal;
    HVector x(d);
    for (int s = 0; s < std::max(samples, 1); ++s) {
        for (int k = 0; k < d; ++k) x[k] = normal(rng);
        const double nrm = x.norm();
        if (nrm == 0.0) continue;
        worst = std::min(worst, margin(x / nrm));
    }
    return {worst >= -kMonotoneTol, worst};
}

ShiftedOperator shift_operator(const SpectralOperator& op) {
    if (op.eta() == 0.0) return {op, 0.0};
    Eigen::VectorXd b = op.eigenvalues().array() + op.eta();
    return {op.with_spectrum(std::move(b), 0.0), -op.eta()};
}

double RateSequence::operator()(int n) const {
    if (n < 1) throw std::invalid_argument("sequence index must be >= 1");
    return scale * std::pow(static_cast<double>(n), -exponent);
}

std::string to_string(FamilyKind kind) {
    switch (kind) {
        case FamilyKind::constant: return "constant";
        case FamilyKind::yosida: return "yosida";
        case FamilyKind::galerkin: return "galerkin";
        case FamilyKind::spectral_perturbation: return "spectral_perturbation";
    }
    return "unknown";
}

FamilyKind family_kind_from_string(const std::string& name) {
    if (name == "constant") return FamilyKind::constant;
    if (name == "yosida") return FamilyKind::yosida;
    if (name == "galerkin") return FamilyKind::galerkin;
    if (name == "spectral_perturbation") return FamilyKind::spectral_perturbation;
    throw UnknownFamily("unknown operator family: " + name);
}

OperatorFamily::OperatorFamily(FamilyKind kind, SpectralOperator limit) : kind_(kind), limit_(std::move(limit)) {
    limit_.require_quasi_monotone();
    if (limit_.eta() > 0.0) lambda0_ = 1.0 / (2.0 * limit_.eta());
}

OperatorFamily OperatorFamily::constant(SpectralOperator limit) {
    return OperatorFamily(FamilyKind::constant, std::move(limit));
}

OperatorFamily OperatorFamily::yosida(SpectralOperator limit, RateSequence lambda_n) {
    if (limit.eta() != 0.0) throw NotQuasiMonotone("yosida family needs eta = 0");
    if (!(lambda_n.scale > 0.0) || !(lambda_n.exponent > 0.0))
        throw FamilyNotConvergent("yosida family needs lambda_n decreasing to 0");
    OperatorFamily f(FamilyKind::yosida, std::move(limit));
    f.rate_ = lambda_n;
    return f;
}

OperatorFamily OperatorFamily::galerkin(SpectralOperator limit, int stride) {
    if (stride < 1) throw InvalidOperator("galerkin stride must be >= 1");
    OperatorFamily f(FamilyKind::galerkin, std::move(limit));
    f.stride_ = stride;
    return f;
}

OperatorFamily OperatorFamily::spectral_perturbation(SpectralOperator limit, RateSequence eps_n) {
    if (!(eps_n.exponent > 0.0) && eps_n.scale != 0.0)
        throw FamilyNotConvergent("perturbation rate must decrease to 0");
    if (eps_n.scale < 0.0) throw FamilyNotConvergent("perturbation scale must be >= 0");
    OperatorFamily f(FamilyKind::spectral_perturbation, std::move(limit));
    f.rate_ = eps_n;
    return f;
}

void OperatorFamily::set_lambda0(double lambda0) {
    if (!(lambda0 > 0.0)) throw LambdaOutOfRange("lambda0 must be positive");
    if (limit_.eta() > 0.0 && lambda0 * limit_.eta() >= 1.0) throw LambdaOutOfRange("lambda0 >= 1/eta");
    lambda0_ = lambda0;
}

SpectralOperator OperatorFamily::member(int n) const {
    if (n < 1) throw std::invalid_argument("family index must be >= 1");
    const Eigen::VectorXd& a = limit_.eigenvalues();
    const double eta = limit_.eta();
    switch (kind_) {
        case FamilyKind::constant: return limit_;
        case FamilyKind::yosida: return yosida_operator(limit_, rate_(n));
        case FamilyKind::galerkin: {
            const int dn = std::min<long>(limit_.dimension(), static_cast<long>(stride_) * n);
            Eigen::VectorXd b = a;
            b.tail(limit_.dimension() - dn).setZero();
            return limit_.with_spectrum(std::move(b), eta);
        }
        case FamilyKind::spectral_perturbation: {
            const double eps = rate_(n);
            Eigen::VectorXd b = a.array() + eps * (a.array() + eta);
            return limit_.with_spectrum(std::move(b), eta);
        }
    }
    return limit_;
}

std::string OperatorFamily::describe() const {
    std::ostringstream os;
    os << to_string(kind_);
    if (kind_ == FamilyKind::yosida || kind_ == FamilyKind::spectral_perturbation)
        os << "(" << rate_.scale << "*n^-" << rate_.exponent << ")";
    if (kind_ == FamilyKind::galerkin) os << "(d_n=" << stride_ << "n)";
    return os.str();
}

double strong_resolvent_distance(const OperatorFamily& family, int n, double lambda,
                                 const std::vector<HVector>& test_vectors) {
    if (!(lambda > 0.0) || !(lambda < family.lambda0())) throw LambdaOutOfRange("lambda must lie in (0, lambda0)");
    const SpectralOperator an = family.member(n);
    double worst = 0.0;
    for (const HVector& h : test_vectors) {
        worst = std::max(worst, (resolvent(an, lambda, h) - resolvent(family.limit(), lambda, h)).norm());
    }
    return worst;
}

}  // namespace mildlab
