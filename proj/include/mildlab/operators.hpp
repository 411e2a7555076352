#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "mildlab/types.hpp"

namespace mildlab {

// Linear quasi-monotone operator A = Q diag(a) Q^T on R^d. Diagonal mode has Q = I
// and stores no basis. Immutable.
class SpectralOperator {
public:
    static SpectralOperator diagonal(Eigen::VectorXd eigenvalues, double eta = 0.0);
    static SpectralOperator dense(Eigen::VectorXd eigenvalues, Eigen::MatrixXd basis, double eta = 0.0);
    // Basis from the QR factor of a seeded Gaussian matrix.
    static SpectralOperator dense_seeded(Eigen::VectorXd eigenvalues, std::uint64_t basis_seed,
                                         double eta = 0.0);
    // a_k = k^2 pi^2, k = 1..d.
    static SpectralOperator heat(int d, double eta = 0.0);

    int dimension() const { return static_cast<int>(eigenvalues_.size()); }
    const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
    double eta() const { return eta_; }
    bool is_dense() const { return dense_; }
    // Identity in diagonal mode.
    Eigen::MatrixXd basis() const;
    Eigen::MatrixXd matrix() const;

    bool quasi_monotone() const;
    void require_quasi_monotone() const;

    HVector to_spectral(const HVector& x) const;
    HVector from_spectral(const HVector& y) const;
    HVector apply(const HVector& x) const;

    // Same basis, new spectrum and shift.
    SpectralOperator with_spectrum(Eigen::VectorXd eigenvalues, double eta) const;

    // Applies Q diag(g(a_k)) Q^T to x.
    HVector spectral_map(const HVector& x, const std::function<double(double)>& g) const;

private:
    SpectralOperator() = default;
    Eigen::VectorXd eigenvalues_;
    Eigen::MatrixXd basis_;
    double eta_ = 0.0;
    bool dense_ = false;
};

HVector resolvent(const SpectralOperator& op, double lambda, const HVector& x);
HVector yosida_apply(const SpectralOperator& op, double lambda, const HVector& x);
HVector semigroup_apply(const SpectralOperator& op, double t, const HVector& x);
HVector yosida_semigroup_apply(const SpectralOperator& op, double lambda, double t, const HVector& x);

// The bounded operator A_lambda as a SpectralOperator (eigenvalues a/(1+lambda a)).
SpectralOperator yosida_operator(const SpectralOperator& op, double lambda);

struct QuasiMonotoneCheck {
    bool ok = false;
    double worst_margin = 0.0;
};

// min of <Ax,x> + eta|x|^2 over seeded random unit vectors and the eigenvectors.
QuasiMonotoneCheck check_quasi_monotone(const SpectralOperator& op, int samples, std::uint64_t rng_seed);

struct ShiftedOperator {
    SpectralOperator op;     // A + eta I, eta' = 0
    double drift_shift = 0;  // linear drift coefficient to add to f: -eta
};

ShiftedOperator shift_operator(const SpectralOperator& op);

// Sequence n -> value(n) = scale * n^(-exponent), n >= 1.
struct RateSequence {
    double scale = 1.0;
    double exponent = 1.0;
    double operator()(int n) const;
};

enum class FamilyKind { constant, yosida, galerkin, spectral_perturbation };

std::string to_string(FamilyKind kind);
FamilyKind family_kind_from_string(const std::string& name);

class OperatorFamily {
public:
    static OperatorFamily constant(SpectralOperator limit);
    // A_n = A_{lambda_n}; requires eta = 0.
    static OperatorFamily yosida(SpectralOperator limit, RateSequence lambda_n = {});
    // A_n = P_n A P_n with P_n the projection on the first d_n = min(d, stride*n) modes.
    static OperatorFamily galerkin(SpectralOperator limit, int stride = 1);
    // b_k = a_k + eps_n (a_k + eta).
    static OperatorFamily spectral_perturbation(SpectralOperator limit, RateSequence eps_n = {});

    FamilyKind kind() const { return kind_; }
    const SpectralOperator& limit() const { return limit_; }
    const RateSequence& rate() const { return rate_; }
    int stride() const { return stride_; }
    double lambda0() const { return lambda0_; }
    void set_lambda0(double lambda0);

    SpectralOperator member(int n) const;
    std::string describe() const;

private:
    OperatorFamily(FamilyKind kind, SpectralOperator limit);
    FamilyKind kind_;
    SpectralOperator limit_;
    RateSequence rate_{};
    int stride_ = 1;
    double lambda0_ = std::numeric_limits<double>::infinity();
};

double strong_resolvent_distance(const OperatorFamily& family, int n, double lambda,
                                 const std::vector<HVector>& test_vectors);

}  // namespace mildlab
