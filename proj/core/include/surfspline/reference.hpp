#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "surfspline/mesh.hpp"

namespace surfspline {

/// Legendre polynomial P_k(x) by the three-term recurrence.
double legendre(int k, double x);

/// Spline kernel on the unit sphere truncated to degrees 1..order:
/// sum_k (2k+1) / (k^2 (k+1)^2) P_k(s1 . s2).
class TruncatedSphericalKernel {
public:
    explicit TruncatedSphericalKernel(int order = 40);

    int order() const { return static_cast<int>(coefficients_.size()); }
    /// coefficients()[k - 1] multiplies P_k.
    const std::vector<double>& coefficients() const { return coefficients_; }

    /// Kernel as a function of the cosine of the angle between the points.
    double at_cosine(double c) const;

private:
    std::vector<double> coefficients_;
};

/// Throws DomainError unless both points have unit norm within 1e-9.
double kernel_eval(const TruncatedSphericalKernel& kernel, const Vec3& s1, const Vec3& s2);

Eigen::MatrixXd kernel_matrix(const TruncatedSphericalKernel& kernel, std::span<const Vec3> rows,
                              std::span<const Vec3> cols);

struct DefinitenessReport {
    bool positive_definite = false;
    double min_eigenvalue = 0.0;
    double max_eigenvalue = 0.0;
};

/// Symmetric eigenvalue test: positive definite when the smallest eigenvalue
/// exceeds rel_tol times the largest.
DefinitenessReport check_positive_definite(const Eigen::MatrixXd& k, double rel_tol = 1e-10);

struct ClassicalPrediction {
    Eigen::VectorXd values; ///< at the query points
    double trend = 0.0;     ///< coefficient a of the constant basis
    Eigen::VectorXd weights; ///< b, one per observation
    double jitter = 0.0;    ///< diagonal jitter that was needed, relative to the mean diagonal
};

/// Dense universal kriging with the constant trend `trend_basis` (1/sqrt(4 pi) by
/// default). A Cholesky factorization is retried with growing diagonal jitter
/// (1e-12 ... 1e-6 of the mean diagonal) before ConditioningError.
ClassicalPrediction classical_predict(const TruncatedSphericalKernel& kernel, std::span<const Vec3> points,
                                      const Eigen::VectorXd& y, std::span<const Vec3> queries, double tau,
                                      double trend_basis = 0.0);

/// cos(2 theta + phi + pi/4) sin^2(theta).
double f_sphere(double theta, double phi);

/// exp(-3/4 |P (cos theta, z / z_max)|^2) with P = diag(0.5, 1.5) R(pi/5).
double f_cyl(double theta, double z, double z_max = 10.0);

} // namespace surfspline
