#include "surfspline/reference.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "surfspline/errors.hpp"

namespace surfspline {

double legendre(int k, double x)
{
    if (k < 0) throw DomainError("Legendre degree must be >= 0");
    if (!(std::fabs(x) <= 1.0)) throw DomainError("Legendre argument must lie in [-1, 1]");
    if (k == 0) return 1.0;
    double p0 = 1.0;
    double p1 = x;
    for (int j = 1; j < k; ++j) {
        const double p2 = ((2.0 * j + 1.0) * x * p1 - j * p0) / (j + 1.0);
        p0 = p1;
        p1 = p2;
    }
    return p1;
}

TruncatedSphericalKernel::TruncatedSphericalKernel(int order)
{
    if (order < 1) throw ParameterError("kernel truncation order must be >= 1");
    coefficients_.reserve(static_cast<std::size_t>(order));
    for (int k = 1; k <= order; ++k) {
        const double kk = k;
        coefficients_.push_back((2.0 * kk + 1.0) / (kk * kk * (kk + 1.0) * (kk + 1.0)));
    }
}

double TruncatedSphericalKernel::at_cosine(double c) const
{
    c = std::clamp(c, -1.0, 1.0);
    double p0 = 1.0;
    double p1 = c;
    double sum = coefficients_[0] * p1;
    for (int j = 1; j < order(); ++j) {
        const double p2 = ((2.0 * j + 1.0) * c * p1 - j * p0) / (j + 1.0);
        p0 = p1;
        p1 = p2;
        sum += coefficients_[static_cast<std::size_t>(j)] * p1;
    }
    return sum;
}

double kernel_eval(const TruncatedSphericalKernel& kernel, const Vec3& s1, const Vec3& s2)
{
    if (std::fabs(s1.norm() - 1.0) > 1e-9 || std::fabs(s2.norm() - 1.0) > 1e-9) {
        throw DomainError("kernel arguments must be unit vectors");
    }
    return kernel.at_cosine(s1.dot(s2));
}

Eigen::MatrixXd kernel_matrix(const TruncatedSphericalKernel& kernel, std::span<const Vec3> rows,
                              std::span<const Vec3> cols)
{
    for (const auto& p : rows) {
        if (std::fabs(p.norm() - 1.0) > 1e-9) throw DomainError("kernel arguments must be unit vectors");
    }
    for (const auto& p : cols) {
        if (std::fabs(p.norm() - 1.0) > 1e-9) throw DomainError("kernel arguments must be unit vectors");
    }
    Eigen::MatrixXd k(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) {
        for (std::size_t i = 0; i < rows.size(); ++i) {
            k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = kernel.at_cosine(rows[i].dot(cols[j]));
        }
    }
    return k;
}

DefinitenessReport check_positive_definite(const Eigen::MatrixXd& k, double rel_tol)
{
    if (k.rows() != k.cols() || k.rows() == 0) throw DimensionError("matrix must be square and non-empty");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(k, Eigen::EigenvaluesOnly);
    DefinitenessReport r;
    r.min_eigenvalue = eig.eigenvalues().minCoeff();
    r.max_eigenvalue = eig.eigenvalues().maxCoeff();
    r.positive_definite = r.max_eigenvalue > 0.0 && r.min_eigenvalue > rel_tol * r.max_eigenvalue;
    return r;
}

ClassicalPrediction classical_predict(const TruncatedSphericalKernel& kernel, std::span<const Vec3> points,
                                      const Eigen::VectorXd& y, std::span<const Vec3> queries, double tau,
                                      double trend_basis)
{
    const auto n = static_cast<Eigen::Index>(points.size());
    if (n == 0) throw ParameterError("at least one observation is required");
    if (y.size() != n) throw DimensionError("data length does not match observation count");
    if (!(tau >= 0.0)) throw ParameterError("tau must be >= 0");
    if (trend_basis == 0.0) trend_basis = 1.0 / std::sqrt(4.0 * std::numbers::pi);

    Eigen::MatrixXd k = kernel_matrix(kernel, points, points);
    k.diagonal().array() += tau * tau;
    const double mean_diag = k.diagonal().mean();

    ClassicalPrediction out;
    Eigen::LLT<Eigen::MatrixXd> llt;
    bool ok = false;
    for (double jitter : {0.0, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6}) {
        Eigen::MatrixXd kj = k;
        kj.diagonal().array() += jitter * mean_diag;
        llt.compute(kj);
        if (llt.info() != Eigen::Success) continue;
        const Eigen::VectorXd d = llt.matrixLLT().diagonal();
        if (d.minCoeff() * d.minCoeff() > 1e-12 * d.maxCoeff() * d.maxCoeff()) {
            out.jitter = jitter;
            ok = true;
            break;
        }
    }
    if (!ok) {
        throw ConditioningError("kernel matrix is numerically singular for n = " + std::to_string(n) +
                                "; use observation noise tau > 0");
    }

    const Eigen::VectorXd phi = Eigen::VectorXd::Constant(n, trend_basis);
    const Eigen::VectorXd kinv_y = llt.solve(y);
    const Eigen::VectorXd kinv_phi = llt.solve(phi);
    out.trend = phi.dot(kinv_y) / phi.dot(kinv_phi);
    out.weights = kinv_y - out.trend * kinv_phi;

    const Eigen::MatrixXd kq = kernel_matrix(kernel, queries, points);
    out.values = kq * out.weights;
    out.values.array() += out.trend * trend_basis;
    return out;
}

double f_sphere(double theta, double phi)
{
    const double s = std::sin(theta);
    return std::cos(2.0 * theta + phi + std::numbers::pi / 4.0) * s * s;
}

double f_cyl(double theta, double z, double z_max)
{
    const double a = std::numbers::pi / 5.0;
    const double u = std::cos(theta);
    const double w = z / z_max;
    const double p1 = 0.5 * (std::cos(a) * u - std::sin(a) * w);
    const double p2 = 1.5 * (std::sin(a) * u + std::cos(a) * w);
    return std::exp(-0.75 * (p1 * p1 + p2 * p2));
}

} // namespace surfspline
