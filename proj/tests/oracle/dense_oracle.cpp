#include "dense_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

namespace oracle {

DenseSystem cotangent_system(const surfspline::TriangleMesh& mesh)
{
    const auto m = static_cast<Eigen::Index>(mesh.num_vertices());
    DenseSystem out{Eigen::VectorXd::Zero(m), Eigen::MatrixXd::Zero(m, m)};
    for (const auto& tri : mesh.triangles()) {
        const Eigen::Vector3d p[3] = {mesh.vertex(tri[0]), mesh.vertex(tri[1]), mesh.vertex(tri[2])};
        const double area = 0.5 * (p[1] - p[0]).cross(p[2] - p[0]).norm();
        for (int k = 0; k < 3; ++k) {
            out.mass[tri[k]] += area / 3.0;
            // The angle at corner k weights the opposite edge (i, j).
            const int i = (k + 1) % 3;
            const int j = (k + 2) % 3;
            const Eigen::Vector3d u = p[i] - p[k];
            const Eigen::Vector3d v = p[j] - p[k];
            const double angle = std::atan2(u.cross(v).norm(), u.dot(v));
            const double w = 0.5 / std::tan(angle);
            out.stiffness(tri[i], tri[j]) -= w;
            out.stiffness(tri[j], tri[i]) -= w;
            out.stiffness(tri[i], tri[i]) += w;
            out.stiffness(tri[j], tri[j]) += w;
        }
    }
    return out;
}

Eigen::VectorXd s_spectrum(const Eigen::VectorXd& mass, const Eigen::MatrixXd& stiffness)
{
    const Eigen::VectorXd r = mass.cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd s = r.asDiagonal() * stiffness * r.asDiagonal();
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(s, Eigen::EigenvaluesOnly).eigenvalues();
}

Eigen::MatrixXd sigma(const Eigen::VectorXd& mass, const Eigen::MatrixXd& stiffness)
{
    const Eigen::VectorXd r = mass.cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd s = r.asDiagonal() * stiffness * r.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
    Eigen::VectorXd f = eig.eigenvalues();
    // The smallest eigenvalue is the kernel; everything else is strictly positive
    // on a connected mesh.
    f[0] = 0.0;
    for (Eigen::Index k = 1; k < f.size(); ++k) f[k] = 1.0 / (f[k] * f[k]);
    const Eigen::MatrixXd u = eig.eigenvectors();
    return r.asDiagonal() * (u * f.asDiagonal() * u.transpose()) * r.asDiagonal();
}

Kriging kriging(const Eigen::VectorXd& mass, const Eigen::MatrixXd& stiffness, const Eigen::MatrixXd& a,
                const Eigen::VectorXd& y, double tau)
{
    return kriging_with_sigma(mass, sigma(mass, stiffness), a, y, tau);
}

Kriging kriging_with_sigma(const Eigen::VectorXd& mass, const Eigen::MatrixXd& sig, const Eigen::MatrixXd& a,
                           const Eigen::VectorXd& y, double tau)
{
    const Eigen::Index n = a.rows();
    const Eigen::VectorXd phi0 = Eigen::VectorXd::Constant(mass.size(), 1.0 / std::sqrt(mass.sum()));
    const Eigen::VectorXd c = a * phi0;
    const Eigen::MatrixXd k = a * sig * a.transpose() + tau * tau * Eigen::MatrixXd::Identity(n, n);

    const Eigen::LDLT<Eigen::MatrixXd> ldlt(k);
    const Eigen::VectorXd kc = ldlt.solve(c);
    const Eigen::VectorXd ky = ldlt.solve(y);

    Kriging out;
    out.trend = c.dot(ky) / c.dot(kc);
    const Eigen::VectorXd r = y - out.trend * c;
    const Eigen::VectorXd kr = ldlt.solve(r);
    out.prediction = out.trend * phi0 + sig * a.transpose() * kr;
    out.quad = r.dot(kr);
    out.log_det_cov = ldlt.vectorD().array().log().sum();
    out.log_density =
        -0.5 * (static_cast<double>(n) * std::log(2.0 * std::numbers::pi) + out.log_det_cov + out.quad);
    return out;
}

Eigen::MatrixXd indicator(const std::vector<int>& nodes, Eigen::Index m)
{
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nodes.size()), m);
    for (std::size_t i = 0; i < nodes.size(); ++i) a(static_cast<Eigen::Index>(i), nodes[i]) = 1.0;
    return a;
}

double relative_inf(const Eigen::VectorXd& a, const Eigen::VectorXd& b)
{
    const double scale = std::max(b.lpNorm<Eigen::Infinity>(), 1e-300);
    return (a - b).lpNorm<Eigen::Infinity>() / scale;
}

namespace {

Eigen::Vector3d barycentric(const std::array<Eigen::Vector2d, 3>& c, const Eigen::Vector2d& p)
{
    Eigen::Matrix3d t;
    t << c[0].x(), c[1].x(), c[2].x(), c[0].y(), c[1].y(), c[2].y(), 1.0, 1.0, 1.0;
    return t.partialPivLu().solve(Eigen::Vector3d(p.x(), p.y(), 1.0));
}

template <typename F>
void midpoint_rule(const std::array<Eigen::Vector2d, 3>& c, int n, F&& f)
{
    // Uniform sub-triangulation into n^2 triangles; integrand sampled at each centroid.
    const Eigen::Vector2d e1 = (c[1] - c[0]) / n;
    const Eigen::Vector2d e2 = (c[2] - c[0]) / n;
    const double sub_area = 0.5 * std::fabs(e1.x() * e2.y() - e1.y() * e2.x());
    for (int i = 0; i < n; ++i) {
        for (int j = 0; i + j < n; ++j) {
            const Eigen::Vector2d base = c[0] + i * e1 + j * e2;
            f(base + (e1 + e2) / 3.0, sub_area);
            if (i + j + 1 < n) f(base + (2.0 * e1 + 2.0 * e2) / 3.0, sub_area);
        }
    }
}

} // namespace

Eigen::Matrix3d quadrature_stiffness(const std::array<Eigen::Vector2d, 3>& corners, const Eigen::Matrix2d& g,
                                     int subdivisions)
{
    const Eigen::Matrix2d g_inv = g.inverse();
    const double vol = std::sqrt(g.determinant());
    const double h = 1e-6 * (corners[1] - corners[0]).norm();
    Eigen::Matrix3d k = Eigen::Matrix3d::Zero();
    midpoint_rule(corners, subdivisions, [&](const Eigen::Vector2d& p, double w) {
        Eigen::Matrix<double, 2, 3> grad;
        for (int d = 0; d < 2; ++d) {
            Eigen::Vector2d step = Eigen::Vector2d::Zero();
            step[d] = h;
            grad.row(d) = ((barycentric(corners, p + step) - barycentric(corners, p - step)) / (2.0 * h)).transpose();
        }
        k += w * vol * grad.transpose() * g_inv * grad;
    });
    return k;
}

double quadrature_area(const std::array<Eigen::Vector2d, 3>& corners, const Eigen::Matrix2d& g, int subdivisions)
{
    const double vol = std::sqrt(g.determinant());
    double area = 0.0;
    midpoint_rule(corners, subdivisions, [&](const Eigen::Vector2d&, double w) { area += w * vol; });
    return area;
}

} // namespace oracle
