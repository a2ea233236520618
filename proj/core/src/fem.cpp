#include "surfspline/fem.hpp"

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Geometry>
#include <Eigen/LU>

#include "surfspline/errors.hpp"

namespace surfspline {

namespace {

constexpr double kPoleTolerance = 1e-9;

struct Assembly {
    Eigen::VectorXd mass;
    SparseSymmetric stiffness;
};

Assembly assemble(const TriangleMesh& mesh, const MetricField& field)
{
    field.check_compatible(mesh);
    const auto m = static_cast<Eigen::Index>(mesh.num_vertices());
    const double mean_area = mesh.total_area() / static_cast<double>(mesh.num_triangles());

    Assembly out;
    out.mass = Eigen::VectorXd::Zero(m);
    std::vector<Triplet> trips;
    trips.reserve(mesh.num_triangles() * 3);
    std::vector<double> diag(static_cast<std::size_t>(m), 0.0);

    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
        if (mesh.triangle_area(t) < 1e-12 * mean_area) {
            throw AssemblyError("triangle " + std::to_string(t) + " is degenerate");
        }
        const ElementMatrices e = element_matrices(mesh, field, t);
        if (!e.stiffness.allFinite() || !(e.area > 0.0)) {
            throw AssemblyError("element " + std::to_string(t) + " produced non-finite values");
        }
        const auto& tri = mesh.triangle(t);
        for (int a = 0; a < 3; ++a) {
            out.mass[tri[a]] += e.area / 3.0;
            for (int b = 0; b < 3; ++b) {
                if (tri[a] > tri[b]) trips.emplace_back(tri[a], tri[b], e.stiffness(a, b));
            }
        }
    }

    // Zero row sums hold exactly: the diagonal is the negated off-diagonal sum.
    for (const auto& t : trips) {
        diag[static_cast<std::size_t>(t.row())] -= t.value();
        diag[static_cast<std::size_t>(t.col())] -= t.value();
    }
    for (Eigen::Index i = 0; i < m; ++i) trips.emplace_back(i, i, diag[static_cast<std::size_t>(i)]);
    out.stiffness = SparseSymmetric::from_triplets(m, trips);
    return out;
}

} // namespace

ElementMatrices p1_element(const std::array<Vec2, 3>& corners, const Eigen::Matrix2d& g)
{
    Eigen::Matrix2d e;
    e.col(0) = corners[1] - corners[0];
    e.col(1) = corners[2] - corners[0];
    const double det = e.determinant();
    if (det == 0.0) throw AssemblyError("degenerate element");
    Eigen::Matrix<double, 2, 3> ref;
    ref << -1.0, 1.0, 0.0, -1.0, 0.0, 1.0;
    const Eigen::Matrix<double, 2, 3> grad = e.transpose().inverse() * ref;

    ElementMatrices out;
    out.area = 0.5 * std::fabs(det) * std::sqrt(g.determinant());
    out.stiffness = out.area * grad.transpose() * g.inverse() * grad;
    return out;
}

ElementMatrices p1_element(const Vec3& a, const Vec3& b, const Vec3& c)
{
    const std::array<Vec3, 3> opposite{c - b, a - c, b - a};
    const double area = 0.5 * (b - a).cross(c - a).norm();
    if (area == 0.0) throw AssemblyError("degenerate element");
    ElementMatrices out;
    out.area = area;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) out.stiffness(i, j) = opposite[i].dot(opposite[j]) / (4.0 * area);
    }
    return out;
}

Eigen::Matrix<double, 3, 2> element_frame(const TriangleMesh& mesh, std::size_t t)
{
    const auto& tri = mesh.triangle(t);
    const Vec3& a = mesh.vertex(tri[0]);
    const Vec3& b = mesh.vertex(tri[1]);
    const Vec3& c = mesh.vertex(tri[2]);
    const Vec3 normal = (b - a).cross(c - a).normalized();
    const Vec3 centroid = (a + b + c) / 3.0;

    Vec3 t1, t2;
    switch (mesh.chart().kind) {
    case ChartKind::spherical: {
        bool near_pole = false;
        for (int v : tri) near_pole = near_pole || std::fabs(mesh.vertex(v).normalized().z()) > 1.0 - kPoleTolerance;
        const Vec3 axis = near_pole ? Vec3::UnitX() : Vec3::UnitZ();
        const Vec3 p = centroid.normalized();
        const Vec3 e_phi = axis.cross(p).normalized();
        t1 = e_phi.cross(p);
        t2 = e_phi;
        break;
    }
    case ChartKind::cylindrical: {
        const double theta = std::atan2(centroid.y(), centroid.x());
        t1 = Vec3(-std::sin(theta), std::cos(theta), 0.0);
        t2 = Vec3::UnitZ();
        break;
    }
    case ChartKind::none: throw ChartError("element frame needs chart coordinates");
    }

    Eigen::Matrix<double, 3, 2> frame;
    const Vec3 f1 = (t1 - t1.dot(normal) * normal).normalized();
    Vec3 f2 = t2 - t2.dot(normal) * normal;
    f2 = (f2 - f2.dot(f1) * f1).normalized();
    frame.col(0) = f1;
    frame.col(1) = f2;
    return frame;
}

ElementMatrices element_matrices(const TriangleMesh& mesh, const MetricField& field, std::size_t t)
{
    const auto& tri = mesh.triangle(t);
    const Vec3& a = mesh.vertex(tri[0]);
    const Vec3& b = mesh.vertex(tri[1]);
    const Vec3& c = mesh.vertex(tri[2]);
    if (field.is_isotropic()) return p1_element(a, b, c);

    const Eigen::Matrix<double, 3, 2> frame = element_frame(mesh, t);
    const std::array<Vec2, 3> corners{Vec2::Zero(), frame.transpose() * (b - a), frame.transpose() * (c - a)};
    return p1_element(corners, element_metric(field, mesh, t));
}

Eigen::VectorXd assemble_lumped_mass(const TriangleMesh& mesh, const MetricField& field)
{
    return assemble(mesh, field).mass;
}

SparseSymmetric assemble_stiffness(const TriangleMesh& mesh, const MetricField& field)
{
    return assemble(mesh, field).stiffness;
}

Eigen::VectorXd compute_phi0(const Eigen::VectorXd& mass_diag)
{
    if (mass_diag.size() == 0) throw DimensionError("empty mass vector");
    if (!(mass_diag.minCoeff() > 0.0)) throw AssemblyError("lumped mass must be positive");
    return Eigen::VectorXd::Constant(mass_diag.size(), 1.0 / std::sqrt(mass_diag.sum()));
}

SparseSymmetric build_s_matrix(const Eigen::VectorXd& mass_diag, const SparseSymmetric& stiffness)
{
    if (mass_diag.size() != stiffness.size()) throw DimensionError("mass and stiffness sizes differ");
    if (!(mass_diag.minCoeff() > 0.0)) throw AssemblyError("lumped mass must be positive");
    return stiffness.scaled_symmetric(mass_diag.cwiseSqrt().cwiseInverse());
}

FemSystem assemble_fem_system(const TriangleMesh& mesh, const MetricField& field)
{
    Assembly a = assemble(mesh, field);
    FemSystem sys;
    sys.phi0 = compute_phi0(a.mass);
    sys.s_matrix = build_s_matrix(a.mass, a.stiffness);
    sys.mass_diag = std::move(a.mass);
    sys.stiffness = std::move(a.stiffness);
    return sys;
}

EigenEstimate second_smallest_eigenvalue_of_s(const FemSystem& system, const PowerIterationOptions& options)
{
    return second_smallest_eigenvalue(system.s_matrix, system.kernel_vector(), options);
}

EigenEstimate largest_eigenvalue_of_s(const FemSystem& system, const PowerIterationOptions& options)
{
    const SparseSymmetric& s = system.s_matrix;
    return power_iteration_max([&s](const Eigen::VectorXd& x) { return s.multiply(x); }, s.size(), options);
}

} // namespace surfspline
