#include "surfspline/metric.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Geometry>
#include <Eigen/LU>

#include "surfspline/errors.hpp"

namespace surfspline {

namespace {

void check_params(const AnisotropyParams& p)
{
    if (!std::isfinite(p.delta)) throw ParameterError("anisotropy angle must be finite");
    if (!(p.rho1 > 0.0) || !(p.rho2 > 0.0) || !std::isfinite(p.rho1) || !std::isfinite(p.rho2)) {
        throw ParameterError("anisotropy scalings must be finite and positive");
    }
}

void require_chart(const TriangleMesh& mesh)
{
    if (!mesh.has_chart()) throw ChartError("anisotropic metric needs chart coordinates on the mesh");
}

} // namespace

MetricField MetricField::isotropic()
{
    return {};
}

MetricField MetricField::constant(const AnisotropyParams& params)
{
    check_params(params);
    MetricField f;
    f.kind_ = Kind::constant;
    f.params_ = params;
    f.params_.delta = wrap_angle(params.delta);
    return f;
}

MetricField MetricField::per_node(std::vector<AnisotropyParams> params)
{
    if (params.empty()) throw ParameterError("per-node metric needs at least one entry");
    for (auto& p : params) {
        check_params(p);
        p.delta = wrap_angle(p.delta);
    }
    MetricField f;
    f.kind_ = Kind::per_node;
    f.node_params_ = std::move(params);
    return f;
}

void MetricField::check_compatible(const TriangleMesh& mesh) const
{
    if (kind_ == Kind::per_node && node_params_.size() != mesh.num_vertices()) {
        throw DimensionError("per-node metric has " + std::to_string(node_params_.size()) + " entries for " +
                             std::to_string(mesh.num_vertices()) + " vertices");
    }
    if (kind_ != Kind::isotropic) require_chart(mesh);
}

double wrap_angle(double a)
{
    constexpr double pi = std::numbers::pi;
    a = std::remainder(a, 2.0 * pi);
    if (a <= -pi) a += 2.0 * pi;
    return a;
}

Eigen::Matrix2d rotation_matrix_2d(double delta)
{
    const double c = std::cos(delta);
    const double s = std::sin(delta);
    Eigen::Matrix2d r;
    r << c, -s, s, c;
    return r;
}

Eigen::Matrix3d rotation_matrix_3d(double delta1, double delta2, double delta3)
{
    const double c1 = std::cos(delta1), s1 = std::sin(delta1);
    const double c2 = std::cos(delta2), s2 = std::sin(delta2);
    const double c3 = std::cos(delta3), s3 = std::sin(delta3);
    Eigen::Matrix3d rz, ry, rx;
    rz << c3, -s3, 0.0, s3, c3, 0.0, 0.0, 0.0, 1.0;
    ry << c2, 0.0, -s2, 0.0, 1.0, 0.0, s2, 0.0, c2;
    rx << 1.0, 0.0, 0.0, 0.0, c1, -s1, 0.0, s1, c1;
    return rz * ry * rx;
}

Eigen::Matrix2d deformation_matrix(const AnisotropyParams& params)
{
    const Eigen::Matrix2d r = rotation_matrix_2d(params.delta);
    const Eigen::Vector2d d(params.rho1 * params.rho1, params.rho2 * params.rho2);
    Eigen::Matrix2d g = r * d.asDiagonal() * r.transpose();
    g(1, 0) = g(0, 1);
    return g;
}

Eigen::Matrix2d deformation_matrix(const MetricField& field, const TriangleMesh& mesh, std::size_t vertex)
{
    if (vertex >= mesh.num_vertices()) throw ParameterError("vertex index out of range");
    switch (field.kind()) {
    case MetricField::Kind::isotropic: return Eigen::Matrix2d::Identity();
    case MetricField::Kind::constant: require_chart(mesh); return deformation_matrix(field.params());
    case MetricField::Kind::per_node:
        field.check_compatible(mesh);
        return deformation_matrix(field.node_params()[vertex]);
    }
    return Eigen::Matrix2d::Identity();
}

AnisotropyParams element_params(const MetricField& field, const TriangleMesh& mesh, std::size_t t)
{
    if (field.kind() != MetricField::Kind::per_node) return field.params();
    const auto& tri = mesh.triangle(t);
    const auto& np = field.node_params();
    auto same = [](const AnisotropyParams& a, const AnisotropyParams& b) {
        return a.delta == b.delta && a.rho1 == b.rho1 && a.rho2 == b.rho2;
    };
    if (same(np[tri[0]], np[tri[1]]) && same(np[tri[0]], np[tri[2]])) return np[tri[0]];
    // delta and delta + pi give the same G, so average on the doubled angle.
    double sx = 0.0, sy = 0.0, log1 = 0.0, log2 = 0.0;
    for (int v : tri) {
        sx += std::cos(2.0 * np[v].delta);
        sy += std::sin(2.0 * np[v].delta);
        log1 += std::log(np[v].rho1);
        log2 += std::log(np[v].rho2);
    }
    AnisotropyParams out;
    out.delta = std::hypot(sx, sy) > 1e-12 ? wrap_angle(0.5 * std::atan2(sy, sx)) : np[tri[0]].delta;
    out.rho1 = std::exp(log1 / 3.0);
    out.rho2 = std::exp(log2 / 3.0);
    return out;
}

Eigen::Matrix2d element_metric(const MetricField& field, const TriangleMesh& mesh, std::size_t t)
{
    if (field.is_isotropic()) return Eigen::Matrix2d::Identity();
    return deformation_matrix(element_params(field, mesh, t));
}

} // namespace surfspline
