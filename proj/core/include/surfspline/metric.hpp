#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "surfspline/mesh.hpp"

namespace surfspline {

/// Local anisotropy for a 2D chart: rotation angle and the two scalings.
struct AnisotropyParams {
    double delta = 0.0;
    double rho1 = 1.0;
    double rho2 = 1.0;
};

/// Riemannian deformation G = R(delta) diag(rho1^2, rho2^2) R(delta)^T acting in
/// the orthonormalized chart frame of each triangle.
class MetricField {
public:
    enum class Kind { isotropic, constant, per_node };

    MetricField() = default;

    static MetricField isotropic();
    static MetricField constant(const AnisotropyParams& params);
    static MetricField per_node(std::vector<AnisotropyParams> params);

    Kind kind() const { return kind_; }
    bool is_isotropic() const { return kind_ == Kind::isotropic; }
    /// Parameters of a constant field (identity parameters when isotropic).
    const AnisotropyParams& params() const { return params_; }
    const std::vector<AnisotropyParams>& node_params() const { return node_params_; }

    /// Throws DimensionError if a per-node field does not match the mesh size.
    void check_compatible(const TriangleMesh& mesh) const;

private:
    Kind kind_ = Kind::isotropic;
    AnisotropyParams params_;
    std::vector<AnisotropyParams> node_params_;
};

/// Wraps an angle into (-pi, pi].
double wrap_angle(double a);

Eigen::Matrix2d rotation_matrix_2d(double delta);

/// R_z(d3) R_y(d2) R_x(d1) with the sign convention of the 2D rotation in each
/// factor; the middle factor rotates z towards x.
Eigen::Matrix3d rotation_matrix_3d(double delta1, double delta2, double delta3);

Eigen::Matrix2d deformation_matrix(const AnisotropyParams& params);

/// G at a mesh vertex. Anisotropic fields require chart coordinates on the mesh.
Eigen::Matrix2d deformation_matrix(const MetricField& field, const TriangleMesh& mesh, std::size_t vertex);

/// Piecewise-constant parameters on triangle `t`: per-node fields use the
/// axial circular mean of delta (period pi) and the geometric mean of rho.
AnisotropyParams element_params(const MetricField& field, const TriangleMesh& mesh, std::size_t t);

Eigen::Matrix2d element_metric(const MetricField& field, const TriangleMesh& mesh, std::size_t t);

} // namespace surfspline
