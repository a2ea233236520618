#pragma once

#include <array>

#include <Eigen/Core>

#include "surfspline/mesh.hpp"
#include "surfspline/metric.hpp"
#include "surfspline/sparse.hpp"

namespace surfspline {

/// Lumped-mass P1 discretization of the Laplace-Beltrami operator.
struct FemSystem {
    Eigen::VectorXd mass_diag;  ///< M
    SparseSymmetric stiffness;  ///< F
    SparseSymmetric s_matrix;   ///< M^{-1/2} F M^{-1/2}
    Eigen::VectorXd phi0;       ///< constant, phi0^T M phi0 = 1

    Eigen::Index size() const { return mass_diag.size(); }
    Eigen::VectorXd sqrt_mass() const { return mass_diag.cwiseSqrt(); }
    /// M phi0.
    Eigen::VectorXd mass_phi0() const { return mass_diag.cwiseProduct(phi0); }
    /// Unit vector spanning the kernel of S: sqrt(M) phi0.
    Eigen::VectorXd kernel_vector() const { return sqrt_mass().cwiseProduct(phi0); }
};

struct ElementMatrices {
    Eigen::Matrix3d stiffness;
    double area = 0.0; ///< metric area; each vertex receives area / 3 of lumped mass
};

/// P1 element in plane coordinates under a constant metric g.
ElementMatrices p1_element(const std::array<Vec2, 3>& corners, const Eigen::Matrix2d& g);

/// P1 element of a flat triangle embedded in 3D with the induced metric.
ElementMatrices p1_element(const Vec3& a, const Vec3& b, const Vec3& c);

/// Orthonormal basis (columns) of the plane of triangle `t`, aligned with the
/// chart directions at its centroid. Spherical triangles touching a pole use a
/// chart whose polar axis is x.
Eigen::Matrix<double, 3, 2> element_frame(const TriangleMesh& mesh, std::size_t t);

/// Element matrices of triangle `t` under `field`.
ElementMatrices element_matrices(const TriangleMesh& mesh, const MetricField& field, std::size_t t);

Eigen::VectorXd assemble_lumped_mass(const TriangleMesh& mesh, const MetricField& field = {});
SparseSymmetric assemble_stiffness(const TriangleMesh& mesh, const MetricField& field = {});
Eigen::VectorXd compute_phi0(const Eigen::VectorXd& mass_diag);
SparseSymmetric build_s_matrix(const Eigen::VectorXd& mass_diag, const SparseSymmetric& stiffness);

FemSystem assemble_fem_system(const TriangleMesh& mesh, const MetricField& field = {});

/// lambda_1 of S via the deflated shifted inverse.
EigenEstimate second_smallest_eigenvalue_of_s(const FemSystem& system, const PowerIterationOptions& options = {});
/// lambda_{m-1} of S.
EigenEstimate largest_eigenvalue_of_s(const FemSystem& system, const PowerIterationOptions& options = {});

} // namespace surfspline
