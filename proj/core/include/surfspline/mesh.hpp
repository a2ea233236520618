#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace surfspline {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Triangle = std::array<int, 3>;

enum class ChartKind {
    none,
    spherical,   ///< (theta, phi): polar angle in [0, pi], azimuth in [0, 2 pi)
    cylindrical, ///< (theta, z): azimuth in [0, 2 pi), height
};

/// Optional per-vertex 2D chart coordinates.
struct Chart {
    ChartKind kind = ChartKind::none;
    std::vector<Vec2> coords;
};

/// Immutable, validated triangulated surface.
///
/// Construction rejects dangling indices, degenerate triangles (area below
/// 1e-12 times the mean area), non-manifold edges, inconsistent winding and
/// disconnected vertex sets.
class TriangleMesh {
public:
    TriangleMesh() = default;
    TriangleMesh(std::vector<Vec3> vertices, std::vector<Triangle> triangles, Chart chart = {});

    std::size_t num_vertices() const { return vertices_.size(); }
    std::size_t num_triangles() const { return triangles_.size(); }
    std::size_t num_edges() const { return num_edges_; }
    long euler_characteristic() const;

    const Vec3& vertex(std::size_t i) const { return vertices_[i]; }
    const Triangle& triangle(std::size_t t) const { return triangles_[t]; }
    const std::vector<Vec3>& vertices() const { return vertices_; }
    const std::vector<Triangle>& triangles() const { return triangles_; }

    const Chart& chart() const { return chart_; }
    bool has_chart() const { return chart_.kind != ChartKind::none; }

    double triangle_area(std::size_t t) const;
    double total_area() const;
    double mean_edge_length() const;
    double bounding_box_diagonal() const;

    /// Vertex indices adjacent to each vertex (sorted, without the vertex itself).
    std::vector<std::vector<int>> vertex_neighbors() const;

private:
    void validate();

    std::vector<Vec3> vertices_;
    std::vector<Triangle> triangles_;
    Chart chart_;
    std::size_t num_edges_ = 0;
};

/// Icosahedral subdivision projected to the unit sphere, with spherical chart.
/// refinement 0 is the icosahedron (12 vertices); each level quadruples faces.
TriangleMesh generate_sphere_mesh(int refinement);

/// Latitude/longitude grid on the unit sphere with a pole vertex at each end.
TriangleMesh generate_sphere_grid_mesh(double step_degrees);

/// Open cylinder of n_theta x n_z nodes. Odd rows are shifted by half an angular
/// step so every triangle is isosceles in 3D.
TriangleMesh generate_cylinder_mesh(double radius, double z_min, double z_max, int n_theta, int n_z);

Vec3 spherical_to_point(double theta, double phi);
Vec2 point_to_spherical(const Vec3& p);
Vec3 cylindrical_to_point(double radius, double theta, double z);
Vec2 point_to_cylindrical(const Vec3& p);

/// Maps chart coordinates to a 3D point; `radius` is only used by cylindrical charts.
Vec3 chart_to_point(ChartKind kind, const Vec2& uv, double radius = 1.0);

/// Observations attached to a mesh.
struct Observations {
    enum class Mode { node, free_point };

    Mode mode = Mode::node;
    std::vector<int> nodes;  ///< node mode: indices into the mesh vertices
    std::vector<Vec3> points; ///< free-point mode: surface points
    Eigen::VectorXd values;
    double tau = 0.0;

    std::size_t size() const { return static_cast<std::size_t>(values.size()); }

    static Observations at_nodes(std::vector<int> nodes, Eigen::VectorXd values, double tau = 0.0);
    static Observations at_points(std::vector<Vec3> points, Eigen::VectorXd values, double tau);
};

/// Throws ParameterError when the observations violate their invariants for `mesh`.
void validate_observations(const Observations& obs, const TriangleMesh& mesh);

/// Sparse n x m matrix of basis-function values at the observation points.
struct ProjectionMatrix {
    Eigen::SparseMatrix<double, Eigen::RowMajor> matrix;
    /// Node indices when every row is an indicator row (node mode), empty otherwise.
    std::vector<int> nodes;

    bool is_indicator() const { return !nodes.empty(); }
    long rows() const { return matrix.rows(); }
    long cols() const { return matrix.cols(); }
};

/// Result of locating a point on the mesh.
struct SurfaceLocation {
    int triangle = -1;
    Eigen::Vector3d barycentric = Eigen::Vector3d::Zero();
    double distance = 0.0;
};

struct LocateOptions {
    /// Tolerance relative to the bounding-box diagonal.
    double relative_tolerance = 1e-6;
    /// Fraction of the mean edge length added to the band to absorb the chordal
    /// gap between a curved surface and its flat triangles. Negative disables.
    double chordal_slack = 0.5;
    /// Triangle count above which a bounding-volume hierarchy is used. The
    /// hierarchy already wins for 100 points on a few thousand triangles.
    std::size_t bvh_threshold = 256;
};

/// Locates `points` on `mesh` (nearest triangle, barycentrics clamped to the triangle).
std::vector<SurfaceLocation> locate_points(const TriangleMesh& mesh, std::span<const Vec3> points,
                                           const LocateOptions& options = {});

ProjectionMatrix build_projection(const TriangleMesh& mesh, const Observations& obs,
                                  const LocateOptions& options = {});

enum class SnapDistance { chord, chart };

/// Nearest mesh node to each point, using 3D chord distance or chart distance.
/// Returned nodes are distinct: a collision falls through to the next nearest free node.
std::vector<int> snap_to_nodes(const TriangleMesh& mesh, std::span<const Vec3> points,
                               SnapDistance distance = SnapDistance::chord);

} // namespace surfspline
