#include <cmath>
#include <numbers>
#include <set>

#include <gtest/gtest.h>

#include "support.hpp"
#include "surfspline/design.hpp"
#include "surfspline/errors.hpp"
#include "surfspline/mesh.hpp"

using namespace surfspline;

TEST(SphereMesh, IcosahedronCounts)
{
    const TriangleMesh mesh = generate_sphere_mesh(0);
    EXPECT_EQ(mesh.num_vertices(), 12u);
    EXPECT_EQ(mesh.num_edges(), 30u);
    EXPECT_EQ(mesh.num_triangles(), 20u);
    EXPECT_EQ(mesh.euler_characteristic(), 2);
}

TEST(SphereMesh, EveryRefinementIsAUnitSphere)
{
    for (int r = 0; r <= 4; ++r) {
        const TriangleMesh mesh = generate_sphere_mesh(r);
        EXPECT_EQ(mesh.euler_characteristic(), 2) << "refinement " << r;
        EXPECT_EQ(mesh.num_vertices(), static_cast<std::size_t>(10 * (1 << (2 * r)) + 2));
        for (const auto& v : mesh.vertices()) EXPECT_NEAR(v.norm(), 1.0, 1e-12);
    }
    EXPECT_THROW(generate_sphere_mesh(-1), ParameterError);
}

TEST(SphereMesh, AreaConvergesToSphere)
{
    const double area = generate_sphere_mesh(3).total_area();
    EXPECT_LT(std::fabs(area - 4.0 * std::numbers::pi) / (4.0 * std::numbers::pi), 0.01);
}

TEST(SphereMesh, ChartReconstructsVertices)
{
    for (const TriangleMesh& mesh : {generate_sphere_mesh(3), generate_sphere_grid_mesh(15.0)}) {
        ASSERT_EQ(mesh.chart().kind, ChartKind::spherical);
        for (std::size_t i = 0; i < mesh.num_vertices(); ++i) {
            const Vec2& uv = mesh.chart().coords[i];
            EXPECT_GE(uv.x(), 0.0);
            EXPECT_LE(uv.x(), std::numbers::pi);
            EXPECT_LT((spherical_to_point(uv.x(), uv.y()) - mesh.vertex(i)).norm(), 1e-10);
        }
    }
}

TEST(SphereMesh, HasPoleVertices)
{
    const TriangleMesh mesh = generate_sphere_mesh(1);
    int poles = 0;
    for (const auto& v : mesh.vertices()) poles += std::fabs(std::fabs(v.z()) - 1.0) < 1e-15 ? 1 : 0;
    EXPECT_EQ(poles, 2);
}

TEST(GridMesh, TopologyAndCounts)
{
    const TriangleMesh mesh = generate_sphere_grid_mesh(30.0);
    EXPECT_EQ(mesh.euler_characteristic(), 2);
    // 5 interior latitude rings of 12 plus two poles.
    EXPECT_EQ(mesh.num_vertices(), 62u);
    EXPECT_THROW(generate_sphere_grid_mesh(0.0), ParameterError);
    EXPECT_THROW(generate_sphere_grid_mesh(120.0), ParameterError);
}

TEST(CylinderMesh, SeventyBy115Resolution)
{
    const TriangleMesh mesh = generate_cylinder_mesh(1.0, 0.0, 10.0, 70, 115);
    EXPECT_EQ(mesh.num_vertices(), 8050u);
    EXPECT_EQ(mesh.euler_characteristic(), 0);
}

TEST(CylinderMesh, GeometryAndChart)
{
    const TriangleMesh mesh = generate_cylinder_mesh(1.0, -2.0, 3.0, 9, 4);
    EXPECT_EQ(mesh.euler_characteristic(), 0);
    ASSERT_EQ(mesh.chart().kind, ChartKind::cylindrical);
    for (std::size_t i = 0; i < mesh.num_vertices(); ++i) {
        const Vec3& v = mesh.vertex(i);
        EXPECT_NEAR(v.x() * v.x() + v.y() * v.y(), 1.0, 1e-12);
        const Vec2& uv = mesh.chart().coords[i];
        EXPECT_LT((cylindrical_to_point(1.0, uv.x(), uv.y()) - v).norm(), 1e-10);
    }
}

TEST(CylinderMesh, TrianglesAreIsosceles)
{
    const TriangleMesh mesh = generate_cylinder_mesh(1.0, 0.0, 10.0, 70, 115);
    for (std::size_t t = 0; t < mesh.num_triangles(); t += 97) {
        const auto& tri = mesh.triangle(t);
        std::array<double, 3> len{};
        for (int k = 0; k < 3; ++k) len[k] = (mesh.vertex(tri[(k + 1) % 3]) - mesh.vertex(tri[k])).norm();
        std::sort(len.begin(), len.end());
        const bool isosceles = std::fabs(len[0] - len[1]) < 1e-12 || std::fabs(len[1] - len[2]) < 1e-12;
        EXPECT_TRUE(isosceles) << "triangle " << t;
    }
}

TEST(CylinderMesh, RejectsBadDimensions)
{
    EXPECT_THROW(generate_cylinder_mesh(1.0, 1.0, 1.0, 10, 10), ParameterError);
    EXPECT_THROW(generate_cylinder_mesh(1.0, 0.0, 1.0, 2, 10), ParameterError);
    EXPECT_THROW(generate_cylinder_mesh(1.0, 0.0, 1.0, 10, 1), ParameterError);
    EXPECT_THROW(generate_cylinder_mesh(-1.0, 0.0, 1.0, 10, 3), ParameterError);
}

TEST(TriangleMesh, Validation)
{
    const std::vector<Vec3> v = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}};
    EXPECT_NO_THROW(TriangleMesh(v, {Triangle{0, 1, 2}, Triangle{1, 3, 2}}));
    EXPECT_THROW(TriangleMesh(v, {Triangle{0, 1, 2}, Triangle{1, 2, 3}}), ParameterError) << "inconsistent winding";
    EXPECT_THROW(TriangleMesh(v, {Triangle{0, 1, 5}}), ParameterError) << "dangling index";
    EXPECT_THROW(TriangleMesh(v, {Triangle{0, 1, 2}}), ParameterError) << "unused vertex";
    const std::vector<Vec3> collinear = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
    EXPECT_THROW(TriangleMesh(collinear, {Triangle{0, 1, 2}}), ParameterError) << "degenerate";
    const std::vector<Vec3> two = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {5, 5, 0}, {6, 5, 0}, {5, 6, 0}};
    EXPECT_THROW(TriangleMesh(two, {Triangle{0, 1, 2}, Triangle{3, 4, 5}}), ParameterError) << "disconnected";
}

TEST(Projection, NodeObservationsAreIndicators)
{
    const TriangleMesh mesh = generate_sphere_mesh(1);
    const ProjectionMatrix p = build_projection(mesh, Observations::at_nodes({4, 17, 2}, Eigen::Vector3d(1, 2, 3)));
    ASSERT_TRUE(p.is_indicator());
    const Eigen::MatrixXd a(p.matrix);
    EXPECT_EQ(a(0, 4), 1.0);
    EXPECT_EQ(a(1, 17), 1.0);
    EXPECT_EQ(a(2, 2), 1.0);
    EXPECT_EQ(a.sum(), 3.0);
}

TEST(Projection, CentroidHasEqualWeights)
{
    const TriangleMesh mesh = generate_sphere_mesh(2);
    const auto& tri = mesh.triangle(10);
    const Vec3 centroid = (mesh.vertex(tri[0]) + mesh.vertex(tri[1]) + mesh.vertex(tri[2])) / 3.0;
    const ProjectionMatrix p = build_projection(mesh, Observations::at_points({centroid}, Eigen::VectorXd::Ones(1), 0.1));
    const Eigen::MatrixXd a(p.matrix);
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(a(0, tri[k]), 1.0 / 3.0, 1e-12);
    EXPECT_EQ(p.matrix.nonZeros(), 3);
}

TEST(Projection, VertexPointGivesUnitRow)
{
    const TriangleMesh mesh = generate_sphere_mesh(2);
    const ProjectionMatrix p = build_projection(mesh, Observations::at_points({mesh.vertex(31)}, Eigen::VectorXd::Ones(1), 0.1));
    const Eigen::MatrixXd a(p.matrix);
    EXPECT_NEAR(a(0, 31), 1.0, 1e-12);
    EXPECT_NEAR(a.row(0).cwiseAbs().sum(), 1.0, 1e-12);
}

TEST(Projection, PartitionOfUnityOnCurvedSurface)
{
    // Points on the analytic sphere sit off the flat triangles; the chordal slack
    // absorbs the gap and the weights still form a partition of unity.
    const TriangleMesh mesh = generate_sphere_mesh(2);
    const Design design = chart_design(mesh, 50, 3);
    const auto locs = locate_points(mesh, design.points);
    for (const auto& loc : locs) {
        EXPECT_GE(loc.barycentric.minCoeff(), 0.0);
        EXPECT_NEAR(loc.barycentric.sum(), 1.0, 1e-12);
    }
    const ProjectionMatrix p = build_projection(mesh, Observations::at_points(design.points, Eigen::VectorXd::Zero(50), 0.1));
    const Eigen::VectorXd sums = p.matrix * Eigen::VectorXd::Ones(p.cols());
    EXPECT_LT((sums.array() - 1.0).abs().maxCoeff(), 1e-14);
    for (Eigen::Index r = 0; r < p.matrix.outerSize(); ++r) {
        EXPECT_LE(p.matrix.outerIndexPtr()[r + 1] - p.matrix.outerIndexPtr()[r], 3);
    }
}

TEST(Projection, FarPointIsReported)
{
    const TriangleMesh mesh = generate_sphere_mesh(2);
    const std::vector<Vec3> pts = {mesh.vertex(0), Vec3(3.0, 0.0, 0.0)};
    try {
        build_projection(mesh, Observations::at_points(pts, Eigen::VectorXd::Zero(2), 0.1));
        FAIL() << "expected LocationError";
    } catch (const LocationError& e) {
        EXPECT_EQ(e.point_index(), 1u);
    }
}

TEST(Projection, BoundingVolumeSearchAgreesWithExhaustive)
{
    const TriangleMesh mesh = generate_sphere_mesh(3);
    const auto pts = testing_support::random_surface_points(mesh, 40, 2);
    LocateOptions bvh;
    bvh.bvh_threshold = 0;
    const auto a = locate_points(mesh, pts);
    const auto b = locate_points(mesh, pts, bvh);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        EXPECT_NEAR(a[i].distance, b[i].distance, 1e-14);
        if (a[i].triangle == b[i].triangle) {
            EXPECT_LT((a[i].barycentric - b[i].barycentric).norm(), 1e-12);
        }
    }
}

TEST(Observations, Validation)
{
    const TriangleMesh mesh = generate_sphere_mesh(0);
    EXPECT_THROW(validate_observations(Observations::at_nodes({}, Eigen::VectorXd()), mesh), ParameterError);
    EXPECT_THROW(validate_observations(Observations::at_nodes({1, 1}, Eigen::Vector2d(0, 0)), mesh), ParameterError);
    EXPECT_THROW(validate_observations(Observations::at_nodes({1, 99}, Eigen::Vector2d(0, 0)), mesh), ParameterError);
    EXPECT_THROW(validate_observations(Observations::at_points({mesh.vertex(0)}, Eigen::VectorXd::Zero(1), 0.0), mesh),
                 ParameterError);
    EXPECT_THROW(validate_observations(Observations::at_nodes({1}, Eigen::VectorXd::Constant(1, NAN)), mesh),
                 ParameterError);
    EXPECT_NO_THROW(validate_observations(Observations::at_nodes({1, 2}, Eigen::Vector2d(0, 0), 0.5), mesh));
}

TEST(Snap, ChordAndChartGiveDistinctNearestNodes)
{
    const TriangleMesh mesh = generate_sphere_mesh(3);
    const Design design = chart_design(mesh, 30, 11);
    for (SnapDistance d : {SnapDistance::chord, SnapDistance::chart}) {
        const std::vector<int> nodes = snap_to_nodes(mesh, design.points, d);
        EXPECT_EQ(std::set<int>(nodes.begin(), nodes.end()).size(), nodes.size());
    }
    const std::vector<Vec3> same = {mesh.vertex(5), mesh.vertex(5)};
    const std::vector<int> nodes = snap_to_nodes(mesh, same);
    EXPECT_EQ(nodes[0], 5);
    EXPECT_NE(nodes[1], 5);
}

TEST(Design, MaximinLatinHypercube)
{
    const auto pts = maximin_lhs(10, Vec2(0.0, 0.0), Vec2(1.0, 2.0), 7, 20);
    ASSERT_EQ(pts.size(), 10u);
    std::set<int> rows, cols;
    for (const auto& p : pts) {
        rows.insert(static_cast<int>(std::floor(p.x() * 10.0)));
        cols.insert(static_cast<int>(std::floor(p.y() / 2.0 * 10.0)));
    }
    EXPECT_EQ(rows.size(), 10u);
    EXPECT_EQ(cols.size(), 10u);
    const auto again = maximin_lhs(10, Vec2(0.0, 0.0), Vec2(1.0, 2.0), 7, 20);
    for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_EQ(pts[i], again[i]);
}

TEST(Design, PointsLieOnTheSurface)
{
    const TriangleMesh cyl = generate_cylinder_mesh(2.0, -1.0, 4.0, 20, 10);
    const Design d = chart_design(cyl, 15, 3);
    for (std::size_t i = 0; i < d.points.size(); ++i) {
        EXPECT_NEAR(std::hypot(d.points[i].x(), d.points[i].y()), 2.0, 1e-12);
        EXPECT_GE(d.chart_coords[i].y(), -1.0);
        EXPECT_LE(d.chart_coords[i].y(), 4.0);
    }
}
