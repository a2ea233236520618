#include "surfspline/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numbers>
#include <numeric>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>

#include <Eigen/Geometry>
#include <unsupported/Eigen/BVH>

#include "surfspline/errors.hpp"

namespace surfspline {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::uint64_t edge_key(int a, int b)
{
    const auto lo = static_cast<std::uint64_t>(std::min(a, b));
    const auto hi = static_cast<std::uint64_t>(std::max(a, b));
    return (hi << 32) | lo;
}

std::uint64_t directed_key(int a, int b)
{
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
           static_cast<std::uint32_t>(b);
}

double wrap_two_pi(double a)
{
    a = std::fmod(a, kTwoPi);
    if (a < 0.0) a += kTwoPi;
    return a;
}

int find_root(std::vector<int>& parent, int i)
{
    while (parent[i] != i) {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    return i;
}

// Closest point on triangle abc to p (Ericson, Real-Time Collision Detection 5.1.5),
// returned as barycentric weights.
Eigen::Vector3d closest_barycentric(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c)
{
    const Vec3 ab = b - a;
    const Vec3 ac = c - a;
    const Vec3 ap = p - a;
    const double d1 = ab.dot(ap);
    const double d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) return {1.0, 0.0, 0.0};

    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp);
    const double d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) return {0.0, 1.0, 0.0};

    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        const double v = d1 / (d1 - d3);
        return {1.0 - v, v, 0.0};
    }

    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp);
    const double d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) return {0.0, 0.0, 1.0};

    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
        const double w = d2 / (d2 - d6);
        return {1.0 - w, 0.0, w};
    }

    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return {0.0, 1.0 - w, w};
    }

    const double denom = 1.0 / (va + vb + vc);
    const double v = vb * denom;
    const double w = vc * denom;
    return {1.0 - v - w, v, w};
}

struct TriangleQuery {
    const TriangleMesh& mesh;
    Vec3 point;
    SurfaceLocation best;
    double best_sq = std::numeric_limits<double>::infinity();

    double test(int t)
    {
        const auto& tri = mesh.triangle(static_cast<std::size_t>(t));
        const Vec3& a = mesh.vertex(tri[0]);
        const Vec3& b = mesh.vertex(tri[1]);
        const Vec3& c = mesh.vertex(tri[2]);
        const Eigen::Vector3d w = closest_barycentric(point, a, b, c);
        const Vec3 q = w[0] * a + w[1] * b + w[2] * c;
        const double sq = (q - point).squaredNorm();
        if (sq < best_sq) {
            best_sq = sq;
            best.triangle = t;
            best.barycentric = w;
        }
        return sq;
    }
};

struct BvhMinimizer {
    using Scalar = double;
    TriangleQuery& query;
    double minimumOnVolume(const Eigen::AlignedBox3d& box) { return box.squaredExteriorDistance(query.point); }
    double minimumOnObject(int t) { return query.test(t); }
};

} // namespace

TriangleMesh::TriangleMesh(std::vector<Vec3> vertices, std::vector<Triangle> triangles, Chart chart)
    : vertices_(std::move(vertices))
    , triangles_(std::move(triangles))
    , chart_(std::move(chart))
{
    validate();
}

void TriangleMesh::validate()
{
    const auto nv = static_cast<int>(vertices_.size());
    if (nv < 3 || triangles_.empty()) throw ParameterError("mesh needs at least 3 vertices and 1 triangle");
    for (const auto& v : vertices_) {
        if (!v.allFinite()) throw ParameterError("mesh vertex has non-finite coordinates");
    }
    if (chart_.kind != ChartKind::none && chart_.coords.size() != vertices_.size()) {
        throw ParameterError("chart has " + std::to_string(chart_.coords.size()) + " entries for " +
                             std::to_string(vertices_.size()) + " vertices");
    }

    for (std::size_t t = 0; t < triangles_.size(); ++t) {
        const auto& tri = triangles_[t];
        for (int idx : tri) {
            if (idx < 0 || idx >= nv) {
                throw ParameterError("triangle " + std::to_string(t) + " references missing vertex " +
                                     std::to_string(idx));
            }
        }
        if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2]) {
            throw ParameterError("triangle " + std::to_string(t) + " repeats a vertex");
        }
    }

    // Degeneracy is judged against the triangle's own longest edge so that a
    // mesh made only of slivers is still rejected.
    for (std::size_t t = 0; t < triangles_.size(); ++t) {
        const auto& tri = triangles_[t];
        const double longest = std::max({(vertices_[tri[1]] - vertices_[tri[0]]).squaredNorm(),
                                         (vertices_[tri[2]] - vertices_[tri[1]]).squaredNorm(),
                                         (vertices_[tri[0]] - vertices_[tri[2]]).squaredNorm()});
        if (!(triangle_area(t) > 1e-12 * longest)) {
            throw ParameterError("triangle " + std::to_string(t) + " is degenerate");
        }
    }

    // Each undirected edge is shared by at most two faces that traverse it in
    // opposite directions.
    std::unordered_map<std::uint64_t, int> edge_use;
    std::unordered_set<std::uint64_t> directed;
    edge_use.reserve(triangles_.size() * 3);
    directed.reserve(triangles_.size() * 3);
    for (std::size_t t = 0; t < triangles_.size(); ++t) {
        const auto& tri = triangles_[t];
        for (int k = 0; k < 3; ++k) {
            const int a = tri[k];
            const int b = tri[(k + 1) % 3];
            if (++edge_use[edge_key(a, b)] > 2) {
                throw ParameterError("non-manifold edge at triangle " + std::to_string(t));
            }
            if (!directed.insert(directed_key(a, b)).second) {
                throw ParameterError("inconsistent winding at triangle " + std::to_string(t));
            }
        }
    }
    num_edges_ = edge_use.size();

    std::vector<int> parent(vertices_.size());
    std::iota(parent.begin(), parent.end(), 0);
    std::vector<char> used(vertices_.size(), 0);
    for (const auto& tri : triangles_) {
        for (int k = 0; k < 3; ++k) {
            used[tri[k]] = 1;
            const int ra = find_root(parent, tri[k]);
            const int rb = find_root(parent, tri[(k + 1) % 3]);
            if (ra != rb) parent[ra] = rb;
        }
    }
    const int root = find_root(parent, triangles_[0][0]);
    for (int v = 0; v < nv; ++v) {
        if (!used[v]) throw ParameterError("vertex " + std::to_string(v) + " is not used by any triangle");
        if (find_root(parent, v) != root) throw ParameterError("mesh is not connected");
    }
}

long TriangleMesh::euler_characteristic() const
{
    return static_cast<long>(num_vertices()) - static_cast<long>(num_edges()) +
           static_cast<long>(num_triangles());
}

double TriangleMesh::triangle_area(std::size_t t) const
{
    const auto& tri = triangles_[t];
    const Vec3 e1 = vertices_[tri[1]] - vertices_[tri[0]];
    const Vec3 e2 = vertices_[tri[2]] - vertices_[tri[0]];
    return 0.5 * e1.cross(e2).norm();
}

double TriangleMesh::total_area() const
{
    double a = 0.0;
    for (std::size_t t = 0; t < triangles_.size(); ++t) a += triangle_area(t);
    return a;
}

double TriangleMesh::mean_edge_length() const
{
    double sum = 0.0;
    for (const auto& tri : triangles_) {
        for (int k = 0; k < 3; ++k) sum += (vertices_[tri[k]] - vertices_[tri[(k + 1) % 3]]).norm();
    }
    return sum / (3.0 * static_cast<double>(triangles_.size()));
}

double TriangleMesh::bounding_box_diagonal() const
{
    Eigen::AlignedBox3d box;
    for (const auto& v : vertices_) box.extend(v);
    return box.diagonal().norm();
}

std::vector<std::vector<int>> TriangleMesh::vertex_neighbors() const
{
    std::vector<std::vector<int>> nbrs(vertices_.size());
    for (const auto& tri : triangles_) {
        for (int k = 0; k < 3; ++k) {
            nbrs[tri[k]].push_back(tri[(k + 1) % 3]);
            nbrs[tri[k]].push_back(tri[(k + 2) % 3]);
        }
    }
    for (auto& n : nbrs) {
        std::sort(n.begin(), n.end());
        n.erase(std::unique(n.begin(), n.end()), n.end());
    }
    return nbrs;
}

Vec3 spherical_to_point(double theta, double phi)
{
    return {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)};
}

Vec2 point_to_spherical(const Vec3& p)
{
    const Vec3 u = p.normalized();
    const double theta = std::acos(std::clamp(u.z(), -1.0, 1.0));
    const double rxy = std::hypot(u.x(), u.y());
    const double phi = rxy > 0.0 ? wrap_two_pi(std::atan2(u.y(), u.x())) : 0.0;
    return {theta, phi};
}

Vec3 cylindrical_to_point(double radius, double theta, double z)
{
    return {radius * std::cos(theta), radius * std::sin(theta), z};
}

Vec2 point_to_cylindrical(const Vec3& p)
{
    return {wrap_two_pi(std::atan2(p.y(), p.x())), p.z()};
}

Vec3 chart_to_point(ChartKind kind, const Vec2& uv, double radius)
{
    switch (kind) {
    case ChartKind::spherical: return spherical_to_point(uv[0], uv[1]);
    case ChartKind::cylindrical: return cylindrical_to_point(radius, uv[0], uv[1]);
    case ChartKind::none: break;
    }
    throw ChartError("chart_to_point needs a spherical or cylindrical chart");
}

TriangleMesh generate_sphere_mesh(int refinement)
{
    if (refinement < 0) throw ParameterError("sphere refinement must be >= 0");

    // Icosahedron with a vertex on each pole.
    std::vector<Vec3> verts;
    verts.emplace_back(0.0, 0.0, 1.0);
    const double z = 1.0 / std::sqrt(5.0);
    const double r = 2.0 / std::sqrt(5.0);
    for (int k = 0; k < 5; ++k) {
        const double a = kTwoPi * k / 5.0;
        verts.emplace_back(r * std::cos(a), r * std::sin(a), z);
    }
    for (int k = 0; k < 5; ++k) {
        const double a = kTwoPi * (k + 0.5) / 5.0;
        verts.emplace_back(r * std::cos(a), r * std::sin(a), -z);
    }
    verts.emplace_back(0.0, 0.0, -1.0);

    std::vector<Triangle> tris;
    for (int k = 0; k < 5; ++k) {
        const int u0 = 1 + k;
        const int u1 = 1 + (k + 1) % 5;
        const int l0 = 6 + k;
        const int l1 = 6 + (k + 1) % 5;
        tris.push_back({0, u0, u1});
        tris.push_back({u0, l0, u1});
        tris.push_back({u1, l0, l1});
        tris.push_back({l0, 11, l1});
    }

    for (int level = 0; level < refinement; ++level) {
        std::unordered_map<std::uint64_t, int> midpoint;
        midpoint.reserve(tris.size() * 2);
        auto mid = [&](int a, int b) {
            const auto key = edge_key(a, b);
            if (auto it = midpoint.find(key); it != midpoint.end()) return it->second;
            verts.push_back((verts[a] + verts[b]).normalized());
            const int idx = static_cast<int>(verts.size()) - 1;
            midpoint.emplace(key, idx);
            return idx;
        };
        std::vector<Triangle> next;
        next.reserve(tris.size() * 4);
        for (const auto& t : tris) {
            const int ab = mid(t[0], t[1]);
            const int bc = mid(t[1], t[2]);
            const int ca = mid(t[2], t[0]);
            next.push_back({t[0], ab, ca});
            next.push_back({ab, t[1], bc});
            next.push_back({ca, bc, t[2]});
            next.push_back({ab, bc, ca});
        }
        tris = std::move(next);
    }

    Chart chart{ChartKind::spherical, {}};
    chart.coords.reserve(verts.size());
    for (auto& v : verts) {
        v.normalize();
        chart.coords.push_back(point_to_spherical(v));
    }
    return TriangleMesh(std::move(verts), std::move(tris), std::move(chart));
}

TriangleMesh generate_sphere_grid_mesh(double step_degrees)
{
    if (!(step_degrees > 0.0) || step_degrees > 90.0) {
        throw ParameterError("grid step must lie in (0, 90] degrees");
    }
    const int n_lat = std::max(2, static_cast<int>(std::lround(180.0 / step_degrees)));
    const int n_lon = std::max(3, static_cast<int>(std::lround(360.0 / step_degrees)));
    const double dtheta = std::numbers::pi / n_lat;
    const double dphi = kTwoPi / n_lon;

    std::vector<Vec3> verts;
    Chart chart{ChartKind::spherical, {}};
    verts.push_back(spherical_to_point(0.0, 0.0));
    chart.coords.emplace_back(0.0, 0.0);
    for (int i = 1; i < n_lat; ++i) {
        for (int j = 0; j < n_lon; ++j) {
            verts.push_back(spherical_to_point(i * dtheta, j * dphi));
            chart.coords.emplace_back(i * dtheta, j * dphi);
        }
    }
    const int south = static_cast<int>(verts.size());
    verts.push_back(spherical_to_point(std::numbers::pi, 0.0));
    chart.coords.emplace_back(std::numbers::pi, 0.0);

    auto ring = [n_lon](int i, int j) { return 1 + (i - 1) * n_lon + ((j % n_lon) + n_lon) % n_lon; };
    std::vector<Triangle> tris;
    for (int j = 0; j < n_lon; ++j) tris.push_back({0, ring(1, j), ring(1, j + 1)});
    for (int i = 1; i + 1 < n_lat; ++i) {
        for (int j = 0; j < n_lon; ++j) {
            const int a = ring(i, j);
            const int b = ring(i + 1, j);
            const int c = ring(i + 1, j + 1);
            const int d = ring(i, j + 1);
            tris.push_back({a, b, c});
            tris.push_back({a, c, d});
        }
    }
    for (int j = 0; j < n_lon; ++j) tris.push_back({ring(n_lat - 1, j), south, ring(n_lat - 1, j + 1)});
    return TriangleMesh(std::move(verts), std::move(tris), std::move(chart));
}

TriangleMesh generate_cylinder_mesh(double radius, double z_min, double z_max, int n_theta, int n_z)
{
    if (!(radius > 0.0)) throw ParameterError("cylinder radius must be positive");
    if (!(z_max > z_min)) throw ParameterError("cylinder needs z_max > z_min");
    if (n_theta < 3) throw ParameterError("cylinder needs n_theta >= 3");
    if (n_z < 2) throw ParameterError("cylinder needs n_z >= 2");

    const double dz = (z_max - z_min) / (n_z - 1);
    const double half = 0.5 * kTwoPi / n_theta;
    std::vector<Vec3> verts;
    Chart chart{ChartKind::cylindrical, {}};
    verts.reserve(static_cast<std::size_t>(n_theta) * n_z);
    for (int r = 0; r < n_z; ++r) {
        const double z = r + 1 == n_z ? z_max : z_min + r * dz;
        for (int j = 0; j < n_theta; ++j) {
            const double theta = wrap_two_pi(kTwoPi * j / n_theta + (r % 2 == 1 ? half : 0.0));
            verts.push_back(cylindrical_to_point(radius, theta, z));
            chart.coords.emplace_back(theta, z);
        }
    }

    auto node = [n_theta](int r, int j) { return r * n_theta + ((j % n_theta) + n_theta) % n_theta; };
    std::vector<Triangle> tris;
    tris.reserve(static_cast<std::size_t>(2 * n_theta) * (n_z - 1));
    for (int r = 0; r + 1 < n_z; ++r) {
        for (int j = 0; j < n_theta; ++j) {
            const int b0 = node(r, j);
            const int b1 = node(r, j + 1);
            const int t0 = node(r + 1, j);
            const int t1 = node(r + 1, j + 1);
            if (r % 2 == 0) {
                // Upper row is shifted forward by half a step.
                tris.push_back({b0, b1, t0});
                tris.push_back({t0, b1, t1});
            } else {
                tris.push_back({b0, b1, t1});
                tris.push_back({b0, t1, t0});
            }
        }
    }
    return TriangleMesh(std::move(verts), std::move(tris), std::move(chart));
}

Observations Observations::at_nodes(std::vector<int> nodes, Eigen::VectorXd values, double tau)
{
    Observations obs;
    obs.mode = Mode::node;
    obs.nodes = std::move(nodes);
    obs.values = std::move(values);
    obs.tau = tau;
    return obs;
}

Observations Observations::at_points(std::vector<Vec3> points, Eigen::VectorXd values, double tau)
{
    Observations obs;
    obs.mode = Mode::free_point;
    obs.points = std::move(points);
    obs.values = std::move(values);
    obs.tau = tau;
    return obs;
}

void validate_observations(const Observations& obs, const TriangleMesh& mesh)
{
    const std::size_t n = obs.size();
    if (n == 0) throw ParameterError("at least one observation is required");
    if (!obs.values.allFinite()) throw ParameterError("observation values must be finite");
    if (!(obs.tau >= 0.0) || !std::isfinite(obs.tau)) throw ParameterError("noise tau must be finite and >= 0");

    if (obs.mode == Observations::Mode::node) {
        if (obs.nodes.size() != n) throw ParameterError("node count does not match value count");
        std::vector<char> seen(mesh.num_vertices(), 0);
        for (int i : obs.nodes) {
            if (i < 0 || static_cast<std::size_t>(i) >= mesh.num_vertices()) {
                throw ParameterError("observation node " + std::to_string(i) + " is not a mesh vertex");
            }
            if (seen[i]++) throw ParameterError("observation node " + std::to_string(i) + " is repeated");
        }
        if (n >= mesh.num_vertices()) {
            throw ParameterError("node observations must leave at least one unobserved vertex");
        }
    } else {
        if (obs.points.size() != n) throw ParameterError("point count does not match value count");
        if (!(obs.tau > 0.0)) throw ParameterError("free-point observations require tau > 0");
    }
}

std::vector<SurfaceLocation> locate_points(const TriangleMesh& mesh, std::span<const Vec3> points,
                                           const LocateOptions& options)
{
    double tolerance = options.relative_tolerance * mesh.bounding_box_diagonal();
    if (options.chordal_slack >= 0.0) tolerance += options.chordal_slack * mesh.mean_edge_length();

    std::vector<SurfaceLocation> out;
    out.reserve(points.size());

    const bool use_bvh = mesh.num_triangles() > options.bvh_threshold;
    std::vector<int> ids;
    std::vector<Eigen::AlignedBox3d> boxes;
    std::unique_ptr<Eigen::KdBVH<double, 3, int>> tree;
    if (use_bvh) {
        ids.resize(mesh.num_triangles());
        std::iota(ids.begin(), ids.end(), 0);
        boxes.reserve(mesh.num_triangles());
        for (const auto& tri : mesh.triangles()) {
            Eigen::AlignedBox3d box(mesh.vertex(tri[0]));
            box.extend(mesh.vertex(tri[1]));
            box.extend(mesh.vertex(tri[2]));
            boxes.push_back(box);
        }
        tree = std::make_unique<Eigen::KdBVH<double, 3, int>>(ids.begin(), ids.end(), boxes.begin(), boxes.end());
    }

    for (std::size_t i = 0; i < points.size(); ++i) {
        TriangleQuery query{mesh, points[i], {}};
        if (use_bvh) {
            BvhMinimizer minimizer{query};
            Eigen::BVMinimize(*tree, minimizer);
        } else {
            for (std::size_t t = 0; t < mesh.num_triangles(); ++t) query.test(static_cast<int>(t));
        }
        query.best.distance = std::sqrt(query.best_sq);
        if (!(query.best.distance <= tolerance)) {
            throw LocationError("observation point " + std::to_string(i) + " lies " +
                                    std::to_string(query.best.distance) +
                                    " from the surface (tolerance " + std::to_string(tolerance) + ")",
                                i);
        }
        out.push_back(query.best);
    }
    return out;
}

ProjectionMatrix build_projection(const TriangleMesh& mesh, const Observations& obs,
                                  const LocateOptions& options)
{
    validate_observations(obs, mesh);
    const auto n = static_cast<Eigen::Index>(obs.size());
    const auto m = static_cast<Eigen::Index>(mesh.num_vertices());

    ProjectionMatrix proj;
    proj.matrix.resize(n, m);
    std::vector<Eigen::Triplet<double>> trips;
    if (obs.mode == Observations::Mode::node) {
        proj.nodes = obs.nodes;
        for (Eigen::Index i = 0; i < n; ++i) trips.emplace_back(i, obs.nodes[i], 1.0);
    } else {
        const auto locs = locate_points(mesh, obs.points, options);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& tri = mesh.triangle(static_cast<std::size_t>(locs[i].triangle));
            for (int k = 0; k < 3; ++k) {
                if (locs[i].barycentric[k] != 0.0) trips.emplace_back(i, tri[k], locs[i].barycentric[k]);
            }
        }
    }
    proj.matrix.setFromTriplets(trips.begin(), trips.end());
    proj.matrix.makeCompressed();
    return proj;
}

std::vector<int> snap_to_nodes(const TriangleMesh& mesh, std::span<const Vec3> points, SnapDistance distance)
{
    if (points.size() > mesh.num_vertices()) throw ParameterError("more points than mesh nodes");
    const auto& chart = mesh.chart();
    if (distance == SnapDistance::chart && chart.kind == ChartKind::none) {
        throw ChartError("chart-distance snapping needs chart coordinates");
    }

    auto chart_distance = [&](const Vec2& a, const Vec2& b) {
        Vec2 d = a - b;
        // Azimuth is periodic in both supported charts: phi for spheres, theta for cylinders.
        const int periodic = chart.kind == ChartKind::spherical ? 1 : 0;
        d[periodic] = std::fabs(d[periodic]);
        d[periodic] = std::min(d[periodic], kTwoPi - d[periodic]);
        return d.norm();
    };

    std::vector<char> taken(mesh.num_vertices(), 0);
    std::vector<int> out;
    out.reserve(points.size());
    std::vector<std::pair<double, int>> dist(mesh.num_vertices());
    for (const auto& p : points) {
        Vec2 pc;
        if (distance == SnapDistance::chart) {
            pc = chart.kind == ChartKind::spherical ? point_to_spherical(p) : point_to_cylindrical(p);
        }
        for (std::size_t v = 0; v < mesh.num_vertices(); ++v) {
            const double d = distance == SnapDistance::chord ? (mesh.vertex(v) - p).norm()
                                                             : chart_distance(pc, chart.coords[v]);
            dist[v] = {d, static_cast<int>(v)};
        }
        std::sort(dist.begin(), dist.end());
        for (const auto& [d, v] : dist) {
            if (!taken[v]) {
                taken[v] = 1;
                out.push_back(v);
                break;
            }
        }
    }
    return out;
}

} // namespace surfspline
