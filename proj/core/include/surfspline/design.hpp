#pragma once

#include <cstdint>
#include <vector>

#include "surfspline/mesh.hpp"

namespace surfspline {

/// Latin hypercube of n points in [lo, hi] keeping the best of `restarts`
/// random draws by minimum pairwise distance (measured in the unit square).
std::vector<Vec2> maximin_lhs(std::size_t n, const Vec2& lo, const Vec2& hi, std::uint64_t seed, int restarts = 100);

struct Design {
    std::vector<Vec2> chart_coords;
    std::vector<Vec3> points; ///< chart coordinates mapped onto the analytic surface
};

/// Maximin LHS over the chart domain of `mesh` (spherical: [0, pi] x [0, 2 pi];
/// cylindrical: [0, 2 pi] x [z_min, z_max] of the vertices).
Design chart_design(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed, int restarts = 100);

} // namespace surfspline
