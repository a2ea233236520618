#include "surfspline/design.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

#include "surfspline/errors.hpp"

namespace surfspline {

std::vector<Vec2> maximin_lhs(std::size_t n, const Vec2& lo, const Vec2& hi, std::uint64_t seed, int restarts)
{
    if (n == 0) throw ParameterError("design size must be positive");
    if (restarts < 1) throw ParameterError("design restarts must be >= 1");
    if (!(hi.array() > lo.array()).all()) throw ParameterError("design box is empty");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<std::size_t> perm0(n), perm1(n);
    std::vector<Vec2> best, trial(n);
    double best_score = -1.0;

    for (int r = 0; r < restarts; ++r) {
        std::iota(perm0.begin(), perm0.end(), std::size_t{0});
        std::iota(perm1.begin(), perm1.end(), std::size_t{0});
        std::shuffle(perm0.begin(), perm0.end(), rng);
        std::shuffle(perm1.begin(), perm1.end(), rng);
        for (std::size_t i = 0; i < n; ++i) {
            const double u0 = (static_cast<double>(perm0[i]) + unit(rng)) / static_cast<double>(n);
            const double u1 = (static_cast<double>(perm1[i]) + unit(rng)) / static_cast<double>(n);
            trial[i] = Vec2(u0, u1);
        }
        double score = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) score = std::min(score, (trial[i] - trial[j]).squaredNorm());
        }
        if (score > best_score) {
            best_score = score;
            best = trial;
        }
    }
    for (auto& p : best) p = lo + p.cwiseProduct(hi - lo);
    return best;
}

Design chart_design(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed, int restarts)
{
    Design d;
    switch (mesh.chart().kind) {
    case ChartKind::spherical: {
        d.chart_coords = maximin_lhs(n, Vec2(0.0, 0.0), Vec2(std::numbers::pi, 2.0 * std::numbers::pi), seed, restarts);
        for (const auto& c : d.chart_coords) d.points.push_back(spherical_to_point(c[0], c[1]));
        break;
    }
    case ChartKind::cylindrical: {
        double z_lo = std::numeric_limits<double>::infinity();
        double z_hi = -z_lo;
        double radius = 0.0;
        for (const auto& v : mesh.vertices()) {
            z_lo = std::min(z_lo, v.z());
            z_hi = std::max(z_hi, v.z());
            radius += std::hypot(v.x(), v.y());
        }
        radius /= static_cast<double>(mesh.num_vertices());
        d.chart_coords = maximin_lhs(n, Vec2(0.0, z_lo), Vec2(2.0 * std::numbers::pi, z_hi), seed, restarts);
        for (const auto& c : d.chart_coords) d.points.push_back(cylindrical_to_point(radius, c[0], c[1]));
        break;
    }
    case ChartKind::none: throw ChartError("designs are drawn in chart coordinates; the mesh has none");
    }
    return d;
}

} // namespace surfspline
