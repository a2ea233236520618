#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "surfspline/mesh.hpp"

namespace testing_support {

/// n distinct node indices in [0, m).
inline std::vector<int> random_nodes(int m, int n, std::uint64_t seed)
{
    std::vector<int> all(static_cast<std::size_t>(m));
    std::iota(all.begin(), all.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(all.begin(), all.end(), rng);
    all.resize(static_cast<std::size_t>(n));
    return all;
}

inline Eigen::VectorXd random_vector(Eigen::Index n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
    return v;
}

/// Random points on the faces of `mesh` (uniform barycentrics on random triangles).
inline std::vector<surfspline::Vec3> random_surface_points(const surfspline::TriangleMesh& mesh, int n,
                                                           std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> tri(0, mesh.num_triangles() - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<surfspline::Vec3> out;
    for (int i = 0; i < n; ++i) {
        const auto& t = mesh.triangle(tri(rng));
        double a = unit(rng);
        double b = unit(rng);
        if (a + b > 1.0) {
            a = 1.0 - a;
            b = 1.0 - b;
        }
        out.push_back((1.0 - a - b) * mesh.vertex(t[0]) + a * mesh.vertex(t[1]) + b * mesh.vertex(t[2]));
    }
    return out;
}

inline Eigen::MatrixXd dense_projection(const Eigen::SparseMatrix<double, Eigen::RowMajor>& a)
{
    return Eigen::MatrixXd(a);
}

} // namespace testing_support
