#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "surfspline/fit.hpp"
#include "surfspline/mesh.hpp"
#include "surfspline/spline.hpp"

namespace surfspline {

enum class TestFunction { sphere, cylinder };

/// Analytic test function at chart coordinates: f_sphere(theta, phi) or
/// f_cyl(theta, z) with z_max the top of the mesh.
double test_function(TestFunction f, const Vec2& chart, double z_max);

/// Test function at every mesh vertex. Throws ChartError when the mesh chart
/// does not match the function's surface.
Eigen::VectorXd test_function_on_mesh(const TriangleMesh& mesh, TestFunction f);

/// Maximin LHS in chart space snapped to distinct nearest nodes (3D chord distance).
std::vector<int> design_nodes(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed, int restarts = 100);

/// Pearson correlation. Throws DimensionError on length mismatch or fewer than 2 entries.
double correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

struct MethodResult {
    Eigen::VectorXd prediction;
    std::optional<double> rmse; ///< present when a truth vector was supplied
    double seconds = 0.0;
};

struct CompareOptions {
    bool anisotropic = true;
    /// Dense spherical-harmonics baseline; only available on spherical charts.
    bool classical = true;
    int kernel_order = 40;
    FitConfig fit;
    SplineOptions spline;
};

struct ComparisonReport {
    MethodResult isotropic;
    std::optional<MethodResult> anisotropic;
    std::optional<FitResult> fit;
    std::optional<MethodResult> classical;
    std::optional<double> corr_isotropic_classical;
    std::optional<double> corr_isotropic_anisotropic;
    std::optional<double> corr_anisotropic_classical;
};

/// FEM isotropic, optionally FEM with a maximum-likelihood constant anisotropy,
/// and optionally the classical baseline on the same observations.
ComparisonReport compare_methods(const TriangleMesh& mesh, const Observations& obs,
                                 const std::optional<Eigen::VectorXd>& truth, const CompareOptions& options);

struct BenchOptions {
    /// Observation noise for both methods; the truncated kernel has rank
    /// K (K + 2), so large n needs tau > 0 for the classical path.
    double tau = 1e-2;
    int repeats = 1;
    std::uint64_t seed = 1;
    bool classical = true;
    int kernel_order = 40;
};

struct BenchRow {
    std::size_t n = 0;
    double fem_seconds = 0.0;
    double classical_seconds = 0.0; ///< NaN when the classical path is disabled
};

/// Times FEM and classical predictions at every mesh node for each design size.
/// The FEM system is assembled once outside the timed region; each timing is the
/// fastest of `repeats` runs of projection, model build and prediction.
std::vector<BenchRow> bench_predictions(const TriangleMesh& mesh, std::span<const std::size_t> sizes,
                                        const BenchOptions& options = {});

/// Log-spaced integer sizes from lo to hi inclusive, deduplicated.
std::vector<std::size_t> log_spaced_sizes(std::size_t lo, std::size_t hi, std::size_t count);

} // namespace surfspline
