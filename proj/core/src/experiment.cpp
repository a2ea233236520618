#include "surfspline/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <set>

#include "surfspline/design.hpp"
#include "surfspline/errors.hpp"
#include "surfspline/fem.hpp"
#include "surfspline/reference.hpp"

namespace surfspline {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start)
{
    return std::chrono::duration<double>(Clock::now() - start).count();
}

double top_of_mesh(const TriangleMesh& mesh)
{
    double z = -std::numeric_limits<double>::infinity();
    for (const auto& v : mesh.vertices()) z = std::max(z, v.z());
    return z;
}

MethodResult finish(Eigen::VectorXd prediction, const std::optional<Eigen::VectorXd>& truth, double seconds)
{
    MethodResult r;
    if (truth) r.rmse = evaluate_rmse(prediction, *truth);
    r.prediction = std::move(prediction);
    r.seconds = seconds;
    return r;
}

// Observation locations as unit vectors for the spherical baseline.
std::vector<Vec3> observation_points(const TriangleMesh& mesh, const Observations& obs)
{
    std::vector<Vec3> pts;
    if (obs.mode == Observations::Mode::node) {
        for (int v : obs.nodes) pts.push_back(mesh.vertex(static_cast<std::size_t>(v)).normalized());
    } else {
        for (const auto& p : obs.points) pts.push_back(p.normalized());
    }
    return pts;
}

std::vector<Vec3> unit_vertices(const TriangleMesh& mesh)
{
    std::vector<Vec3> out;
    out.reserve(mesh.num_vertices());
    for (const auto& v : mesh.vertices()) out.push_back(v.normalized());
    return out;
}

} // namespace

double test_function(TestFunction f, const Vec2& chart, double z_max)
{
    return f == TestFunction::sphere ? f_sphere(chart[0], chart[1]) : f_cyl(chart[0], chart[1], z_max);
}

Eigen::VectorXd test_function_on_mesh(const TriangleMesh& mesh, TestFunction f)
{
    const ChartKind expected = f == TestFunction::sphere ? ChartKind::spherical : ChartKind::cylindrical;
    if (mesh.chart().kind != expected) throw ChartError("test function does not match the mesh chart");
    const double z_max = f == TestFunction::cylinder ? top_of_mesh(mesh) : 0.0;
    Eigen::VectorXd out(static_cast<Eigen::Index>(mesh.num_vertices()));
    for (std::size_t i = 0; i < mesh.num_vertices(); ++i) {
        out[static_cast<Eigen::Index>(i)] = test_function(f, mesh.chart().coords[i], z_max);
    }
    return out;
}

std::vector<int> design_nodes(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed, int restarts)
{
    const Design d = chart_design(mesh, n, seed, restarts);
    return snap_to_nodes(mesh, d.points, SnapDistance::chord);
}

double correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b)
{
    if (a.size() != b.size() || a.size() < 2) throw DimensionError("correlation needs two vectors of equal length >= 2");
    const Eigen::ArrayXd da = a.array() - a.mean();
    const Eigen::ArrayXd db = b.array() - b.mean();
    const double denom = std::sqrt((da * da).sum() * (db * db).sum());
    if (denom == 0.0) throw DimensionError("correlation is undefined for a constant vector");
    return (da * db).sum() / denom;
}

ComparisonReport compare_methods(const TriangleMesh& mesh, const Observations& obs,
                                 const std::optional<Eigen::VectorXd>& truth, const CompareOptions& options)
{
    validate_observations(obs, mesh);
    if (truth && truth->size() != static_cast<Eigen::Index>(mesh.num_vertices())) {
        throw DimensionError("truth vector length does not match the mesh");
    }
    ComparisonReport report;

    auto start = Clock::now();
    const SplineModel iso = SplineModel::build(mesh, MetricField::isotropic(), obs, options.spline);
    report.isotropic = finish(predict(iso, obs.values).values, truth, seconds_since(start));

    if (options.anisotropic) {
        start = Clock::now();
        FitResult fit = optimize(mesh, obs, options.fit);
        Observations fitted = obs;
        fitted.tau = fit.tau;
        const SplineModel model = SplineModel::build(mesh, MetricField::constant(fit.beta), fitted, options.spline);
        report.anisotropic = finish(predict(model, obs.values).values, truth, seconds_since(start));
        report.corr_isotropic_anisotropic = correlation(report.isotropic.prediction, report.anisotropic->prediction);
        report.fit = std::move(fit);
    }

    if (options.classical && mesh.chart().kind == ChartKind::spherical) {
        start = Clock::now();
        const TruncatedSphericalKernel kernel(options.kernel_order);
        const auto pts = observation_points(mesh, obs);
        const auto queries = unit_vertices(mesh);
        ClassicalPrediction c = classical_predict(kernel, pts, obs.values, queries, obs.tau);
        report.classical = finish(std::move(c.values), truth, seconds_since(start));
        report.corr_isotropic_classical = correlation(report.isotropic.prediction, report.classical->prediction);
        if (report.anisotropic) {
            report.corr_anisotropic_classical = correlation(report.anisotropic->prediction, report.classical->prediction);
        }
    }
    return report;
}

std::vector<BenchRow> bench_predictions(const TriangleMesh& mesh, std::span<const std::size_t> sizes,
                                        const BenchOptions& options)
{
    if (!(options.tau > 0.0)) throw ParameterError("benchmark needs tau > 0");
    if (options.repeats < 1) throw ParameterError("benchmark needs repeats >= 1");
    const bool classical = options.classical && mesh.chart().kind == ChartKind::spherical;
    const FemSystem fem = assemble_fem_system(mesh);
    const TruncatedSphericalKernel kernel(options.kernel_order);
    const auto queries = unit_vertices(mesh);

    std::vector<BenchRow> rows;
    for (std::size_t n : sizes) {
        const Design design = chart_design(mesh, n, options.seed + n);
        const TestFunction f = mesh.chart().kind == ChartKind::spherical ? TestFunction::sphere : TestFunction::cylinder;
        const double z_max = top_of_mesh(mesh);
        Eigen::VectorXd y(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) y[static_cast<Eigen::Index>(i)] = test_function(f, design.chart_coords[i], z_max);
        const Observations obs = Observations::at_points(design.points, y, options.tau);

        BenchRow row;
        row.n = n;
        row.fem_seconds = std::numeric_limits<double>::infinity();
        row.classical_seconds = classical ? std::numeric_limits<double>::infinity()
                                          : std::numeric_limits<double>::quiet_NaN();
        for (int r = 0; r < options.repeats; ++r) {
            auto start = Clock::now();
            const SplineModel model = SplineModel::build(fem, build_projection(mesh, obs), options.tau);
            const Prediction p = predict(model, y);
            row.fem_seconds = std::min(row.fem_seconds, seconds_since(start));
            if (!p.values.allFinite()) throw ModelError("benchmark prediction is not finite");
            if (classical) {
                start = Clock::now();
                const ClassicalPrediction c = classical_predict(kernel, design.points, y, queries, options.tau);
                row.classical_seconds = std::min(row.classical_seconds, seconds_since(start));
                if (!c.values.allFinite()) throw ModelError("benchmark baseline is not finite");
            }
        }
        rows.push_back(row);
    }
    return rows;
}

std::vector<std::size_t> log_spaced_sizes(std::size_t lo, std::size_t hi, std::size_t count)
{
    if (lo < 1 || hi < lo || count < 1) throw ParameterError("need 1 <= lo <= hi and count >= 1");
    std::set<std::size_t> sizes;
    if (count == 1) return {lo};
    const double a = std::log(static_cast<double>(lo));
    const double b = std::log(static_cast<double>(hi));
    for (std::size_t i = 0; i < count; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(count - 1);
        sizes.insert(static_cast<std::size_t>(std::llround(std::exp(a + t * (b - a)))));
    }
    return {sizes.begin(), sizes.end()};
}

} // namespace surfspline
