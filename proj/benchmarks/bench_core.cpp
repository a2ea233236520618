#include <vector>

#include <benchmark/benchmark.h>

#include "surfspline/design.hpp"
#include "surfspline/experiment.hpp"
#include "surfspline/fem.hpp"
#include "surfspline/fit.hpp"
#include "surfspline/likelihood.hpp"
#include "surfspline/reference.hpp"
#include "surfspline/spline.hpp"

using namespace surfspline;

namespace {

// 3.15 degree grid, 6386 nodes: the mesh of the prediction-cost sweep.
const TriangleMesh& grid_mesh()
{
    static const TriangleMesh mesh = generate_sphere_grid_mesh(3.15);
    return mesh;
}

Observations smoothing_design(const TriangleMesh& mesh, std::size_t n)
{
    const Design d = chart_design(mesh, n, n, 20);
    Eigen::VectorXd y(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) y[static_cast<Eigen::Index>(i)] = test_function(TestFunction::sphere, d.chart_coords[i], 0.0);
    return Observations::at_points(d.points, y, 0.01);
}

void BM_AssembleIsotropic(benchmark::State& state)
{
    const TriangleMesh mesh = generate_sphere_mesh(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(assemble_fem_system(mesh));
    state.counters["m"] = static_cast<double>(mesh.num_vertices());
}
BENCHMARK(BM_AssembleIsotropic)->DenseRange(3, 5)->Unit(benchmark::kMillisecond);

void BM_AssembleAnisotropic(benchmark::State& state)
{
    const TriangleMesh mesh = generate_sphere_mesh(static_cast<int>(state.range(0)));
    const MetricField field = MetricField::constant({0.4, 3.0, 0.5});
    for (auto _ : state) benchmark::DoNotOptimize(assemble_fem_system(mesh, field));
}
BENCHMARK(BM_AssembleAnisotropic)->DenseRange(3, 5)->Unit(benchmark::kMillisecond);

void BM_FemPredict(benchmark::State& state)
{
    const TriangleMesh& mesh = grid_mesh();
    const FemSystem fem = assemble_fem_system(mesh);
    const Observations obs = smoothing_design(mesh, static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        const SplineModel model = SplineModel::build(fem, build_projection(mesh, obs), obs.tau);
        benchmark::DoNotOptimize(predict(model, obs.values));
    }
}
BENCHMARK(BM_FemPredict)->RangeMultiplier(4)->Range(16, 1024)->Unit(benchmark::kMillisecond);

void BM_ClassicalPredict(benchmark::State& state)
{
    const TriangleMesh& mesh = grid_mesh();
    const Observations obs = smoothing_design(mesh, static_cast<std::size_t>(state.range(0)));
    std::vector<Vec3> queries;
    for (const auto& v : mesh.vertices()) queries.push_back(v.normalized());
    const TruncatedSphericalKernel kernel(40);
    for (auto _ : state) benchmark::DoNotOptimize(classical_predict(kernel, obs.points, obs.values, queries, obs.tau));
}
BENCHMARK(BM_ClassicalPredict)->RangeMultiplier(4)->Range(16, 1024)->Unit(benchmark::kMillisecond);

void BM_LoglikEvaluation(benchmark::State& state)
{
    const TriangleMesh mesh = generate_sphere_mesh(4);
    const std::vector<int> nodes = design_nodes(mesh, 10, 1, 20);
    const Eigen::VectorXd truth = test_function_on_mesh(mesh, TestFunction::sphere);
    Eigen::VectorXd y(10);
    for (int i = 0; i < 10; ++i) y[i] = truth[nodes[static_cast<std::size_t>(i)]];
    const Observations obs = Observations::at_nodes(nodes, y);
    const ProjectionMatrix projection = build_projection(mesh, obs);
    for (auto _ : state) benchmark::DoNotOptimize(beta_loglik(mesh, obs, projection, {0.3, 2.0, 0.7}, 0.0));
}
BENCHMARK(BM_LoglikEvaluation)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
