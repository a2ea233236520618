#include "cli.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "surfspline/design.hpp"
#include "surfspline/errors.hpp"
#include "surfspline/experiment.hpp"
#include "surfspline/fit.hpp"
#include "surfspline/io.hpp"
#include "surfspline/spline.hpp"

namespace surfspline::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const std::map<std::string, TestFunction> kFunctions = {{"sphere", TestFunction::sphere},
                                                        {"cylinder", TestFunction::cylinder}};

struct MeshSpec {
    std::string off;
    std::string chart;
    bool sphere = false;
    int refinement = 3;
    std::optional<double> grid_step;
    bool cylinder = false;
    double radius = 1.0;
    double z_min = 0.0;
    double z_max = 10.0;
    int n_theta = 70;
    int n_z = 115;
};

struct Common {
    MeshSpec mesh;
    std::string out_dir = ".";
    std::uint64_t seed = 1;
    int threads = 1;
};

struct ModelSpec {
    std::string obs;
    double tau = 0.0;
    std::optional<double> alpha;
    std::vector<double> beta;
    std::string metric_file;
    std::optional<TestFunction> truth;
};

struct FitSpec {
    std::vector<double> initial;
    bool estimate_tau = false;
    FitConfig config;
};

void add_mesh_options(CLI::App* cmd, MeshSpec& m)
{
    cmd->add_option("--mesh", m.off, "OFF mesh file")->group("Mesh");
    cmd->add_option("--chart", m.chart, "chart sidecar for --mesh")->group("Mesh");
    cmd->add_flag("--sphere", m.sphere, "icosphere generator")->group("Mesh");
    cmd->add_option("--refinement", m.refinement, "icosphere subdivision level")->capture_default_str()->group("Mesh");
    cmd->add_option("--grid-step", m.grid_step, "latitude-longitude sphere with this step in degrees")->group("Mesh");
    cmd->add_flag("--cylinder", m.cylinder, "open cylinder generator")->group("Mesh");
    cmd->add_option("--radius", m.radius, "cylinder radius")->capture_default_str()->group("Mesh");
    cmd->add_option("--z-min", m.z_min, "cylinder bottom")->capture_default_str()->group("Mesh");
    cmd->add_option("--z-max", m.z_max, "cylinder top")->capture_default_str()->group("Mesh");
    cmd->add_option("--ntheta", m.n_theta, "cylinder nodes per ring")->capture_default_str()->group("Mesh");
    cmd->add_option("--nz", m.n_z, "cylinder rings")->capture_default_str()->group("Mesh");
}

void add_common(CLI::App* cmd, Common& c)
{
    add_mesh_options(cmd, c.mesh);
    cmd->add_option("--out", c.out_dir, "output directory")->capture_default_str();
    cmd->add_option("--seed", c.seed, "seed for every random choice")->capture_default_str();
    cmd->add_option("--threads", c.threads, "worker thread cap")->capture_default_str()->check(CLI::PositiveNumber);
}

void add_model_options(CLI::App* cmd, ModelSpec& s, bool obs_required = true)
{
    auto* obs = cmd->add_option("--obs", s.obs, "observation CSV");
    if (obs_required) obs->required();
    cmd->add_option("--tau", s.tau, "observation noise; 0 interpolates node observations")->capture_default_str();
    cmd->add_option("--alpha", s.alpha, "fixed alpha instead of the spectral choice");
    cmd->add_option("--beta", s.beta, "constant anisotropy delta,rho1,rho2")->delimiter(',')->expected(3);
    cmd->add_option("--metric-file", s.metric_file, "per-node anisotropy CSV")->excludes("--beta");
    cmd->add_option("--truth", s.truth, "analytic truth for errors: sphere | cylinder")
        ->transform(CLI::CheckedTransformer(kFunctions, CLI::ignore_case));
}

void add_fit_options(CLI::App* cmd, FitSpec& f)
{
    FitConfig& c = f.config;
    cmd->add_option("--initial", f.initial, "starting delta,rho1,rho2")->delimiter(',')->expected(3);
    cmd->add_flag("--estimate-tau", f.estimate_tau, "also fit tau (free-point observations only)");
    cmd->add_option("--rho-min", c.rho_min, "lower bound on rho1, rho2")->capture_default_str();
    cmd->add_option("--rho-max", c.rho_max, "upper bound on rho1, rho2")->capture_default_str();
    cmd->add_option("--tau-min", c.tau_min, "lower bound on tau")->capture_default_str();
    cmd->add_option("--tau-max", c.tau_max, "upper bound on tau")->capture_default_str();
    cmd->add_option("--max-evals", c.cmaes.max_evaluations, "likelihood evaluation budget")->capture_default_str();
    cmd->add_option("--sigma0", c.cmaes.sigma0, "initial CMA-ES step in the unit box")->capture_default_str();
    cmd->add_option("--population", c.cmaes.population, "CMA-ES population, 0 for the default")->capture_default_str();
}

TriangleMesh make_mesh(const MeshSpec& m)
{
    const int sources = int(!m.off.empty()) + int(m.sphere) + int(m.grid_step.has_value()) + int(m.cylinder);
    if (sources != 1) throw ParameterError("choose exactly one mesh source: --mesh, --sphere, --grid-step or --cylinder");
    if (!m.off.empty()) {
        return load_mesh(m.off, m.chart.empty() ? std::nullopt : std::optional<fs::path>(m.chart));
    }
    if (!m.chart.empty()) throw ParameterError("--chart only applies to --mesh");
    if (m.sphere) return generate_sphere_mesh(m.refinement);
    if (m.grid_step) return generate_sphere_grid_mesh(*m.grid_step);
    return generate_cylinder_mesh(m.radius, m.z_min, m.z_max, m.n_theta, m.n_z);
}

AnisotropyParams as_params(const std::vector<double>& v)
{
    return {v[0], v[1], v[2]};
}

MetricField make_metric(const ModelSpec& s, const TriangleMesh& mesh)
{
    if (!s.metric_file.empty()) return read_metric(s.metric_file, mesh.num_vertices());
    if (!s.beta.empty()) return MetricField::constant(as_params(s.beta));
    return MetricField::isotropic();
}

Observations load_observations(const ModelSpec& s, const TriangleMesh& mesh)
{
    Observations obs = read_observations(s.obs);
    obs.tau = s.tau;
    validate_observations(obs, mesh);
    return obs;
}

FitConfig make_fit_config(const FitSpec& f, const Common& c)
{
    FitConfig config = f.config;
    if (!f.initial.empty()) config.initial = as_params(f.initial);
    config.estimate_tau = f.estimate_tau;
    config.cmaes.seed = c.seed;
    config.cmaes.threads = c.threads;
    config.validate();
    return config;
}

fs::path output_dir(const Common& c)
{
    const fs::path dir(c.out_dir);
    fs::create_directories(dir);
    return dir;
}

void write_json(const json& j, const fs::path& path)
{
    std::ofstream f(path);
    if (!f) throw LoadError("cannot write " + path.string(), 0);
    f << j.dump(2) << '\n';
}

std::string format(double x)
{
    if (std::isnan(x)) return "nan";
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

const char* chart_name(const TriangleMesh& mesh)
{
    if (!mesh.has_chart()) return "none";
    return mesh.chart().kind == ChartKind::spherical ? "spherical" : "cylindrical";
}

json beta_json(const AnisotropyParams& b)
{
    return {{"delta", b.delta}, {"rho1", b.rho1}, {"rho2", b.rho2}};
}

json fit_json(const FitResult& r)
{
    json history = json::array();
    for (const auto& g : r.history) {
        history.push_back({{"generation", g.generation}, {"evaluations", g.evaluations}, {"best", g.best}});
    }
    return {{"beta", beta_json(r.beta)}, {"tau", r.tau},         {"loglik", r.loglik},
            {"evaluations", r.evaluations}, {"reason", r.reason}, {"history", history}};
}

int mesh_gen(const Common& c, std::ostream& out)
{
    const TriangleMesh mesh = make_mesh(c.mesh);
    const fs::path dir = output_dir(c);
    write_off(mesh, dir / "mesh.off");
    if (mesh.has_chart()) write_chart(mesh, dir / "mesh.chart");
    const json summary = {{"vertices", mesh.num_vertices()},
                          {"edges", mesh.num_edges()},
                          {"faces", mesh.num_triangles()},
                          {"euler_characteristic", mesh.euler_characteristic()},
                          {"area", mesh.total_area()},
                          {"chart", chart_name(mesh)}};
    write_json(summary, dir / "summary.json");
    out << summary.dump(2) << '\n';
    return ok;
}

struct DesignSpec {
    std::size_t n = 10;
    int restarts = 100;
    bool points = false;
    std::optional<TestFunction> function;
};

int design(const Common& c, const DesignSpec& d, std::ostream& out)
{
    const TriangleMesh mesh = make_mesh(c.mesh);
    if (!mesh.has_chart()) throw ChartError("designs are drawn in chart space; the mesh has no chart");
    const TestFunction f = d.function.value_or(
        mesh.chart().kind == ChartKind::spherical ? TestFunction::sphere : TestFunction::cylinder);
    const Eigen::VectorXd truth = test_function_on_mesh(mesh, f);
    Observations obs;
    if (d.points) {
        const Design design = chart_design(mesh, d.n, c.seed, d.restarts);
        double z_max = 0.0;
        for (const auto& v : mesh.vertices()) z_max = std::max(z_max, v.z());
        Eigen::VectorXd y(static_cast<Eigen::Index>(d.n));
        for (std::size_t i = 0; i < d.n; ++i) {
            y[static_cast<Eigen::Index>(i)] = test_function(f, design.chart_coords[i], z_max);
        }
        obs = Observations::at_points(design.points, y, 0.0);
    } else {
        const std::vector<int> nodes = design_nodes(mesh, d.n, c.seed, d.restarts);
        Eigen::VectorXd y(static_cast<Eigen::Index>(d.n));
        for (std::size_t i = 0; i < d.n; ++i) y[static_cast<Eigen::Index>(i)] = truth[nodes[i]];
        obs = Observations::at_nodes(nodes, y);
    }
    const fs::path dir = output_dir(c);
    write_observations(obs, dir / "observations.csv");
    out << "wrote " << obs.size() << (d.points ? " free-point" : " node") << " observations to "
        << (dir / "observations.csv").string() << '\n';
    return ok;
}

int predict_cmd(const Common& c, const ModelSpec& s, std::ostream& out)
{
    const TriangleMesh mesh = make_mesh(c.mesh);
    const Observations obs = load_observations(s, mesh);
    SplineOptions options;
    options.alpha = s.alpha;
    const SplineModel model = SplineModel::build(mesh, make_metric(s, mesh), obs, options);
    const Prediction p = predict(model, obs.values);

    json diag = {{"vertices", mesh.num_vertices()},
                 {"observations", obs.size()},
                 {"mode", obs.mode == Observations::Mode::node ? "node" : "free_point"},
                 {"tau", obs.tau},
                 {"alpha", p.diagnostics.alpha},
                 {"lambda1", p.diagnostics.lambda1},
                 {"lambda_max", p.diagnostics.lambda_max},
                 {"trend", p.trend},
                 {"solve_residual", p.diagnostics.solve_residual}};
    if (s.truth) diag["rmse"] = evaluate_rmse(p, test_function_on_mesh(mesh, *s.truth));

    const fs::path dir = output_dir(c);
    write_predictions(p.values, dir / "predictions.csv");
    write_json(diag, dir / "diagnostics.json");
    out << diag.dump(2) << '\n';
    return ok;
}

int fit_cmd(const Common& c, const ModelSpec& s, const FitSpec& f, std::ostream& out)
{
    const TriangleMesh mesh = make_mesh(c.mesh);
    const FitConfig config = make_fit_config(f, c);
    const Observations obs = load_observations(s, mesh);
    const FitResult r = optimize(mesh, obs, config);

    Observations fitted = obs;
    fitted.tau = r.tau;
    SplineOptions options;
    options.alpha = s.alpha;
    const Prediction p = predict(SplineModel::build(mesh, MetricField::constant(r.beta), fitted, options), obs.values);

    json report = fit_json(r);
    if (s.truth) {
        const Eigen::VectorXd truth = test_function_on_mesh(mesh, *s.truth);
        const Prediction iso = predict(SplineModel::build(mesh, MetricField::isotropic(), obs, options), obs.values);
        report["rmse_fitted"] = evaluate_rmse(p, truth);
        report["rmse_isotropic"] = evaluate_rmse(iso, truth);
    }
    const fs::path dir = output_dir(c);
    write_predictions(p.values, dir / "predictions.csv");
    write_json(report, dir / "fit.json");
    json brief = report;
    brief.erase("history");
    out << brief.dump(2) << '\n';
    return ok;
}

struct CompareSpec {
    bool no_anisotropic = false;
    bool no_classical = false;
    int kernel_order = 40;
};

int compare_cmd(const Common& c, const ModelSpec& s, const FitSpec& f, const CompareSpec& cs, std::ostream& out)
{
    const TriangleMesh mesh = make_mesh(c.mesh);
    CompareOptions options;
    options.anisotropic = !cs.no_anisotropic;
    options.classical = !cs.no_classical;
    options.kernel_order = cs.kernel_order;
    if (options.anisotropic) options.fit = make_fit_config(f, c);
    options.spline.alpha = s.alpha;
    const Observations obs = load_observations(s, mesh);
    std::optional<Eigen::VectorXd> truth;
    if (s.truth) truth = test_function_on_mesh(mesh, *s.truth);
    if (options.classical && !(mesh.has_chart() && mesh.chart().kind == ChartKind::spherical)) {
        throw ChartError("the classical baseline needs a spherical mesh; pass --no-classical");
    }
    const ComparisonReport r = compare_methods(mesh, obs, truth, options);

    json report = {{"vertices", mesh.num_vertices()}, {"observations", obs.size()}, {"tau", obs.tau}};
    json rmse = json::object();
    json corr = json::object();
    if (r.isotropic.rmse) rmse["fem_isotropic"] = *r.isotropic.rmse;
    if (r.anisotropic && r.anisotropic->rmse) rmse["fem_anisotropic"] = *r.anisotropic->rmse;
    if (r.classical && r.classical->rmse) rmse["classical"] = *r.classical->rmse;
    if (r.corr_isotropic_classical) corr["fem_isotropic_classical"] = *r.corr_isotropic_classical;
    if (r.corr_isotropic_anisotropic) corr["fem_isotropic_fem_anisotropic"] = *r.corr_isotropic_anisotropic;
    if (r.corr_anisotropic_classical) corr["fem_anisotropic_classical"] = *r.corr_anisotropic_classical;
    if (truth) report["rmse"] = rmse;
    report["correlation"] = corr;
    if (r.fit) report["fit"] = fit_json(*r.fit);

    const fs::path dir = output_dir(c);
    std::ofstream nodes(dir / "compare_nodes.csv");
    if (!nodes) throw LoadError("cannot write " + (dir / "compare_nodes.csv").string(), 0);
    nodes << "vertex_index,fem_isotropic";
    if (r.anisotropic) nodes << ",fem_anisotropic";
    if (r.classical) nodes << ",classical";
    if (truth) nodes << ",truth";
    nodes << '\n';
    for (Eigen::Index i = 0; i < r.isotropic.prediction.size(); ++i) {
        nodes << i << ',' << format(r.isotropic.prediction[i]);
        if (r.anisotropic) nodes << ',' << format(r.anisotropic->prediction[i]);
        if (r.classical) nodes << ',' << format(r.classical->prediction[i]);
        if (truth) nodes << ',' << format((*truth)[i]);
        nodes << '\n';
    }
    write_json(report, dir / "compare.json");
    json brief = report;
    if (brief.contains("fit")) brief["fit"].erase("history");
    out << brief.dump(2) << '\n';
    return ok;
}

struct BenchSpec {
    std::vector<std::size_t> sizes;
    std::size_t n_min = 10;
    std::size_t n_max = 2000;
    std::size_t count = 12;
    BenchOptions options;
    bool no_classical = false;
};

int bench_cmd(const Common& c, const BenchSpec& b, std::ostream& out)
{
    const TriangleMesh mesh = make_mesh(c.mesh);
    const std::vector<std::size_t> sizes = b.sizes.empty() ? log_spaced_sizes(b.n_min, b.n_max, b.count) : b.sizes;
    BenchOptions options = b.options;
    options.seed = c.seed;
    options.classical = !b.no_classical;
    const std::vector<BenchRow> rows = bench_predictions(mesh, sizes, options);

    const fs::path dir = output_dir(c);
    std::ofstream csv(dir / "bench.csv");
    if (!csv) throw LoadError("cannot write " + (dir / "bench.csv").string(), 0);
    csv << "n,fem_seconds,classical_seconds\n";
    out << "n,fem_seconds,classical_seconds\n";
    for (const BenchRow& r : rows) {
        const std::string line = std::to_string(r.n) + ',' + format(r.fem_seconds) + ',' + format(r.classical_seconds);
        csv << line << '\n';
        out << line << '\n';
    }
    return ok;
}

} // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Splines on triangulated surfaces through finite-element Gaussian Markov random fields", "surfspline"};
    app.require_subcommand(1);
    app.set_config("--config", "", "TOML file with default option values; command-line flags win");
    app.allow_config_extras(CLI::config_extras_mode::error);

    Common common;
    ModelSpec model;
    FitSpec fit;
    DesignSpec design_spec;
    CompareSpec compare_spec;
    BenchSpec bench_spec;

    auto* mesh_gen_cmd = app.add_subcommand("mesh-gen", "generate a mesh; writes mesh.off, mesh.chart, summary.json");
    add_common(mesh_gen_cmd, common);

    auto* design_cmd = app.add_subcommand("design", "maximin chart-space design; writes observations.csv");
    add_common(design_cmd, common);
    design_cmd->add_option("--n", design_spec.n, "number of observations")->required()->check(CLI::PositiveNumber);
    design_cmd->add_option("--restarts", design_spec.restarts, "random Latin hypercubes to draw")->capture_default_str();
    design_cmd->add_flag("--points", design_spec.points, "keep free points instead of snapping to nodes");
    design_cmd->add_option("--function", design_spec.function, "test function: sphere | cylinder (default from chart)")
        ->transform(CLI::CheckedTransformer(kFunctions, CLI::ignore_case));

    auto* predict_sub = app.add_subcommand("predict", "spline prediction; writes predictions.csv, diagnostics.json");
    add_common(predict_sub, common);
    add_model_options(predict_sub, model);

    auto* fit_sub = app.add_subcommand("fit", "maximum-likelihood constant anisotropy; writes fit.json, predictions.csv");
    add_common(fit_sub, common);
    add_model_options(fit_sub, model);
    add_fit_options(fit_sub, fit);

    auto* compare_sub = app.add_subcommand("compare", "FEM isotropic, fitted anisotropic and classical kernel side by side");
    add_common(compare_sub, common);
    add_model_options(compare_sub, model);
    add_fit_options(compare_sub, fit);
    compare_sub->add_flag("--no-anisotropic", compare_spec.no_anisotropic, "skip the anisotropy fit");
    compare_sub->add_flag("--no-classical", compare_spec.no_classical, "skip the spherical-harmonics baseline");
    compare_sub->add_option("--kernel-order", compare_spec.kernel_order, "harmonic truncation degree")->capture_default_str();

    auto* bench_sub = app.add_subcommand("bench", "prediction timings over observation counts; writes bench.csv");
    add_common(bench_sub, common);
    bench_sub->add_option("--sizes", bench_spec.sizes, "explicit observation counts")->delimiter(',');
    bench_sub->add_option("--n-min", bench_spec.n_min, "smallest count of the log-spaced sweep")->capture_default_str();
    bench_sub->add_option("--n-max", bench_spec.n_max, "largest count of the log-spaced sweep")->capture_default_str();
    bench_sub->add_option("--count", bench_spec.count, "points in the log-spaced sweep")->capture_default_str();
    bench_sub->add_option("--tau", bench_spec.options.tau, "observation noise for both methods")->capture_default_str();
    bench_sub->add_option("--repeats", bench_spec.options.repeats, "timings per size; the fastest is kept")
        ->capture_default_str();
    bench_sub->add_option("--kernel-order", bench_spec.options.kernel_order, "harmonic truncation degree")
        ->capture_default_str();
    bench_sub->add_flag("--no-classical", bench_spec.no_classical, "time the FEM path only");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? ok : input_error;
    }

    try {
        if (*mesh_gen_cmd) return mesh_gen(common, out);
        if (*design_cmd) return design(common, design_spec, out);
        if (*predict_sub) return predict_cmd(common, model, out);
        if (*fit_sub) return fit_cmd(common, model, fit, out);
        if (*compare_sub) return compare_cmd(common, model, fit, compare_spec, out);
        return bench_cmd(common, bench_spec, out);
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        return input_error;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return input_error;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return numerical_failure;
    } catch (const std::exception& e) {
        err << "numerical failure: " << e.what() << '\n';
        return numerical_failure;
    }
}

} // namespace surfspline::cli
