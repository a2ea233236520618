#include "surfspline/fit.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numbers>
#include <numeric>
#include <random>
#include <thread>

#include <Eigen/Eigenvalues>

#include "surfspline/errors.hpp"
#include "surfspline/fem.hpp"
#include "surfspline/likelihood.hpp"

namespace surfspline {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double reflect_unit(double x)
{
    double y = std::fmod(std::fabs(x), 2.0);
    if (y > 1.0) y = 2.0 - y;
    return y;
}

// Evaluates every candidate; NumericalError maps to -inf, anything else is rethrown.
std::vector<double> evaluate_all(const std::function<double(const Eigen::VectorXd&)>& objective,
                                 const std::vector<Eigen::VectorXd>& xs, int threads)
{
    std::vector<double> values(xs.size(), kNegInf);
    std::vector<std::exception_ptr> errors(xs.size());
    auto run = [&](std::size_t i) {
        try {
            const double v = objective(xs[i]);
            values[i] = std::isnan(v) ? kNegInf : v;
        } catch (const NumericalError&) {
            values[i] = kNegInf;
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };
    const auto workers = static_cast<std::size_t>(std::max(1, threads));
    if (workers == 1 || xs.size() < 2) {
        for (std::size_t i = 0; i < xs.size(); ++i) run(i);
    } else {
        std::vector<std::thread> pool;
        const std::size_t count = std::min(workers, xs.size());
        for (std::size_t t = 0; t < count; ++t) {
            pool.emplace_back([&, t] {
                for (std::size_t i = t; i < xs.size(); i += count) run(i);
            });
        }
        for (auto& th : pool) th.join();
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return values;
}

} // namespace

CmaesResult cmaes_maximize(const std::function<double(const Eigen::VectorXd&)>& objective, const Eigen::VectorXd& x0,
                           const Eigen::VectorXd& lower, const Eigen::VectorXd& upper, const CmaesOptions& options)
{
    const auto n = x0.size();
    if (n < 1 || lower.size() != n || upper.size() != n) throw DimensionError("CMA-ES bounds and start differ in size");
    if (!(upper.array() > lower.array()).all()) throw ParameterError("CMA-ES bounds must satisfy lower < upper");
    if (options.max_evaluations < 1) throw ParameterError("CMA-ES needs a positive evaluation budget");
    if (!(options.sigma0 > 0.0)) throw ParameterError("CMA-ES initial step must be positive");

    const double nd = static_cast<double>(n);
    const int lambda = options.population > 0 ? options.population : 4 + static_cast<int>(std::floor(3.0 * std::log(nd)));
    if (lambda < 4) throw ParameterError("CMA-ES population must be >= 4");
    const int mu = lambda / 2;

    Eigen::VectorXd w(mu);
    for (int i = 0; i < mu; ++i) w[i] = std::log(mu + 0.5) - std::log(i + 1.0);
    w /= w.sum();
    const double mu_eff = 1.0 / w.squaredNorm();

    const double c_sigma = (mu_eff + 2.0) / (nd + mu_eff + 5.0);
    const double d_sigma = 1.0 + 2.0 * std::max(0.0, std::sqrt((mu_eff - 1.0) / (nd + 1.0)) - 1.0) + c_sigma;
    const double c_c = (4.0 + mu_eff / nd) / (nd + 4.0 + 2.0 * mu_eff / nd);
    const double c_1 = 2.0 / ((nd + 1.3) * (nd + 1.3) + mu_eff);
    const double c_mu = std::min(1.0 - c_1, 2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((nd + 2.0) * (nd + 2.0) + mu_eff));
    const double chi_n = std::sqrt(nd) * (1.0 - 1.0 / (4.0 * nd) + 1.0 / (21.0 * nd * nd));

    const Eigen::VectorXd span = upper - lower;
    auto to_box = [&](const Eigen::VectorXd& u) -> Eigen::VectorXd { return lower + u.cwiseProduct(span); };
    auto wrapped = [&](const Eigen::VectorXd& u) { return objective(to_box(u)); };

    Eigen::VectorXd mean = ((x0 - lower).cwiseQuotient(span)).unaryExpr(&reflect_unit);
    double sigma = options.sigma0;
    Eigen::MatrixXd c = Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd b = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd d = Eigen::VectorXd::Ones(n);
    Eigen::VectorXd p_sigma = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd p_c = Eigen::VectorXd::Zero(n);

    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> normal;

    CmaesResult result;
    result.best_value = kNegInf;
    result.best_x = to_box(mean);

    // The start point is scored first so an infeasible start is reported early.
    {
        const auto v = evaluate_all(wrapped, {mean}, 1);
        result.evaluations = 1;
        result.best_value = v[0];
    }

    for (int gen = 1;; ++gen) {
        if (result.evaluations + lambda > options.max_evaluations) {
            result.reason = "evaluation budget exhausted";
            break;
        }
        std::vector<Eigen::VectorXd> xs(static_cast<std::size_t>(lambda));
        std::vector<Eigen::VectorXd> ys(static_cast<std::size_t>(lambda));
        for (int k = 0; k < lambda; ++k) {
            Eigen::VectorXd z(n);
            for (Eigen::Index i = 0; i < n; ++i) z[i] = normal(rng);
            Eigen::VectorXd x = (mean + sigma * (b * d.asDiagonal() * z)).unaryExpr(&reflect_unit);
            ys[static_cast<std::size_t>(k)] = (x - mean) / sigma;
            xs[static_cast<std::size_t>(k)] = std::move(x);
        }
        const std::vector<double> values = evaluate_all(wrapped, xs, options.threads);
        result.evaluations += lambda;

        std::vector<int> order(static_cast<std::size_t>(lambda));
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int bb) { return values[a] > values[bb]; });
        if (values[order[0]] == kNegInf) {
            throw ModelError("every candidate of generation " + std::to_string(gen) + " failed to evaluate");
        }
        if (values[order[0]] > result.best_value) {
            result.best_value = values[order[0]];
            result.best_x = to_box(xs[order[0]]);
        }
        result.history.push_back({gen, result.evaluations, result.best_value});

        Eigen::VectorXd y_w = Eigen::VectorXd::Zero(n);
        for (int i = 0; i < mu; ++i) y_w += w[i] * ys[order[i]];
        mean = (mean + sigma * y_w).unaryExpr(&reflect_unit);

        const Eigen::VectorXd c_inv_half_y = b * d.cwiseInverse().asDiagonal() * b.transpose() * y_w;
        p_sigma = (1.0 - c_sigma) * p_sigma + std::sqrt(c_sigma * (2.0 - c_sigma) * mu_eff) * c_inv_half_y;
        const double ps_norm = p_sigma.norm();
        const bool h_sigma =
            ps_norm / std::sqrt(1.0 - std::pow(1.0 - c_sigma, 2.0 * gen)) < (1.4 + 2.0 / (nd + 1.0)) * chi_n;
        p_c = (1.0 - c_c) * p_c + (h_sigma ? std::sqrt(c_c * (2.0 - c_c) * mu_eff) : 0.0) * y_w;

        Eigen::MatrixXd rank_mu = Eigen::MatrixXd::Zero(n, n);
        for (int i = 0; i < mu; ++i) rank_mu += w[i] * ys[order[i]] * ys[order[i]].transpose();
        c = (1.0 - c_1 - c_mu) * c + c_1 * (p_c * p_c.transpose() + (h_sigma ? 0.0 : c_c * (2.0 - c_c)) * c) +
            c_mu * rank_mu;
        c = 0.5 * (c + c.transpose()).eval();
        sigma *= std::exp((c_sigma / d_sigma) * (ps_norm / chi_n - 1.0));

        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c);
        b = eig.eigenvectors();
        d = eig.eigenvalues().cwiseMax(1e-300).cwiseSqrt();

        const double worst_finite = [&] {
            double worst = values[order[0]];
            for (double v : values) {
                if (v != kNegInf) worst = std::min(worst, v);
            }
            return worst;
        }();
        if (values[order[0]] - worst_finite < options.tol_fun && worst_finite != kNegInf) {
            result.reason = "objective spread below tolerance";
            break;
        }
        if (sigma * d.maxCoeff() < options.tol_x) {
            result.reason = "step size below tolerance";
            break;
        }
    }
    return result;
}

void FitConfig::validate() const
{
    if (!(rho_min > 0.0) || !(rho_max > rho_min)) throw ParameterError("need 0 < rho_min < rho_max");
    if (initial.rho1 < rho_min || initial.rho1 > rho_max || initial.rho2 < rho_min || initial.rho2 > rho_max) {
        throw ParameterError("initial rho lies outside [rho_min, rho_max]");
    }
    if (!std::isfinite(initial.delta)) throw ParameterError("initial delta must be finite");
    if (estimate_tau && (!(tau_min > 0.0) || !(tau_max > tau_min))) throw ParameterError("need 0 < tau_min < tau_max");
    if (cmaes.population != 0 && cmaes.population < 4) throw ParameterError("population must be >= 4");
    if (cmaes.max_evaluations < 1) throw ParameterError("max_evaluations must be positive");
    if (!(cmaes.sigma0 > 0.0)) throw ParameterError("sigma0 must be positive");
    if (cmaes.threads < 1) throw ParameterError("threads must be >= 1");
}

FitResult maximize_beta(const BetaObjective& objective, const FitConfig& config, double tau)
{
    config.validate();
    constexpr double half_pi = std::numbers::pi / 2.0;
    const int dim = config.estimate_tau ? 4 : 3;
    Eigen::VectorXd lower(dim), upper(dim), x0(dim);
    lower.head<3>() << -half_pi, std::log(config.rho_min), std::log(config.rho_min);
    upper.head<3>() << half_pi, std::log(config.rho_max), std::log(config.rho_max);
    // Start inside the open end of the delta interval.
    double delta0 = std::remainder(config.initial.delta, std::numbers::pi);
    if (delta0 <= -half_pi) delta0 += std::numbers::pi;
    x0.head<3>() << delta0, std::log(config.initial.rho1), std::log(config.initial.rho2);
    if (config.estimate_tau) {
        lower[3] = std::log(config.tau_min);
        upper[3] = std::log(config.tau_max);
        x0[3] = std::log(std::clamp(tau > 0.0 ? tau : std::sqrt(config.tau_min * config.tau_max), config.tau_min,
                                    config.tau_max));
    }

    auto decode = [&](const Eigen::VectorXd& x, AnisotropyParams& beta, double& t) {
        beta.delta = x[0] <= -half_pi ? half_pi : x[0];
        beta.rho1 = std::clamp(std::exp(x[1]), config.rho_min, config.rho_max);
        beta.rho2 = std::clamp(std::exp(x[2]), config.rho_min, config.rho_max);
        t = config.estimate_tau ? std::clamp(std::exp(x[3]), config.tau_min, config.tau_max) : tau;
    };
    auto f = [&](const Eigen::VectorXd& x) {
        AnisotropyParams beta;
        double t = 0.0;
        decode(x, beta, t);
        return objective(beta, t);
    };

    const CmaesResult r = cmaes_maximize(f, x0, lower, upper, config.cmaes);
    FitResult out;
    decode(r.best_x, out.beta, out.tau);
    out.loglik = r.best_value;
    out.evaluations = r.evaluations;
    out.reason = r.reason;
    out.history = r.history;
    return out;
}

double beta_loglik(const TriangleMesh& mesh, const Observations& obs, const ProjectionMatrix& projection,
                   const AnisotropyParams& beta, double tau, const SymbolicCache& cache)
{
    SplineOptions options;
    options.symbolic = cache;
    const SplineModel model =
        SplineModel::build(assemble_fem_system(mesh, MetricField::constant(beta)), projection, tau, options);
    return loglik(model, obs.values).loglik;
}

FitResult optimize(const TriangleMesh& mesh, const Observations& obs, const FitConfig& config)
{
    config.validate();
    validate_observations(obs, mesh);
    if (!mesh.has_chart()) throw ChartError("fitting an anisotropic metric needs chart coordinates");
    if (config.estimate_tau && obs.mode == Observations::Mode::node && obs.tau == 0.0) {
        throw ParameterError("estimating tau needs a smoothing model (tau > 0 start)");
    }
    const ProjectionMatrix projection = build_projection(mesh, obs);

    // Symbolic analyses from the start point are shared by every candidate.
    SymbolicCache cache;
    {
        SplineOptions options;
        const SplineModel model = SplineModel::build(assemble_fem_system(mesh, MetricField::constant(config.initial)),
                                                     projection, obs.tau, options);
        (void)model.log_det_q_alpha();
        cache = model.symbolic_cache();
    }

    auto objective = [&](const AnisotropyParams& beta, double tau) {
        return beta_loglik(mesh, obs, projection, beta, tau, cache);
    };
    return maximize_beta(objective, config, obs.tau);
}

double evaluate_rmse(const Eigen::VectorXd& prediction, const Eigen::VectorXd& truth)
{
    if (prediction.size() != truth.size()) throw DimensionError("prediction and truth lengths differ");
    if (prediction.size() == 0) throw DimensionError("empty prediction");
    return std::sqrt((prediction - truth).squaredNorm() / static_cast<double>(truth.size()));
}

double evaluate_rmse(const Prediction& prediction, const Eigen::VectorXd& truth)
{
    return evaluate_rmse(prediction.values, truth);
}

} // namespace surfspline
