#include "surfspline/likelihood.hpp"

#include <chrono>
#include <cmath>
#include <numbers>

#include "surfspline/errors.hpp"

namespace surfspline {

namespace {

// (A Q_alpha^{-1} A^T)^{-1} x as the Schur complement of the unobserved block.
Eigen::VectorXd schur_apply(const SplineModel& model, const Eigen::VectorXd& x)
{
    const auto& prec = model.precision();
    const auto& obs = model.observed();
    const auto& unobs = model.unobserved();
    const auto n = static_cast<Eigen::Index>(obs.size());
    const auto nu = static_cast<Eigen::Index>(unobs.size());

    Eigen::VectorXd v_obs(n), v_unobs(nu);
    for (Eigen::Index k = 0; k < n; ++k) v_obs[k] = prec.v[obs[static_cast<std::size_t>(k)]];
    for (Eigen::Index k = 0; k < nu; ++k) v_unobs[k] = prec.v[unobs[static_cast<std::size_t>(k)]];

    const double vx = v_obs.dot(x);
    const Eigen::VectorXd rhs = model.coupling() * x + prec.inv_alpha * vx * v_unobs;
    const Eigen::VectorXd w = model.factor().solve(rhs);

    Eigen::VectorXd out = model.observed_block() * x + prec.inv_alpha * vx * v_obs;
    out -= model.coupling().transpose() * w + prec.inv_alpha * v_unobs.dot(w) * v_obs;
    return out;
}

struct Trend {
    double a_y;
    double a_c;
};

Trend checked_trend(double a_y, double a_c)
{
    if (!std::isfinite(a_c) || std::fabs(a_c) <= 1e-12) {
        throw DegenerateLikelihoodError("trend denominator a(A phi0) vanishes", a_c);
    }
    if (std::fabs(1.0 - a_c) <= 1e-12) {
        throw DegenerateLikelihoodError("log|1 - a(A phi0)| is undefined", a_c);
    }
    return {a_y, a_c};
}

void finish(LikelihoodReport& r, const SplineModel& model, const Trend& t, double quad, double logdet,
            std::chrono::steady_clock::time_point start)
{
    const double one_minus = 1.0 - t.a_c;
    if (one_minus < 0.0) r.warnings.emplace_back("1 - a(A phi0) is negative; its absolute value is used");
    r.n = static_cast<long>(model.num_observations());
    r.trend_numerator = t.a_y;
    r.trend_denominator = t.a_c;
    r.trend = t.a_y / t.a_c;
    r.quad_term = quad - model.precision().inv_alpha * t.a_y * t.a_y / t.a_c;
    r.logdet_term = logdet + std::log(std::fabs(one_minus));
    r.loglik = -0.5 * (static_cast<double>(r.n) * std::log(2.0 * std::numbers::pi) + r.quad_term + r.logdet_term);
    if (!std::isfinite(r.loglik)) throw DegenerateLikelihoodError("log-likelihood is not finite", r.loglik);
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

} // namespace

LikelihoodReport loglik_interp(const SplineModel& model, const Eigen::VectorXd& y)
{
    const auto start = std::chrono::steady_clock::now();
    if (model.scenario() != Scenario::interpolation) throw ParameterError("loglik_interp needs the interpolation scenario");
    if (y.size() != model.num_observations()) throw DimensionError("data length does not match observation count");

    const Eigen::VectorXd c = model.projection().matrix * model.fem().phi0;
    const Eigen::VectorXd vy = schur_apply(model, y);
    const Eigen::VectorXd vc = schur_apply(model, c);
    const double alpha = model.alpha();
    const Trend t = checked_trend(alpha * c.dot(vy), alpha * c.dot(vc));

    // log det K = log|[Q_alpha]_UU| - log|Q_alpha| + log|1 - a(A phi0)|.
    const double logdet = model.factor().log_determinant() - model.log_det_q_alpha();
    LikelihoodReport r;
    finish(r, model, t, y.dot(vy), logdet, start);
    return r;
}

LikelihoodReport loglik_smooth(const SplineModel& model, const Eigen::VectorXd& y)
{
    const auto start = std::chrono::steady_clock::now();
    if (model.scenario() != Scenario::smoothing) throw ParameterError("loglik_smooth needs tau > 0");
    if (y.size() != model.num_observations()) throw DimensionError("data length does not match observation count");

    const auto& a = model.projection().matrix;
    const double tau2 = model.tau() * model.tau();
    auto apply = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
        const Eigen::VectorXd w = model.factor().solve(Eigen::VectorXd(a.transpose() * x));
        return (x - a * w) / tau2;
    };
    const Eigen::VectorXd c = a * model.fem().phi0;
    const Eigen::VectorXd vy = apply(y);
    const Eigen::VectorXd vc = apply(c);
    const double alpha = model.alpha();
    const Trend t = checked_trend(alpha * c.dot(vy), alpha * c.dot(vc));

    const double n = static_cast<double>(model.num_observations());
    const double m = static_cast<double>(model.num_nodes());
    const double logdet =
        (n - m) * std::log(tau2) - model.log_det_q_alpha() + model.factor().log_determinant();
    LikelihoodReport r;
    finish(r, model, t, y.dot(vy), logdet, start);
    return r;
}

LikelihoodReport loglik(const SplineModel& model, const Eigen::VectorXd& y)
{
    return model.scenario() == Scenario::interpolation ? loglik_interp(model, y) : loglik_smooth(model, y);
}

double trend_estimate(const SplineModel& model, const Eigen::VectorXd& y)
{
    const Eigen::VectorXd v = model.fem().mass_phi0();
    const Eigen::VectorXd c = model.projection().matrix * model.fem().phi0;
    const double a_y = v.dot(u_tau_alpha(model, y));
    const double a_c = v.dot(u_tau_alpha(model, c));
    if (std::fabs(a_c) <= 1e-12) throw DegenerateLikelihoodError("trend denominator a(A phi0) vanishes", a_c);
    return a_y / a_c;
}

} // namespace surfspline
