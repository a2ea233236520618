#include "surfspline/spline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <mutex>
#include <string>
#include <utility>

#include "surfspline/errors.hpp"

namespace surfspline {

SparseSymmetric build_q_matrix(const FemSystem& fem)
{
    const SparseMatrix f = fem.stiffness.full();
    const SparseMatrix scaled = fem.mass_diag.cwiseInverse().asDiagonal() * f;
    const SparseMatrix q = f * scaled;
    return SparseSymmetric::from_lower_of(q);
}

Eigen::VectorXd AugmentedPrecision::multiply(const Eigen::VectorXd& x) const
{
    return q.multiply(x) + inv_alpha * v.dot(x) * v;
}

Eigen::MatrixXd AugmentedPrecision::dense() const
{
    return q.dense() + inv_alpha * v * v.transpose();
}

AugmentedPrecision build_q_alpha(const FemSystem& fem, double alpha)
{
    return build_q_alpha(build_q_matrix(fem), fem, alpha);
}

AugmentedPrecision build_q_alpha(SparseSymmetric q, const FemSystem& fem, double alpha)
{
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ParameterError("alpha must be positive and finite");
    if (q.size() != fem.size()) throw DimensionError("Q and FEM system sizes differ");
    return {std::move(q), fem.mass_phi0(), 1.0 / alpha};
}

PowerIterationOptions default_alpha_search()
{
    PowerIterationOptions o;
    o.tol = 1e-3;
    o.max_iters = 300;
    return o;
}

AlphaSelection select_alpha(const FemSystem& fem, const PowerIterationOptions& options)
{
    AlphaSelection out;
    try {
        out.lambda1 = second_smallest_eigenvalue_of_s(fem, options).value;
    } catch (const ConvergenceError& e) {
        out.lambda1 = e.best_value();
        out.converged = false;
    }
    try {
        out.lambda_max = largest_eigenvalue_of_s(fem, options).value;
    } catch (const ConvergenceError& e) {
        out.lambda_max = e.best_value();
        out.converged = false;
    }
    if (!(out.lambda1 > 0.0) || !(out.lambda_max > 0.0)) {
        throw ModelError("spectrum of S is degenerate (lambda_1 = " + std::to_string(out.lambda1) +
                         ", lambda_max = " + std::to_string(out.lambda_max) + ")");
    }
    // Rayleigh quotients approach the bracket ends from inside, so this only
    // triggers on meshes too small to separate them.
    if (out.lambda1 > out.lambda_max) std::swap(out.lambda1, out.lambda_max);
    out.alpha = 1.0 / std::sqrt(out.lambda1 * out.lambda_max);
    return out;
}

double clamp_alpha(double alpha, const AlphaSelection& bracket)
{
    return std::clamp(alpha, 1.0 / bracket.lambda_max, 1.0 / bracket.lambda1);
}

struct SplineModel::MinorCache {
    std::once_flag once;
    std::shared_ptr<const SymbolicCholesky> symbolic;
    double log_det = 0.0;
};

SplineModel SplineModel::build(const TriangleMesh& mesh, const MetricField& field, const Observations& obs,
                               const SplineOptions& options)
{
    validate_observations(obs, mesh);
    ProjectionMatrix proj = build_projection(mesh, obs, options.locate);
    return build(assemble_fem_system(mesh, field), std::move(proj), obs.tau, options);
}

SplineModel SplineModel::build(FemSystem fem, ProjectionMatrix projection, double tau, const SplineOptions& options)
{
    if (projection.cols() != fem.size()) throw DimensionError("projection columns do not match mesh nodes");
    if (projection.rows() < 1) throw ParameterError("at least one observation is required");
    if (!(tau >= 0.0) || !std::isfinite(tau)) throw ParameterError("tau must be finite and >= 0");

    SplineModel model;
    model.tau_ = tau;
    if (tau == 0.0) {
        if (!projection.is_indicator()) throw ParameterError("tau = 0 requires observations at mesh nodes");
        model.scenario_ = Scenario::interpolation;
    } else {
        model.scenario_ = Scenario::smoothing;
    }

    auto fem_ptr = std::make_shared<const FemSystem>(std::move(fem));
    if (options.alpha) {
        model.selection_.alpha = *options.alpha;
        model.selection_.lambda1 = std::nan("");
        model.selection_.lambda_max = std::nan("");
    } else {
        model.selection_ = select_alpha(*fem_ptr, options.alpha_search);
    }
    model.precision_ = build_q_alpha(build_q_matrix(*fem_ptr), *fem_ptr, model.selection_.alpha);
    model.fem_ = std::move(fem_ptr);
    model.projection_ = std::move(projection);
    model.minor_ = std::make_shared<MinorCache>();
    model.minor_->symbolic = options.symbolic.minor;

    if (model.scenario_ == Scenario::interpolation) {
        const auto m = static_cast<std::size_t>(model.num_nodes());
        std::vector<char> is_obs(m, 0);
        for (int i : model.projection_.nodes) is_obs[static_cast<std::size_t>(i)] = 1;
        model.observed_ = model.projection_.nodes;
        for (std::size_t j = 0; j < m; ++j) {
            if (!is_obs[j]) model.unobserved_.push_back(static_cast<int>(j));
        }
        if (model.unobserved_.empty()) throw ParameterError("interpolation needs at least one unobserved node");
        model.coupling_ = model.precision_.q.block(model.unobserved_, model.observed_);
        model.observed_block_ = model.precision_.q.block(model.observed_, model.observed_);
    }
    model.factorize(options.symbolic);
    return model;
}

void SplineModel::factorize(const SymbolicCache& cache)
{
    SparseSymmetric b;
    if (scenario_ == Scenario::interpolation) {
        b = precision_.q.principal_submatrix(unobserved_);
    } else {
        const SparseMatrix at = projection_.matrix.transpose();
        const SparseMatrix ata = at * projection_.matrix;
        b = SparseSymmetric::from_lower_of(tau_ * tau_ * precision_.q.full() + ata);
    }
    auto symbolic = cache.system && cache.system->matches(b) ? cache.system : nullptr;
    try {
        sparse_factor_ = std::make_shared<const CholeskyFactor>(cholesky(b, std::move(symbolic)));
    } catch (const NotPositiveDefiniteError& e) {
        throw ModelError(std::string("spline system factorization failed: ") + e.what());
    }
    *this = with_alpha(alpha());
}

SplineModel SplineModel::with_alpha(double alpha) const
{
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ParameterError("alpha must be positive and finite");
    SplineModel out = *this;
    out.precision_.inv_alpha = 1.0 / alpha;
    out.selection_.alpha = alpha;
    if (scenario_ == Scenario::interpolation) {
        Eigen::VectorXd v_u(static_cast<Eigen::Index>(unobserved_.size()));
        for (std::size_t k = 0; k < unobserved_.size(); ++k) v_u[static_cast<Eigen::Index>(k)] = precision_.v[unobserved_[k]];
        out.factor_ = sparse_factor_->rank_one_update(v_u, out.precision_.inv_alpha);
    } else {
        out.factor_ = sparse_factor_->rank_one_update(precision_.v, tau_ * tau_ * out.precision_.inv_alpha);
    }
    return out;
}

double SplineModel::log_det_q_alpha() const
{
    // det(Q + w v v^T) = w (v^T 1)^2 det(Q with row/column 0 removed) because
    // adj(Q) is a multiple of 1 1^T when ker Q = span(1).
    std::call_once(minor_->once, [this] {
        std::vector<int> rest(static_cast<std::size_t>(num_nodes() - 1));
        for (std::size_t k = 0; k < rest.size(); ++k) rest[k] = static_cast<int>(k + 1);
        const SparseSymmetric minor = precision_.q.principal_submatrix(rest);
        auto symbolic = minor_->symbolic && minor_->symbolic->matches(minor) ? minor_->symbolic : nullptr;
        try {
            const CholeskyFactor f = cholesky(minor, std::move(symbolic));
            minor_->symbolic = f.symbolic();
            minor_->log_det = f.log_determinant();
        } catch (const NotPositiveDefiniteError& e) {
            throw ModelError(std::string("grounded minor of Q is not positive definite: ") + e.what());
        }
    });
    const double v_sum = precision_.v.sum();
    return std::log(precision_.inv_alpha) + 2.0 * std::log(std::fabs(v_sum)) + minor_->log_det;
}

SymbolicCache SplineModel::symbolic_cache() const
{
    return {sparse_factor_ ? sparse_factor_->symbolic() : nullptr, minor_ ? minor_->symbolic : nullptr};
}

Eigen::VectorXd u_interp(const SplineModel& model, const Eigen::VectorXd& x)
{
    if (model.scenario() != Scenario::interpolation) throw ParameterError("u_interp needs the interpolation scenario");
    if (x.size() != model.num_observations()) throw DimensionError("data length does not match observation count");
    const auto& obs = model.observed();
    const auto& unobs = model.unobserved();
    const auto& prec = model.precision();

    double v_obs = 0.0;
    for (std::size_t k = 0; k < obs.size(); ++k) v_obs += prec.v[obs[k]] * x[static_cast<Eigen::Index>(k)];
    Eigen::VectorXd rhs = model.coupling() * x;
    for (std::size_t k = 0; k < unobs.size(); ++k) {
        rhs[static_cast<Eigen::Index>(k)] += prec.inv_alpha * prec.v[unobs[k]] * v_obs;
    }
    // Conditional mean of a Gaussian with precision Q_alpha: u_U = -[Q]_UU^{-1} [Q]_UI x.
    const Eigen::VectorXd w = model.factor().solve(Eigen::VectorXd(-rhs));

    Eigen::VectorXd u(model.num_nodes());
    for (std::size_t k = 0; k < obs.size(); ++k) u[obs[k]] = x[static_cast<Eigen::Index>(k)];
    for (std::size_t k = 0; k < unobs.size(); ++k) u[unobs[k]] = w[static_cast<Eigen::Index>(k)];
    return u;
}

Eigen::VectorXd u_smooth(const SplineModel& model, const Eigen::VectorXd& x)
{
    if (model.scenario() != Scenario::smoothing) throw ParameterError("u_smooth needs tau > 0");
    if (x.size() != model.num_observations()) throw DimensionError("data length does not match observation count");
    const Eigen::VectorXd rhs = model.projection().matrix.transpose() * x;
    return model.factor().solve(rhs);
}

Eigen::VectorXd u_tau_alpha(const SplineModel& model, const Eigen::VectorXd& x)
{
    return model.scenario() == Scenario::interpolation ? u_interp(model, x) : u_smooth(model, x);
}

Eigen::VectorXd h_transform(const Eigen::VectorXd& u, const FemSystem& fem)
{
    if (u.size() != fem.size()) throw DimensionError("vector length does not match mesh nodes");
    const double a = fem.mass_phi0().dot(u);
    if (std::fabs(1.0 - a) <= 1e-12) throw SingularTransformError("h transform is singular: (M phi0)^T u = 1");
    return (u - fem.phi0 * a) / (1.0 - a);
}

namespace {

double relative_residual(const SplineModel& model, const Eigen::VectorXd& u, const Eigen::VectorXd& y)
{
    const auto& prec = model.precision();
    if (model.scenario() == Scenario::interpolation) {
        // (Q_alpha u) vanishes on unobserved nodes; compare with the data-only part.
        Eigen::VectorXd data_only = Eigen::VectorXd::Zero(model.num_nodes());
        for (std::size_t k = 0; k < model.observed().size(); ++k) {
            data_only[model.observed()[k]] = y[static_cast<Eigen::Index>(k)];
        }
        const Eigen::VectorXd r = prec.multiply(u);
        const Eigen::VectorXd r0 = prec.multiply(data_only);
        double num = 0.0, den = 0.0;
        for (int j : model.unobserved()) {
            num += r[j] * r[j];
            den += r0[j] * r0[j];
        }
        return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
    }
    const auto& a = model.projection().matrix;
    const Eigen::VectorXd rhs = a.transpose() * y;
    const Eigen::VectorXd r = model.tau() * model.tau() * prec.multiply(u) + a.transpose() * (a * u) - rhs;
    const double den = rhs.norm();
    return den > 0.0 ? r.norm() / den : r.norm();
}

} // namespace

Prediction predict(const SplineModel& model, const Eigen::VectorXd& y)
{
    const auto start = std::chrono::steady_clock::now();
    if (y.size() != model.num_observations()) throw DimensionError("data length does not match observation count");
    if (!y.allFinite()) throw ParameterError("observation values must be finite");

    const FemSystem& fem = model.fem();
    const Eigen::VectorXd v = fem.mass_phi0();
    const Eigen::VectorXd c = model.projection().matrix * fem.phi0;

    const Eigen::VectorXd u_y = u_tau_alpha(model, y);
    const Eigen::VectorXd u_c = u_tau_alpha(model, c);
    const double a_y = v.dot(u_y);
    const double a_c = v.dot(u_c);
    if (std::fabs(a_c) <= 1e-12) throw SingularTransformError("trend denominator (M phi0)^T u(A phi0) vanishes");
    const Eigen::VectorXd h = h_transform(u_c, fem);

    Prediction out;
    out.values = u_y + ((fem.phi0 - h) / a_c - fem.phi0 + h) * a_y;
    out.trend = a_y / a_c;
    auto& d = out.diagnostics;
    d.alpha = model.alpha();
    d.lambda1 = model.alpha_selection().lambda1;
    d.lambda_max = model.alpha_selection().lambda_max;
    d.trend_numerator = a_y;
    d.trend_denominator = a_c;
    d.solve_residual = relative_residual(model, u_y, y);
    d.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

} // namespace surfspline
