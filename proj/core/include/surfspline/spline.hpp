#pragma once

#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "surfspline/fem.hpp"
#include "surfspline/mesh.hpp"
#include "surfspline/metric.hpp"
#include "surfspline/sparse.hpp"

namespace surfspline {

/// Q = sqrt(M) S^2 sqrt(M) = F M^{-1} F. Its pattern is the 2-ring adjacency.
SparseSymmetric build_q_matrix(const FemSystem& fem);

/// Q_alpha = Q + (1/alpha) v v^T with v = M phi0, kept as sparse plus rank one.
struct AugmentedPrecision {
    SparseSymmetric q;
    Eigen::VectorXd v;
    double inv_alpha = 1.0;

    Eigen::Index size() const { return q.size(); }
    Eigen::VectorXd multiply(const Eigen::VectorXd& x) const;
    Eigen::MatrixXd dense() const;
};

AugmentedPrecision build_q_alpha(const FemSystem& fem, double alpha);
AugmentedPrecision build_q_alpha(SparseSymmetric q, const FemSystem& fem, double alpha);

struct AlphaSelection {
    double alpha = 0.0;
    double lambda1 = 0.0;
    double lambda_max = 0.0;
    bool converged = true;
};

/// Defaults are looser than PowerIterationOptions: any Rayleigh quotient keeps
/// the estimate inside the admissible bracket, and predictions do not depend on alpha.
PowerIterationOptions default_alpha_search();

/// alpha = 1 / sqrt(lambda_1 lambda_{m-1}), the geometric midpoint of the bracket
/// [lambda_1, lambda_{m-1}] for 1/alpha. Non-converged estimates fall back to the
/// best Rayleigh quotient.
AlphaSelection select_alpha(const FemSystem& fem, const PowerIterationOptions& options = default_alpha_search());

/// Clamps alpha so that 1/alpha lies in [lambda1, lambda_max].
double clamp_alpha(double alpha, const AlphaSelection& bracket);

enum class Scenario {
    interpolation, ///< node observations, tau = 0
    smoothing,     ///< tau > 0
};

/// Symbolic analyses reused across models that share mesh and observation layout.
struct SymbolicCache {
    std::shared_ptr<const SymbolicCholesky> system;
    std::shared_ptr<const SymbolicCholesky> minor;
};

struct SplineOptions {
    /// Fixed alpha; selected from the spectrum of S when empty.
    std::optional<double> alpha;
    PowerIterationOptions alpha_search = default_alpha_search();
    LocateOptions locate;
    SymbolicCache symbolic;
};

/// Assembled model for one mesh, metric and observation layout. Immutable.
class SplineModel {
public:
    static SplineModel build(const TriangleMesh& mesh, const MetricField& field, const Observations& obs,
                             const SplineOptions& options = {});
    static SplineModel build(FemSystem fem, ProjectionMatrix projection, double tau,
                             const SplineOptions& options = {});

    /// Same model with another alpha; reuses the alpha-independent factor.
    SplineModel with_alpha(double alpha) const;

    const FemSystem& fem() const { return *fem_; }
    const AugmentedPrecision& precision() const { return precision_; }
    const SparseSymmetric& q_matrix() const { return precision_.q; }
    double alpha() const { return 1.0 / precision_.inv_alpha; }
    const AlphaSelection& alpha_selection() const { return selection_; }
    const ProjectionMatrix& projection() const { return projection_; }
    double tau() const { return tau_; }
    Scenario scenario() const { return scenario_; }
    Eigen::Index num_nodes() const { return precision_.size(); }
    Eigen::Index num_observations() const { return projection_.rows(); }

    /// Observed / unobserved node indices (interpolation scenario).
    const std::vector<int>& observed() const { return observed_; }
    const std::vector<int>& unobserved() const { return unobserved_; }
    /// [Q]_{unobserved, observed} and [Q]_{observed, observed} (interpolation scenario).
    const SparseMatrix& coupling() const { return coupling_; }
    const SparseMatrix& observed_block() const { return observed_block_; }

    /// Interpolation: factor of Q_alpha restricted to unobserved nodes.
    /// Smoothing: factor of tau^2 Q_alpha + A^T A.
    const CholeskyFactor& factor() const { return factor_; }

    /// log det Q_alpha through the grounded minor of Q (computed on first use).
    double log_det_q_alpha() const;

    SymbolicCache symbolic_cache() const;

private:
    SplineModel() = default;
    void factorize(const SymbolicCache& cache);

    std::shared_ptr<const FemSystem> fem_;
    AugmentedPrecision precision_;
    AlphaSelection selection_;
    ProjectionMatrix projection_;
    double tau_ = 0.0;
    Scenario scenario_ = Scenario::interpolation;
    std::vector<int> observed_;
    std::vector<int> unobserved_;
    SparseMatrix coupling_;
    SparseMatrix observed_block_;
    std::shared_ptr<const CholeskyFactor> sparse_factor_; ///< alpha-independent part
    CholeskyFactor factor_;

    struct MinorCache;
    std::shared_ptr<MinorCache> minor_;
};

/// u_{0,alpha}(x): conditional mean given values x at the observed nodes.
Eigen::VectorXd u_interp(const SplineModel& model, const Eigen::VectorXd& x);

/// u_{tau,alpha}(x) = (tau^2 Q_alpha + A^T A)^{-1} A^T x.
Eigen::VectorXd u_smooth(const SplineModel& model, const Eigen::VectorXd& x);

/// Scenario-appropriate u_{tau,alpha}.
Eigen::VectorXd u_tau_alpha(const SplineModel& model, const Eigen::VectorXd& x);

/// h[u] = (u - phi0 (M phi0)^T u) / (1 - (M phi0)^T u).
Eigen::VectorXd h_transform(const Eigen::VectorXd& u, const FemSystem& fem);

struct PredictionDiagnostics {
    double alpha = 0.0;
    double lambda1 = 0.0;
    double lambda_max = 0.0;
    double trend_numerator = 0.0;   ///< (M phi0)^T u(y)
    double trend_denominator = 0.0; ///< (M phi0)^T u(A phi0)
    double solve_residual = 0.0;    ///< relative residual of the data solve
    double seconds = 0.0;
};

struct Prediction {
    Eigen::VectorXd values; ///< u* at every mesh node
    double trend = 0.0;     ///< coefficient of phi0
    PredictionDiagnostics diagnostics;
};

Prediction predict(const SplineModel& model, const Eigen::VectorXd& y);

} // namespace surfspline
