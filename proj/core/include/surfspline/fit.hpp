#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "surfspline/mesh.hpp"
#include "surfspline/metric.hpp"
#include "surfspline/spline.hpp"

namespace surfspline {

struct CmaesOptions {
    int population = 0;        ///< 0 means 4 + floor(3 ln d)
    int max_evaluations = 300;
    double sigma0 = 0.15;      ///< initial step in the unit box
    double tol_fun = 1e-10;    ///< stop when a generation's objective spread falls below this
    double tol_x = 1e-10;      ///< stop when the step size in the unit box falls below this
    std::uint64_t seed = 1;
    int threads = 1;
};

struct GenerationRecord {
    int generation = 0;
    int evaluations = 0;
    double best = 0.0; ///< best objective so far
};

struct CmaesResult {
    Eigen::VectorXd best_x;
    double best_value = 0.0;
    int evaluations = 0;
    std::string reason;
    std::vector<GenerationRecord> history;
};

/// (mu/mu_w, lambda)-CMA-ES maximizing `objective` over the box [lower, upper].
/// Candidates are reflected coordinate-wise into the box. Evaluations that
/// throw NumericalError score -inf; a generation where all fail aborts with
/// ModelError.
CmaesResult cmaes_maximize(const std::function<double(const Eigen::VectorXd&)>& objective, const Eigen::VectorXd& x0,
                           const Eigen::VectorXd& lower, const Eigen::VectorXd& upper, const CmaesOptions& options = {});

struct FitConfig {
    AnisotropyParams initial;
    double rho_min = 0.05;
    double rho_max = 20.0;
    bool estimate_tau = false;
    double tau_min = 1e-4;
    double tau_max = 10.0;
    CmaesOptions cmaes;

    /// Throws ParameterError on inconsistent bounds or settings.
    void validate() const;
};

struct FitResult {
    AnisotropyParams beta;
    double tau = 0.0;
    double loglik = 0.0;
    int evaluations = 0;
    std::string reason;
    std::vector<GenerationRecord> history;
};

/// Objective over (beta, tau); tau is passed through unchanged unless estimated.
using BetaObjective = std::function<double(const AnisotropyParams& beta, double tau)>;

/// Maximizes `objective` over delta in (-pi/2, pi/2] and rho in [rho_min, rho_max]
/// (searched in log scale), plus log tau when requested.
FitResult maximize_beta(const BetaObjective& objective, const FitConfig& config, double tau = 0.0);

/// Log-likelihood of `obs` under a constant metric `beta`.
double beta_loglik(const TriangleMesh& mesh, const Observations& obs, const ProjectionMatrix& projection,
                   const AnisotropyParams& beta, double tau, const SymbolicCache& cache = {});

/// Maximum-likelihood constant anisotropy for `obs` on `mesh`.
FitResult optimize(const TriangleMesh& mesh, const Observations& obs, const FitConfig& config);

double evaluate_rmse(const Eigen::VectorXd& prediction, const Eigen::VectorXd& truth);
double evaluate_rmse(const Prediction& prediction, const Eigen::VectorXd& truth);

} // namespace surfspline
