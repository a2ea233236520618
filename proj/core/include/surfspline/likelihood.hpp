#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "surfspline/spline.hpp"

namespace surfspline {

/// Gaussian log-likelihood of the observations with the trend coefficient at
/// its generalized least-squares value:
/// loglik = -(n log(2 pi) + quad_term + logdet_term) / 2.
struct LikelihoodReport {
    double loglik = 0.0;
    double quad_term = 0.0;
    double logdet_term = 0.0;
    double trend = 0.0;
    double trend_numerator = 0.0;   ///< a(y)
    double trend_denominator = 0.0; ///< a(A phi0)
    long n = 0;
    double seconds = 0.0;
    std::vector<std::string> warnings;
};

/// Interpolation scenario, via Schur complements of Q_alpha on the observed nodes.
LikelihoodReport loglik_interp(const SplineModel& model, const Eigen::VectorXd& y);

/// Smoothing scenario, via (tau^2 Q_alpha + A^T A)^{-1}.
LikelihoodReport loglik_smooth(const SplineModel& model, const Eigen::VectorXd& y);

/// Dispatches on the model scenario.
LikelihoodReport loglik(const SplineModel& model, const Eigen::VectorXd& y);

/// Generalized least-squares trend coefficient a(y) / a(A phi0).
double trend_estimate(const SplineModel& model, const Eigen::VectorXd& y);

} // namespace surfspline
