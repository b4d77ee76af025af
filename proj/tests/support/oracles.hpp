#pragma once

// Reference implementations used only by tests. They are written directly
// from the textbook formulas and share no code with the library beyond
// plain data types.

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "zigamma/bootstrap.hpp"
#include "zigamma/model.hpp"

namespace oracle {

/// Truncated-power natural cubic spline basis (with constant) on the knot
/// sequence `knots` (boundary knots first and last): 1, x, and
/// d_k(x) - d_{K-1}(x) with d_k = ((x - xi_k)_+^3 - (x - xi_K)_+^3) / (xi_K - xi_k).
/// Columns = knots.size().
Eigen::MatrixXd truncated_power_natural(const std::vector<double>& knots, const std::vector<double>& grid);

/// Per-cell zero-inflated Gamma log-likelihood summed in a plain loop with
/// long double accumulation. `design` is n x K, `x` is n x p.
long double naive_loglik(const zigamma::RowMatrix& y, const Eigen::MatrixXd& design, const Eigen::MatrixXd& x,
                         const Eigen::VectorXd& alpha, const Eigen::VectorXd& gamma,
                         const Eigen::VectorXd& beta, const Eigen::VectorXd& delta,
                         const Eigen::VectorXd& zeta, const Eigen::VectorXd& kappa, double log_k);

/// The printed cell formula for one observation.
long double cell_loglik(double y, long double mu, long double pi, long double k);

/// A simulation scenario with known truth.
struct Scenario {
    zigamma::ModelSpec spec;
    zigamma::ParameterSet truth;
    zigamma::Panel panel;  // covariates filled, stream simulated
};

/// Covariates: a random walk and a noisy trend with weekly cycle, both
/// z-scored. Deterministic in `seed`.
Eigen::MatrixXd synthetic_covariates(int n_days, std::uint64_t seed);

/// Full model, m wallets, n days, K = df, p = 2, zero rate about 90%.
/// Truth is fixed; only the response depends on `seed`.
Scenario sparse_full_scenario(int m, int n, int df, std::uint64_t seed);

/// Random parameter vector of the right layout, moderate magnitudes.
zigamma::ParameterSet random_parameters(const zigamma::ParameterLayout& layout, std::uint64_t seed);

/// Random sparse positive response (zero with probability `zero_rate`).
zigamma::RowMatrix random_response(int m, int n, double zero_rate, std::uint64_t seed);

}  // namespace oracle
