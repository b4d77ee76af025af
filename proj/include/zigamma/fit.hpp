#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "zigamma/model.hpp"

namespace zigamma {

struct FitOptions {
    double grad_tol = 1e-6;    // sup-norm of the objective gradient
    double rel_tol = 1e-10;    // relative change of the objective
    int max_iters = 2000;
    double ridge_lambda = 1e-4;  // on wallet intercepts, Full variant only
    bool compute_se = true;
    double se_step = 1e-5;
};

struct StandardErrors {
    Eigen::VectorXd values;  // flat layout order; NaN when unavailable
    bool available = false;
    double condition_number = 0.0;
    std::string diagnostic;
};

struct InformationCriteria {
    double aic = 0.0;
    double bic = 0.0;
};

/// AIC = 2 n_params + 2 nll, BIC = n_params log(n_obs) + 2 nll.
InformationCriteria information_criteria(double nll, int n_params, long n_obs);

struct FitResult {
    ModelSpec spec;
    ParameterSet phi_hat;
    double nll = 0.0;          // penalty excluded
    double nll_initial = 0.0;  // at the starting point, penalty excluded
    double penalty = 0.0;      // ridge term at the optimum
    long n_obs = 0;
    long n_positive = 0;
    int n_params = 0;
    double aic = 0.0;
    double bic = 0.0;
    StandardErrors se;
    bool converged = false;
    int iterations = 0;
    double grad_norm = 0.0;
    std::string termination;
    std::vector<std::string> wallet_ids;
    CovariateStats covariate_stats;

    long residual_df() const noexcept { return n_obs - n_params; }

    nlohmann::json to_json() const;
    static FitResult from_json(const nlohmann::json& j);
};

/// Starting values from data: logit of the add-one smoothed zero fraction,
/// log of the mean positive response, method-of-moments shape clamped to
/// [0.01, 100], all slopes and spline coefficients zero.
ParameterSet initial_parameters(const ZigLikelihood& lik);

/// Map a parameter set onto another variant's layout: global intercepts are
/// broadcast to wallets and missing covariate slopes start at zero.
ParameterSet promote(const ParameterSet& from, const ParameterLayout& to);

/// Maximise the zero-inflated Gamma likelihood with L-BFGS. Starts from
/// `start` when given, otherwise from initial_parameters(). Non-convergence
/// is reported in the result, never thrown.
FitResult fit(const ModelSpec& spec, const Panel& panel, const FitOptions& opts = {},
              const ParameterSet* start = nullptr);

/// Same as fit() on a prebuilt likelihood. `fixed` lists flat-layout indices
/// held at their starting values.
FitResult fit(const ZigLikelihood& lik, const FitOptions& opts, const ParameterSet* start,
              const std::vector<int>& fixed = {});

/// A, then B warm-started from A, then Full warm-started from B.
std::vector<FitResult> fit_nested(Stream stream, const SplineBasis& basis, const Panel& panel,
                                  const FitOptions& opts = {});

/// Inverse observed information of the fitted objective (penalty included),
/// with the Hessian built from central differences of the analytic gradient.
/// Inverting the full matrix gives the shared-parameter block with the
/// wallet intercepts profiled out.
StandardErrors standard_errors(const ZigLikelihood& lik, const ParameterSet& phi_hat,
                               double ridge_lambda, double step = 1e-5);
StandardErrors standard_errors(const ModelSpec& spec, const ParameterSet& phi_hat, const Panel& panel,
                               double ridge_lambda = 1e-4, double step = 1e-5);

/// Hessian of the negative penalized log-likelihood by central differences
/// of the analytic gradient, symmetrized.
Eigen::MatrixXd observed_information(const ZigLikelihood& lik, const ParameterSet& phi_hat,
                                     double ridge_lambda, double step = 1e-5);

/// Same inverse-Hessian computation for an arbitrary smooth objective given
/// by its gradient; exposed for testing on toy problems.
StandardErrors standard_errors_from_gradient(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& neg_loglik_grad,
    const Eigen::VectorXd& x_hat, double step = 1e-5);

/// Table-style rows: component, term, estimate, std_error, z_value, p_value.
/// Wallet intercepts of the Full variant are left to intercepts_csv().
std::string coefficients_csv(const FitResult& fit);
/// wallet_id, alpha, gamma (+ standard errors). Full variant only.
std::string intercepts_csv(const FitResult& fit);
/// Model summary in the layout of the model-comparison table: one column
/// per fit, rows NLL, residual df, AIC, BIC.
std::string model_summary_csv(const std::vector<FitResult>& fits);

}  // namespace zigamma
