#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "zigamma/fit.hpp"

namespace zigamma {

/// Which temporal curve a band is built for: f(t) of the conditional mean
/// or g(t) of the zero-inflation part.
enum class Curve { Mean, Zero };

const char* to_string(Curve c) noexcept;
std::optional<Curve> parse_curve(std::string_view s);

/// Draw a response matrix from the fitted mixture: zero with probability
/// pi_it, otherwise Gamma(shape k, scale mu_it / k). Each cell uses its own
/// engine seeded from (seed, i, t), so the draw is independent of evaluation
/// order.
RowMatrix simulate(const ModelSpec& spec, const ParameterSet& phi, int n_wallets, int n_days,
                   const Eigen::MatrixXd& covariates, std::uint64_t seed);

/// Copy of `shape` whose `spec.stream` response is replaced by a simulated one.
Panel simulate_panel(const ModelSpec& spec, const ParameterSet& phi, const Panel& shape, std::uint64_t seed);

/// Value at rank ceil(level * n) of the sorted sample (no interpolation).
double nearest_rank_quantile(std::vector<double> values, double level);

/// Fitted curve f_hat (Mean) or g_hat (Zero) on the daily grid 1..n.
Eigen::VectorXd fitted_curve(const FitResult& fit, Curve which, int n_days);

/// Normal-theory pointwise half-widths z * se(f_hat(t)) from the fit's
/// inverse information restricted to the spline block.
Eigen::VectorXd pointwise_half_width(const FitResult& fit, const Panel& panel, Curve which, double z,
                                     double ridge_lambda = 1e-4);

struct BandOptions {
    int replicates = 1000;
    double alpha = 0.05;
    std::uint64_t seed = 0;
    int workers = 1;
    bool freeze_intercepts = false;  // Full variant: hold wallet intercepts at the fit
    FitOptions fit;
};

struct BandResult {
    Curve which = Curve::Mean;
    std::vector<double> grid;
    Eigen::VectorXd f_hat;
    double c_alpha = 0.0;
    double alpha = 0.05;
    int replicates = 0;
    std::vector<double> deviations;  // S*_b in replicate order
    int n_failed = 0;
    std::uint64_t seed = 0;

    Eigen::VectorXd lower() const { return f_hat.array() - c_alpha; }
    Eigen::VectorXd upper() const { return f_hat.array() + c_alpha; }

    nlohmann::json to_json() const;
    /// Columns t, fit, lo, hi.
    std::string to_csv() const;
};

/// Parametric bootstrap band f_hat(t) +/- c_alpha. Each replicate simulates
/// from the fit, refits warm-started at phi_hat and records
/// max_t |f*_b(t) - f_hat(t)|. Non-converged replicates are redrawn with a
/// fresh seed; more than B failures in total throws.
BandResult simultaneous_band(const FitResult& fit, const Panel& panel, Curve which, const BandOptions& opts);

}  // namespace zigamma
