#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "zigamma/basis.hpp"
#include "zigamma/ingest.hpp"

namespace zigamma {

/// A: time-only, global intercepts. B: adds covariates. Full: B with
/// per-wallet intercepts in both parts.
enum class Variant { A, B, Full };

const char* to_string(Variant v) noexcept;
std::optional<Variant> parse_variant(std::string_view s);

struct ModelSpec {
    Variant variant = Variant::Full;
    Stream stream = Stream::EthSale;
    /// Temporal terms f(t), g(t). Absent means an intercept-only time profile.
    std::optional<SplineBasis> basis;

    bool use_covariates() const noexcept { return variant != Variant::A; }
    bool wallet_intercepts() const noexcept { return variant == Variant::Full; }
    int df() const noexcept { return basis ? basis->df() : 0; }
};

/// Offsets of each parameter block inside the flat optimizer vector
/// [alpha, gamma, beta, delta, zeta, kappa, log_k].
struct ParameterLayout {
    int n_intercepts = 1;  // 1 for A/B, m for Full
    int df = 0;
    int n_covariates = 0;

    int alpha() const noexcept { return 0; }
    int gamma() const noexcept { return n_intercepts; }
    int beta() const noexcept { return 2 * n_intercepts; }
    int delta() const noexcept { return beta() + df; }
    int zeta() const noexcept { return delta() + df; }
    int kappa() const noexcept { return zeta() + n_covariates; }
    int log_k() const noexcept { return kappa() + n_covariates; }
    int size() const noexcept { return log_k() + 1; }

    /// Human-readable names, e.g. "mean:spline3", "zero:ethprice", "log_k".
    std::vector<std::string> names(const std::vector<std::string>& wallet_ids,
                                   const std::vector<std::string>& covariate_names) const;
};

ParameterLayout make_layout(const ModelSpec& spec, int n_wallets, int n_covariates);

/// Free parameter count: A 2 + 2K + 1, B adds 2p, Full swaps the two global
/// intercepts for 2m wallet intercepts.
int n_params(Variant variant, int df, int n_covariates, int n_wallets);

struct ParameterSet {
    Eigen::VectorXd alpha;  // conditional-mean intercepts, log scale
    Eigen::VectorXd gamma;  // zero-inflation intercepts, logit scale
    Eigen::VectorXd beta;   // mean spline
    Eigen::VectorXd delta;  // zero spline
    Eigen::VectorXd zeta;   // mean covariate slopes
    Eigen::VectorXd kappa;  // zero covariate slopes
    double log_k = 0.0;     // log Gamma shape

    double shape() const { return std::exp(log_k); }

    static ParameterSet zeros(const ParameterLayout& layout);
    static ParameterSet unpack(const ParameterLayout& layout, const Eigen::VectorXd& x);
    Eigen::VectorXd pack() const;
    ParameterLayout layout() const;
    bool all_finite() const;

    nlohmann::json to_json() const;
    static ParameterSet from_json(const nlohmann::json& j);
};

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Predictors {
    RowMatrix mu;  // conditional means exp(alpha_i + f(t) + zeta'X_t)
    RowMatrix pi;  // zero probabilities logistic(gamma_i + g(t) + kappa'X_t)
};

/// Logistic function, accurate in both tails.
double logistic(double eta) noexcept;
/// log(1 + exp(eta)) without overflow.
double softplus(double eta) noexcept;

double log_gamma(double x);
double digamma(double x);

/// Values below this are treated as structural zeros.
inline constexpr double kDustThreshold = 1e-300;

/// Zero-inflated Gamma log-likelihood for one response stream.
///
/// Holds the response with the zero/positive split precomputed, the daily
/// spline design and the covariates, and evaluates l(Phi) and its gradient
/// on the flat parameter vector. Sums run in a fixed order so results are
/// bit-stable.
class ZigLikelihood {
public:
    ZigLikelihood(const ModelSpec& spec, const Panel& panel);
    ZigLikelihood(const ModelSpec& spec, const RowMatrix& response, const Eigen::MatrixXd& covariates);

    const ModelSpec& spec() const noexcept { return spec_; }
    const ParameterLayout& layout() const noexcept { return layout_; }
    int n_wallets() const noexcept { return m_; }
    int n_days() const noexcept { return n_; }
    long n_obs() const noexcept { return static_cast<long>(m_) * n_; }
    long n_positive() const noexcept { return static_cast<long>(pos_day_.size()); }
    const Eigen::MatrixXd& design() const noexcept { return design_; }
    const Eigen::MatrixXd& covariates() const noexcept { return covariates_; }
    const RowMatrix& response() const noexcept { return response_; }

    /// l(Phi). Non-finite intermediate values propagate as NaN/inf rather
    /// than throwing, so optimizers can back off.
    double value(const Eigen::VectorXd& x) const;
    /// l(Phi); `grad` receives dl/dx.
    double value_and_gradient(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const;

    /// Daily components f(t) + zeta'X_t and g(t) + kappa'X_t.
    void daily_offsets(const ParameterSet& phi, Eigen::VectorXd& mean_offset,
                       Eigen::VectorXd& zero_offset) const;

    Predictors predictors(const ParameterSet& phi) const;

private:
    template <bool WithGradient>
    double evaluate(const Eigen::VectorXd& x, Eigen::VectorXd* grad) const;
    void init(const RowMatrix& response);

    ModelSpec spec_;
    ParameterLayout layout_;
    int m_ = 0;
    int n_ = 0;
    RowMatrix response_;
    Eigen::MatrixXd design_;      // n x K
    Eigen::MatrixXd covariates_;  // n x p (p = 0 for variant A)
    // Positive cells in row-major order: wallet row starts, day, log y, y.
    std::vector<long> row_start_;
    std::vector<int> pos_day_;
    std::vector<double> pos_log_y_;
    std::vector<double> pos_y_;
};

/// mu and pi for every wallet-day. Throws on a non-finite predictor,
/// naming the (wallet, day).
Predictors linear_predictors(const ModelSpec& spec, const ParameterSet& phi, const Panel& panel);
double loglik(const ModelSpec& spec, const ParameterSet& phi, const Panel& panel);
/// Gradient in the flat layout order.
Eigen::VectorXd loglik_grad(const ModelSpec& spec, const ParameterSet& phi, const Panel& panel);

}  // namespace zigamma
