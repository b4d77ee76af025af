#include "zigamma/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <boost/math/policies/policy.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <nlohmann/json.hpp>

#include "zigamma/error.hpp"

namespace zigamma {

using json = nlohmann::json;

const char* to_string(Variant v) noexcept {
    switch (v) {
        case Variant::A: return "A";
        case Variant::B: return "B";
        case Variant::Full: return "Full";
    }
    return "?";
}

std::optional<Variant> parse_variant(std::string_view s) {
    if (s == "A" || s == "a") return Variant::A;
    if (s == "B" || s == "b") return Variant::B;
    if (s == "Full" || s == "full" || s == "FULL") return Variant::Full;
    return std::nullopt;
}

namespace {
using quiet_policy = boost::math::policies::policy<
    boost::math::policies::overflow_error<boost::math::policies::ignore_error>,
    boost::math::policies::pole_error<boost::math::policies::ignore_error>,
    boost::math::policies::domain_error<boost::math::policies::ignore_error>,
    boost::math::policies::evaluation_error<boost::math::policies::ignore_error>>;
}  // namespace

double log_gamma(double x) { return boost::math::lgamma(x, quiet_policy()); }
double digamma(double x) { return boost::math::digamma(x, quiet_policy()); }

double logistic(double eta) noexcept {
    const double e = std::exp(-std::abs(eta));
    return eta >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
}

double softplus(double eta) noexcept { return std::max(eta, 0.0) + std::log1p(std::exp(-std::abs(eta))); }

// ---------------------------------------------------------------------------
// Layout and parameter sets

std::vector<std::string> ParameterLayout::names(const std::vector<std::string>& wallet_ids,
                                                const std::vector<std::string>& covariate_names) const {
    std::vector<std::string> out;
    out.reserve(size());
    for (const char* part : {"mean", "zero"}) {
        if (n_intercepts == 1) {
            out.push_back(std::string(part) + ":(Intercept)");
        } else {
            for (int i = 0; i < n_intercepts; ++i)
                out.push_back(std::string(part) + ":wallet[" +
                              (i < static_cast<int>(wallet_ids.size()) ? wallet_ids[i] : std::to_string(i)) +
                              "]");
        }
    }
    for (const char* part : {"mean", "zero"})
        for (int k = 0; k < df; ++k) out.push_back(std::string(part) + ":spline" + std::to_string(k + 1));
    for (const char* part : {"mean", "zero"})
        for (int c = 0; c < n_covariates; ++c)
            out.push_back(std::string(part) + ":" +
                          (c < static_cast<int>(covariate_names.size()) ? covariate_names[c]
                                                                         : "x" + std::to_string(c + 1)));
    out.push_back("log_k");
    return out;
}

ParameterLayout make_layout(const ModelSpec& spec, int n_wallets, int n_covariates) {
    ParameterLayout l;
    l.n_intercepts = spec.wallet_intercepts() ? n_wallets : 1;
    l.df = spec.df();
    l.n_covariates = spec.use_covariates() ? n_covariates : 0;
    return l;
}

int n_params(Variant variant, int df, int n_covariates, int n_wallets) {
    const int a = 2 + 2 * df + 1;
    if (variant == Variant::A) return a;
    const int b = a + 2 * n_covariates;
    if (variant == Variant::B) return b;
    return b - 2 + 2 * n_wallets;
}

ParameterSet ParameterSet::zeros(const ParameterLayout& l) {
    ParameterSet p;
    p.alpha = Eigen::VectorXd::Zero(l.n_intercepts);
    p.gamma = Eigen::VectorXd::Zero(l.n_intercepts);
    p.beta = Eigen::VectorXd::Zero(l.df);
    p.delta = Eigen::VectorXd::Zero(l.df);
    p.zeta = Eigen::VectorXd::Zero(l.n_covariates);
    p.kappa = Eigen::VectorXd::Zero(l.n_covariates);
    p.log_k = 0.0;
    return p;
}

ParameterSet ParameterSet::unpack(const ParameterLayout& l, const Eigen::VectorXd& x) {
    if (x.size() != l.size())
        throw Error(ErrorKind::Usage, "parameter vector has length " + std::to_string(x.size()) +
                                          ", layout expects " + std::to_string(l.size()));
    ParameterSet p;
    p.alpha = x.segment(l.alpha(), l.n_intercepts);
    p.gamma = x.segment(l.gamma(), l.n_intercepts);
    p.beta = x.segment(l.beta(), l.df);
    p.delta = x.segment(l.delta(), l.df);
    p.zeta = x.segment(l.zeta(), l.n_covariates);
    p.kappa = x.segment(l.kappa(), l.n_covariates);
    p.log_k = x[l.log_k()];
    return p;
}

ParameterLayout ParameterSet::layout() const {
    if (alpha.size() != gamma.size() || beta.size() != delta.size() || zeta.size() != kappa.size())
        throw Error(ErrorKind::Usage, "inconsistent parameter block sizes");
    ParameterLayout l;
    l.n_intercepts = static_cast<int>(alpha.size());
    l.df = static_cast<int>(beta.size());
    l.n_covariates = static_cast<int>(zeta.size());
    return l;
}

Eigen::VectorXd ParameterSet::pack() const {
    const auto l = layout();
    Eigen::VectorXd x(l.size());
    x.segment(l.alpha(), l.n_intercepts) = alpha;
    x.segment(l.gamma(), l.n_intercepts) = gamma;
    x.segment(l.beta(), l.df) = beta;
    x.segment(l.delta(), l.df) = delta;
    x.segment(l.zeta(), l.n_covariates) = zeta;
    x.segment(l.kappa(), l.n_covariates) = kappa;
    x[l.log_k()] = log_k;
    return x;
}

bool ParameterSet::all_finite() const {
    return alpha.allFinite() && gamma.allFinite() && beta.allFinite() && delta.allFinite() &&
           zeta.allFinite() && kappa.allFinite() && std::isfinite(log_k);
}

namespace {
std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }
Eigen::VectorXd from_vec(const json& j) {
    auto v = j.get<std::vector<double>>();
    return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}
}  // namespace

json ParameterSet::to_json() const {
    return {{"alpha", to_vec(alpha)}, {"gamma", to_vec(gamma)}, {"beta", to_vec(beta)},
            {"delta", to_vec(delta)}, {"zeta", to_vec(zeta)},   {"kappa", to_vec(kappa)},
            {"log_k", log_k}};
}

ParameterSet ParameterSet::from_json(const json& j) {
    ParameterSet p;
    try {
        p.alpha = from_vec(j.at("alpha"));
        p.gamma = from_vec(j.at("gamma"));
        p.beta = from_vec(j.at("beta"));
        p.delta = from_vec(j.at("delta"));
        p.zeta = from_vec(j.at("zeta"));
        p.kappa = from_vec(j.at("kappa"));
        p.log_k = j.at("log_k").get<double>();
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Input, std::string("parameter set: ") + e.what());
    }
    p.layout();  // validates block sizes
    return p;
}

// ---------------------------------------------------------------------------
// Likelihood

ZigLikelihood::ZigLikelihood(const ModelSpec& spec, const Panel& panel)
    : ZigLikelihood(spec, panel.stream(spec.stream), panel.covariates.values) {}

ZigLikelihood::ZigLikelihood(const ModelSpec& spec, const RowMatrix& response,
                             const Eigen::MatrixXd& covariates)
    : spec_(spec) {
    m_ = static_cast<int>(response.rows());
    n_ = static_cast<int>(response.cols());
    if (spec_.use_covariates()) {
        if (covariates.rows() != n_)
            throw Error(ErrorKind::Usage, "covariate matrix has " + std::to_string(covariates.rows()) +
                                              " rows, panel has " + std::to_string(n_) + " days");
        covariates_ = covariates;
    } else {
        covariates_.resize(n_, 0);
    }
    layout_ = make_layout(spec_, m_, static_cast<int>(covariates_.cols()));
    design_ = spec_.basis ? spec_.basis->daily_design(n_) : Eigen::MatrixXd(n_, 0);
    init(response);
}

void ZigLikelihood::init(const RowMatrix& response) {
    response_ = response;
    row_start_.assign(static_cast<std::size_t>(m_) + 1, 0);
    for (int i = 0; i < m_; ++i) {
        row_start_[i] = static_cast<long>(pos_day_.size());
        for (int t = 0; t < n_; ++t) {
            double y = response_(i, t);
            if (!std::isfinite(y) || y < 0.0) {
                std::ostringstream msg;
                msg << "response at (wallet " << i << ", day " << t + 1 << ") is " << y
                    << "; expected a finite non-negative value";
                throw Error(ErrorKind::Numeric, msg.str());
            }
            if (y < kDustThreshold) {
                response_(i, t) = 0.0;
                continue;
            }
            pos_day_.push_back(t);
            pos_y_.push_back(y);
            pos_log_y_.push_back(std::log(y));
        }
    }
    row_start_[m_] = static_cast<long>(pos_day_.size());
}

void ZigLikelihood::daily_offsets(const ParameterSet& phi, Eigen::VectorXd& mean_offset,
                                  Eigen::VectorXd& zero_offset) const {
    mean_offset = Eigen::VectorXd::Zero(n_);
    zero_offset = Eigen::VectorXd::Zero(n_);
    if (layout_.df > 0) {
        mean_offset.noalias() += design_ * phi.beta;
        zero_offset.noalias() += design_ * phi.delta;
    }
    if (layout_.n_covariates > 0) {
        mean_offset.noalias() += covariates_ * phi.zeta;
        zero_offset.noalias() += covariates_ * phi.kappa;
    }
}

template <bool WithGradient>
double ZigLikelihood::evaluate(const Eigen::VectorXd& x, Eigen::VectorXd* grad) const {
    const ParameterSet phi = ParameterSet::unpack(layout_, x);
    Eigen::VectorXd mean_offset, zero_offset;
    daily_offsets(phi, mean_offset, zero_offset);

    const double k = std::exp(phi.log_k);
    const double log_k = phi.log_k;
    const double gamma_const = k * log_k - log_gamma(k);
    const bool per_wallet = layout_.n_intercepts > 1;

    Eigen::VectorXd mean_resid, zero_resid;  // dl/d eta summed per day
    if constexpr (WithGradient) {
        grad->setZero(layout_.size());
        mean_resid = Eigen::VectorXd::Zero(n_);
        zero_resid = Eigen::VectorXd::Zero(n_);
    }
    double shape_score = 0.0;  // sum over positive cells of d l / d k minus the digamma term
    double total = 0.0;

    for (int i = 0; i < m_; ++i) {
        const double a = phi.alpha[per_wallet ? i : 0];
        const double g = phi.gamma[per_wallet ? i : 0];
        long ptr = row_start_[i];
        const long end = row_start_[i + 1];
        double row_ll = 0.0, row_alpha = 0.0, row_gamma = 0.0;
        for (int t = 0; t < n_; ++t) {
            const double eta_z = g + zero_offset[t];
            const double e = std::exp(-std::abs(eta_z));
            const double l1p = std::log1p(e);
            if (ptr < end && pos_day_[ptr] == t) {
                const double eta_m = a + mean_offset[t];
                const double ratio = pos_y_[ptr] * std::exp(-eta_m);
                const double log_y = pos_log_y_[ptr];
                // log(1 - pi) = -softplus(eta_z)
                row_ll += -(std::max(eta_z, 0.0) + l1p) + gamma_const - k * eta_m +
                          (k - 1.0) * log_y - k * ratio;
                if constexpr (WithGradient) {
                    const double pi = eta_z >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
                    const double rm = k * (ratio - 1.0);
                    row_alpha += rm;
                    mean_resid[t] += rm;
                    row_gamma -= pi;
                    zero_resid[t] -= pi;
                    shape_score += log_k + 1.0 - eta_m + log_y - ratio;
                }
                ++ptr;
            } else {
                // log pi = -softplus(-eta_z)
                row_ll -= std::max(-eta_z, 0.0) + l1p;
                if constexpr (WithGradient) {
                    const double one_minus_pi = eta_z >= 0.0 ? e / (1.0 + e) : 1.0 / (1.0 + e);
                    row_gamma += one_minus_pi;
                    zero_resid[t] += one_minus_pi;
                }
            }
        }
        total += row_ll;
        if constexpr (WithGradient) {
            (*grad)[layout_.alpha() + (per_wallet ? i : 0)] += row_alpha;
            (*grad)[layout_.gamma() + (per_wallet ? i : 0)] += row_gamma;
        }
    }

    if constexpr (WithGradient) {
        auto& gr = *grad;
        if (layout_.df > 0) {
            gr.segment(layout_.beta(), layout_.df).noalias() = design_.transpose() * mean_resid;
            gr.segment(layout_.delta(), layout_.df).noalias() = design_.transpose() * zero_resid;
        }
        if (layout_.n_covariates > 0) {
            gr.segment(layout_.zeta(), layout_.n_covariates).noalias() =
                covariates_.transpose() * mean_resid;
            gr.segment(layout_.kappa(), layout_.n_covariates).noalias() =
                covariates_.transpose() * zero_resid;
        }
        const double n_pos = static_cast<double>(pos_day_.size());
        // d/d log_k = k * dl/dk, with dl/dk = sum(log k + 1 - psi(k) - log mu + log y - y/mu)
        gr[layout_.log_k()] = k * (shape_score - n_pos * digamma(k));
    }
    return total;
}

double ZigLikelihood::value(const Eigen::VectorXd& x) const { return evaluate<false>(x, nullptr); }

double ZigLikelihood::value_and_gradient(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const {
    return evaluate<true>(x, &grad);
}

Predictors ZigLikelihood::predictors(const ParameterSet& phi) const {
    const auto l = phi.layout();
    if (l.size() != layout_.size() || l.n_intercepts != layout_.n_intercepts)
        throw Error(ErrorKind::Usage, "parameter set does not match the model layout");
    Eigen::VectorXd mo, zo;
    daily_offsets(phi, mo, zo);
    Predictors out{RowMatrix(m_, n_), RowMatrix(m_, n_)};
    const bool per_wallet = layout_.n_intercepts > 1;
    for (int i = 0; i < m_; ++i) {
        const double a = phi.alpha[per_wallet ? i : 0];
        const double g = phi.gamma[per_wallet ? i : 0];
        for (int t = 0; t < n_; ++t) {
            const double eta_m = a + mo[t];
            const double eta_z = g + zo[t];
            if (!std::isfinite(eta_m) || !std::isfinite(eta_z)) {
                std::ostringstream msg;
                msg << "non-finite linear predictor at (wallet " << i << ", day " << t + 1 << ")";
                throw Error(ErrorKind::Numeric, msg.str());
            }
            out.mu(i, t) = std::exp(eta_m);
            out.pi(i, t) = logistic(eta_z);
        }
    }
    return out;
}

Predictors linear_predictors(const ModelSpec& spec, const ParameterSet& phi, const Panel& panel) {
    return ZigLikelihood(spec, panel).predictors(phi);
}

double loglik(const ModelSpec& spec, const ParameterSet& phi, const Panel& panel) {
    ZigLikelihood lik(spec, panel);
    lik.predictors(phi);  // location-aware finiteness check
    return lik.value(phi.pack());
}

Eigen::VectorXd loglik_grad(const ModelSpec& spec, const ParameterSet& phi, const Panel& panel) {
    ZigLikelihood lik(spec, panel);
    lik.predictors(phi);
    Eigen::VectorXd g;
    lik.value_and_gradient(phi.pack(), g);
    return g;
}

}  // namespace zigamma
