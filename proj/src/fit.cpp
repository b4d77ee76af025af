#include "zigamma/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <ceres/gradient_problem.h>
#include <ceres/gradient_problem_solver.h>
#include <nlohmann/json.hpp>

#include "text_io.hpp"
#include "zigamma/error.hpp"

namespace zigamma {

using json = nlohmann::json;

InformationCriteria information_criteria(double nll, int n_params, long n_obs) {
    if (n_obs <= 0) throw Error(ErrorKind::Usage, "information criteria need n_obs > 0");
    return {2.0 * n_params + 2.0 * nll,
            n_params * std::log(static_cast<double>(n_obs)) + 2.0 * nll};
}

namespace {

double ridge_penalty(const ParameterLayout& l, const Eigen::VectorXd& x, double lambda) {
    if (l.n_intercepts <= 1 || lambda == 0.0) return 0.0;
    return lambda * x.head(2 * l.n_intercepts).squaredNorm();
}

// Negative penalized log-likelihood over the free coordinates.
class Objective final : public ceres::FirstOrderFunction {
public:
    Objective(const ZigLikelihood& lik, double lambda, Eigen::VectorXd base, std::vector<int> free)
        : lik_(lik), lambda_(lik.layout().n_intercepts > 1 ? lambda : 0.0), base_(std::move(base)),
          free_(std::move(free)) {}

    bool Evaluate(const double* params, double* cost, double* gradient) const override {
        Eigen::VectorXd x = expand(params);
        const auto& l = lik_.layout();
        double value;
        if (gradient) {
            Eigen::VectorXd g;
            value = lik_.value_and_gradient(x, g);
            g = -g;
            if (lambda_ != 0.0) g.head(2 * l.n_intercepts) += 2.0 * lambda_ * x.head(2 * l.n_intercepts);
            for (std::size_t j = 0; j < free_.size(); ++j) gradient[j] = g[free_[j]];
            if (!g.allFinite()) return false;
        } else {
            value = lik_.value(x);
        }
        *cost = -value + ridge_penalty(l, x, lambda_);
        return std::isfinite(*cost);
    }

    int NumParameters() const override { return static_cast<int>(free_.size()); }

    Eigen::VectorXd expand(const double* params) const {
        Eigen::VectorXd x = base_;
        for (std::size_t j = 0; j < free_.size(); ++j) x[free_[j]] = params[j];
        return x;
    }

private:
    const ZigLikelihood& lik_;
    double lambda_;
    Eigen::VectorXd base_;
    std::vector<int> free_;
};

double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace

ParameterSet initial_parameters(const ZigLikelihood& lik) {
    const auto& l = lik.layout();
    const auto& y = lik.response();
    const int m = lik.n_wallets();
    const int n = lik.n_days();

    double sum = 0.0, sum_sq = 0.0;
    long n_pos = 0;
    std::vector<double> wallet_sum(m, 0.0);
    std::vector<long> wallet_pos(m, 0);
    for (int i = 0; i < m; ++i)
        for (int t = 0; t < n; ++t)
            if (y(i, t) > 0.0) {
                sum += y(i, t);
                sum_sq += y(i, t) * y(i, t);
                ++n_pos;
                wallet_sum[i] += y(i, t);
                ++wallet_pos[i];
            }
    if (n_pos == 0) throw Error(ErrorKind::Degenerate, "degenerate stream: no positive observations");

    ParameterSet phi = ParameterSet::zeros(l);
    const double mean = sum / n_pos;
    const long n_obs = lik.n_obs();
    if (l.n_intercepts == 1) {
        phi.alpha[0] = std::log(mean);
        phi.gamma[0] = logit((n_obs - n_pos + 1.0) / (n_obs + 2.0));
    } else {
        for (int i = 0; i < m; ++i) {
            phi.alpha[i] = wallet_pos[i] > 0 ? std::log(wallet_sum[i] / wallet_pos[i]) : std::log(mean);
            phi.gamma[i] = logit((n - wallet_pos[i] + 1.0) / (n + 2.0));
        }
    }
    const double var = n_pos > 1 ? (sum_sq - n_pos * mean * mean) / (n_pos - 1.0) : 0.0;
    double k0 = var > 0.0 ? mean * mean / var : 1.0;
    k0 = std::clamp(k0, 0.01, 100.0);
    phi.log_k = std::log(k0);
    return phi;
}

ParameterSet promote(const ParameterSet& from, const ParameterLayout& to) {
    const auto fl = from.layout();
    if (fl.df != to.df) throw Error(ErrorKind::Usage, "cannot warm-start across spline bases of different size");
    ParameterSet p = ParameterSet::zeros(to);
    p.beta = from.beta;
    p.delta = from.delta;
    p.log_k = from.log_k;
    if (fl.n_intercepts == to.n_intercepts) {
        p.alpha = from.alpha;
        p.gamma = from.gamma;
    } else if (fl.n_intercepts == 1) {
        p.alpha.setConstant(from.alpha[0]);
        p.gamma.setConstant(from.gamma[0]);
    } else {
        p.alpha.setConstant(from.alpha.mean());
        p.gamma.setConstant(from.gamma.mean());
    }
    if (fl.n_covariates == to.n_covariates) {
        p.zeta = from.zeta;
        p.kappa = from.kappa;
    } else if (fl.n_covariates != 0 && to.n_covariates != 0) {
        throw Error(ErrorKind::Usage, "cannot warm-start across different covariate sets");
    }
    return p;
}

FitResult fit(const ZigLikelihood& lik, const FitOptions& opts, const ParameterSet* start,
              const std::vector<int>& fixed) {
    const auto& l = lik.layout();
    if (lik.n_obs() == 0) throw Error(ErrorKind::Degenerate, "empty panel");
    if (lik.n_positive() == 0)
        throw Error(ErrorKind::Degenerate, std::string("degenerate stream: ") +
                                               to_string(lik.spec().stream) + " has no positive observations");

    ParameterSet phi0 = start ? promote(*start, l) : initial_parameters(lik);
    if (!phi0.all_finite()) throw Error(ErrorKind::Usage, "starting parameters are not finite");
    const Eigen::VectorXd x0 = phi0.pack();

    std::vector<bool> is_fixed(l.size(), false);
    for (int j : fixed) {
        if (j < 0 || j >= l.size()) throw Error(ErrorKind::Usage, "fixed index out of range");
        is_fixed[j] = true;
    }
    std::vector<int> free;
    for (int j = 0; j < l.size(); ++j)
        if (!is_fixed[j]) free.push_back(j);

    auto* objective = new Objective(lik, opts.ridge_lambda, x0, free);
    std::vector<double> params(free.size());
    for (std::size_t j = 0; j < free.size(); ++j) params[j] = x0[free[j]];

    double cost0 = 0.0;
    if (!objective->Evaluate(params.data(), &cost0, nullptr))
        throw Error(ErrorKind::Numeric, "objective is not finite at the starting point");

    ceres::GradientProblemSolver::Options options;
    options.line_search_direction_type = ceres::LBFGS;
    options.line_search_type = ceres::WOLFE;
    options.max_lbfgs_rank = 10;
    options.gradient_tolerance = opts.grad_tol;
    options.function_tolerance = opts.rel_tol;
    options.parameter_tolerance = 0.0;
    options.logging_type = ceres::SILENT;
    options.minimizer_progress_to_stdout = false;
    ceres::GradientProblem problem(objective);  // takes ownership

    // A relative-change stop with the gradient still above tolerance may be
    // an artefact of stale curvature pairs, so the solver is restarted with
    // fresh memory a bounded number of times while it keeps improving.
    constexpr int kMaxRestarts = 2;
    std::vector<double> grad_free(free.size());
    auto sup_norm = [&] {
        double g = 0.0;
        for (double v : grad_free) g = std::max(g, std::abs(v));
        return g;
    };
    double cost1 = cost0;
    double grad_norm = 0.0;
    int iterations = 0;
    std::string message;
    bool converged = false;
    for (int pass = 0; pass <= kMaxRestarts; ++pass) {
        options.max_num_iterations = std::max(opts.max_iters - iterations, 0);
        ceres::GradientProblemSolver::Summary summary;
        ceres::Solve(options, problem, params.data(), &summary);
        iterations += std::max(static_cast<int>(summary.iterations.size()) - 1, 0);
        message = summary.message;

        const double before = cost1;
        if (!problem.Evaluate(params.data(), &cost1, grad_free.data())) {
            converged = false;
            break;
        }
        grad_norm = sup_norm();
        converged = grad_norm <= opts.grad_tol || summary.termination_type == ceres::CONVERGENCE;
        if (grad_norm <= opts.grad_tol || !converged || !(cost1 < before) || iterations >= opts.max_iters) break;
    }

    if (!std::isfinite(cost1) || cost1 > cost0) {
        // Never report a point worse than the start.
        for (std::size_t j = 0; j < free.size(); ++j) params[j] = x0[free[j]];
        problem.Evaluate(params.data(), &cost1, grad_free.data());
        grad_norm = sup_norm();
        converged = false;
    }

    Eigen::VectorXd x = x0;
    for (std::size_t j = 0; j < free.size(); ++j) x[free[j]] = params[j];
    FitResult r;
    r.spec = lik.spec();
    r.phi_hat = ParameterSet::unpack(l, x);
    r.penalty = ridge_penalty(l, x, opts.ridge_lambda);
    r.nll = -lik.value(x);
    r.nll_initial = -lik.value(x0);
    r.n_obs = lik.n_obs();
    r.n_positive = lik.n_positive();
    r.n_params = n_params(r.spec.variant, r.spec.df(), l.n_covariates, lik.n_wallets());
    const auto ic = information_criteria(r.nll, r.n_params, r.n_obs);
    r.aic = ic.aic;
    r.bic = ic.bic;
    r.iterations = iterations;
    r.grad_norm = grad_norm;
    r.termination = message;
    r.converged = converged;
    if (opts.compute_se) r.se = standard_errors(lik, r.phi_hat, opts.ridge_lambda, opts.se_step);
    return r;
}

FitResult fit(const ModelSpec& spec, const Panel& panel, const FitOptions& opts, const ParameterSet* start) {
    ZigLikelihood lik(spec, panel);
    FitResult r = fit(lik, opts, start);
    r.wallet_ids = panel.wallet_ids;
    r.covariate_stats = panel.covariates.stats;
    return r;
}

std::vector<FitResult> fit_nested(Stream stream, const SplineBasis& basis, const Panel& panel,
                                  const FitOptions& opts) {
    std::vector<FitResult> out;
    const ParameterSet* start = nullptr;
    for (auto v : {Variant::A, Variant::B, Variant::Full}) {
        ModelSpec spec{v, stream, basis};
        out.push_back(fit(spec, panel, opts, start));
        start = &out.back().phi_hat;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Standard errors

namespace {

Eigen::MatrixXd fd_hessian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& grad,
                           const Eigen::VectorXd& x_hat, double step) {
    const auto d = x_hat.size();
    Eigen::MatrixXd h(d, d);
    Eigen::VectorXd x = x_hat;
    for (Eigen::Index j = 0; j < d; ++j) {
        const double hj = step * std::max(1.0, std::abs(x_hat[j]));
        x[j] = x_hat[j] + hj;
        const Eigen::VectorXd gp = grad(x);
        x[j] = x_hat[j] - hj;
        const Eigen::VectorXd gm = grad(x);
        x[j] = x_hat[j];
        h.col(j) = (gp - gm) / (2.0 * hj);
    }
    return 0.5 * (h + h.transpose());
}

StandardErrors invert_information(const Eigen::MatrixXd& h) {
    const auto d = h.rows();
    StandardErrors se;
    se.values = Eigen::VectorXd::Constant(d, std::numeric_limits<double>::quiet_NaN());
    if (!h.allFinite()) {
        se.diagnostic = "information matrix has non-finite entries";
        return se;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h);
    const auto& ev = eig.eigenvalues();
    const double lo = ev.minCoeff();
    const double hi = ev.maxCoeff();
    se.condition_number = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    if (!(lo > 0.0) || se.condition_number > 1e14) {
        std::ostringstream msg;
        msg << "information matrix is singular or not positive definite (min eigenvalue " << lo
            << ", condition number " << se.condition_number << ")";
        se.diagnostic = msg.str();
        return se;
    }
    const Eigen::MatrixXd& v = eig.eigenvectors();
    const Eigen::ArrayXd inv_ev = ev.cwiseInverse().array();
    for (Eigen::Index j = 0; j < d; ++j)
        se.values[j] = std::sqrt((v.row(j).transpose().array().square() * inv_ev).sum());
    se.available = true;
    return se;
}

}  // namespace

StandardErrors standard_errors_from_gradient(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& grad, const Eigen::VectorXd& x_hat,
    double step) {
    return invert_information(fd_hessian(grad, x_hat, step));
}

Eigen::MatrixXd observed_information(const ZigLikelihood& lik, const ParameterSet& phi_hat,
                                     double ridge_lambda, double step) {
    const auto& l = lik.layout();
    const double lambda = l.n_intercepts > 1 ? ridge_lambda : 0.0;
    auto grad = [&](const Eigen::VectorXd& x) {
        Eigen::VectorXd g;
        lik.value_and_gradient(x, g);
        g = -g;
        if (lambda != 0.0) g.head(2 * l.n_intercepts) += 2.0 * lambda * x.head(2 * l.n_intercepts);
        return g;
    };
    return fd_hessian(grad, phi_hat.pack(), step);
}

StandardErrors standard_errors(const ZigLikelihood& lik, const ParameterSet& phi_hat, double ridge_lambda,
                               double step) {
    return invert_information(observed_information(lik, phi_hat, ridge_lambda, step));
}

StandardErrors standard_errors(const ModelSpec& spec, const ParameterSet& phi_hat, const Panel& panel,
                               double ridge_lambda, double step) {
    return standard_errors(ZigLikelihood(spec, panel), phi_hat, ridge_lambda, step);
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

json nullable(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double two_sided_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

std::string fmt(double v) { return std::isfinite(v) ? detail::format_double(v) : "NA"; }

}  // namespace

json FitResult::to_json() const {
    json se_values = json::array();
    for (Eigen::Index j = 0; j < se.values.size(); ++j) se_values.push_back(nullable(se.values[j]));
    json spec_json = {{"variant", to_string(spec.variant)}, {"stream", to_string(spec.stream)}};
    spec_json["basis"] = spec.basis ? spec.basis->to_json() : json(nullptr);
    return {
        {"spec", spec_json},
        {"parameters", phi_hat.to_json()},
        {"shape", phi_hat.shape()},
        {"nll", nll},
        {"nll_initial", nll_initial},
        {"penalty", penalty},
        {"n_obs", n_obs},
        {"n_positive", n_positive},
        {"n_params", n_params},
        {"residual_df", residual_df()},
        {"aic", aic},
        {"bic", bic},
        {"converged", converged},
        {"iterations", iterations},
        {"grad_norm", grad_norm},
        {"termination", termination},
        {"standard_errors",
         {{"available", se.available},
          {"condition_number", nullable(se.condition_number)},
          {"diagnostic", se.diagnostic},
          {"names", phi_hat.layout().names(wallet_ids, covariate_stats.names)},
          {"values", se_values}}},
        {"wallet_ids", wallet_ids},
        {"covariate_stats",
         {{"names", covariate_stats.names}, {"mean", covariate_stats.mean}, {"sd", covariate_stats.sd}}},
    };
}

FitResult FitResult::from_json(const json& j) {
    FitResult r;
    try {
        const auto& s = j.at("spec");
        auto v = parse_variant(s.at("variant").get<std::string>());
        auto st = parse_stream(s.at("stream").get<std::string>());
        if (!v || !st) throw Error(ErrorKind::Input, "fit result: unknown variant or stream");
        r.spec.variant = *v;
        r.spec.stream = *st;
        if (!s.at("basis").is_null()) r.spec.basis = SplineBasis::from_json(s.at("basis"));
        r.phi_hat = ParameterSet::from_json(j.at("parameters"));
        r.nll = j.at("nll").get<double>();
        r.nll_initial = j.at("nll_initial").get<double>();
        r.penalty = j.at("penalty").get<double>();
        r.n_obs = j.at("n_obs").get<long>();
        r.n_positive = j.at("n_positive").get<long>();
        r.n_params = j.at("n_params").get<int>();
        r.aic = j.at("aic").get<double>();
        r.bic = j.at("bic").get<double>();
        r.converged = j.at("converged").get<bool>();
        r.iterations = j.at("iterations").get<int>();
        r.grad_norm = j.at("grad_norm").get<double>();
        r.termination = j.at("termination").get<std::string>();
        const auto& se = j.at("standard_errors");
        r.se.available = se.at("available").get<bool>();
        r.se.condition_number = se.at("condition_number").is_null()
                                    ? std::numeric_limits<double>::infinity()
                                    : se.at("condition_number").get<double>();
        r.se.diagnostic = se.at("diagnostic").get<std::string>();
        const auto& vals = se.at("values");
        r.se.values.resize(static_cast<Eigen::Index>(vals.size()));
        for (std::size_t i = 0; i < vals.size(); ++i)
            r.se.values[static_cast<Eigen::Index>(i)] =
                vals[i].is_null() ? std::numeric_limits<double>::quiet_NaN() : vals[i].get<double>();
        r.wallet_ids = j.at("wallet_ids").get<std::vector<std::string>>();
        const auto& cs = j.at("covariate_stats");
        r.covariate_stats.names = cs.at("names").get<std::vector<std::string>>();
        r.covariate_stats.mean = cs.at("mean").get<std::vector<double>>();
        r.covariate_stats.sd = cs.at("sd").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Input, std::string("fit result: ") + e.what());
    }
    return r;
}

std::string coefficients_csv(const FitResult& fit) {
    const auto l = fit.phi_hat.layout();
    const Eigen::VectorXd x = fit.phi_hat.pack();
    const auto names = l.names(fit.wallet_ids, fit.covariate_stats.names);
    std::string out = "component,term,estimate,std_error,z_value,p_value\n";
    const int first = l.n_intercepts == 1 ? 0 : 2 * l.n_intercepts;
    for (int j = first; j < l.size(); ++j) {
        const auto& name = names[j];
        const auto colon = name.find(':');
        const std::string component = colon == std::string::npos ? "shape" : name.substr(0, colon);
        const std::string term = colon == std::string::npos ? name : name.substr(colon + 1);
        const double est = x[j];
        const double se = j < fit.se.values.size() ? fit.se.values[j] : std::numeric_limits<double>::quiet_NaN();
        const double z = est / se;
        out += component + "," + term + "," + fmt(est) + "," + fmt(se) + "," + fmt(z) + "," +
               fmt(two_sided_p(z)) + "\n";
    }
    return out;
}

std::string intercepts_csv(const FitResult& fit) {
    const auto l = fit.phi_hat.layout();
    std::string out = "wallet_id,alpha,alpha_se,gamma,gamma_se\n";
    if (l.n_intercepts <= 1) return out;
    auto se_at = [&](int j) {
        return j < fit.se.values.size() ? fit.se.values[j] : std::numeric_limits<double>::quiet_NaN();
    };
    for (int i = 0; i < l.n_intercepts; ++i) {
        const std::string id = i < static_cast<int>(fit.wallet_ids.size()) ? fit.wallet_ids[i] : std::to_string(i);
        out += id + "," + fmt(fit.phi_hat.alpha[i]) + "," + fmt(se_at(l.alpha() + i)) + "," +
               fmt(fit.phi_hat.gamma[i]) + "," + fmt(se_at(l.gamma() + i)) + "\n";
    }
    return out;
}

std::string model_summary_csv(const std::vector<FitResult>& fits) {
    std::string out = "stream,model,negative_log_likelihood,residual_df,aic,bic,n_params,converged\n";
    for (const auto& f : fits) {
        out += std::string(label(f.spec.stream)) + "," +
               (f.spec.variant == Variant::Full ? std::string("Full Model")
                                                : "Model " + std::string(to_string(f.spec.variant))) +
               "," + fmt(f.nll) + "," + std::to_string(f.residual_df()) + "," + fmt(f.aic) + "," + fmt(f.bic) +
               "," + std::to_string(f.n_params) + "," + (f.converged ? "true" : "false") + "\n";
    }
    return out;
}

}  // namespace zigamma
