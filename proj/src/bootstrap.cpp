#include "zigamma/bootstrap.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <random>
#include <thread>

#include <nlohmann/json.hpp>

#include "text_io.hpp"
#include "zigamma/error.hpp"
#include "zigamma/rng.hpp"

namespace zigamma {

using json = nlohmann::json;

const char* to_string(Curve c) noexcept { return c == Curve::Mean ? "mean" : "zero"; }

std::optional<Curve> parse_curve(std::string_view s) {
    if (s == "mean" || s == "f") return Curve::Mean;
    if (s == "zero" || s == "g") return Curve::Zero;
    return std::nullopt;
}

RowMatrix simulate(const ModelSpec& spec, const ParameterSet& phi, int n_wallets, int n_days,
                   const Eigen::MatrixXd& covariates, std::uint64_t seed) {
    if (!phi.all_finite()) throw Error(ErrorKind::Numeric, "cannot simulate from non-finite parameters");
    const RowMatrix shape = RowMatrix::Zero(n_wallets, n_days);
    const ZigLikelihood lik(spec, shape, covariates);
    const Predictors pred = lik.predictors(phi);
    const double k = phi.shape();

    RowMatrix y(n_wallets, n_days);
    for (int i = 0; i < n_wallets; ++i) {
        for (int t = 0; t < n_days; ++t) {
            rng::Xoshiro256 engine(rng::derive(seed, {static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(t)}));
            if (engine.uniform() < pred.pi(i, t)) {
                y(i, t) = 0.0;
            } else {
                std::gamma_distribution<double> draw(k, pred.mu(i, t) / k);
                y(i, t) = draw(engine);
            }
        }
    }
    return y;
}

Panel simulate_panel(const ModelSpec& spec, const ParameterSet& phi, const Panel& shape, std::uint64_t seed) {
    Panel out = shape;
    out.stream(spec.stream) =
        simulate(spec, phi, shape.n_wallets(), shape.n_days, shape.covariates.values, seed);
    return out;
}

double nearest_rank_quantile(std::vector<double> values, double level) {
    if (values.empty()) throw Error(ErrorKind::Usage, "quantile of an empty sample");
    std::sort(values.begin(), values.end());
    const double n = static_cast<double>(values.size());
    // The small offset keeps e.g. 0.95 * 100 from rounding up to rank 96.
    auto rank = static_cast<long>(std::ceil(level * n - 1e-9));
    rank = std::clamp<long>(rank, 1, static_cast<long>(values.size()));
    return values[static_cast<std::size_t>(rank - 1)];
}

namespace {

const Eigen::VectorXd& curve_coeffs(const ParameterSet& phi, Curve which) {
    return which == Curve::Mean ? phi.beta : phi.delta;
}

}  // namespace

Eigen::VectorXd fitted_curve(const FitResult& fit, Curve which, int n_days) {
    if (!fit.spec.basis) throw Error(ErrorKind::Usage, "model has no temporal spline");
    return fit.spec.basis->daily_design(n_days) * curve_coeffs(fit.phi_hat, which);
}

Eigen::VectorXd pointwise_half_width(const FitResult& fit, const Panel& panel, Curve which, double z,
                                     double ridge_lambda) {
    if (!fit.spec.basis) throw Error(ErrorKind::Usage, "model has no temporal spline");
    const ZigLikelihood lik(fit.spec, panel);
    const auto& l = lik.layout();
    const Eigen::MatrixXd h = observed_information(lik, fit.phi_hat, ridge_lambda);
    const auto d = h.rows();
    const Eigen::MatrixXd cov = h.ldlt().solve(Eigen::MatrixXd::Identity(d, d));
    const int off = which == Curve::Mean ? l.beta() : l.delta();
    const Eigen::MatrixXd block = cov.block(off, off, l.df, l.df);
    const Eigen::MatrixXd design = lik.design();
    Eigen::VectorXd out(design.rows());
    for (Eigen::Index t = 0; t < design.rows(); ++t) {
        const double var = design.row(t) * block * design.row(t).transpose();
        out[t] = z * std::sqrt(std::max(var, 0.0));
    }
    return out;
}

BandResult simultaneous_band(const FitResult& fit, const Panel& panel, Curve which, const BandOptions& opts) {
    if (!fit.converged) throw Error(ErrorKind::Usage, "bootstrap requires a converged fit");
    if (opts.replicates < 100) throw Error(ErrorKind::Usage, "bootstrap needs at least 100 replicates");
    if (!(opts.alpha > 0.0 && opts.alpha < 1.0)) throw Error(ErrorKind::Usage, "alpha must lie in (0, 1)");
    if (!fit.spec.basis) throw Error(ErrorKind::Usage, "model has no temporal spline");

    const ZigLikelihood base(fit.spec, panel);
    const auto& layout = base.layout();
    const int m = panel.n_wallets();
    const int n = panel.n_days;
    const Eigen::MatrixXd covariates = panel.covariates.values;
    const Eigen::VectorXd f_hat = fitted_curve(fit, which, n);
    const Eigen::MatrixXd design = base.design();

    std::vector<int> fixed;
    if (opts.freeze_intercepts && layout.n_intercepts > 1)
        for (int j = 0; j < 2 * layout.n_intercepts; ++j) fixed.push_back(j);

    FitOptions refit_opts = opts.fit;
    refit_opts.compute_se = false;

    const int B = opts.replicates;
    std::vector<double> deviations(B, 0.0);
    std::vector<int> failures(B, 0);

    auto run_replicate = [&](int b) {
        for (int attempt = 0; attempt <= B; ++attempt) {
            const auto seed = rng::derive(opts.seed, {static_cast<std::uint64_t>(b), static_cast<std::uint64_t>(attempt)});
            const RowMatrix y = simulate(fit.spec, fit.phi_hat, m, n, covariates, seed);
            const ZigLikelihood lik(fit.spec, y, covariates);
            if (lik.n_positive() == 0) {
                ++failures[b];
                continue;
            }
            const FitResult r = zigamma::fit(lik, refit_opts, &fit.phi_hat, fixed);
            if (!r.converged) {
                ++failures[b];
                continue;
            }
            const Eigen::VectorXd f_star = design * curve_coeffs(r.phi_hat, which);
            deviations[b] = (f_star - f_hat).cwiseAbs().maxCoeff();
            return;
        }
        deviations[b] = std::numeric_limits<double>::quiet_NaN();
    };

    const int workers = std::max(1, opts.workers);
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int b = next++; b < B; b = next++) run_replicate(b);
    };
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    BandResult out;
    out.which = which;
    out.grid = day_grid(n);
    out.f_hat = f_hat;
    out.alpha = opts.alpha;
    out.replicates = B;
    out.seed = opts.seed;
    for (int f : failures) out.n_failed += f;
    if (out.n_failed > B)
        throw Error(ErrorKind::Instability, "bootstrap instability: " + std::to_string(out.n_failed) +
                                                " failed refits for " + std::to_string(B) + " replicates");
    out.deviations = std::move(deviations);
    out.c_alpha = nearest_rank_quantile(out.deviations, 1.0 - opts.alpha);
    return out;
}

json BandResult::to_json() const {
    const Eigen::VectorXd lo = lower(), hi = upper();
    return {{"curve", to_string(which)},
            {"alpha", alpha},
            {"replicates", replicates},
            {"seed", seed},
            {"c_alpha", c_alpha},
            {"n_failed", n_failed},
            {"grid", grid},
            {"f_hat", std::vector<double>(f_hat.data(), f_hat.data() + f_hat.size())},
            {"lower", std::vector<double>(lo.data(), lo.data() + lo.size())},
            {"upper", std::vector<double>(hi.data(), hi.data() + hi.size())},
            {"deviations", deviations}};
}

std::string BandResult::to_csv() const {
    std::string out = "t,fit,lo,hi\n";
    for (std::size_t r = 0; r < grid.size(); ++r) {
        const auto i = static_cast<Eigen::Index>(r);
        out += detail::format_double(grid[r]) + "," + detail::format_double(f_hat[i]) + "," +
               detail::format_double(f_hat[i] - c_alpha) + "," + detail::format_double(f_hat[i] + c_alpha) + "\n";
    }
    return out;
}

}  // namespace zigamma
