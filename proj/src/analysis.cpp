#include "zigamma/analysis.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "text_io.hpp"
#include "zigamma/error.hpp"

namespace zigamma {

namespace {

std::string fmt(double v) { return std::isfinite(v) ? detail::format_double(v) : "NA"; }
std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : "NA"; }

}  // namespace

int study_day(int year, unsigned month, unsigned day) {
    using namespace std::chrono;
    const sys_days start = std::chrono::year{2022} / April / 1;
    const year_month_day ymd{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}};
    if (!ymd.ok()) throw Error(ErrorKind::Usage, "invalid calendar date");
    return static_cast<int>((sys_days{ymd} - start).count()) + 1;
}

Eigen::VectorXd trailing_mean(const Eigen::VectorXd& x, int window) {
    if (window < 1) throw Error(ErrorKind::Usage, "moving-average window must be >= 1");
    Eigen::VectorXd out(x.size());
    for (Eigen::Index t = 0; t < x.size(); ++t) {
        const Eigen::Index from = std::max<Eigen::Index>(0, t - window + 1);
        out[t] = x.segment(from, t - from + 1).mean();
    }
    return out;
}

ActivitySeries activity_series(const Panel& panel, int ma_window) {
    const int m = panel.n_wallets();
    const int n = panel.n_days;
    ActivitySeries s;
    s.ma_window = ma_window;
    s.share_active = Eigen::VectorXd::Zero(n);
    s.mean_tx_all = Eigen::VectorXd::Zero(n);
    s.mean_tx_active = Eigen::VectorXd::Zero(n);
    for (int t = 0; t < n; ++t) {
        int active = 0;
        double tx_all = 0.0, tx_active = 0.0;
        for (int i = 0; i < m; ++i) {
            bool any = false;
            for (const auto& st : panel.streams) any = any || st(i, t) != 0.0;
            const double c = panel.tx_counts.size() ? panel.tx_counts(i, t) : 0.0;
            tx_all += c;
            if (any) {
                ++active;
                tx_active += c;
            }
        }
        s.share_active[t] = m > 0 ? static_cast<double>(active) / m : 0.0;
        s.mean_tx_all[t] = m > 0 ? tx_all / m : 0.0;
        s.mean_tx_active[t] = active > 0 ? tx_active / active : 0.0;
    }
    s.share_active_ma = trailing_mean(s.share_active, ma_window);
    s.mean_tx_all_ma = trailing_mean(s.mean_tx_all, ma_window);
    s.mean_tx_active_ma = trailing_mean(s.mean_tx_active, ma_window);
    return s;
}

std::string ActivitySeries::to_csv() const {
    std::string out =
        "day_index,share_active,mean_tx_per_wallet,mean_tx_per_active_wallet,share_active_ma,"
        "mean_tx_per_wallet_ma,mean_tx_per_active_wallet_ma\n";
    for (Eigen::Index t = 0; t < share_active.size(); ++t)
        out += std::to_string(t + 1) + "," + fmt(share_active[t]) + "," + fmt(mean_tx_all[t]) + "," +
               fmt(mean_tx_active[t]) + "," + fmt(share_active_ma[t]) + "," + fmt(mean_tx_all_ma[t]) + "," +
               fmt(mean_tx_active_ma[t]) + "\n";
    return out;
}

Skewness skewness(std::span<const double> values) {
    Skewness s;
    const auto n = values.size();
    if (n < 3) {
        s.diagnostic = "skewness needs at least 3 values";
        return s;
    }
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(n);
    double m2 = 0.0, m3 = 0.0;
    for (double v : values) {
        const double d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= static_cast<double>(n);
    m3 /= static_cast<double>(n);
    if (!(m2 > 1e-300)) {
        s.diagnostic = "zero variance";
        return s;
    }
    const double g1 = m3 / std::pow(m2, 1.5);
    const double nn = static_cast<double>(n);
    s.population = g1;
    s.adjusted = g1 * std::sqrt(nn * (nn - 1.0)) / (nn - 2.0);
    return s;
}

SkewnessRow intercept_skewness(const FitResult& full_fit) {
    if (full_fit.spec.variant != Variant::Full)
        throw Error(ErrorKind::Usage, "intercept skewness needs a Full fit with wallet intercepts");
    const auto& a = full_fit.phi_hat.alpha;
    const auto& g = full_fit.phi_hat.gamma;
    return {full_fit.spec.stream, skewness({a.data(), static_cast<std::size_t>(a.size())}),
            skewness({g.data(), static_cast<std::size_t>(g.size())})};
}

std::string skewness_table_csv(const std::vector<SkewnessRow>& rows) {
    std::string out = "Model,Conditional Mean,Zero-inflation,Conditional Mean (adjusted),Zero-inflation (adjusted)\n";
    for (const auto& r : rows)
        out += std::string(label(r.stream)) + "," + fmt(r.conditional_mean.population) + "," +
               fmt(r.zero_inflation.population) + "," + fmt(r.conditional_mean.adjusted) + "," +
               fmt(r.zero_inflation.adjusted) + "\n";
    return out;
}

std::vector<DayWindow> default_windows() {
    return {
        {"Pre-FTX Collapse", study_day(2022, 9, 1), study_day(2022, 9, 30)},
        {"FTX Collapse", study_day(2022, 10, 16), study_day(2022, 11, 15)},
        {"Post-FTX Collapse", study_day(2022, 12, 1), study_day(2022, 12, 31)},
    };
}

std::vector<WindowSummary> window_summary(const FitResult& fit, const Panel& panel,
                                          const std::vector<DayWindow>& windows) {
    for (std::size_t w = 0; w < windows.size(); ++w) {
        const auto& win = windows[w];
        if (win.start > win.end) throw Error(ErrorKind::Usage, "window '" + win.name + "' is empty");
        if (win.start < 1 || win.end > panel.n_days)
            throw Error(ErrorKind::Usage, "window '" + win.name + "' lies outside [1, " +
                                              std::to_string(panel.n_days) + "]");
        for (std::size_t v = 0; v < w; ++v)
            if (!(win.end < windows[v].start || win.start > windows[v].end))
                throw Error(ErrorKind::Usage, "windows '" + windows[v].name + "' and '" + win.name + "' overlap");
    }
    const ZigLikelihood lik(fit.spec, panel);
    const Predictors pred = lik.predictors(fit.phi_hat);
    const auto& y = lik.response();
    const int m = panel.n_wallets();

    std::vector<WindowSummary> out;
    for (const auto& win : windows) {
        WindowSummary s;
        s.window = win;
        double sum_p = 0.0, sum_mu = 0.0, sum_y = 0.0;
        long n_pos = 0;
        for (int i = 0; i < m; ++i)
            for (int t = win.start - 1; t < win.end; ++t) {
                sum_p += 1.0 - pred.pi(i, t);
                sum_mu += pred.mu(i, t);
                if (y(i, t) > 0.0) {
                    ++n_pos;
                    sum_y += y(i, t);
                }
            }
        const double cells = static_cast<double>(m) * (win.end - win.start + 1);
        s.prob_txn = sum_p / cells;
        s.cond_mean = sum_mu / cells;
        s.raw_prob_txn = n_pos / cells;
        s.raw_cond_mean = n_pos > 0 ? sum_y / n_pos : std::numeric_limits<double>::quiet_NaN();
        out.push_back(s);
    }
    return out;
}

std::string window_summary_csv(const std::vector<std::pair<Stream, std::vector<WindowSummary>>>& sections) {
    std::string out =
        "stream,window,start_day,end_day,probability_of_transaction,conditional_mean,"
        "raw_probability_of_transaction,raw_conditional_mean\n";
    for (const auto& [stream, rows] : sections)
        for (const auto& r : rows)
            out += std::string(label(stream)) + "," + r.window.name + "," + std::to_string(r.window.start) + "," +
                   std::to_string(r.window.end) + "," + fmt(r.prob_txn) + "," + fmt(r.cond_mean) + "," +
                   fmt(r.raw_prob_txn) + "," + fmt(r.raw_cond_mean) + "\n";
    return out;
}

std::vector<std::string> export_plot_data(const std::filesystem::path& dir, const PlotInputs& in) {
    if (!in.panel) throw Error(ErrorKind::Input, "plot export needs the panel");
    const Panel& panel = *in.panel;
    std::vector<std::string> written;
    auto emit = [&](const std::string& name, const std::string& body) {
        detail::write_file(dir / name, body);
        written.push_back(name);
    };

    emit("activity.csv", activity_series(panel, in.ma_window).to_csv());

    {
        const auto& cov = panel.covariates;
        const Eigen::MatrixXd raw = cov.raw();
        std::string body = "day_index";
        for (const auto& nme : cov.stats.names) body += "," + nme;
        for (const auto& nme : cov.stats.names) body += "," + nme + "_z";
        body += "\n";
        for (Eigen::Index t = 0; t < cov.values.rows(); ++t) {
            body += std::to_string(t + 1);
            for (Eigen::Index c = 0; c < raw.cols(); ++c) body += "," + fmt(raw(t, c));
            for (Eigen::Index c = 0; c < raw.cols(); ++c) body += "," + fmt(cov.values(t, c));
            body += "\n";
        }
        emit("covariates.csv", body);
    }

    // Wallet intercept distributions and scatters from the Full fits.
    std::map<Stream, const FitResult*> full;
    for (const auto& [key, f] : in.fits) {
        if (f.spec.variant != Variant::Full) continue;
        if (f.wallet_ids != panel.wallet_ids)
            throw Error(ErrorKind::Input, "fit " + key + " was estimated on a different wallet set");
        full[f.spec.stream] = &f;
        std::string body = "wallet_id,alpha,gamma\n";
        for (int i = 0; i < panel.n_wallets(); ++i)
            body += panel.wallet_ids[i] + "," + fmt(f.phi_hat.alpha[i]) + "," + fmt(f.phi_hat.gamma[i]) + "\n";
        emit("intercepts_" + std::string(to_string(f.spec.stream)) + ".csv", body);
    }
    auto scatter = [&](const std::string& name, Stream x, Stream y) {
        if (!full.count(x) || !full.count(y)) return;
        std::string body = std::string("wallet_id,alpha_") + to_string(x) + ",alpha_" + to_string(y) + "\n";
        for (int i = 0; i < panel.n_wallets(); ++i)
            body += panel.wallet_ids[i] + "," + fmt(full[x]->phi_hat.alpha[i]) + "," +
                    fmt(full[y]->phi_hat.alpha[i]) + "\n";
        emit(name, body);
    };
    scatter("scatter_sale_eth_vs_stable.csv", Stream::EthSale, Stream::StableSale);
    scatter("scatter_purchase_eth_vs_stable.csv", Stream::EthPurchase, Stream::StablePurchase);
    scatter("scatter_stable_purchase_vs_eth_purchase.csv", Stream::StablePurchase, Stream::EthPurchase);
    scatter("scatter_stable_sale_vs_eth_sale.csv", Stream::StableSale, Stream::EthSale);

    // Fitted temporal curves for every fit with a spline.
    for (const auto& [key, f] : in.fits) {
        if (!f.spec.basis) continue;
        const Eigen::VectorXd fc = fitted_curve(f, Curve::Mean, panel.n_days);
        const Eigen::VectorXd gc = fitted_curve(f, Curve::Zero, panel.n_days);
        std::string body = "t,log_mu_spline,logit_pi_spline\n";
        for (int t = 0; t < panel.n_days; ++t)
            body += std::to_string(t + 1) + "," + fmt(fc[t]) + "," + fmt(gc[t]) + "\n";
        emit("curves_" + key + ".csv", body);
    }

    for (const auto& [stem, band] : in.bands) emit("band_" + stem + ".csv", band.to_csv());
    return written;
}

}  // namespace zigamma
