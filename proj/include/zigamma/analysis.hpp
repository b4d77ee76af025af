#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "zigamma/bootstrap.hpp"
#include "zigamma/fit.hpp"

namespace zigamma {

/// Day index of a calendar date, with 1 April 2022 as day 1.
int study_day(int year, unsigned month, unsigned day);

/// Trailing moving average; the first window-1 entries average whatever
/// history exists.
Eigen::VectorXd trailing_mean(const Eigen::VectorXd& x, int window);

struct ActivitySeries {
    int ma_window = 10;
    Eigen::VectorXd share_active;    // wallets with any nonzero stream / m
    Eigen::VectorXd mean_tx_all;     // transfers per wallet
    Eigen::VectorXd mean_tx_active;  // transfers per active wallet (0 if none active)
    Eigen::VectorXd share_active_ma, mean_tx_all_ma, mean_tx_active_ma;

    std::string to_csv() const;
};

ActivitySeries activity_series(const Panel& panel, int ma_window = 10);

struct Skewness {
    std::optional<double> population;  // m3 / m2^{3/2}, moments about the mean
    std::optional<double> adjusted;    // Fisher-Pearson adjusted, sqrt(n(n-1))/(n-2) * population
    std::string diagnostic;
};

Skewness skewness(std::span<const double> values);

struct SkewnessRow {
    Stream stream;
    Skewness conditional_mean;  // of alpha_i
    Skewness zero_inflation;    // of gamma_i
};

/// Skewness of the wallet intercepts of a Full fit.
SkewnessRow intercept_skewness(const FitResult& full_fit);
/// "Model,Conditional Mean,Zero-inflation" rows, then the adjusted columns.
std::string skewness_table_csv(const std::vector<SkewnessRow>& rows);

struct DayWindow {
    std::string name;
    int start = 1;
    int end = 1;  // inclusive
};

/// Pre-collapse (1-30 Sep 2022), collapse (16 Oct-15 Nov 2022) and
/// post-collapse (1-31 Dec 2022).
std::vector<DayWindow> default_windows();

struct WindowSummary {
    DayWindow window;
    double prob_txn = 0.0;       // mean fitted 1 - pi
    double cond_mean = 0.0;      // mean fitted mu
    double raw_prob_txn = 0.0;   // observed share of nonzero cells
    double raw_cond_mean = 0.0;  // mean of observed positive values (NaN if none)
};

std::vector<WindowSummary> window_summary(const FitResult& fit, const Panel& panel,
                                          const std::vector<DayWindow>& windows);
std::string window_summary_csv(
    const std::vector<std::pair<Stream, std::vector<WindowSummary>>>& sections);

/// Everything the plot exporter can consume. Fits are keyed by
/// "<stream>_<variant>".
struct PlotInputs {
    const Panel* panel = nullptr;
    std::map<std::string, FitResult> fits;
    std::map<std::string, BandResult> bands;  // keyed by file stem
    int ma_window = 10;
};

/// Writes tidy CSVs into `dir` and returns the file names written.
std::vector<std::string> export_plot_data(const std::filesystem::path& dir, const PlotInputs& inputs);

}  // namespace zigamma
