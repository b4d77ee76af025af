#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

namespace zigamma {

/// Natural cubic spline basis without an intercept column.
///
/// Built like R's `splines::ns(intercept = FALSE)`: cubic B-splines on the
/// boundary + interior knots, projected onto the null space of the
/// second-derivative constraints at both boundaries, with the first B-spline
/// dropped. Every basis function is therefore zero at the lower boundary
/// knot, C2 everywhere and linear outside the boundary knots. The dimension
/// equals `interior_knots.size() + 1`.
class SplineBasis {
public:
    SplineBasis(double lower, double upper, std::vector<double> interior_knots);

    int df() const noexcept { return df_; }
    double lower() const noexcept { return lower_; }
    double upper() const noexcept { return upper_; }
    const std::vector<double>& interior_knots() const noexcept { return interior_; }

    /// Row (B_1(t), ..., B_K(t)).
    Eigen::VectorXd evaluate(double t) const;
    /// Design matrix with one row per grid point.
    Eigen::MatrixXd design(std::span<const double> grid) const;
    /// Design matrix on the daily grid 1..n_days.
    Eigen::MatrixXd daily_design(int n_days) const;

    /// f(t) = B(t)^T coeffs on each grid point. Throws on length mismatch.
    Eigen::VectorXd curve(const Eigen::VectorXd& coeffs, std::span<const double> grid) const;

    nlohmann::json to_json() const;
    static SplineBasis from_json(const nlohmann::json& j);

    bool operator==(const SplineBasis& o) const {
        return lower_ == o.lower_ && upper_ == o.upper_ && interior_ == o.interior_;
    }

private:
    Eigen::VectorXd evaluate_inside(double t) const;
    Eigen::VectorXd derivative_inside(double t) const;

    double lower_;
    double upper_;
    std::vector<double> interior_;
    int df_;
    std::vector<double> knots_;  // full B-spline knot sequence
    Eigen::MatrixXd projection_;  // (n_bsplines - 1) x df
    Eigen::VectorXd value_lower_, value_upper_, slope_lower_, slope_upper_;
};

/// Basis for days 1..n_days with `df` columns and df - 1 interior knots
/// equally spaced over the day grid. Requires 3 <= df < n_days.
SplineBasis make_basis(int n_days, int df);

/// Grid 1, 2, ..., n_days as doubles.
std::vector<double> day_grid(int n_days);

}  // namespace zigamma
