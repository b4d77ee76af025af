#include "zigamma/basis.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "zigamma/error.hpp"

namespace zigamma {

namespace {

constexpr int kOrder = 4;  // cubic

// Values (deriv = 0) or derivatives of all B-splines of the given order at x.
// Uses the convention that x equal to the last knot belongs to the last
// non-degenerate interval, so the basis is left-continuous at the upper end.
Eigen::VectorXd bspline(const std::vector<double>& knots, int order, double x, int deriv) {
    const int n_basis = static_cast<int>(knots.size()) - order;
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n_basis);
    if (deriv > 0) {
        const Eigen::VectorXd lower = bspline(knots, order - 1, x, deriv - 1);
        for (int i = 0; i < n_basis; ++i) {
            const double d1 = knots[i + order - 1] - knots[i];
            const double d2 = knots[i + order] - knots[i + 1];
            double v = 0.0;
            if (d1 > 0.0) v += lower[i] / d1;
            if (d2 > 0.0) v -= lower[i + 1] / d2;
            out[i] = (order - 1) * v;
        }
        return out;
    }

    // Order-1 indicators.
    const int n0 = static_cast<int>(knots.size()) - 1;
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n0);
    int span = -1;
    for (int i = 0; i < n0; ++i)
        if (knots[i] <= x && x < knots[i + 1]) span = i;
    if (span < 0 && x == knots.back()) {
        for (int i = n0 - 1; i >= 0; --i)
            if (knots[i] < knots[i + 1]) {
                span = i;
                break;
            }
    }
    if (span < 0) return out;
    b[span] = 1.0;

    for (int k = 2; k <= order; ++k) {
        Eigen::VectorXd next = Eigen::VectorXd::Zero(n0 - k + 1);
        for (int i = 0; i < n0 - k + 1; ++i) {
            double v = 0.0;
            const double d1 = knots[i + k - 1] - knots[i];
            const double d2 = knots[i + k] - knots[i + 1];
            if (d1 > 0.0) v += (x - knots[i]) / d1 * b[i];
            if (d2 > 0.0) v += (knots[i + k] - x) / d2 * b[i + 1];
            next[i] = v;
        }
        b = std::move(next);
    }
    return b;
}

}  // namespace

SplineBasis::SplineBasis(double lower, double upper, std::vector<double> interior_knots)
    : lower_(lower), upper_(upper), interior_(std::move(interior_knots)) {
    if (!(lower_ < upper_)) throw Error(ErrorKind::Usage, "spline boundary knots must be increasing");
    for (std::size_t j = 0; j < interior_.size(); ++j) {
        if (!(interior_[j] > lower_ && interior_[j] < upper_))
            throw Error(ErrorKind::Usage, "interior knot outside the boundary knots");
        if (j > 0 && !(interior_[j] > interior_[j - 1]))
            throw Error(ErrorKind::Usage, "interior knots must be strictly increasing");
    }
    df_ = static_cast<int>(interior_.size()) + 1;

    knots_.assign(kOrder, lower_);
    knots_.insert(knots_.end(), interior_.begin(), interior_.end());
    knots_.insert(knots_.end(), kOrder, upper_);
    const int n_basis = static_cast<int>(knots_.size()) - kOrder;  // df + 3

    // Second-derivative constraints at both boundaries, first B-spline dropped.
    Eigen::MatrixXd constraint(n_basis - 1, 2);
    constraint.col(0) = bspline(knots_, kOrder, lower_, 2).tail(n_basis - 1);
    constraint.col(1) = bspline(knots_, kOrder, upper_, 2).tail(n_basis - 1);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(constraint);
    const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n_basis - 1, n_basis - 1);
    projection_ = q.rightCols(n_basis - 3);

    value_lower_ = evaluate_inside(lower_);
    value_upper_ = evaluate_inside(upper_);
    slope_lower_ = derivative_inside(lower_);
    slope_upper_ = derivative_inside(upper_);
}

Eigen::VectorXd SplineBasis::evaluate_inside(double t) const {
    const Eigen::VectorXd b = bspline(knots_, kOrder, t, 0);
    return projection_.transpose() * b.tail(b.size() - 1);
}

Eigen::VectorXd SplineBasis::derivative_inside(double t) const {
    const Eigen::VectorXd b = bspline(knots_, kOrder, t, 1);
    return projection_.transpose() * b.tail(b.size() - 1);
}

Eigen::VectorXd SplineBasis::evaluate(double t) const {
    if (t < lower_) return value_lower_ + (t - lower_) * slope_lower_;
    if (t > upper_) return value_upper_ + (t - upper_) * slope_upper_;
    return evaluate_inside(t);
}

Eigen::MatrixXd SplineBasis::design(std::span<const double> grid) const {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(grid.size()), df_);
    for (std::size_t r = 0; r < grid.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = evaluate(grid[r]);
    return out;
}

Eigen::MatrixXd SplineBasis::daily_design(int n_days) const {
    const auto grid = day_grid(n_days);
    return design(grid);
}

Eigen::VectorXd SplineBasis::curve(const Eigen::VectorXd& coeffs, std::span<const double> grid) const {
    if (coeffs.size() != df_)
        throw Error(ErrorKind::Usage, "spline coefficient vector has length " +
                                          std::to_string(coeffs.size()) + ", basis has " +
                                          std::to_string(df_) + " columns");
    return design(grid) * coeffs;
}

nlohmann::json SplineBasis::to_json() const {
    return {{"kind", "natural_cubic"},
            {"df", df_},
            {"boundary_knots", {lower_, upper_}},
            {"interior_knots", interior_}};
}

SplineBasis SplineBasis::from_json(const nlohmann::json& j) {
    const auto b = j.at("boundary_knots").get<std::vector<double>>();
    if (b.size() != 2) throw Error(ErrorKind::Input, "basis: boundary_knots must have two entries");
    SplineBasis basis(b[0], b[1], j.at("interior_knots").get<std::vector<double>>());
    if (j.contains("df") && j.at("df").get<int>() != basis.df())
        throw Error(ErrorKind::Input, "basis: df does not match the knot count");
    return basis;
}

SplineBasis make_basis(int n_days, int df) {
    if (df < 3) throw Error(ErrorKind::Usage, "natural cubic requires df >= 3");
    if (n_days <= df)
        throw Error(ErrorKind::Usage, "n_days (" + std::to_string(n_days) + ") must exceed df (" +
                                          std::to_string(df) + ")");
    const double lo = 1.0;
    const double hi = static_cast<double>(n_days);
    std::vector<double> interior;
    for (int j = 1; j < df; ++j) interior.push_back(lo + (hi - lo) * j / df);
    return SplineBasis(lo, hi, std::move(interior));
}

std::vector<double> day_grid(int n_days) {
    std::vector<double> g(static_cast<std::size_t>(std::max(n_days, 0)));
    for (int t = 0; t < n_days; ++t) g[t] = t + 1.0;
    return g;
}

}  // namespace zigamma
