#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "helpers.hpp"
#include "oracles.hpp"
#include "zigamma/error.hpp"
#include "zigamma/fit.hpp"

using namespace zigamma;

TEST_CASE("information criteria") {
    auto ic = information_criteria(146445.5, 23, 168360);
    CHECK(std::abs(ic.aic - 292937.1) <= 0.1);
    CHECK(std::abs(ic.bic - 293167.8) <= 0.1);
    ic = information_criteria(143148.0, 23, 168360);
    CHECK(std::abs(ic.aic - 286342.0) <= 0.1);
    CHECK(std::abs(ic.bic - 286572.8) <= 0.1);
    ic = information_criteria(128344.5, 1245, 168360);
    CHECK(std::abs(ic.bic - 271671.1) <= 0.1);
    CHECK(std::abs(ic.bic - (1245 * std::log(168360.0) + 256689.0)) < 1e-9);
    ic = information_criteria(0.0, 0, 10);
    CHECK(ic.aic == 0.0);
    CHECK(ic.bic == 0.0);
}

TEST_CASE("intercept-only Gamma fit on a panel without zeros") {
    const RowMatrix y = oracle::random_response(15, 20, 0.0, 21);
    ModelSpec spec{Variant::A, Stream::EthSale, std::nullopt};
    const FitResult f = fit(spec, testutil::make_panel(y, Eigen::MatrixXd(20, 0)));
    CHECK(f.converged);
    CHECK(std::abs(f.phi_hat.alpha[0] - std::log(y.mean())) < 1e-6);
    CHECK(std::abs(f.aic - (2.0 * f.n_params + 2.0 * f.nll)) < 1e-9);
    CHECK(std::abs(f.bic - (f.n_params * std::log(static_cast<double>(f.n_obs)) + 2.0 * f.nll)) < 1e-9);
}

TEST_CASE("all-zero stream is degenerate") {
    ModelSpec spec{Variant::B, Stream::EthSale, make_basis(30, 3)};
    const Panel p = testutil::make_panel(RowMatrix::Zero(3, 30), oracle::synthetic_covariates(30, 1));
    CHECK_THROWS_WITH_AS(fit(spec, p), doctest::Contains("degenerate stream"), Error);
}

TEST_CASE("nesting, monotone improvement and determinism on a simulated panel") {
    const auto sc = oracle::sparse_full_scenario(20, 120, 5, 31);
    const auto fits = fit_nested(sc.spec.stream, *sc.spec.basis, sc.panel);
    REQUIRE(fits.size() == 3);
    for (const auto& f : fits) {
        CHECK(f.converged);
        CHECK(f.nll <= f.nll_initial);
    }
    CHECK(fits[2].nll <= fits[1].nll + 1e-6);
    CHECK(fits[1].nll <= fits[0].nll + 1e-6);
    CHECK(fits[0].n_params == 2 + 2 * 5 + 1);
    CHECK(fits[2].n_params == 2 * 20 + 2 * 5 + 4 + 1);

    const auto again = fit_nested(sc.spec.stream, *sc.spec.basis, sc.panel);
    CHECK(again[2].to_json().dump() == fits[2].to_json().dump());
}

TEST_CASE("scale robustness: multiplying Y shifts only the mean intercept") {
    const auto sc = oracle::sparse_full_scenario(20, 120, 4, 41);
    ModelSpec spec = sc.spec;
    spec.variant = Variant::B;
    const FitResult f1 = fit(spec, sc.panel);
    Panel scaled = sc.panel;
    scaled.stream(spec.stream) *= 250.0;
    const FitResult f2 = fit(spec, scaled);
    CHECK(std::abs(f2.phi_hat.alpha[0] - f1.phi_hat.alpha[0] - std::log(250.0)) < 1e-4);
    CHECK(std::abs(f2.phi_hat.log_k - f1.phi_hat.log_k) < 1e-4);
    CHECK((f2.phi_hat.zeta - f1.phi_hat.zeta).cwiseAbs().maxCoeff() < 1e-4);
    const ZigLikelihood l1(spec, sc.panel), l2(spec, scaled);
    const Predictors p1 = l1.predictors(f1.phi_hat), p2 = l2.predictors(f2.phi_hat);
    CHECK((p1.pi - p2.pi).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("standard errors on a quadratic toy likelihood") {
    const Eigen::Vector3d h(4.0, 0.25, 9.0);
    const auto grad = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return h.cwiseProduct(x - Eigen::Vector3d(1, 2, 3)); };
    const StandardErrors se = standard_errors_from_gradient(grad, Eigen::Vector3d(1, 2, 3));
    REQUIRE(se.available);
    for (int j = 0; j < 3; ++j) CHECK(std::abs(se.values[j] - 1.0 / std::sqrt(h[j])) < 1e-6);

    const auto flat = [](const Eigen::VectorXd& x) -> Eigen::VectorXd {
        Eigen::VectorXd g(2);
        g << 2.0 * x[0], 0.0;
        return g;
    };
    const StandardErrors missing = standard_errors_from_gradient(flat, Eigen::Vector2d(0, 0));
    CHECK_FALSE(missing.available);
    CHECK(std::isnan(missing.values[1]));
    CHECK_FALSE(missing.diagnostic.empty());
}

TEST_CASE("coefficient table uses z = estimate / SE") {
    const auto sc = oracle::sparse_full_scenario(15, 100, 4, 51);
    ModelSpec spec = sc.spec;
    spec.variant = Variant::B;
    FitResult f = fit(spec, sc.panel);
    f.wallet_ids = sc.panel.wallet_ids;
    const std::string csv = coefficients_csv(f);
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    CHECK(line == "component,term,estimate,std_error,z_value,p_value");
    int rows = 0;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, ',')) cells.push_back(c);
        REQUIRE(cells.size() == 6);
        const double est = std::stod(cells[2]), se = std::stod(cells[3]), z = std::stod(cells[4]);
        CHECK(z == doctest::Approx(est / se).epsilon(1e-12));
        ++rows;
    }
    CHECK(rows == f.n_params);
    // z convention on published figures: -1.075 / 0.051.
    CHECK(-1.075 / 0.051 == doctest::Approx(-21.08).epsilon(1e-3));
}

TEST_CASE("FitResult JSON round trip") {
    const auto sc = oracle::sparse_full_scenario(8, 60, 3, 61);
    FitResult f = fit(sc.spec, sc.panel);
    const FitResult back = FitResult::from_json(f.to_json());
    CHECK(back.to_json().dump() == f.to_json().dump());
    CHECK(back.phi_hat.pack() == f.phi_hat.pack());
    CHECK(*back.spec.basis == *f.spec.basis);
}

TEST_CASE("simulated-panel SEs track the replicate spread") {
    const int R = 50;
    std::vector<Eigen::VectorXd> est;
    std::vector<Eigen::VectorXd> ses;
    for (int r = 0; r < R; ++r) {
        const auto sc = oracle::sparse_full_scenario(30, 150, 4, 7000 + r);
        const FitResult f = fit(sc.spec, sc.panel);
        REQUIRE(f.se.available);
        const auto l = f.phi_hat.layout();
        Eigen::VectorXd e(5), s(5);
        const int idx[5] = {l.zeta(), l.zeta() + 1, l.kappa(), l.kappa() + 1, l.log_k()};
        for (int q = 0; q < 5; ++q) {
            e[q] = f.phi_hat.pack()[idx[q]];
            s[q] = f.se.values[idx[q]];
        }
        est.push_back(e);
        ses.push_back(s);
    }
    for (int q = 0; q < 5; ++q) {
        double mean = 0.0, mean_se = 0.0;
        for (int r = 0; r < R; ++r) {
            mean += est[r][q] / R;
            mean_se += ses[r][q] / R;
        }
        double var = 0.0;
        for (int r = 0; r < R; ++r) var += (est[r][q] - mean) * (est[r][q] - mean) / (R - 1);
        const double sd = std::sqrt(var);
        CHECK_MESSAGE(std::abs(mean_se - sd) <= 0.3 * sd, "parameter " << q << " mean SE " << mean_se << " vs SD " << sd);
    }
}
