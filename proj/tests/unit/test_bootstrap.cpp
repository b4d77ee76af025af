#include <doctest.h>

#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "helpers.hpp"
#include "oracles.hpp"
#include "zigamma/bootstrap.hpp"
#include "zigamma/error.hpp"

using namespace zigamma;

namespace {

ParameterSet constant_model(const ModelSpec& spec, double mu, double pi, double k) {
    ParameterSet phi = ParameterSet::zeros(make_layout(spec, 1, 0));
    phi.alpha[0] = std::log(mu);
    phi.gamma[0] = pi <= 0.0 ? -800.0 : (pi >= 1.0 ? 800.0 : std::log(pi / (1.0 - pi)));
    phi.log_k = std::log(k);
    return phi;
}

}  // namespace

TEST_CASE("nearest-rank quantile") {
    std::vector<double> d(100);
    std::iota(d.begin(), d.end(), 1.0);
    CHECK(nearest_rank_quantile(d, 0.95) == 95.0);
    CHECK(nearest_rank_quantile(d, 0.99) >= nearest_rank_quantile(d, 0.95));
    CHECK(nearest_rank_quantile({3.0, 1.0, 2.0}, 0.5) == 2.0);
    CHECK(nearest_rank_quantile({3.0, 1.0, 2.0}, 1.0) == 3.0);
}

TEST_CASE("simulate: degenerate and exponential mixtures") {
    ModelSpec spec{Variant::A, Stream::EthSale, std::nullopt};
    const RowMatrix all_zero = simulate(spec, constant_model(spec, 5.0, 1.0, 2.0), 20, 30, Eigen::MatrixXd(30, 0), 1);
    CHECK(all_zero.isZero(0.0));

    const int m = 100, n = 1000;
    const RowMatrix y = simulate(spec, constant_model(spec, 2.0, 0.0, 1.0), m, n, Eigen::MatrixXd(n, 0), 2);
    CHECK((y.array() == 0.0).count() == 0);
    // Exponential(mean 2): sd of the mean is 2 / sqrt(N).
    CHECK(std::abs(y.mean() - 2.0) < 3.0 * 2.0 / std::sqrt(static_cast<double>(m) * n));
}

TEST_CASE("simulate: sparsity at mean pi 0.928") {
    ModelSpec spec{Variant::A, Stream::EthSale, std::nullopt};
    const int m = 100, n = 1000;
    const RowMatrix y = simulate(spec, constant_model(spec, 10.0, 0.928, 1.5), m, n, Eigen::MatrixXd(n, 0), 3);
    const double frac = (y.array() > 0.0).cast<double>().mean();
    const double sd = std::sqrt(0.072 * 0.928 / (static_cast<double>(m) * n));
    CHECK(std::abs(frac - 0.072) < 3.0 * sd);
}

TEST_CASE("simulate is a pure function of the seed") {
    const auto sc = oracle::sparse_full_scenario(10, 50, 3, 1);
    const auto& x = sc.panel.covariates.values;
    const RowMatrix a = simulate(sc.spec, sc.truth, 10, 50, x, 99);
    const RowMatrix b = simulate(sc.spec, sc.truth, 10, 50, x, 99);
    const RowMatrix c = simulate(sc.spec, sc.truth, 10, 50, x, 100);
    CHECK(a == b);
    CHECK(a != c);
    // A cell's draw does not depend on the panel extent.
    const RowMatrix wide = simulate(sc.spec, sc.truth, 10, 50, x, 99);
    CHECK(wide.block(0, 0, 5, 50) == a.block(0, 0, 5, 50));
}

TEST_CASE("simultaneous band: determinism, bounds and dominance over pointwise intervals") {
    const auto sc = oracle::sparse_full_scenario(15, 80, 4, 5);
    ModelSpec spec = sc.spec;
    spec.variant = Variant::B;
    const FitResult f = fit(spec, sc.panel);
    REQUIRE(f.converged);

    BandOptions opts;
    opts.replicates = 100;
    opts.seed = 7;
    opts.workers = 1;
    const BandResult b1 = simultaneous_band(f, sc.panel, Curve::Mean, opts);
    opts.workers = 3;
    const BandResult b3 = simultaneous_band(f, sc.panel, Curve::Mean, opts);
    CHECK(b1.to_json().dump() == b3.to_json().dump());
    CHECK(b1.to_csv() == b3.to_csv());
    CHECK(b1.c_alpha > 0.0);
    CHECK(b1.deviations.size() == 100);
    CHECK(b1.c_alpha == nearest_rank_quantile(b1.deviations, 0.95));

    // The curve is anchored at t = 1, so its pointwise width vanishes there.
    const Eigen::VectorXd pw = pointwise_half_width(f, sc.panel, Curve::Mean, 1.959963984540054);
    const Eigen::VectorXd pw2 = pointwise_half_width(f, sc.panel, Curve::Mean, 2.0 * 1.959963984540054);
    CHECK(pw[0] < 1e-12);
    CHECK(pw.tail(79).minCoeff() > 0.0);
    CHECK((pw2 - 2.0 * pw).cwiseAbs().maxCoeff() < 1e-12);

    const Eigen::VectorXd lo = b1.lower(), hi = b1.upper();
    CHECK(((lo.array() <= b1.f_hat.array()) && (b1.f_hat.array() <= hi.array())).all());

    opts.alpha = 0.01;
    CHECK(simultaneous_band(f, sc.panel, Curve::Mean, opts).c_alpha >= b1.c_alpha);

    const BandResult zero = simultaneous_band(f, sc.panel, Curve::Zero, opts);
    CHECK(zero.c_alpha > 0.0);
}

TEST_CASE("band preconditions") {
    const auto sc = oracle::sparse_full_scenario(8, 40, 3, 6);
    ModelSpec spec = sc.spec;
    spec.variant = Variant::A;
    FitResult f = fit(spec, sc.panel);
    BandOptions opts;
    opts.replicates = 50;
    CHECK_THROWS_AS(simultaneous_band(f, sc.panel, Curve::Mean, opts), Error);
    opts.replicates = 100;
    f.converged = false;
    CHECK_THROWS_AS(simultaneous_band(f, sc.panel, Curve::Mean, opts), Error);
}
