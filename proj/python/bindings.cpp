#include <optional>
#include <string>

#include <nlohmann/json.hpp>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "zigamma/analysis.hpp"
#include "zigamma/bootstrap.hpp"
#include "zigamma/error.hpp"
#include "zigamma/fit.hpp"
#include "zigamma/ingest.hpp"
#include "zigamma/pipeline.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace zigamma;

namespace {

py::object to_py(const nlohmann::json& j) {
    return py::module_::import("json").attr("loads")(j.dump());
}

nlohmann::json from_py(const py::object& o) {
    return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

Stream stream_arg(const std::string& s) {
    if (auto v = parse_stream(s)) return *v;
    throw Error(ErrorKind::Usage, "unknown stream '" + s + "'");
}

Variant variant_arg(const std::string& s) {
    if (auto v = parse_variant(s)) return *v;
    throw Error(ErrorKind::Usage, "unknown variant '" + s + "'");
}

Curve curve_arg(const std::string& s) {
    if (auto v = parse_curve(s)) return *v;
    throw Error(ErrorKind::Usage, "unknown curve '" + s + "'");
}

ModelSpec spec_arg(const std::string& variant, std::optional<int> df, int n_days, const std::string& stream) {
    ModelSpec spec{variant_arg(variant), stream_arg(stream), std::nullopt};
    if (df) spec.basis = make_basis(n_days, *df);
    return spec;
}

FitOptions fit_options(const py::dict& kw) {
    FitOptions o;
    if (kw.contains("grad_tol")) o.grad_tol = kw["grad_tol"].cast<double>();
    if (kw.contains("max_iters")) o.max_iters = kw["max_iters"].cast<int>();
    if (kw.contains("ridge_lambda")) o.ridge_lambda = kw["ridge_lambda"].cast<double>();
    if (kw.contains("compute_se")) o.compute_se = kw["compute_se"].cast<bool>();
    return o;
}

CommandStatus run_command(const std::string& command, const fs::path& config, std::optional<fs::path> out,
                          std::optional<std::uint64_t> seed, std::optional<int> workers,
                          std::optional<fs::path> phi) {
    RunConfig c = RunConfig::load(config);
    if (out) c.out = *out;
    if (seed) c.seed = *seed;
    if (workers) c.workers = *workers;
    if (command == "ingest") return cmd_ingest(c);
    if (command == "fit") return cmd_fit(c);
    if (command == "bootstrap") return cmd_bootstrap(c);
    if (command == "summarize") return cmd_summarize(c);
    if (command == "simulate") {
        if (!phi) throw Error(ErrorKind::Usage, "simulate needs phi");
        return cmd_simulate(c, *phi);
    }
    throw Error(ErrorKind::Usage, "unknown command '" + command + "'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Zero-inflated Gamma models for daily wallet panels";
    m.attr("__version__") = kVersion;

    static py::handle exc = py::exception<Error>(m, "ZigammaError", PyExc_ValueError).release();
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::set_error(exc, (std::string(to_string(e.kind())) + ": " + e.what()).c_str());
        }
    });

    py::class_<Panel>(m, "Panel")
        .def_readonly("wallet_ids", &Panel::wallet_ids)
        .def_readonly("n_days", &Panel::n_days)
        .def_readonly("activity_threshold", &Panel::activity_threshold)
        .def_readonly("tx_counts", &Panel::tx_counts)
        .def_property_readonly("n_wallets", &Panel::n_wallets)
        .def_property_readonly("covariates", [](const Panel& p) { return p.covariates.values; })
        .def_property_readonly("covariate_names", [](const Panel& p) { return p.covariates.stats.names; })
        .def("stream", [](const Panel& p, const std::string& s) { return p.stream(stream_arg(s)); }, py::arg("name"))
        .def("write", &write_panel, py::arg("dir"))
        .def_static("read", &read_panel, py::arg("dir"))
        .def_static(
            "from_arrays",
            [](const RowMatrix& y, const Eigen::MatrixXd& x, const std::string& stream) {
                if (x.rows() != y.cols()) throw Error(ErrorKind::Input, "covariates need one row per day");
                Panel p;
                p.n_days = static_cast<int>(y.cols());
                for (Eigen::Index i = 0; i < y.rows(); ++i) p.wallet_ids.push_back("w" + std::to_string(i));
                for (auto& s : p.streams) s = Panel::Matrix::Zero(y.rows(), y.cols());
                p.stream(stream_arg(stream)) = y;
                p.tx_counts = (y.array() > 0).cast<double>();
                p.covariates.values = x;
                for (Eigen::Index c = 0; c < x.cols(); ++c) {
                    p.covariates.stats.names.push_back("x" + std::to_string(c + 1));
                    p.covariates.stats.mean.push_back(0.0);
                    p.covariates.stats.sd.push_back(1.0);
                }
                return p;
            },
            py::arg("y"), py::arg("x"), py::arg("stream") = "eth_sell");

    m.def(
        "build_panel",
        [](const fs::path& transfers, const fs::path& covariates, int n_days, int activity_threshold,
           std::optional<fs::path> registry) {
            const auto reg = registry ? StablecoinRegistry::load(*registry) : StablecoinRegistry::defaults();
            ParseResult parsed = parse_transfers(transfers, format_from_path(transfers), reg);
            Panel p = build_panel(std::move(parsed.records), n_days, activity_threshold);
            p.covariates = load_covariates(covariates, n_days);
            return p;
        },
        py::arg("transfers"), py::arg("covariates"), py::arg("n_days") = 276, py::arg("activity_threshold") = 5,
        py::arg("registry") = py::none());

    m.def(
        "basis_matrix",
        [](int n_days, int df) { return make_basis(n_days, df).daily_design(n_days); }, py::arg("n_days"),
        py::arg("df"));
    m.def(
        "basis_knots", [](int n_days, int df) { return make_basis(n_days, df).interior_knots(); },
        py::arg("n_days"), py::arg("df"));

    m.def(
        "n_params",
        [](const std::string& variant, int df, int n_covariates, int n_wallets) {
            return n_params(variant_arg(variant), df, n_covariates, n_wallets);
        },
        py::arg("variant"), py::arg("df"), py::arg("n_covariates"), py::arg("n_wallets"));
    m.def(
        "information_criteria",
        [](double nll, int k, long n) {
            const auto ic = information_criteria(nll, k, n);
            return py::make_tuple(ic.aic, ic.bic);
        },
        py::arg("nll"), py::arg("n_params"), py::arg("n_obs"));

    m.def(
        "loglik",
        [](const Panel& panel, const Eigen::VectorXd& params, const std::string& variant, std::optional<int> df,
           const std::string& stream) {
            const ZigLikelihood lik(spec_arg(variant, df, panel.n_days, stream), panel);
            if (params.size() != lik.layout().size())
                throw Error(ErrorKind::Usage, "expected " + std::to_string(lik.layout().size()) + " parameters");
            return lik.value(params);
        },
        py::arg("panel"), py::arg("params"), py::arg("variant"), py::arg("df") = py::none(),
        py::arg("stream") = "eth_sell");
    m.def(
        "loglik_grad",
        [](const Panel& panel, const Eigen::VectorXd& params, const std::string& variant, std::optional<int> df,
           const std::string& stream) {
            const ZigLikelihood lik(spec_arg(variant, df, panel.n_days, stream), panel);
            if (params.size() != lik.layout().size())
                throw Error(ErrorKind::Usage, "expected " + std::to_string(lik.layout().size()) + " parameters");
            Eigen::VectorXd g;
            lik.value_and_gradient(params, g);
            return g;
        },
        py::arg("panel"), py::arg("params"), py::arg("variant"), py::arg("df") = py::none(),
        py::arg("stream") = "eth_sell");

    m.def(
        "fit",
        [](const Panel& panel, const std::string& variant, std::optional<int> df, const std::string& stream,
           const py::kwargs& kw) {
            FitResult r = fit(spec_arg(variant, df, panel.n_days, stream), panel, fit_options(kw));
            r.wallet_ids = panel.wallet_ids;
            r.covariate_stats = panel.covariates.stats;
            return to_py(r.to_json());
        },
        py::arg("panel"), py::arg("variant"), py::arg("df") = py::none(), py::arg("stream") = "eth_sell");

    m.def(
        "simulate",
        [](const py::object& fit_result, const Panel& panel, std::uint64_t seed) {
            const FitResult r = FitResult::from_json(from_py(fit_result));
            return simulate(r.spec, r.phi_hat, panel.n_wallets(), panel.n_days, panel.covariates.values, seed);
        },
        py::arg("fit_result"), py::arg("panel"), py::arg("seed"));

    m.def(
        "simultaneous_band",
        [](const py::object& fit_result, const Panel& panel, const std::string& curve, int replicates, double alpha,
           std::uint64_t seed, int workers) {
            const FitResult r = FitResult::from_json(from_py(fit_result));
            BandOptions o;
            o.replicates = replicates;
            o.alpha = alpha;
            o.seed = seed;
            o.workers = workers;
            py::gil_scoped_release release;
            const BandResult b = simultaneous_band(r, panel, curve_arg(curve), o);
            py::gil_scoped_acquire acquire;
            return to_py(b.to_json());
        },
        py::arg("fit_result"), py::arg("panel"), py::arg("curve") = "mean", py::arg("replicates") = 1000,
        py::arg("alpha") = 0.05, py::arg("seed") = 0, py::arg("workers") = 1);

    m.def(
        "skewness",
        [](const std::vector<double>& v) {
            const Skewness s = skewness(v);
            return py::make_tuple(s.population, s.adjusted);
        },
        py::arg("values"));
    m.def("trailing_mean", &trailing_mean, py::arg("x"), py::arg("window"));
    m.def(
        "activity_series",
        [](const Panel& panel, int ma_window) {
            const ActivitySeries s = activity_series(panel, ma_window);
            py::dict d;
            d["share_active"] = s.share_active;
            d["mean_tx_all"] = s.mean_tx_all;
            d["mean_tx_active"] = s.mean_tx_active;
            d["share_active_ma"] = s.share_active_ma;
            d["mean_tx_all_ma"] = s.mean_tx_all_ma;
            d["mean_tx_active_ma"] = s.mean_tx_active_ma;
            return d;
        },
        py::arg("panel"), py::arg("ma_window") = 10);
    m.def("study_day", &study_day, py::arg("year"), py::arg("month"), py::arg("day"));

    m.def(
        "run",
        [](const std::string& command, const fs::path& config, std::optional<fs::path> out,
           std::optional<std::uint64_t> seed, std::optional<int> workers, std::optional<fs::path> phi) {
            return run_command(command, config, out, seed, workers, phi) == CommandStatus::Ok;
        },
        py::arg("command"), py::arg("config"), py::arg("out") = py::none(), py::arg("seed") = py::none(),
        py::arg("workers") = py::none(), py::arg("phi") = py::none());
}
