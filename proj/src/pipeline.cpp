#include "zigamma/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <mutex>
#include <thread>

#include <nlohmann/json.hpp>

#include "text_io.hpp"
#include "zigamma/error.hpp"

namespace zigamma {

using json = nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Config

json RunConfig::to_json() const {
    json variants_j = json::array(), streams_j = json::array(), windows_j = json::array();
    for (auto v : variants) variants_j.push_back(to_string(v));
    for (auto s : streams) streams_j.push_back(to_string(s));
    for (const auto& w : windows) windows_j.push_back({{"name", w.name}, {"start", w.start}, {"end", w.end}});
    return {
        {"transfers", transfers.string()},
        {"transfers_format", transfers_format},
        {"covariates", covariates.string()},
        {"registry", registry.string()},
        {"n_days", n_days},
        {"activity_threshold", activity_threshold},
        {"df", df},
        {"variants", variants_j},
        {"streams", streams_j},
        {"fit",
         {{"grad_tol", fit.grad_tol},
          {"rel_tol", fit.rel_tol},
          {"max_iters", fit.max_iters},
          {"ridge_lambda", fit.ridge_lambda},
          {"se_step", fit.se_step}}},
        {"bootstrap",
         {{"B", replicates},
          {"alpha", alpha},
          {"curve", to_string(curve)},
          {"variant", to_string(band_variant)},
          {"stream", to_string(band_stream)},
          {"freeze_intercepts", freeze_intercepts}}},
        {"summary", {{"variant", to_string(summary_variant)}, {"ma_window", ma_window}, {"windows", windows_j}}},
        {"seed", seed},
    };
}

namespace {

Variant variant_or_throw(const std::string& s) {
    auto v = parse_variant(s);
    if (!v) throw Error(ErrorKind::Input, "unknown variant '" + s + "' (expected A, B or Full)");
    return *v;
}

Stream stream_or_throw(const std::string& s) {
    auto v = parse_stream(s);
    if (!v) throw Error(ErrorKind::Input, "unknown stream '" + s + "' (expected eth_buy, eth_sell, stable_buy, stable_sell)");
    return *v;
}

fs::path resolve(const fs::path& p, const fs::path& base_dir) {
    if (p.empty() || p.is_absolute() || base_dir.empty()) return p;
    return base_dir / p;
}

}  // namespace

RunConfig RunConfig::from_json(const json& j, RunConfig c, const fs::path& base_dir) {
    try {
        if (j.contains("transfers")) c.transfers = resolve(j["transfers"].get<std::string>(), base_dir);
        if (j.contains("transfers_format")) c.transfers_format = j["transfers_format"].get<std::string>();
        if (j.contains("covariates")) c.covariates = resolve(j["covariates"].get<std::string>(), base_dir);
        if (j.contains("registry")) c.registry = resolve(j["registry"].get<std::string>(), base_dir);
        if (j.contains("out")) c.out = resolve(j["out"].get<std::string>(), base_dir);
        if (j.contains("n_days")) c.n_days = j["n_days"].get<int>();
        if (j.contains("activity_threshold")) c.activity_threshold = j["activity_threshold"].get<int>();
        if (j.contains("df")) c.df = j["df"].get<int>();
        if (j.contains("variants")) {
            c.variants.clear();
            for (const auto& v : j["variants"]) c.variants.push_back(variant_or_throw(v.get<std::string>()));
        }
        if (j.contains("streams")) {
            c.streams.clear();
            for (const auto& s : j["streams"]) c.streams.push_back(stream_or_throw(s.get<std::string>()));
        }
        if (j.contains("fit")) {
            const auto& f = j["fit"];
            if (f.contains("grad_tol")) c.fit.grad_tol = f["grad_tol"].get<double>();
            if (f.contains("rel_tol")) c.fit.rel_tol = f["rel_tol"].get<double>();
            if (f.contains("max_iters")) c.fit.max_iters = f["max_iters"].get<int>();
            if (f.contains("ridge_lambda")) c.fit.ridge_lambda = f["ridge_lambda"].get<double>();
            if (f.contains("se_step")) c.fit.se_step = f["se_step"].get<double>();
        }
        if (j.contains("bootstrap")) {
            const auto& b = j["bootstrap"];
            if (b.contains("B")) c.replicates = b["B"].get<int>();
            if (b.contains("alpha")) c.alpha = b["alpha"].get<double>();
            if (b.contains("curve")) {
                auto cv = parse_curve(b["curve"].get<std::string>());
                if (!cv) throw Error(ErrorKind::Input, "bootstrap.curve must be 'mean' or 'zero'");
                c.curve = *cv;
            }
            if (b.contains("variant")) c.band_variant = variant_or_throw(b["variant"].get<std::string>());
            if (b.contains("stream")) c.band_stream = stream_or_throw(b["stream"].get<std::string>());
            if (b.contains("freeze_intercepts")) c.freeze_intercepts = b["freeze_intercepts"].get<bool>();
        }
        if (j.contains("summary")) {
            const auto& s = j["summary"];
            if (s.contains("variant")) c.summary_variant = variant_or_throw(s["variant"].get<std::string>());
            if (s.contains("ma_window")) c.ma_window = s["ma_window"].get<int>();
            if (s.contains("windows")) {
                c.windows.clear();
                for (const auto& w : s["windows"])
                    c.windows.push_back({w.at("name").get<std::string>(), w.at("start").get<int>(),
                                         w.at("end").get<int>()});
            }
        }
        if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("workers")) c.workers = j["workers"].get<int>();
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Input, std::string("config: ") + e.what());
    }
    return c;
}

RunConfig RunConfig::load(const fs::path& path, RunConfig base) {
    json j;
    try {
        j = json::parse(detail::read_file(path));
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Input, "config " + path.string() + ": " + e.what());
    }
    return from_json(j, std::move(base), path.parent_path());
}

RunConfig RunConfig::from_json(const json& j) { return from_json(j, RunConfig{}, {}); }

RunConfig RunConfig::load(const fs::path& path) { return load(path, RunConfig{}); }

std::string config_hash(const RunConfig& config) {
    const std::string text = config.to_json().dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------
// Layout of the output directory

fs::path panel_dir(const RunConfig& c) { return c.out / "panel"; }

fs::path fit_path(const RunConfig& c, Stream s, Variant v) {
    return c.out / "fits" / (std::string(to_string(s)) + "_" + to_string(v) + ".json");
}

fs::path band_stem(const RunConfig& c, Stream s, Variant v, Curve curve) {
    return c.out / "bands" / (std::string(to_string(s)) + "_" + to_string(v) + "_" + to_string(curve));
}

namespace {

void write_json(const fs::path& path, const json& j) { detail::write_file(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path, const std::string& what) {
    if (!fs::exists(path))
        throw Error(ErrorKind::Input, "missing " + what + ": " + path.string());
    try {
        return json::parse(detail::read_file(path));
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Input, what + " " + path.string() + ": " + e.what());
    }
}

void write_run_manifest(const RunConfig& c, const std::string& command, const std::vector<std::string>& outputs) {
    write_json(c.out / "config.json", c.to_json());
    write_json(c.out / "manifests" / (command + ".json"),
               {{"command", command},
                {"config_hash", config_hash(c)},
                {"seed", c.seed},
                {"version", kVersion},
                {"outputs", outputs}});
}

Panel load_ingested_panel(const RunConfig& c) {
    if (!fs::exists(panel_dir(c) / "manifest.json"))
        throw Error(ErrorKind::Input, "missing panel: run `ingest` first (" + panel_dir(c).string() + ")");
    return read_panel(panel_dir(c));
}

FitResult load_fit(const RunConfig& c, Stream s, Variant v) {
    return FitResult::from_json(read_json(fit_path(c, s, v), "fit result"));
}

// Runs jobs[0..n) on up to `workers` threads; results land by index.
template <class Fn>
void parallel_for(int n, int workers, Fn&& fn) {
    workers = std::clamp(workers, 1, std::max(n, 1));
    if (workers == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::mutex err_mutex;
    std::exception_ptr first_error;
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (int i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(err_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace

// ---------------------------------------------------------------------------
// Commands

CommandStatus cmd_ingest(const RunConfig& c) {
    if (c.transfers.empty()) throw Error(ErrorKind::Input, "config has no transfers path");
    if (c.covariates.empty()) throw Error(ErrorKind::Input, "config has no covariates path");
    const auto registry = c.registry.empty() ? StablecoinRegistry::defaults() : StablecoinRegistry::load(c.registry);

    TransferFormat format;
    if (c.transfers_format == "auto") format = format_from_path(c.transfers);
    else if (c.transfers_format == "csv") format = TransferFormat::Csv;
    else if (c.transfers_format == "jsonl") format = TransferFormat::Jsonl;
    else throw Error(ErrorKind::Input, "transfers_format must be auto, csv or jsonl");

    auto parsed = parse_transfers(c.transfers, format, registry);
    Panel panel = build_panel(std::move(parsed.records), c.n_days, c.activity_threshold);
    panel.covariates = load_covariates(c.covariates, c.n_days);

    write_panel(panel_dir(c), panel);
    write_rejects_csv(c.out / "rejects.csv", parsed.rejects);
    write_run_manifest(c, "ingest", {"panel/manifest.json", "rejects.csv"});
    return CommandStatus::Ok;
}

CommandStatus cmd_fit(const RunConfig& c) {
    const Panel panel = load_ingested_panel(c);
    const SplineBasis basis = make_basis(panel.n_days, c.df);

    // Each stream is fitted along A -> B -> Full, warm-starting every step
    // from the previous variant.
    std::vector<Variant> order = c.variants;
    std::sort(order.begin(), order.end());
    order.erase(std::unique(order.begin(), order.end()), order.end());

    std::vector<std::vector<FitResult>> per_stream(c.streams.size());
    parallel_for(static_cast<int>(c.streams.size()), c.workers, [&](int si) {
        const ParameterSet* start = nullptr;
        for (auto v : order) {
            ModelSpec spec{v, c.streams[si], basis};
            per_stream[si].push_back(fit(spec, panel, c.fit, start));
            start = &per_stream[si].back().phi_hat;
        }
    });

    std::vector<std::string> outputs;
    std::vector<FitResult> all;
    bool all_converged = true;
    for (const auto& fits : per_stream)
        for (const auto& f : fits) {
            const auto path = fit_path(c, f.spec.stream, f.spec.variant);
            write_json(path, f.to_json());
            auto stem = path;
            stem.replace_extension();
            detail::write_file(stem.string() + "_coefficients.csv", coefficients_csv(f));
            outputs.push_back(fs::relative(path, c.out).string());
            if (f.spec.variant == Variant::Full) detail::write_file(stem.string() + "_intercepts.csv", intercepts_csv(f));
            all_converged = all_converged && f.converged;
            all.push_back(f);
        }
    detail::write_file(c.out / "fits" / "model_summary.csv", model_summary_csv(all));
    outputs.push_back("fits/model_summary.csv");
    write_run_manifest(c, "fit", outputs);
    return all_converged ? CommandStatus::Ok : CommandStatus::NotConverged;
}

CommandStatus cmd_bootstrap(const RunConfig& c) {
    const Panel panel = load_ingested_panel(c);
    const FitResult f = load_fit(c, c.band_stream, c.band_variant);
    if (!f.converged)
        throw Error(ErrorKind::Input, "fit " + fit_path(c, c.band_stream, c.band_variant).string() +
                                          " did not converge; refusing to bootstrap");
    BandOptions opts;
    opts.replicates = c.replicates;
    opts.alpha = c.alpha;
    opts.seed = c.seed;
    opts.workers = c.workers;
    opts.freeze_intercepts = c.freeze_intercepts;
    opts.fit = c.fit;
    const BandResult band = simultaneous_band(f, panel, c.curve, opts);

    const auto stem = band_stem(c, c.band_stream, c.band_variant, c.curve);
    write_json(stem.string() + ".json", band.to_json());
    detail::write_file(stem.string() + ".csv", band.to_csv());
    write_run_manifest(c, "bootstrap",
                       {fs::relative(stem, c.out).string() + ".json", fs::relative(stem, c.out).string() + ".csv"});
    return CommandStatus::Ok;
}

CommandStatus cmd_summarize(const RunConfig& c) {
    const Panel panel = load_ingested_panel(c);
    const fs::path dir = c.out / "summary";

    PlotInputs plots;
    plots.panel = &panel;
    plots.ma_window = c.ma_window;

    std::vector<SkewnessRow> skew;
    std::vector<std::pair<Stream, std::vector<WindowSummary>>> windows;
    for (auto s : c.streams) {
        for (auto v : c.variants) {
            FitResult f = load_fit(c, s, v);
            plots.fits.emplace(std::string(to_string(s)) + "_" + to_string(v), f);
        }
        const auto key = std::string(to_string(s)) + "_" + to_string(c.summary_variant);
        auto it = plots.fits.find(key);
        if (it == plots.fits.end()) {
            plots.fits.emplace(key, load_fit(c, s, c.summary_variant));
            it = plots.fits.find(key);
        }
        windows.emplace_back(s, window_summary(it->second, panel, c.windows));
        if (c.summary_variant == Variant::Full) skew.push_back(intercept_skewness(it->second));
    }

    // Any bands already computed are carried into the plot bundle.
    if (fs::exists(c.out / "bands")) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(c.out / "bands"))
            if (e.path().extension() == ".json") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& p : files) {
            const json j = read_json(p, "band result");
            BandResult b;
            b.which = parse_curve(j.at("curve").get<std::string>()).value_or(Curve::Mean);
            b.alpha = j.at("alpha").get<double>();
            b.replicates = j.at("replicates").get<int>();
            b.c_alpha = j.at("c_alpha").get<double>();
            b.n_failed = j.at("n_failed").get<int>();
            b.grid = j.at("grid").get<std::vector<double>>();
            auto fh = j.at("f_hat").get<std::vector<double>>();
            b.f_hat = Eigen::Map<Eigen::VectorXd>(fh.data(), static_cast<Eigen::Index>(fh.size()));
            plots.bands.emplace(p.stem().string(), std::move(b));
        }
    }

    std::vector<std::string> outputs;
    detail::write_file(dir / "windows.csv", window_summary_csv(windows));
    outputs.push_back("summary/windows.csv");
    if (!skew.empty()) {
        detail::write_file(dir / "skewness.csv", skewness_table_csv(skew));
        outputs.push_back("summary/skewness.csv");
    }
    for (const auto& name : export_plot_data(dir / "plots", plots)) outputs.push_back("summary/plots/" + name);
    write_run_manifest(c, "summarize", outputs);
    return CommandStatus::Ok;
}

CommandStatus cmd_simulate(const RunConfig& c, const fs::path& phi_file) {
    const Panel panel = load_ingested_panel(c);
    const FitResult f = FitResult::from_json(read_json(phi_file, "parameter file"));
    if (f.spec.wallet_intercepts() && f.phi_hat.alpha.size() != panel.n_wallets())
        throw Error(ErrorKind::Input, "parameter file has " + std::to_string(f.phi_hat.alpha.size()) +
                                          " wallet intercepts, panel has " + std::to_string(panel.n_wallets()));
    const Panel sim = simulate_panel(f.spec, f.phi_hat, panel, c.seed);
    write_panel(c.out / "simulated", sim);
    write_run_manifest(c, "simulate", {"simulated/manifest.json"});
    return CommandStatus::Ok;
}

}  // namespace zigamma
