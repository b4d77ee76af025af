#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "zigamma/error.hpp"
#include "zigamma/pipeline.hpp"

namespace {

using namespace zigamma;

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitInput = 2;
constexpr int kExitNotConverged = 3;

struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::optional<std::string> out;
    std::vector<std::string> streams;
    std::vector<std::string> variants;
    std::optional<int> replicates;
    std::optional<double> alpha;
    std::optional<std::string> curve;
    std::string phi;
};

void report(const char* kind, const std::string& message) {
    nlohmann::json j{{"error", kind}, {"message", message}};
    std::cerr << j.dump() << "\n";
}

RunConfig resolve_config(const Flags& f, const std::string& command) {
    RunConfig c;
    if (const char* env = std::getenv(kOutEnvVar); env && *env) c.out = env;
    if (!f.config.empty()) c = RunConfig::load(f.config, c);
    if (f.out) c.out = *f.out;
    if (f.seed) c.seed = *f.seed;
    if (f.workers) {
        if (*f.workers < 1) throw Error(ErrorKind::Usage, "--workers must be >= 1");
        c.workers = *f.workers;
    }
    if (f.replicates) c.replicates = *f.replicates;
    if (f.alpha) c.alpha = *f.alpha;
    if (f.curve) {
        auto cv = parse_curve(*f.curve);
        if (!cv) throw Error(ErrorKind::Usage, "--curve must be 'mean' or 'zero'");
        c.curve = *cv;
    }

    std::vector<Stream> streams;
    for (const auto& s : f.streams) {
        auto v = parse_stream(s);
        if (!v) throw Error(ErrorKind::Usage, "unknown stream '" + s + "'");
        streams.push_back(*v);
    }
    std::vector<Variant> variants;
    for (const auto& s : f.variants) {
        auto v = parse_variant(s);
        if (!v) throw Error(ErrorKind::Usage, "unknown variant '" + s + "'");
        variants.push_back(*v);
    }
    if (command == "bootstrap") {
        if (!streams.empty()) c.band_stream = streams.front();
        if (!variants.empty()) c.band_variant = variants.front();
    } else {
        if (!streams.empty()) c.streams = streams;
        if (!variants.empty()) c.variants = variants;
    }
    return c;
}

int to_exit(CommandStatus s) { return s == CommandStatus::Ok ? kExitOk : kExitNotConverged; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Zero-inflated Gamma models for daily wallet panels"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    Flags flags;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", flags.config, "JSON run config");
        sub->add_option("--out", flags.out, std::string("Output directory (default: $") + kOutEnvVar + ")");
        sub->add_option("--seed", flags.seed, "Master RNG seed");
        sub->add_option("--workers", flags.workers, "Worker threads");
    };

    auto* ingest = app.add_subcommand("ingest", "Build the wallet-day panel from transfers and covariates");
    common(ingest);

    auto* fitc = app.add_subcommand("fit", "Fit models A, B and Full");
    common(fitc);
    fitc->add_option("--stream", flags.streams, "Stream(s) to fit");
    fitc->add_option("--variant", flags.variants, "Variant(s) to fit");

    auto* boot = app.add_subcommand("bootstrap", "Parametric-bootstrap simultaneous band");
    common(boot);
    boot->add_option("--stream", flags.streams, "Stream")->expected(1);
    boot->add_option("--variant", flags.variants, "Variant")->expected(1);
    boot->add_option("--B", flags.replicates, "Replicates");
    boot->add_option("--alpha", flags.alpha, "Band level");
    boot->add_option("--curve", flags.curve, "mean | zero");

    auto* summ = app.add_subcommand("summarize", "Skewness, window summaries and plot data");
    common(summ);
    summ->add_option("--stream", flags.streams, "Stream(s)");

    auto* sim = app.add_subcommand("simulate", "Simulate a panel from fitted parameters");
    common(sim);
    sim->add_option("--phi", flags.phi, "Fit result JSON")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        report("usage", e.what());
        return kExitInput;
    }

    try {
        const auto* chosen = app.get_subcommands().front();
        const std::string name = chosen->get_name();
        const RunConfig config = resolve_config(flags, name);
        if (name == "ingest") return to_exit(cmd_ingest(config));
        if (name == "fit") return to_exit(cmd_fit(config));
        if (name == "bootstrap") return to_exit(cmd_bootstrap(config));
        if (name == "summarize") return to_exit(cmd_summarize(config));
        if (name == "simulate") return to_exit(cmd_simulate(config, flags.phi));
        report("usage", "unknown command " + name);
        return kExitInput;
    } catch (const Error& e) {
        report(to_string(e.kind()), e.what());
        switch (e.kind()) {
            case ErrorKind::Input:
            case ErrorKind::Usage:
            case ErrorKind::Degenerate: return kExitInput;
            default: return kExitInternal;
        }
    } catch (const std::exception& e) {
        report("internal", e.what());
        return kExitInternal;
    }
}
