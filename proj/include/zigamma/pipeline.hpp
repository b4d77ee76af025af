#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "zigamma/analysis.hpp"
#include "zigamma/bootstrap.hpp"
#include "zigamma/fit.hpp"

namespace zigamma {

inline constexpr const char* kVersion = "0.1.0";
/// Environment variable naming the default output root.
inline constexpr const char* kOutEnvVar = "ZIGAMMA_OUT";

struct RunConfig {
    std::filesystem::path transfers;
    std::string transfers_format = "auto";  // auto | csv | jsonl
    std::filesystem::path covariates;
    std::filesystem::path registry;  // empty: built-in defaults
    std::filesystem::path out = "zigamma-out";

    int n_days = 276;
    int activity_threshold = 5;

    int df = 10;
    std::vector<Variant> variants{Variant::A, Variant::B, Variant::Full};
    std::vector<Stream> streams{kAllStreams.begin(), kAllStreams.end()};
    FitOptions fit;

    int replicates = 1000;
    double alpha = 0.05;
    Curve curve = Curve::Mean;
    Variant band_variant = Variant::B;
    Stream band_stream = Stream::EthSale;
    bool freeze_intercepts = false;

    Variant summary_variant = Variant::Full;
    int ma_window = 10;
    std::vector<DayWindow> windows = default_windows();

    std::uint64_t seed = 1;
    int workers = 1;  // execution detail, never written to outputs

    /// Serializable form. `workers` and `out` are left out so artifacts do
    /// not depend on either.
    nlohmann::json to_json() const;
    /// Overlay the keys present in `j` onto `base`. Relative paths are
    /// resolved against `base_dir`.
    static RunConfig from_json(const nlohmann::json& j, RunConfig base,
                               const std::filesystem::path& base_dir);
    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig load(const std::filesystem::path& path, RunConfig base);
    static RunConfig load(const std::filesystem::path& path);
};

/// FNV-1a 64-bit hash of the canonical config JSON, as 16 hex digits.
std::string config_hash(const RunConfig& config);

/// Status of a command that ran to completion.
enum class CommandStatus { Ok, NotConverged };

std::filesystem::path panel_dir(const RunConfig& c);
std::filesystem::path fit_path(const RunConfig& c, Stream s, Variant v);
std::filesystem::path band_stem(const RunConfig& c, Stream s, Variant v, Curve curve);

CommandStatus cmd_ingest(const RunConfig& config);
CommandStatus cmd_fit(const RunConfig& config);
CommandStatus cmd_bootstrap(const RunConfig& config);
CommandStatus cmd_summarize(const RunConfig& config);
/// Replace the fitted stream of the ingested panel with a draw from the
/// model in `phi_file` (a fit result JSON) and write it as a panel.
CommandStatus cmd_simulate(const RunConfig& config, const std::filesystem::path& phi_file);

}  // namespace zigamma
