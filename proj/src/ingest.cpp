#include "zigamma/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <tuple>

#include <nlohmann/json.hpp>

#include "text_io.hpp"
#include "zigamma/error.hpp"

namespace zigamma {

using json = nlohmann::json;
namespace fs = std::filesystem;

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::Input: return "input";
        case ErrorKind::Degenerate: return "degenerate";
        case ErrorKind::Numeric: return "numeric";
        case ErrorKind::Instability: return "instability";
        case ErrorKind::Usage: return "usage";
    }
    return "unknown";
}

const char* to_string(Direction d) noexcept { return d == Direction::Buy ? "buy" : "sell"; }

const char* to_string(Category c) noexcept {
    switch (c) {
        case Category::External: return "external";
        case Category::Internal: return "internal";
        case Category::Erc20: return "erc20";
        case Category::Erc721: return "erc721";
        case Category::Erc1155: return "erc1155";
    }
    return "?";
}

const char* to_string(AssetClass a) noexcept {
    switch (a) {
        case AssetClass::Eth: return "eth";
        case AssetClass::Stablecoin: return "stablecoin";
        case AssetClass::Other: return "other";
    }
    return "?";
}

const char* to_string(Stream s) noexcept {
    switch (s) {
        case Stream::EthPurchase: return "eth_buy";
        case Stream::EthSale: return "eth_sell";
        case Stream::StablePurchase: return "stable_buy";
        case Stream::StableSale: return "stable_sell";
    }
    return "?";
}

const char* label(Stream s) noexcept {
    switch (s) {
        case Stream::EthPurchase: return "Ethereum Purchase";
        case Stream::EthSale: return "Ethereum Sale";
        case Stream::StablePurchase: return "Stablecoin Purchase";
        case Stream::StableSale: return "Stablecoin Sale";
    }
    return "?";
}

std::optional<Direction> parse_direction(std::string_view s) {
    const auto v = detail::to_lower(detail::trim(s));
    if (v == "buy") return Direction::Buy;
    if (v == "sell") return Direction::Sell;
    return std::nullopt;
}

std::optional<Category> parse_category(std::string_view s) {
    auto v = detail::to_lower(detail::trim(s));
    std::erase(v, '-');
    if (v == "external") return Category::External;
    if (v == "internal") return Category::Internal;
    if (v == "erc20") return Category::Erc20;
    if (v == "erc721") return Category::Erc721;
    if (v == "erc1155") return Category::Erc1155;
    return std::nullopt;
}

std::optional<Stream> parse_stream(std::string_view s) {
    for (auto st : kAllStreams)
        if (s == to_string(st)) return st;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Stablecoin registry

StablecoinRegistry::StablecoinRegistry(std::map<std::string, std::string> entries) {
    for (auto& [addr, sym] : entries) entries_.emplace(detail::to_lower(detail::trim(addr)), sym);
}

StablecoinRegistry StablecoinRegistry::defaults() {
    return StablecoinRegistry({
        {"0xa0b86991c6218b36c1d19d4a2e9eb0ce3606eb48", "USDC"},
        {"0xdac17f958d2ee523a2206206994597c13d831ec7", "USDT"},
        {"0x4fabb145d64652a948d72533023f6e7a623c7c53", "BUSD"},
        {"0x0000000000085d4780b73119b644ae5ecd22b376", "TUSD"},
        {"0x056fd409e1d7a124bd7017459dfea2f387b6d5cd", "GUSD"},
        {"0x6b175474e89094c44da98b954eedeac495271d0f", "DAI"},
        {"0x853d955acef822db058eb8505911ed77f175b99e", "FRAX"},
    });
}

StablecoinRegistry StablecoinRegistry::load(const fs::path& path) {
    json j;
    try {
        j = json::parse(detail::read_file(path));
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Input, "registry " + path.string() + ": " + e.what());
    }
    if (!j.is_object() || j.empty())
        throw Error(ErrorKind::Input, "registry " + path.string() + " must be a non-empty object");
    std::map<std::string, std::string> entries;
    for (auto& [k, v] : j.items()) {
        if (!v.is_string())
            throw Error(ErrorKind::Input, "registry entry " + k + " is not a string symbol");
        entries.emplace(k, v.get<std::string>());
    }
    return StablecoinRegistry(std::move(entries));
}

bool StablecoinRegistry::contains(std::string_view token_id) const {
    return entries_.count(detail::to_lower(detail::trim(token_id))) > 0;
}

std::optional<std::string> StablecoinRegistry::symbol(std::string_view token_id) const {
    auto it = entries_.find(detail::to_lower(detail::trim(token_id)));
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

AssetClass classify_asset(std::string_view token_id, Category category,
                          const StablecoinRegistry& registry) {
    switch (category) {
        case Category::External:
        case Category::Internal: return AssetClass::Eth;
        case Category::Erc20:
            return registry.contains(token_id) ? AssetClass::Stablecoin : AssetClass::Other;
        case Category::Erc721:
        case Category::Erc1155: return AssetClass::Other;
    }
    return AssetClass::Other;
}

// ---------------------------------------------------------------------------
// Transfer files

namespace {

struct RawRow {
    std::string wallet_id, day_index, direction, category, token_id, amount;
};

// Validate one row; on success append one or two records, otherwise return
// the rejection reason.
std::optional<std::string> convert_row(const RawRow& row, const StablecoinRegistry& registry,
                                       std::vector<TransferRecord>& out) {
    const auto wallet = detail::trim(row.wallet_id);
    if (wallet.empty()) return "missing wallet_id";

    long long day = 0;
    if (!detail::parse_int(row.day_index, day)) return "non-integer day_index";
    if (day < 1 || day > 1'000'000) return "day_index out of range";

    const auto dir_text = detail::to_lower(detail::trim(row.direction));
    const bool self_transfer = dir_text == "self";
    auto direction = parse_direction(dir_text);
    if (!direction && !self_transfer) return "unknown direction";

    auto category = parse_category(row.category);
    if (!category) return "unknown category";

    double amount = 0.0;
    if (!detail::parse_double(row.amount, amount)) return "non-numeric amount";
    if (!std::isfinite(amount)) return "non-finite amount";
    if (amount < 0.0) return "negative amount";

    std::string token(detail::trim(row.token_id));
    if (token.empty()) {
        if (*category == Category::External || *category == Category::Internal)
            token = std::string(kNativeToken);
        else
            return "missing token_id";
    }

    TransferRecord rec;
    rec.wallet_id = std::string(wallet);
    rec.day_index = static_cast<int>(day);
    rec.category = *category;
    rec.token_id = token;
    rec.amount = amount;
    rec.asset_class = classify_asset(token, *category, registry);
    if (self_transfer) {
        rec.direction = Direction::Sell;
        out.push_back(rec);
        rec.direction = Direction::Buy;
        rec.mirrored = true;
        out.push_back(std::move(rec));
    } else {
        rec.direction = *direction;
        out.push_back(std::move(rec));
    }
    return std::nullopt;
}

constexpr std::array<std::string_view, 6> kTransferColumns = {
    "wallet_id", "day_index", "direction", "category", "token_id", "amount"};

}  // namespace

TransferFormat format_from_path(const fs::path& path) {
    const auto ext = detail::to_lower(path.extension().string());
    return (ext == ".jsonl" || ext == ".ndjson") ? TransferFormat::Jsonl : TransferFormat::Csv;
}

ParseResult parse_transfers_csv(std::string_view text, const StablecoinRegistry& registry) {
    auto lines = detail::split_lines(text);
    if (lines.empty()) throw Error(ErrorKind::Input, "transfer file is empty (header row required)");

    auto header = detail::split_csv_line(lines.front());
    std::array<int, 6> col{};
    for (std::size_t c = 0; c < kTransferColumns.size(); ++c) {
        auto it = std::find_if(header.begin(), header.end(), [&](const std::string& h) {
            return detail::to_lower(detail::trim(h)) == kTransferColumns[c];
        });
        if (it == header.end())
            throw Error(ErrorKind::Input,
                        "transfer file header lacks column '" + std::string(kTransferColumns[c]) + "'");
        col[c] = static_cast<int>(it - header.begin());
    }

    ParseResult result;
    for (std::size_t ln = 1; ln < lines.size(); ++ln) {
        const auto line = lines[ln];
        if (detail::trim(line).empty()) continue;
        auto fields = detail::split_csv_line(line);
        if (fields.size() != header.size()) {
            result.rejects.push_back({ln + 1, "wrong field count", std::string(line)});
            continue;
        }
        RawRow row{fields[col[0]], fields[col[1]], fields[col[2]],
                   fields[col[3]], fields[col[4]], fields[col[5]]};
        if (auto reason = convert_row(row, registry, result.records))
            result.rejects.push_back({ln + 1, *reason, std::string(line)});
    }
    return result;
}

ParseResult parse_transfers_jsonl(std::string_view text, const StablecoinRegistry& registry) {
    ParseResult result;
    auto lines = detail::split_lines(text);
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
        const auto line = lines[ln];
        if (detail::trim(line).empty()) continue;
        json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
        if (j.is_discarded() || !j.is_object()) {
            result.rejects.push_back({ln + 1, "malformed json", std::string(line)});
            continue;
        }
        // Numbers and strings are both accepted for numeric fields.
        auto field = [&](std::string_view key) -> std::optional<std::string> {
            auto it = j.find(std::string(key));
            if (it == j.end() || it->is_null()) return std::nullopt;
            if (it->is_string()) return it->get<std::string>();
            if (it->is_number_integer()) return std::to_string(it->get<long long>());
            if (it->is_number()) return detail::format_double(it->get<double>());
            return it->dump();
        };
        RawRow row;
        std::string* targets[] = {&row.wallet_id, &row.day_index, &row.direction,
                                  &row.category, &row.token_id, &row.amount};
        std::string missing;
        for (std::size_t c = 0; c < kTransferColumns.size(); ++c) {
            auto v = field(kTransferColumns[c]);
            if (!v && kTransferColumns[c] != "token_id") {
                missing = std::string(kTransferColumns[c]);
                break;
            }
            *targets[c] = v.value_or("");
        }
        if (!missing.empty()) {
            result.rejects.push_back({ln + 1, "missing field " + missing, std::string(line)});
            continue;
        }
        if (auto reason = convert_row(row, registry, result.records))
            result.rejects.push_back({ln + 1, *reason, std::string(line)});
    }
    return result;
}

ParseResult parse_transfers(const fs::path& path, TransferFormat format,
                            const StablecoinRegistry& registry) {
    const auto text = detail::read_file(path);
    return format == TransferFormat::Csv ? parse_transfers_csv(text, registry)
                                         : parse_transfers_jsonl(text, registry);
}

void write_rejects_csv(const fs::path& path, const std::vector<RejectedRow>& rejects) {
    std::string out = "line,reason,raw\n";
    for (const auto& r : rejects) {
        std::string raw = r.raw;
        std::string escaped;
        for (char c : raw) {
            if (c == '"') escaped += "\"\"";
            else escaped.push_back(c);
        }
        out += std::to_string(r.line) + "," + r.reason + ",\"" + escaped + "\"\n";
    }
    detail::write_file(path, out);
}

// ---------------------------------------------------------------------------
// Covariates

Eigen::MatrixXd Covariates::raw() const {
    Eigen::MatrixXd out = values;
    for (Eigen::Index c = 0; c < out.cols(); ++c)
        out.col(c) = out.col(c).array() * stats.sd[c] + stats.mean[c];
    return out;
}

Covariates standardize(const Eigen::MatrixXd& raw, std::vector<std::string> names) {
    Covariates cov;
    cov.values.resize(raw.rows(), raw.cols());
    cov.stats.names = std::move(names);
    const auto n = static_cast<double>(raw.rows());
    for (Eigen::Index c = 0; c < raw.cols(); ++c) {
        const double mean = raw.col(c).mean();
        const double ss = (raw.col(c).array() - mean).square().sum();
        const double sd = raw.rows() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
        if (!(sd > 0.0) || sd < 1e-12 * std::max(1.0, std::abs(mean)))
            throw Error(ErrorKind::Degenerate, "degenerate covariate '" + cov.stats.names[c] +
                                                   "' (zero variance)");
        cov.values.col(c) = (raw.col(c).array() - mean) / sd;
        cov.stats.mean.push_back(mean);
        cov.stats.sd.push_back(sd);
    }
    return cov;
}

Covariates load_covariates_csv(std::string_view text, int n_days) {
    if (n_days < 1) throw Error(ErrorKind::Usage, "n_days must be >= 1");
    auto lines = detail::split_lines(text);
    if (lines.empty()) throw Error(ErrorKind::Input, "covariate file is empty");
    auto header = detail::split_csv_line(lines.front());
    auto find_col = [&](std::string_view name) {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (detail::to_lower(detail::trim(header[i])) == name) return static_cast<int>(i);
        throw Error(ErrorKind::Input, "covariate file lacks column '" + std::string(name) + "'");
    };
    const int c_day = find_col("day_index");
    const int c_price = find_col("ethprice");
    const int c_rate = find_col("rf6m");

    std::vector<std::optional<double>> price(n_days), rate(n_days);
    for (std::size_t ln = 1; ln < lines.size(); ++ln) {
        if (detail::trim(lines[ln]).empty()) continue;
        auto f = detail::split_csv_line(lines[ln]);
        if (f.size() != header.size())
            throw Error(ErrorKind::Input, "covariate line " + std::to_string(ln + 1) + ": wrong field count");
        long long day = 0;
        if (!detail::parse_int(f[c_day], day))
            throw Error(ErrorKind::Input, "covariate line " + std::to_string(ln + 1) + ": bad day_index");
        if (day < 1 || day > n_days) continue;  // outside the study window
        double v = 0.0;
        if (!detail::trim(f[c_price]).empty()) {
            if (!detail::parse_double(f[c_price], v))
                throw Error(ErrorKind::Input, "covariate line " + std::to_string(ln + 1) + ": bad ethprice");
            price[day - 1] = v;
        }
        if (!detail::trim(f[c_rate]).empty()) {
            if (!detail::parse_double(f[c_rate], v))
                throw Error(ErrorKind::Input, "covariate line " + std::to_string(ln + 1) + ": bad rf6m");
            rate[day - 1] = v;
        }
    }

    Eigen::MatrixXd raw(n_days, 2);
    for (int t = 0; t < n_days; ++t) {
        if (!price[t])
            throw Error(ErrorKind::Input, "ethprice missing for day " + std::to_string(t + 1));
        raw(t, 0) = *price[t];
        if (rate[t]) {
            raw(t, 1) = *rate[t];
        } else if (t > 0) {
            raw(t, 1) = raw(t - 1, 1);
        } else {
            throw Error(ErrorKind::Input, "rf6m missing for day 1 (nothing to forward-fill from)");
        }
    }
    return standardize(raw, {"ethprice", "rf6m"});
}

Covariates load_covariates(const fs::path& path, int n_days) {
    return load_covariates_csv(detail::read_file(path), n_days);
}

// ---------------------------------------------------------------------------
// Panel construction

Panel build_panel(std::vector<TransferRecord> records, int n_days, int activity_threshold) {
    if (n_days < 1) throw Error(ErrorKind::Usage, "n_days must be >= 1");
    for (const auto& r : records)
        if (r.day_index < 1 || r.day_index > n_days)
            throw Error(ErrorKind::Input, "record for wallet " + r.wallet_id + " has day_index " +
                                              std::to_string(r.day_index) + " outside [1, " +
                                              std::to_string(n_days) + "]");

    // Canonical order makes every floating-point sum independent of the
    // input order.
    std::sort(records.begin(), records.end(), [](const TransferRecord& a, const TransferRecord& b) {
        return std::tie(a.wallet_id, a.day_index, a.direction, a.asset_class, a.amount, a.category,
                        a.token_id, a.mirrored) <
               std::tie(b.wallet_id, b.day_index, b.direction, b.asset_class, b.amount, b.category,
                        b.token_id, b.mirrored);
    });

    std::map<std::string, int> activity;
    for (const auto& r : records)
        if (!r.mirrored) ++activity[r.wallet_id];

    Panel panel;
    panel.n_days = n_days;
    panel.activity_threshold = activity_threshold;
    std::map<std::string, int> row_of;
    for (const auto& [id, count] : activity) {
        if (count >= activity_threshold) {
            row_of.emplace(id, static_cast<int>(panel.wallet_ids.size()));
            panel.wallet_ids.push_back(id);
        }
    }
    if (panel.wallet_ids.empty()) {
        std::ostringstream msg;
        msg << "no wallet reaches the activity threshold of " << activity_threshold << " ("
            << activity.size() << " wallets seen, " << records.size() << " records)";
        throw Error(ErrorKind::Degenerate, msg.str());
    }

    const int m = panel.n_wallets();
    for (auto& s : panel.streams) s = Panel::Matrix::Zero(m, n_days);
    panel.tx_counts = Panel::Matrix::Zero(m, n_days);

    for (const auto& r : records) {
        auto it = row_of.find(r.wallet_id);
        if (it == row_of.end() || r.asset_class == AssetClass::Other) continue;
        Stream s;
        if (r.asset_class == AssetClass::Eth)
            s = r.direction == Direction::Buy ? Stream::EthPurchase : Stream::EthSale;
        else
            s = r.direction == Direction::Buy ? Stream::StablePurchase : Stream::StableSale;
        panel.stream(s)(it->second, r.day_index - 1) += r.amount;
        if (!r.mirrored) panel.tx_counts(it->second, r.day_index - 1) += 1.0;
    }
    return panel;
}

bool Panel::operator==(const Panel& o) const {
    if (wallet_ids != o.wallet_ids || n_days != o.n_days ||
        activity_threshold != o.activity_threshold)
        return false;
    for (std::size_t s = 0; s < streams.size(); ++s)
        if (streams[s].rows() != o.streams[s].rows() || streams[s].cols() != o.streams[s].cols() ||
            streams[s] != o.streams[s])
            return false;
    if (tx_counts.rows() != o.tx_counts.rows() || tx_counts.cols() != o.tx_counts.cols() ||
        tx_counts != o.tx_counts)
        return false;
    if (covariates.values.rows() != o.covariates.values.rows() ||
        covariates.values.cols() != o.covariates.values.cols() ||
        covariates.values != o.covariates.values)
        return false;
    return covariates.stats.names == o.covariates.stats.names &&
           covariates.stats.mean == o.covariates.stats.mean &&
           covariates.stats.sd == o.covariates.stats.sd;
}

// ---------------------------------------------------------------------------
// Panel serialization

namespace {

std::string matrix_csv(const Panel& p, const Panel::Matrix& mat) {
    std::string out = "wallet_id";
    for (int t = 1; t <= p.n_days; ++t) out += "," + std::to_string(t);
    out += '\n';
    for (int i = 0; i < p.n_wallets(); ++i) {
        out += p.wallet_ids[i];
        for (int t = 0; t < p.n_days; ++t) {
            out += ',';
            out += detail::format_double(mat(i, t));
        }
        out += '\n';
    }
    return out;
}

Panel::Matrix read_matrix_csv(const fs::path& path, const std::vector<std::string>& wallets,
                              int n_days) {
    const auto text = detail::read_file(path);
    auto lines = detail::split_lines(text);
    const auto m = static_cast<int>(wallets.size());
    if (static_cast<int>(lines.size()) < m + 1)
        throw Error(ErrorKind::Input, path.string() + ": expected " + std::to_string(m) + " wallet rows");
    Panel::Matrix mat(m, n_days);
    for (int i = 0; i < m; ++i) {
        auto f = detail::split_csv_line(lines[i + 1]);
        if (static_cast<int>(f.size()) != n_days + 1 || f[0] != wallets[i])
            throw Error(ErrorKind::Input, path.string() + ": row " + std::to_string(i + 2) +
                                              " does not match the manifest");
        for (int t = 0; t < n_days; ++t) {
            double v = 0.0;
            if (!detail::parse_double(f[t + 1], v))
                throw Error(ErrorKind::Input, path.string() + ": bad number at row " + std::to_string(i + 2));
            mat(i, t) = v;
        }
    }
    return mat;
}

}  // namespace

void write_panel(const fs::path& dir, const Panel& panel) {
    fs::create_directories(dir);
    json manifest;
    manifest["m"] = panel.n_wallets();
    manifest["n"] = panel.n_days;
    manifest["activity_threshold"] = panel.activity_threshold;
    manifest["wallet_ids"] = panel.wallet_ids;
    json files = json::object();
    for (auto s : kAllStreams) {
        const std::string name = std::string(to_string(s)) + ".csv";
        files[to_string(s)] = name;
        detail::write_file(dir / name, matrix_csv(panel, panel.stream(s)));
    }
    files["tx_counts"] = "tx_counts.csv";
    detail::write_file(dir / "tx_counts.csv", matrix_csv(panel, panel.tx_counts));

    const auto& cov = panel.covariates;
    manifest["covariate_stats"] = {{"names", cov.stats.names},
                                   {"mean", cov.stats.mean},
                                   {"sd", cov.stats.sd}};
    std::string cov_csv = "day_index";
    for (const auto& n : cov.stats.names) cov_csv += "," + n;
    cov_csv += '\n';
    for (Eigen::Index t = 0; t < cov.values.rows(); ++t) {
        cov_csv += std::to_string(t + 1);
        for (Eigen::Index c = 0; c < cov.values.cols(); ++c)
            cov_csv += "," + detail::format_double(cov.values(t, c));
        cov_csv += '\n';
    }
    files["covariates"] = "covariates.csv";
    detail::write_file(dir / "covariates.csv", cov_csv);
    manifest["files"] = files;
    detail::write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

Panel read_panel(const fs::path& dir) {
    json manifest;
    try {
        manifest = json::parse(detail::read_file(dir / "manifest.json"));
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Input, "panel manifest: " + std::string(e.what()));
    }
    Panel p;
    try {
        p.n_days = manifest.at("n").get<int>();
        p.activity_threshold = manifest.at("activity_threshold").get<int>();
        p.wallet_ids = manifest.at("wallet_ids").get<std::vector<std::string>>();
        if (manifest.at("m").get<int>() != p.n_wallets())
            throw Error(ErrorKind::Input, "panel manifest: m does not match wallet_ids");
        const auto& files = manifest.at("files");
        for (auto s : kAllStreams)
            p.stream(s) = read_matrix_csv(dir / files.at(to_string(s)).get<std::string>(),
                                          p.wallet_ids, p.n_days);
        p.tx_counts = read_matrix_csv(dir / files.at("tx_counts").get<std::string>(), p.wallet_ids,
                                      p.n_days);
        const auto& st = manifest.at("covariate_stats");
        p.covariates.stats.names = st.at("names").get<std::vector<std::string>>();
        p.covariates.stats.mean = st.at("mean").get<std::vector<double>>();
        p.covariates.stats.sd = st.at("sd").get<std::vector<double>>();
        const auto n_cov = static_cast<Eigen::Index>(p.covariates.stats.names.size());
        p.covariates.values.resize(n_cov > 0 ? p.n_days : 0, n_cov);
        if (n_cov > 0) {
            const auto text = detail::read_file(dir / files.at("covariates").get<std::string>());
            auto lines = detail::split_lines(text);
            if (static_cast<int>(lines.size()) < p.n_days + 1)
                throw Error(ErrorKind::Input, "panel covariates.csv has too few rows");
            for (int t = 0; t < p.n_days; ++t) {
                auto f = detail::split_csv_line(lines[t + 1]);
                if (static_cast<Eigen::Index>(f.size()) != n_cov + 1)
                    throw Error(ErrorKind::Input, "panel covariates.csv: wrong field count");
                for (Eigen::Index c = 0; c < n_cov; ++c)
                    if (!detail::parse_double(f[c + 1], p.covariates.values(t, c)))
                        throw Error(ErrorKind::Input, "panel covariates.csv: bad number");
            }
        }
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Input, "panel manifest: " + std::string(e.what()));
    }
    return p;
}

}  // namespace zigamma
