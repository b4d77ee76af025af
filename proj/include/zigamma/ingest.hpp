#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace zigamma {

enum class Direction { Buy, Sell };
enum class Category { External, Internal, Erc20, Erc721, Erc1155 };
enum class AssetClass { Eth, Stablecoin, Other };

/// The four daily response streams tracked per wallet.
enum class Stream { EthPurchase, EthSale, StablePurchase, StableSale };

inline constexpr std::array<Stream, 4> kAllStreams = {
    Stream::EthPurchase, Stream::EthSale, Stream::StablePurchase, Stream::StableSale};

const char* to_string(Direction d) noexcept;
const char* to_string(Category c) noexcept;
const char* to_string(AssetClass a) noexcept;
/// Short machine name: eth_buy, eth_sell, stable_buy, stable_sell.
const char* to_string(Stream s) noexcept;
/// Human label used in report tables, e.g. "Ethereum Sale".
const char* label(Stream s) noexcept;

std::optional<Direction> parse_direction(std::string_view s);
std::optional<Category> parse_category(std::string_view s);
std::optional<Stream> parse_stream(std::string_view s);

/// Token id used for native ETH in exported files.
inline constexpr std::string_view kNativeToken = "ETH";

/// Maps lower-cased ERC-20 contract address to ticker symbol.
class StablecoinRegistry {
public:
    /// The seven principal USD stablecoins on Ethereum mainnet in 2022:
    /// USDC, USDT, BUSD, TUSD, GUSD, DAI, FRAX.
    static StablecoinRegistry defaults();
    /// JSON object {"0xaddress": "SYMBOL", ...}.
    static StablecoinRegistry load(const std::filesystem::path& path);

    explicit StablecoinRegistry(std::map<std::string, std::string> entries);

    bool contains(std::string_view token_id) const;
    std::optional<std::string> symbol(std::string_view token_id) const;
    const std::map<std::string, std::string>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }

private:
    std::map<std::string, std::string> entries_;
};

/// Total function: external/internal are ETH, registered ERC-20 tokens are
/// stablecoins, everything else (NFTs, other tokens) is Other.
AssetClass classify_asset(std::string_view token_id, Category category,
                          const StablecoinRegistry& registry);

struct TransferRecord {
    std::string wallet_id;
    int day_index = 0;
    Direction direction = Direction::Buy;
    Category category = Category::External;
    std::string token_id;
    double amount = 0.0;
    AssetClass asset_class = AssetClass::Eth;
    /// Second half of an expanded self-transfer. It contributes to a stream
    /// but is not counted again towards the activity threshold.
    bool mirrored = false;

    bool operator==(const TransferRecord&) const = default;
};

struct RejectedRow {
    std::size_t line = 0;  // 1-based line number in the source file
    std::string reason;
    std::string raw;
};

struct ParseResult {
    std::vector<TransferRecord> records;
    std::vector<RejectedRow> rejects;
};

enum class TransferFormat { Csv, Jsonl };

/// Infer the format from the extension (.jsonl / .ndjson, otherwise CSV).
TransferFormat format_from_path(const std::filesystem::path& path);

/// Parse an exported transfer file. Malformed rows end up in `rejects`.
/// A `direction` of "self" expands into a sell and a mirrored buy.
ParseResult parse_transfers(const std::filesystem::path& path, TransferFormat format,
                            const StablecoinRegistry& registry);

/// Parse already-loaded CSV text (header required).
ParseResult parse_transfers_csv(std::string_view text, const StablecoinRegistry& registry);
ParseResult parse_transfers_jsonl(std::string_view text, const StablecoinRegistry& registry);

void write_rejects_csv(const std::filesystem::path& path, const std::vector<RejectedRow>& rejects);

struct CovariateStats {
    std::vector<std::string> names;
    std::vector<double> mean;
    std::vector<double> sd;  // sample standard deviation (n - 1)
};

struct Covariates {
    Eigen::MatrixXd values;  // n x p, standardized
    CovariateStats stats;

    Eigen::MatrixXd raw() const;  // undo the z-scoring
};

/// Columns day_index, ethprice, rf6m. Missing rf6m values (blank cell or
/// absent day) are forward-filled; ethprice must be complete.
Covariates load_covariates(const std::filesystem::path& path, int n_days);
Covariates load_covariates_csv(std::string_view text, int n_days);

/// z-score each column with the sample standard deviation.
Covariates standardize(const Eigen::MatrixXd& raw, std::vector<std::string> names);

/// Daily wallet panel. Streams are m x n, row i = wallet, column t-1 = day t.
struct Panel {
    using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    std::vector<std::string> wallet_ids;
    int n_days = 0;
    std::array<Matrix, 4> streams;  // indexed by Stream
    Matrix tx_counts;               // ETH + stablecoin transfers per wallet-day
    Covariates covariates;
    int activity_threshold = 0;

    int n_wallets() const noexcept { return static_cast<int>(wallet_ids.size()); }
    int n_covariates() const noexcept { return static_cast<int>(covariates.values.cols()); }
    const Matrix& stream(Stream s) const { return streams[static_cast<std::size_t>(s)]; }
    Matrix& stream(Stream s) { return streams[static_cast<std::size_t>(s)]; }

    bool operator==(const Panel& other) const;
};

/// Aggregate transfers into the daily panel. Wallets with fewer than
/// `activity_threshold` transfers (any asset class) are dropped. Throws when
/// no wallet survives or a record lies outside [1, n_days].
Panel build_panel(std::vector<TransferRecord> records, int n_days, int activity_threshold = 5);

/// Columnar CSV per stream plus manifest.json. Numbers use round-trip
/// formatting so read_panel(write_panel(p)) == p.
void write_panel(const std::filesystem::path& dir, const Panel& panel);
Panel read_panel(const std::filesystem::path& dir);

}  // namespace zigamma
