#pragma once

#include <string>

#include "oracles.hpp"
#include "zigamma/ingest.hpp"
#include "zigamma/model.hpp"

namespace testutil {

inline zigamma::Panel make_panel(const zigamma::RowMatrix& y, const Eigen::MatrixXd& x,
                                 zigamma::Stream stream = zigamma::Stream::EthSale) {
    zigamma::Panel p;
    p.n_days = static_cast<int>(y.cols());
    for (Eigen::Index i = 0; i < y.rows(); ++i) p.wallet_ids.push_back("w" + std::to_string(100 + i));
    for (auto& s : p.streams) s = zigamma::Panel::Matrix::Zero(y.rows(), y.cols());
    p.stream(stream) = y;
    p.tx_counts = (y.array() > 0).cast<double>();
    p.covariates.values = x;
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        p.covariates.stats.names.push_back("x" + std::to_string(c + 1));
        p.covariates.stats.mean.push_back(0.0);
        p.covariates.stats.sd.push_back(1.0);
    }
    return p;
}

inline zigamma::TransferRecord record(std::string wallet, int day, zigamma::Direction dir, zigamma::Category cat,
                                      zigamma::AssetClass cls, double amount) {
    zigamma::TransferRecord r;
    r.wallet_id = std::move(wallet);
    r.day_index = day;
    r.direction = dir;
    r.category = cat;
    r.token_id = cls == zigamma::AssetClass::Eth ? "ETH" : "0xtoken";
    r.asset_class = cls;
    r.amount = amount;
    return r;
}

}  // namespace testutil
