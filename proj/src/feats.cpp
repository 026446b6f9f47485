#include "txn/feats.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

namespace txn {

std::size_t feature_length(const VocabSizes& vocab) {
    return static_cast<std::size_t>(vocab.mcc + vocab.txn_type + vocab.currency + vocab.country) +
           2 * kAmountBins + 1;
}

std::vector<std::string> feature_names(const VocabSizes& vocab) {
    std::vector<std::string> names;
    names.reserve(feature_length(vocab));
    auto block = [&names](const std::string& field, int n) {
        for (int i = 0; i < n; ++i) names.push_back(field + "_freq_" + std::to_string(i));
    };
    block("mcc", vocab.mcc);
    block("txn_type", vocab.txn_type);
    block("currency", vocab.currency);
    block("country", vocab.country);
    for (int i = 0; i < kAmountBins; ++i) names.push_back("amount_bin_mean_" + std::to_string(i));
    for (int i = 0; i < kAmountBins; ++i) names.push_back("amount_bin_count_" + std::to_string(i));
    names.push_back("total_count");
    return names;
}

std::vector<double> day_features(const DayRecord& day, const VocabSizes& vocab) {
    if (day.transactions.empty()) throw std::invalid_argument("day_features: empty day");
    std::vector<double> f(feature_length(vocab), 0.0);
    double n = static_cast<double>(day.transactions.size());

    std::size_t off_mcc = 0;
    std::size_t off_type = off_mcc + static_cast<std::size_t>(vocab.mcc);
    std::size_t off_cur = off_type + static_cast<std::size_t>(vocab.txn_type);
    std::size_t off_cty = off_cur + static_cast<std::size_t>(vocab.currency);
    std::size_t off_bins = off_cty + static_cast<std::size_t>(vocab.country);

    for (const auto& t : day.transactions) {
        f[off_mcc + static_cast<std::size_t>(t.mcc)] += 1.0 / n;
        f[off_type + static_cast<std::size_t>(t.txn_type)] += 1.0 / n;
        if (vocab.has_currency()) f[off_cur + static_cast<std::size_t>(t.currency.value_or(0))] += 1.0 / n;
        if (vocab.has_country()) f[off_cty + static_cast<std::size_t>(t.country.value_or(0))] += 1.0 / n;
    }

    std::vector<double> amounts;
    amounts.reserve(day.transactions.size());
    for (const auto& t : day.transactions) amounts.push_back(t.amount);
    std::sort(amounts.begin(), amounts.end());
    // equal-count deciles: bin i holds n/10 values, the first n%10 bins one extra
    std::size_t total = amounts.size();
    std::size_t base = total / kAmountBins, extra = total % kAmountBins;
    std::size_t pos = 0;
    for (int b = 0; b < kAmountBins; ++b) {
        std::size_t cnt = base + (static_cast<std::size_t>(b) < extra ? 1 : 0);
        double sum = 0.0;
        for (std::size_t i = 0; i < cnt; ++i) sum += amounts[pos + i];
        pos += cnt;
        f[off_bins + static_cast<std::size_t>(b)] = cnt ? sum / static_cast<double>(cnt) : 0.0;
        f[off_bins + kAmountBins + static_cast<std::size_t>(b)] = static_cast<double>(cnt);
    }
    f[off_bins + 2 * kAmountBins] = static_cast<double>(total);
    return f;
}

std::vector<std::vector<double>> feature_matrix(const Dataset& d) {
    std::vector<std::vector<double>> X;
    X.reserve(d.days.size());
    for (const auto& day : d.days) X.push_back(day_features(day, d.vocab));
    return X;
}

void write_feature_matrix(const Dataset& d, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    auto names = feature_names(d.vocab);
    for (std::size_t i = 0; i < names.size(); ++i) out << names[i] << ',';
    out << "label\n";
    for (const auto& day : d.days) {
        auto f = day_features(day, d.vocab);
        for (double v : f) out << format_double(v) << ',';
        if (d.task == TaskKind::classification)
            out << day.class_label;
        else
            out << format_double(day.rate_label);
        out << '\n';
    }
}

} // namespace txn
