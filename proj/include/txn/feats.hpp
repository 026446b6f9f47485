#pragma once

#include "txn/data.hpp"

#include <string>
#include <vector>

namespace txn {

// Fixed-length per-day feature vector:
//   [mcc freqs | txn_type freqs | currency freqs | country freqs |
//    10 bin means | 10 bin counts | total transaction count]
// Frequency blocks each sum to 1 for non-empty days. Amount bins are per-day
// equal-count deciles by sorted amount; bins short of data get mean 0, count 0.
// Absent categorical fields contribute zero-length blocks.
constexpr int kAmountBins = 10;

std::size_t feature_length(const VocabSizes& vocab);
std::vector<std::string> feature_names(const VocabSizes& vocab);

std::vector<double> day_features(const DayRecord& day, const VocabSizes& vocab);

// One row per day, header from feature_names, trailing `label` column.
void write_feature_matrix(const Dataset& d, const std::string& path);

std::vector<std::vector<double>> feature_matrix(const Dataset& d);

} // namespace txn
