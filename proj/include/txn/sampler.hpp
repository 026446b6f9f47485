#pragma once

#include "txn/data.hpp"
#include "txn/rng.hpp"

#include <vector>

namespace txn {

// A contiguous run of n transactions from one day, cyclically padded when the
// day is shorter than n.
struct Window {
    std::int64_t day_index = 0;
    std::size_t start = 0;
    std::vector<Transaction> txns;
};

// start ~ Uniform{0..M-n} when the day has M >= n transactions; otherwise the
// whole day repeated cyclically until length n, start = 0.
Window sample_window(const DayRecord& day, std::size_t n, Rng& rng);

// One independent window per day. Windows of distinct days draw from distinct
// substreams derived from (seed, epoch, day_index), so the result does not
// depend on iteration order.
std::vector<Window> sample_epoch(const Dataset& d, std::size_t n, std::uint64_t seed,
                                 std::uint64_t epoch);

// k independent windows of the same day.
std::vector<Window> sample_inference(const DayRecord& day, std::size_t n, std::size_t k, Rng& rng);

} // namespace txn
