#include "txn/sampler.hpp"

#include <stdexcept>

namespace txn {

Window sample_window(const DayRecord& day, std::size_t n, Rng& rng) {
    if (n == 0) throw std::invalid_argument("window length must be >= 1");
    if (day.transactions.empty()) throw std::invalid_argument("cannot sample an empty day");

    Window w;
    w.day_index = day.day_index;
    w.txns.reserve(n);
    std::size_t m = day.transactions.size();
    if (m >= n) {
        w.start = rng.uniform_int(m - n + 1);
        w.txns.assign(day.transactions.begin() + static_cast<std::ptrdiff_t>(w.start),
                      day.transactions.begin() + static_cast<std::ptrdiff_t>(w.start + n));
    } else {
        w.start = 0;
        for (std::size_t i = 0; i < n; ++i) w.txns.push_back(day.transactions[i % m]);
    }
    return w;
}

std::vector<Window> sample_epoch(const Dataset& d, std::size_t n, std::uint64_t seed,
                                 std::uint64_t epoch) {
    std::vector<Window> out;
    out.reserve(d.days.size());
    for (const auto& day : d.days) {
        Rng rng = Rng::substream(seed, {epoch, static_cast<std::uint64_t>(day.day_index)});
        out.push_back(sample_window(day, n, rng));
    }
    return out;
}

std::vector<Window> sample_inference(const DayRecord& day, std::size_t n, std::size_t k, Rng& rng) {
    if (k == 0) throw std::invalid_argument("k must be >= 1");
    std::vector<Window> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) out.push_back(sample_window(day, n, rng));
    return out;
}

} // namespace txn
