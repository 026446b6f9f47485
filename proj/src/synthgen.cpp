#include "txn/synthgen.hpp"

#include "txn/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace txn {

namespace {

constexpr int kNumPairs = 7;       // trigger/follower pairs for the motif channel
constexpr int kTriggerBase = 1;    // mcc indices [1, 8): triggers
constexpr int kFollowerBase = 8;   // mcc indices [8, 15): followers
constexpr int kBackgroundBase = 15;

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void check_common(const GenConfig& cfg) {
    if (cfg.vocab.mcc < kBackgroundBase + kNumPairs)
        throw std::invalid_argument("mcc vocabulary too small (need >= " +
                                    std::to_string(kBackgroundBase + kNumPairs) + ")");
    if (cfg.vocab.txn_type < 2) throw std::invalid_argument("txn_type vocabulary too small");
    if (cfg.txns_min < 1 || cfg.txns_max < cfg.txns_min)
        throw std::invalid_argument("bad txns_per_day range");
    if (cfg.marginal_strength < 0.0 || cfg.motif_strength < 0.0)
        throw std::invalid_argument("signal strengths must be >= 0");
}

// Background mcc index; class_shift < 0 means unshifted uniform background.
int draw_background_mcc(const GenConfig& cfg, Rng& rng, int class_shift, double shift_strength) {
    int n_bg = cfg.vocab.mcc - kBackgroundBase;
    if (class_shift < 0 || shift_strength <= 0.0)
        return kBackgroundBase + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n_bg)));
    // weight 1 + strength on background tokens congruent to the class mod 7
    std::vector<double> w(static_cast<std::size_t>(n_bg));
    double total = 0.0;
    for (int i = 0; i < n_bg; ++i) {
        w[static_cast<std::size_t>(i)] = (i % 7 == class_shift % 7) ? 1.0 + shift_strength : 1.0;
        total += w[static_cast<std::size_t>(i)];
    }
    double u = rng.uniform() * total;
    for (int i = 0; i < n_bg; ++i) {
        u -= w[static_cast<std::size_t>(i)];
        if (u <= 0.0) return kBackgroundBase + i;
    }
    return cfg.vocab.mcc - 1;
}

// Fill one day's transactions. The mcc stream carries the planted signals:
// follower(trigger j) = kFollowerBase + (j + pairing_offset) mod 7, where the
// pairing offset is the class (day-of-week task) or chosen per event from the
// straight/crossed mixture (default-rate task, crossed_prob).
void fill_day(const GenConfig& cfg, DayRecord& day, Rng& rng, int marginal_class,
              int pairing_offset, double crossed_prob) {
    int count = cfg.txns_min +
                static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(cfg.txns_max - cfg.txns_min + 1)));
    std::vector<double> times(static_cast<std::size_t>(count));
    for (auto& t : times) t = rng.uniform() * 24.0;
    std::sort(times.begin(), times.end());

    double p_motif = std::min(cfg.motif_strength, 0.5);
    double p_marg = std::min(cfg.marginal_strength > 0.0 ? 0.3 : 0.0, 1.0 - p_motif);

    day.transactions.resize(static_cast<std::size_t>(count));
    int pending_follower = -1;
    for (int i = 0; i < count; ++i) {
        Transaction& t = day.transactions[static_cast<std::size_t>(i)];
        t.time_hours = std::min(times[static_cast<std::size_t>(i)], 24.0 - 1e-9);
        double a = std::exp(rng.normal() * 1.0 + 2.0);
        t.amount = rng.uniform() < 0.05 ? -a : a; // occasional refunds
        t.txn_type = 1 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(cfg.vocab.txn_type - 1)));
        if (cfg.vocab.has_currency())
            t.currency = 1 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(cfg.vocab.currency - 1)));
        if (cfg.vocab.has_country())
            t.country = 1 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(cfg.vocab.country - 1)));

        if (pending_follower >= 0) {
            t.mcc = pending_follower;
            pending_follower = -1;
            continue;
        }
        double u = rng.uniform();
        if (u < p_motif && i + 1 < count) {
            int trig = static_cast<int>(rng.uniform_int(kNumPairs));
            t.mcc = kTriggerBase + trig;
            int offset = pairing_offset;
            if (crossed_prob >= 0.0 && rng.uniform() < crossed_prob) offset = pairing_offset + 1;
            pending_follower = kFollowerBase + ((trig + offset) % kNumPairs);
        } else if (u < p_motif + p_marg) {
            t.mcc = draw_background_mcc(cfg, rng, marginal_class, cfg.marginal_strength);
        } else {
            t.mcc = draw_background_mcc(cfg, rng, -1, 0.0);
        }
    }
}

} // namespace

GeneratedData generate_dayofweek(const GenConfig& cfg) {
    if (cfg.task != TaskKind::classification)
        throw std::invalid_argument("generate_dayofweek: task must be dayofweek");
    if (cfg.n_days < 7) throw std::invalid_argument("day-of-week task needs n_days >= 7");
    check_common(cfg);

    GeneratedData out;
    out.dataset.task = TaskKind::classification;
    out.dataset.vocab = cfg.vocab;
    out.dataset.provenance = "synthgen:dayofweek:seed=" + std::to_string(cfg.seed);
    out.dataset.days.resize(static_cast<std::size_t>(cfg.n_days));
    for (int d = 0; d < cfg.n_days; ++d) {
        DayRecord& day = out.dataset.days[static_cast<std::size_t>(d)];
        day.day_index = d;
        day.class_label = d % 7;
        Rng rng = Rng::substream(cfg.seed, {static_cast<std::uint64_t>(d)});
        fill_day(cfg, day, rng, day.class_label, day.class_label, -1.0);
    }
    return out;
}

GeneratedData generate_defaultrate(const GenConfig& cfg) {
    if (cfg.task != TaskKind::regression)
        throw std::invalid_argument("generate_defaultrate: task must be defaultrate");
    if (!(std::abs(cfg.ar_coeff) < 1.0))
        throw std::invalid_argument("|ar_coeff| must be < 1");
    if (cfg.n_days < 2) throw std::invalid_argument("need n_days >= 2");
    check_common(cfg);

    GeneratedData out;
    out.dataset.task = TaskKind::regression;
    out.dataset.vocab = cfg.vocab;
    out.dataset.provenance = "synthgen:defaultrate:seed=" + std::to_string(cfg.seed);
    out.dataset.days.resize(static_cast<std::size_t>(cfg.n_days));

    // latent AR(1) path uses its own stream so per-day streams stay independent
    Rng zrng = Rng::substream(cfg.seed, {0xA51ULL});
    double z = 0.0;
    for (int d = 0; d < cfg.n_days; ++d) {
        z = cfg.ar_coeff * z + zrng.normal() * cfg.noise_std;
        double label = 0.01 + 0.19 * logistic(z);
        DayRecord& day = out.dataset.days[static_cast<std::size_t>(d)];
        day.day_index = d;
        day.rate_label = label;
        double w = logistic(z); // crossed-pairing probability, carries z in order info
        Rng rng = Rng::substream(cfg.seed, {static_cast<std::uint64_t>(d)});
        // marginal channel interpolates between two token shifts with weight w
        int marginal_class = rng.uniform() < w ? 1 : 0;
        fill_day(cfg, day, rng, marginal_class, 0, w);
        out.truth.push_back({day.day_index, z, label});
    }
    return out;
}

GeneratedData generate(const GenConfig& cfg) {
    return cfg.task == TaskKind::classification ? generate_dayofweek(cfg) : generate_defaultrate(cfg);
}

void write_truth(const std::vector<TruthPoint>& truth, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "day_index,z_t,label\n";
    for (const auto& p : truth)
        out << p.day_index << ',' << format_double(p.z) << ',' << format_double(p.label) << '\n';
}

VocabularySet identity_vocabularies(const VocabSizes& sizes) {
    VocabularySet set;
    auto add = [&set](const std::string& field, int size) {
        if (size <= 0) return;
        Vocabulary v;
        v.field = field;
        for (int i = 1; i < size; ++i) v.token_to_index[std::to_string(i)] = i;
        set.fields.push_back(std::move(v));
    };
    add("mcc", sizes.mcc);
    add("txn_type", sizes.txn_type);
    add("currency", sizes.currency);
    add("country", sizes.country);
    return set;
}

} // namespace txn
