#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace txn {

// One card event. Token indices are vocabulary positions; 0 is reserved for
// out-of-vocabulary tokens.
struct Transaction {
    int mcc = 0;
    int txn_type = 0;
    std::optional<int> currency;
    std::optional<int> country;
    double time_hours = 0.0; // hours since 00:00, in [0, 24)
    double amount = 0.0;     // signed; refunds are negative
};

enum class TaskKind { classification, regression };

// One calendar day: ordered transaction sequence plus its target.
struct DayRecord {
    std::int64_t day_index = 0;
    std::vector<Transaction> transactions; // non-decreasing in time_hours
    int class_label = 0;                   // classification task, in {0..6}
    double rate_label = 0.0;               // regression task, in [0,1]
};

struct VocabSizes {
    int mcc = 0;
    int txn_type = 0;
    int currency = 0; // 0 when the field is absent
    int country = 0;

    bool has_currency() const { return currency > 0; }
    bool has_country() const { return country > 0; }
};

struct Dataset {
    std::vector<DayRecord> days; // strictly increasing day_index
    TaskKind task = TaskKind::classification;
    VocabSizes vocab;
    std::string provenance;

    std::size_t total_transactions() const;
};

// String-token -> index map for one categorical field. Index 0 is reserved
// for unknown tokens and never appears in the map.
struct Vocabulary {
    std::string field;
    std::map<std::string, int> token_to_index;

    int size() const; // max index + 1
    int lookup(const std::string& token) const; // 0 if absent
};

struct VocabularySet {
    std::vector<Vocabulary> fields;
    const Vocabulary* find(const std::string& field) const;
};

struct ValidationIssue {
    std::int64_t day_index;
    std::string message;
};

struct ValidationReport {
    std::vector<std::size_t> per_day_counts;
    std::size_t min_count = 0;
    std::size_t max_count = 0;
    double mean_count = 0.0;
    double min_label = 0.0;
    double max_label = 0.0;
    std::vector<ValidationIssue> violations;

    bool ok() const { return violations.empty(); }
};

// Dataset CSV, header:
//   day_index,time_hours,amount,mcc,txn_type[,currency,country],label
// One row per transaction, label repeated for every row of its day.
// With a vocabulary set, categorical columns are token strings mapped through
// it (unknown -> 0). Without one, they are parsed as integer indices and
// vocab sizes are inferred.
Dataset load_dataset(const std::string& path, const VocabularySet* schema = nullptr);
void write_dataset(const Dataset& d, const std::string& path);

// Vocabulary file: `field,token,index` CSV.
VocabularySet load_vocabularies(const std::string& path);
void write_vocabularies(const VocabularySet& v, const std::string& path);

// First floor(train_frac * |days|) days -> train, remainder -> validation.
std::pair<Dataset, Dataset> chronological_split(const Dataset& d, double train_frac);

ValidationReport validate(const Dataset& d);

// Canonical shortest-round-trip formatting shared by all CSV writers.
std::string format_double(double x);

} // namespace txn
