#include "txn/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace txn {

std::size_t Dataset::total_transactions() const {
    std::size_t n = 0;
    for (const auto& d : days) n += d.transactions.size();
    return n;
}

int Vocabulary::size() const {
    int mx = 0;
    for (const auto& [tok, idx] : token_to_index) mx = std::max(mx, idx);
    return mx + 1;
}

int Vocabulary::lookup(const std::string& token) const {
    auto it = token_to_index.find(token);
    return it == token_to_index.end() ? 0 : it->second;
}

const Vocabulary* VocabularySet::find(const std::string& field) const {
    for (const auto& v : fields)
        if (v.field == field) return &v;
    return nullptr;
}

std::string format_double(double x) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    if (ec != std::errc()) throw std::runtime_error("format_double: to_chars failed");
    return std::string(buf, ptr);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

double parse_double(const std::string& s, std::size_t line_no, const char* what) {
    double v;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw std::runtime_error("line " + std::to_string(line_no) + ": bad " + what + " '" + s + "'");
    return v;
}

std::int64_t parse_int(const std::string& s, std::size_t line_no, const char* what) {
    std::int64_t v;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw std::runtime_error("line " + std::to_string(line_no) + ": bad " + what + " '" + s + "'");
    return v;
}

int map_token(const std::string& tok, const Vocabulary* vocab, std::size_t line_no,
              const char* field, int& max_seen) {
    int idx;
    if (vocab) {
        idx = vocab->lookup(tok);
    } else {
        std::int64_t raw = parse_int(tok, line_no, field);
        if (raw < 0)
            throw std::runtime_error("line " + std::to_string(line_no) + ": negative token index");
        idx = static_cast<int>(raw);
    }
    max_seen = std::max(max_seen, idx);
    return idx;
}

} // namespace

Dataset load_dataset(const std::string& path, const VocabularySet* schema) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset file: " + path);

    std::string header;
    if (!std::getline(in, header)) throw std::runtime_error("empty dataset file: " + path);
    auto cols = split_csv_line(header);

    bool has_currency = false, has_country = false;
    if (cols.size() == 6 && cols[5] == "label") {
        // base schema
    } else if (cols.size() == 8 && cols[5] == "currency" && cols[6] == "country") {
        has_currency = has_country = true;
    } else {
        throw std::runtime_error("unrecognized dataset header: " + header);
    }

    const Vocabulary* v_mcc = schema ? schema->find("mcc") : nullptr;
    const Vocabulary* v_type = schema ? schema->find("txn_type") : nullptr;
    const Vocabulary* v_cur = schema ? schema->find("currency") : nullptr;
    const Vocabulary* v_cty = schema ? schema->find("country") : nullptr;

    struct Row {
        Transaction t;
        std::size_t file_order;
    };
    std::map<std::int64_t, std::vector<Row>> by_day;
    std::map<std::int64_t, std::string> labels;

    int max_mcc = 0, max_type = 0, max_cur = -1, max_cty = -1;
    bool any_float_label = false, any_int_label = false;

    std::string line;
    std::size_t line_no = 1, order = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto f = split_csv_line(line);
        if (f.size() != cols.size())
            throw std::runtime_error("line " + std::to_string(line_no) + ": expected " +
                                     std::to_string(cols.size()) + " fields, got " +
                                     std::to_string(f.size()));
        Row r;
        std::int64_t day = parse_int(f[0], line_no, "day_index");
        r.t.time_hours = parse_double(f[1], line_no, "time_hours");
        if (!(r.t.time_hours >= 0.0 && r.t.time_hours < 24.0))
            throw std::runtime_error("line " + std::to_string(line_no) + ": time_hours out of [0,24)");
        r.t.amount = parse_double(f[2], line_no, "amount");
        r.t.mcc = map_token(f[3], v_mcc, line_no, "mcc", max_mcc);
        r.t.txn_type = map_token(f[4], v_type, line_no, "txn_type", max_type);
        std::size_t label_col = 5;
        if (has_currency) {
            r.t.currency = map_token(f[5], v_cur, line_no, "currency", max_cur);
            r.t.country = map_token(f[6], v_cty, line_no, "country", max_cty);
            label_col = 7;
        }
        const std::string& lab = f[label_col];
        if (lab.find('.') != std::string::npos || lab.find('e') != std::string::npos)
            any_float_label = true;
        else
            any_int_label = true;
        auto it = labels.find(day);
        if (it == labels.end())
            labels[day] = lab;
        else if (it->second != lab)
            throw std::runtime_error("line " + std::to_string(line_no) + ": day " +
                                     std::to_string(day) + " has conflicting labels");
        r.file_order = order++;
        by_day[day].push_back(r);
    }
    if (by_day.empty()) throw std::runtime_error("dataset has no rows: " + path);
    if (any_float_label && any_int_label)
        throw std::runtime_error("mixed label kinds (integer and float) in " + path);

    Dataset ds;
    ds.task = any_float_label ? TaskKind::regression : TaskKind::classification;
    ds.provenance = path;
    for (auto& [day, rows] : by_day) {
        DayRecord rec;
        rec.day_index = day;
        // stable sort: equal times keep original file order
        std::stable_sort(rows.begin(), rows.end(),
                         [](const Row& a, const Row& b) { return a.t.time_hours < b.t.time_hours; });
        rec.transactions.reserve(rows.size());
        for (auto& r : rows) rec.transactions.push_back(r.t);
        const std::string& lab = labels[day];
        if (ds.task == TaskKind::classification) {
            std::int64_t c = parse_int(lab, 0, "label");
            if (c < 0 || c > 6) throw std::runtime_error("class label out of {0..6}: " + lab);
            rec.class_label = static_cast<int>(c);
        } else {
            rec.rate_label = parse_double(lab, 0, "label");
        }
        ds.days.push_back(std::move(rec));
    }

    if (schema) {
        ds.vocab.mcc = v_mcc ? v_mcc->size() : max_mcc + 1;
        ds.vocab.txn_type = v_type ? v_type->size() : max_type + 1;
        ds.vocab.currency = has_currency ? (v_cur ? v_cur->size() : max_cur + 1) : 0;
        ds.vocab.country = has_country ? (v_cty ? v_cty->size() : max_cty + 1) : 0;
    } else {
        ds.vocab.mcc = max_mcc + 1;
        ds.vocab.txn_type = max_type + 1;
        ds.vocab.currency = has_currency ? max_cur + 1 : 0;
        ds.vocab.country = has_country ? max_cty + 1 : 0;
    }
    return ds;
}

void write_dataset(const Dataset& d, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    bool ext = d.vocab.has_currency() || d.vocab.has_country();
    out << "day_index,time_hours,amount,mcc,txn_type";
    if (ext) out << ",currency,country";
    out << ",label\n";
    for (const auto& day : d.days) {
        std::string label = d.task == TaskKind::classification
                                ? std::to_string(day.class_label)
                                : format_double(day.rate_label);
        for (const auto& t : day.transactions) {
            out << day.day_index << ',' << format_double(t.time_hours) << ','
                << format_double(t.amount) << ',' << t.mcc << ',' << t.txn_type;
            if (ext) out << ',' << t.currency.value_or(0) << ',' << t.country.value_or(0);
            out << ',' << label << '\n';
        }
    }
}

VocabularySet load_vocabularies(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open vocabulary file: " + path);
    std::string line;
    std::getline(in, line); // header
    VocabularySet set;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto f = split_csv_line(line);
        if (f.size() != 3)
            throw std::runtime_error("vocab line " + std::to_string(line_no) + ": need field,token,index");
        Vocabulary* v = nullptr;
        for (auto& existing : set.fields)
            if (existing.field == f[0]) v = &existing;
        if (!v) {
            set.fields.push_back(Vocabulary{f[0], {}});
            v = &set.fields.back();
        }
        std::int64_t idx = parse_int(f[2], line_no, "index");
        if (idx < 1)
            throw std::runtime_error("vocab line " + std::to_string(line_no) +
                                     ": index 0 is reserved for unknown tokens");
        v->token_to_index[f[1]] = static_cast<int>(idx);
    }
    return set;
}

void write_vocabularies(const VocabularySet& set, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "field,token,index\n";
    for (const auto& v : set.fields)
        for (const auto& [tok, idx] : v.token_to_index)
            out << v.field << ',' << tok << ',' << idx << '\n';
}

std::pair<Dataset, Dataset> chronological_split(const Dataset& d, double train_frac) {
    if (!(train_frac > 0.0 && train_frac < 1.0))
        throw std::invalid_argument("train_frac must be in (0,1)");
    if (d.days.size() < 2) throw std::invalid_argument("need at least 2 days to split");
    std::size_t n_train = static_cast<std::size_t>(std::floor(train_frac * static_cast<double>(d.days.size())));
    if (n_train == 0 || n_train == d.days.size())
        throw std::invalid_argument("split leaves an empty part");
    Dataset train, val;
    train.task = val.task = d.task;
    train.vocab = val.vocab = d.vocab;
    train.provenance = d.provenance + "#train";
    val.provenance = d.provenance + "#val";
    train.days.assign(d.days.begin(), d.days.begin() + static_cast<std::ptrdiff_t>(n_train));
    val.days.assign(d.days.begin() + static_cast<std::ptrdiff_t>(n_train), d.days.end());
    return {std::move(train), std::move(val)};
}

ValidationReport validate(const Dataset& d) {
    ValidationReport r;
    r.per_day_counts.reserve(d.days.size());
    std::size_t total = 0;
    bool first = true;
    std::int64_t prev_day = 0;
    for (const auto& day : d.days) {
        r.per_day_counts.push_back(day.transactions.size());
        total += day.transactions.size();
        if (day.transactions.empty())
            r.violations.push_back({day.day_index, "day has no transactions"});
        if (!first && day.day_index <= prev_day)
            r.violations.push_back({day.day_index, "day_index not strictly increasing"});
        prev_day = day.day_index;
        double prev_t = -1.0;
        for (const auto& t : day.transactions) {
            if (t.time_hours < prev_t) {
                r.violations.push_back({day.day_index, "transactions not sorted by time"});
                break;
            }
            prev_t = t.time_hours;
        }
        for (const auto& t : day.transactions) {
            if (t.mcc >= d.vocab.mcc || t.txn_type >= d.vocab.txn_type ||
                (t.currency && *t.currency >= d.vocab.currency) ||
                (t.country && *t.country >= d.vocab.country)) {
                r.violations.push_back({day.day_index, "token index exceeds vocabulary size"});
                break;
            }
        }
        double label = d.task == TaskKind::regression ? day.rate_label
                                                      : static_cast<double>(day.class_label);
        if (d.task == TaskKind::regression && (label < 0.0 || label > 1.0))
            r.violations.push_back({day.day_index, "regression label outside [0,1]"});
        if (first) {
            r.min_label = r.max_label = label;
            first = false;
        } else {
            r.min_label = std::min(r.min_label, label);
            r.max_label = std::max(r.max_label, label);
        }
    }
    if (!r.per_day_counts.empty()) {
        r.min_count = *std::min_element(r.per_day_counts.begin(), r.per_day_counts.end());
        r.max_count = *std::max_element(r.per_day_counts.begin(), r.per_day_counts.end());
        r.mean_count = static_cast<double>(total) / static_cast<double>(r.per_day_counts.size());
    }
    return r;
}

} // namespace txn
