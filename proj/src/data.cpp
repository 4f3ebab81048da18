#include "ikc/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "ikc/csv.hpp"
#include "ikc/errors.hpp"
#include "ikc/rng.hpp"

namespace ikc {

namespace {

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::stringstream ss(s);
    while (std::getline(ss, item, ',')) {
        // trim
        std::size_t b = item.find_first_not_of(" \t");
        std::size_t e = item.find_last_not_of(" \t");
        if (b == std::string::npos) continue;
        out.push_back(item.substr(b, e - b + 1));
    }
    return out;
}

}  // namespace

Schema Schema::adult() {
    Schema s;
    s.name = "adult";
    s.delimiter = ',';
    s.has_header = false;
    s.columns = {"age", "workclass", "fnlwgt", "education", "education-num",
                 "marital-status", "occupation", "relationship", "race", "sex",
                 "capital-gain", "capital-loss", "hours-per-week",
                 "native-country", "income"};
    s.target = "income";
    s.positive = ">50K";
    s.target_strip_dot = true;  // merged adult.test rows end with '.'
    s.categorical = {"workclass", "education", "marital-status", "occupation",
                     "relationship", "race", "sex", "native-country"};
    s.numerical = {"age", "fnlwgt", "education-num", "capital-gain",
                   "capital-loss", "hours-per-week"};
    s.missing_tokens = {"?"};
    return s;
}

Schema Schema::bank() {
    Schema s;
    s.name = "bank";
    s.delimiter = ';';
    s.has_header = true;
    s.target = "y";
    s.positive = "yes";
    s.categorical = {"job", "marital", "education", "default", "housing",
                     "loan", "contact", "month", "poutcome"};
    s.numerical = {"age", "balance", "day", "campaign", "pdays", "previous"};
    s.drop = {"duration"};  // observed only after the call; leaks the target
    s.missing_tokens = {"?", "unknown"};
    return s;
}

Schema Schema::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open schema file: " + path);
    Schema s;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw DataError(path + " line " + std::to_string(line_no) +
                            ": expected key=value");
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        if (key == "name") s.name = value;
        else if (key == "delimiter") {
            if (value == "semicolon") s.delimiter = ';';
            else if (value == "comma") s.delimiter = ',';
            else if (value.size() == 1) s.delimiter = value[0];
            else throw DataError(path + ": bad delimiter '" + value + "'");
        }
        else if (key == "has_header") s.has_header = (value == "true" || value == "1");
        else if (key == "columns") s.columns = split_list(value);
        else if (key == "target") s.target = value;
        else if (key == "positive") s.positive = value;
        else if (key == "target_strip_dot") s.target_strip_dot = (value == "true" || value == "1");
        else if (key == "categorical") s.categorical = split_list(value);
        else if (key == "numerical") s.numerical = split_list(value);
        else if (key == "drop") s.drop = split_list(value);
        else if (key == "missing") s.missing_tokens = split_list(value);
        else throw DataError(path + ": unknown schema key '" + key + "'");
    }
    if (s.target.empty()) throw DataError(path + ": schema missing target");
    return s;
}

Schema Schema::by_name(const std::string& name) {
    if (name == "adult") return adult();
    if (name == "bank") return bank();
    throw DataError("unknown schema name: " + name + " (expected adult|bank)");
}

RawTable read_raw_table(const std::string& path, const Schema& schema) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open data file: " + path);

    RawTable t;
    std::string line;
    int line_no = 0;
    bool header_done = !schema.has_header;
    if (!schema.has_header) {
        if (schema.columns.empty())
            throw DataError("schema " + schema.name +
                            ": has_header=false requires columns=");
        t.columns = schema.columns;
    }

    std::size_t target_col = 0;
    bool target_found = false;
    auto resolve_target = [&]() {
        for (std::size_t c = 0; c < t.columns.size(); ++c)
            if (t.columns[c] == schema.target) {
                target_col = c;
                target_found = true;
            }
        if (!target_found)
            throw DataError(path + ": target column '" + schema.target +
                            "' not found");
    };
    if (!schema.has_header) resolve_target();

    std::int64_t next_id = 0;
    while (std::getline(in, line)) {
        ++line_no;
        // strip CR and skip blank / comment-ish lines (adult.test starts
        // with a '|' banner line)
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '|') continue;
        auto fields = split_csv_line(line, schema.delimiter);
        if (!header_done) {
            t.columns = fields;
            resolve_target();
            header_done = true;
            continue;
        }
        if (fields.size() != t.columns.size())
            throw DataError(path + " line " + std::to_string(line_no) + ": got " +
                            std::to_string(fields.size()) + " fields, expected " +
                            std::to_string(t.columns.size()));
        std::string target_val = fields[target_col];
        if (schema.target_strip_dot && !target_val.empty() &&
            target_val.back() == '.')
            target_val.pop_back();
        t.labels.push_back(target_val == schema.positive ? 1 : 0);
        t.rows.push_back(std::move(fields));
        t.row_ids.push_back(next_id++);
    }
    if (t.rows.empty()) throw DataError(path + ": no data rows");
    return t;
}

namespace {

bool is_missing(const std::string& v, const Schema& schema) {
    for (const auto& tok : schema.missing_tokens)
        if (v == tok) return true;
    return v.empty();
}

std::size_t column_index(const RawTable& raw, const std::string& name,
                         const Schema& schema) {
    for (std::size_t c = 0; c < raw.columns.size(); ++c)
        if (raw.columns[c] == name) return c;
    throw DataError("schema " + schema.name + ": column '" + name +
                    "' not present in data");
}

}  // namespace

Preprocessor Preprocessor::fit(const RawTable& raw, const Schema& schema,
                               std::span<const std::size_t> train_rows) {
    if (train_rows.empty())
        throw DataError("preprocessor fit: empty training split");
    Preprocessor pp;
    pp.missing_tokens_ = schema.missing_tokens;
    pp.provenance_ = schema.name == "adult"
                         ? Provenance::adult
                         : (schema.name == "bank" ? Provenance::bank
                                                  : Provenance::external);

    std::set<std::string> dropped(schema.drop.begin(), schema.drop.end());

    for (const auto& col_name : schema.categorical) {
        if (dropped.count(col_name)) continue;
        const std::size_t c = column_index(raw, col_name, schema);
        std::map<std::string, std::size_t> counts;
        for (std::size_t r : train_rows) {
            const auto& v = raw.rows[r][c];
            if (!is_missing(v, schema)) ++counts[v];
        }
        if (counts.empty())
            throw DataError("column '" + col_name +
                            "' has no observed categories on the training split");
        // Mode with deterministic tie-break: lexicographically smallest.
        std::string mode;
        std::size_t best = 0;
        for (const auto& [v, cnt] : counts)
            if (cnt > best) {
                best = cnt;
                mode = v;
            }
        CatColumn cc;
        cc.col = c;
        cc.mode = mode;
        for (const auto& [v, cnt] : counts) cc.categories.push_back(v);
        // std::map iterates sorted, so categories are lexicographic already.
        pp.cats_.push_back(std::move(cc));
        for (const auto& v : pp.cats_.back().categories)
            pp.names_.push_back(col_name + "=" + v);
    }

    for (const auto& col_name : schema.numerical) {
        if (dropped.count(col_name)) continue;
        const std::size_t c = column_index(raw, col_name, schema);
        std::vector<double> vals;
        vals.reserve(train_rows.size());
        for (std::size_t r : train_rows) {
            const auto& v = raw.rows[r][c];
            if (is_missing(v, schema)) continue;
            vals.push_back(parse_double(v, "column " + col_name + " row " +
                                               std::to_string(r + 1)));
        }
        if (vals.empty())
            throw DataError("column '" + col_name +
                            "' has no observed values on the training split");
        std::sort(vals.begin(), vals.end());
        const std::size_t m = vals.size();
        const double median = m % 2 == 1
                                  ? vals[m / 2]
                                  : 0.5 * (vals[m / 2 - 1] + vals[m / 2]);
        // Mean/std over the imputed training column (population denominator).
        double mean = 0.0;
        const std::size_t n_train = train_rows.size();
        mean = std::accumulate(vals.begin(), vals.end(), 0.0);
        mean += median * static_cast<double>(n_train - m);  // imputed cells
        mean /= static_cast<double>(n_train);
        double var = 0.0;
        for (double v : vals) var += (v - mean) * (v - mean);
        var += static_cast<double>(n_train - m) * (median - mean) * (median - mean);
        var /= static_cast<double>(n_train);
        double sd = std::sqrt(var);
        if (sd == 0.0) sd = 1.0;  // constant column: standardize to zeros
        pp.nums_.push_back({c, median, mean, sd});
        pp.names_.push_back(col_name);
    }

    if (pp.names_.empty())
        throw DataError("schema " + schema.name + " produced no features");
    return pp;
}

bool Preprocessor::missing(const std::string& v) const {
    if (v.empty()) return true;
    for (const auto& tok : missing_tokens_)
        if (v == tok) return true;
    return false;
}

Dataset Preprocessor::transform(const RawTable& raw) const {
    const std::size_t n = raw.rows.size();
    const std::size_t d = names_.size();
    Dataset ds;
    ds.X = Matrix(n, d);
    ds.y = raw.labels;
    ds.row_ids = raw.row_ids;
    ds.feature_names = names_;
    ds.provenance = provenance_;

    for (std::size_t i = 0; i < n; ++i) {
        std::size_t f = 0;
        for (const auto& cc : cats_) {
            std::string v = raw.rows[i][cc.col];
            if (missing(v)) v = cc.mode;
            // A category never seen in training encodes as all zeros
            // (unknown-ignored semantics); known ones one-hot as usual.
            for (std::size_t k = 0; k < cc.categories.size(); ++k)
                ds.X(i, f + k) = (cc.categories[k] == v) ? 1.0 : 0.0;
            f += cc.categories.size();
        }
        for (const auto& nc : nums_) {
            const std::string& v = raw.rows[i][nc.col];
            const double x = missing(v)
                                 ? nc.median
                                 : parse_double(v, "numeric cell row " +
                                                       std::to_string(i + 1));
            ds.X(i, f++) = (x - nc.mean) / nc.std;
        }
    }
    return ds;
}

void SplitSpec::validate() const {
    const double sum = f_train + f_val + f_cal + f_test;
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("SplitSpec fractions must sum to 1");
    if (f_train <= 0 || f_val < 0 || f_cal < 0 || f_test < 0)
        throw std::invalid_argument("SplitSpec fractions must be nonnegative");
}

SplitIndices make_split(std::size_t n, const SplitSpec& spec) {
    spec.validate();
    const std::size_t n_test = static_cast<std::size_t>(
        std::floor(spec.f_test * static_cast<double>(n)));
    const std::size_t n_val = static_cast<std::size_t>(
        std::floor(spec.f_val * static_cast<double>(n)));
    const std::size_t n_cal = static_cast<std::size_t>(
        std::floor(spec.f_cal * static_cast<double>(n)));
    if (n_test + n_val + n_cal >= n)
        throw std::invalid_argument("make_split: dataset too small");

    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);

    SplitIndices out;
    std::vector<std::size_t> rest;
    if (spec.fixed_test) {
        Rng test_rng = Rng::derive(spec.test_seed, {0x74657374ULL});  // "test"
        std::vector<std::size_t> shuffled = idx;
        test_rng.shuffle(shuffled);
        out.test.assign(shuffled.begin(), shuffled.begin() + n_test);
        rest.assign(shuffled.begin() + n_test, shuffled.end());
        std::sort(rest.begin(), rest.end());
    } else {
        rest = idx;
    }

    Rng rng = Rng::derive(spec.seed, {0x73706c74ULL});  // "splt"
    rng.shuffle(rest);
    std::size_t pos = 0;
    if (!spec.fixed_test) {
        out.test.assign(rest.begin(), rest.begin() + n_test);
        pos = n_test;
    }
    out.val.assign(rest.begin() + pos, rest.begin() + pos + n_val);
    pos += n_val;
    out.cal.assign(rest.begin() + pos, rest.begin() + pos + n_cal);
    pos += n_cal;
    out.train.assign(rest.begin() + pos, rest.end());  // remainder to train

    std::sort(out.train.begin(), out.train.end());
    std::sort(out.val.begin(), out.val.end());
    std::sort(out.cal.begin(), out.cal.end());
    std::sort(out.test.begin(), out.test.end());
    if (out.train.empty() || out.val.empty() || out.cal.empty() ||
        out.test.empty())
        throw std::invalid_argument("make_split: an output split is empty");
    return out;
}

Dataset subset(const Dataset& ds, std::span<const std::size_t> rows) {
    Dataset out;
    out.X = Matrix(rows.size(), ds.d());
    out.y.resize(rows.size());
    out.row_ids.resize(rows.size());
    out.feature_names = ds.feature_names;
    out.provenance = ds.provenance;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const std::size_t r = rows[i];
        for (std::size_t c = 0; c < ds.d(); ++c) out.X(i, c) = ds.X(r, c);
        out.y[i] = ds.y[r];
        out.row_ids[i] = ds.row_ids[r];
    }
    return out;
}

SplitDatasets split(const Dataset& ds, const SplitSpec& spec) {
    const SplitIndices idx = make_split(ds.n(), spec);
    return take_splits(ds, idx);
}

SplitDatasets take_splits(const Dataset& full, const SplitIndices& idx) {
    return {subset(full, idx.train), subset(full, idx.val),
            subset(full, idx.cal), subset(full, idx.test)};
}

Dataset gen_xor(std::size_t n, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("gen_xor: n must be >= 1");
    Dataset ds;
    ds.X = Matrix(n, 2);
    ds.y.resize(n);
    ds.row_ids.resize(n);
    ds.feature_names = {"x1", "x2"};
    ds.provenance = Provenance::xor_synth;
    Rng rng = Rng::derive(seed, {0x786f72ULL});  // "xor"
    for (std::size_t i = 0; i < n; ++i) {
        const int x1 = rng.bernoulli(0.5) ? 1 : 0;
        const int x2 = rng.bernoulli(0.5) ? 1 : 0;
        ds.X(i, 0) = x1;
        ds.X(i, 1) = x2;
        ds.y[i] = x1 ^ x2;
        ds.row_ids[i] = static_cast<std::int64_t>(i);
    }
    return ds;
}

Dataset inject_label_noise(const Dataset& train, const NoiseSpec& spec,
                           std::uint64_t seed) {
    if (spec.flip_prob < 0.0 || spec.flip_prob > 0.5)
        throw std::invalid_argument("inject_label_noise: flip_prob outside [0, 0.5]");
    Dataset out = train;
    Rng rng = Rng::derive(seed, {0x6e6f6973ULL});  // "nois"
    for (auto& label : out.y)
        if (rng.bernoulli(spec.flip_prob)) label = 1 - label;
    return out;
}

PreparedTabular load_tabular(const std::string& path, const Schema& schema,
                             const SplitSpec& spec) {
    const RawTable raw = read_raw_table(path, schema);
    const SplitIndices idx = make_split(raw.rows.size(), spec);
    const Preprocessor pp = Preprocessor::fit(raw, schema, idx.train);
    return {pp.transform(raw), idx};
}

void write_processed_csv(std::ostream& os, const Dataset& ds) {
    std::vector<std::string> header{"row_id"};
    for (std::size_t c = 0; c < ds.d(); ++c)
        header.push_back("f" + std::to_string(c + 1));
    header.push_back("label");
    write_csv_row(os, header);
    for (std::size_t i = 0; i < ds.n(); ++i) {
        std::vector<std::string> row{std::to_string(ds.row_ids[i])};
        for (std::size_t c = 0; c < ds.d(); ++c)
            row.push_back(format_double(ds.X(i, c)));
        row.push_back(std::to_string(ds.y[i]));
        write_csv_row(os, row);
    }
}

Dataset concat(const Dataset& a, const Dataset& b) {
    if (a.d() != b.d())
        throw std::invalid_argument("concat: feature dimension mismatch");
    Dataset out;
    out.X = Matrix(a.n() + b.n(), a.d());
    out.y.reserve(a.n() + b.n());
    out.row_ids.reserve(a.n() + b.n());
    out.feature_names = a.feature_names;
    out.provenance = a.provenance;
    for (std::size_t i = 0; i < a.n(); ++i)
        for (std::size_t c = 0; c < a.d(); ++c) out.X(i, c) = a.X(i, c);
    for (std::size_t i = 0; i < b.n(); ++i)
        for (std::size_t c = 0; c < b.d(); ++c) out.X(a.n() + i, c) = b.X(i, c);
    out.y = a.y;
    out.y.insert(out.y.end(), b.y.begin(), b.y.end());
    out.row_ids = a.row_ids;
    out.row_ids.insert(out.row_ids.end(), b.row_ids.begin(), b.row_ids.end());
    return out;
}

}  // namespace ikc
