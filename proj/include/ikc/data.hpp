#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "ikc/matrix.hpp"

namespace ikc {

enum class Provenance { xor_synth, adult, bank, external };

struct Dataset {
    Matrix X;
    std::vector<int> y;
    std::vector<std::int64_t> row_ids;
    std::vector<std::string> feature_names;
    Provenance provenance = Provenance::external;

    std::size_t n() const { return X.rows(); }
    std::size_t d() const { return X.cols(); }
};

// Column typing and target mapping for a tabular CSV. Loadable from a
// plain-text key=value schema file; adult() and bank() are the canonical
// UCI configurations.
struct Schema {
    std::string name;
    char delimiter = ',';
    bool has_header = true;
    std::vector<std::string> columns;  // required when has_header is false
    std::string target;
    std::string positive;            // target value mapped to label 1
    bool target_strip_dot = false;   // UCI adult.test writes ">50K."
    std::vector<std::string> categorical;
    std::vector<std::string> numerical;
    std::vector<std::string> drop;
    std::vector<std::string> missing_tokens;

    static Schema adult();
    static Schema bank();
    static Schema from_file(const std::string& path);
    static Schema by_name(const std::string& name);  // "adult" | "bank"
};

// Cells as strings, target column included; row_ids are source row order.
struct RawTable {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
    std::vector<int> labels;
    std::vector<std::int64_t> row_ids;
};

RawTable read_raw_table(const std::string& path, const Schema& schema);

// Fitted preprocessing state: per-categorical training-split mode and
// category list (one-hot, unknown-ignored), per-numeric training-split
// median / mean / population std. Fit on the training rows only and
// reused verbatim for every other split.
class Preprocessor {
public:
    static Preprocessor fit(const RawTable& raw, const Schema& schema,
                            std::span<const std::size_t> train_rows);
    Dataset transform(const RawTable& raw) const;
    const std::vector<std::string>& feature_names() const { return names_; }

private:
    struct CatColumn {
        std::size_t col;
        std::string mode;                       // imputation value
        std::vector<std::string> categories;    // sorted, from training split
    };
    struct NumColumn {
        std::size_t col;
        double median;
        double mean;
        double std;  // population (n) denominator; clamped to 1 if 0
    };
    std::vector<CatColumn> cats_;
    std::vector<NumColumn> nums_;
    std::vector<std::string> names_;
    std::vector<std::string> missing_tokens_;
    Provenance provenance_ = Provenance::external;

    bool missing(const std::string& v) const;
};

// Split fractions follow the common experimental protocol. When
// fixed_test is set, the test rows are drawn with test_seed (the first
// experiment seed) and are identical for every per-seed re-partition of
// the remainder.
struct SplitSpec {
    double f_train = 0.6125;
    double f_val = 0.15;
    double f_cal = 0.0875;
    double f_test = 0.15;
    std::uint64_t seed = 0;
    std::uint64_t test_seed = 0;
    bool fixed_test = true;

    void validate() const;  // fractions sum to 1 within 1e-9
};

struct SplitIndices {
    std::vector<std::size_t> train, val, cal, test;
};

struct SplitDatasets {
    Dataset train, val, cal, test;
};

SplitIndices make_split(std::size_t n, const SplitSpec& spec);
Dataset subset(const Dataset& ds, std::span<const std::size_t> rows);
SplitDatasets split(const Dataset& ds, const SplitSpec& spec);

// XOR task: x1, x2 ~ Bernoulli(1/2) i.i.d., y = x1 xor x2.
Dataset gen_xor(std::size_t n, std::uint64_t seed);

struct NoiseSpec {
    double flip_prob = 0.0;  // in [0, 0.5]
};

// Training-split-only symmetric label noise; callers pass the training
// dataset by construction so eval splits cannot be touched.
Dataset inject_label_noise(const Dataset& train, const NoiseSpec& spec,
                           std::uint64_t seed);

// Full tabular preparation: raw load, seeded split of row indices,
// preprocessing fit on the training rows, transform of all rows.
struct PreparedTabular {
    Dataset full;
    SplitIndices indices;
};
PreparedTabular load_tabular(const std::string& path, const Schema& schema,
                             const SplitSpec& spec);

SplitDatasets take_splits(const Dataset& full, const SplitIndices& idx);

// Canonical processed-matrix export: header row_id,f1..fd,label.
void write_processed_csv(std::ostream& os, const Dataset& ds);

Dataset concat(const Dataset& a, const Dataset& b);

}  // namespace ikc
