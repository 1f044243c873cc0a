#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "threatgeo/record.hpp"

namespace threatgeo::evaluate {

// Binary confusion matrix, positive class = energy-related.
// Rows = true class, columns = predicted, non-energy row first:
//   ( tn  fp )
//   ( fn  tp )
struct ConfusionMatrix {
    long long tn = 0;
    long long fp = 0;
    long long fn = 0;
    long long tp = 0;

    long long total() const { return tn + fp + fn + tp; }
    bool operator==(const ConfusionMatrix&) const = default;
};

struct ClassificationMetrics {
    double accuracy = 0;
    double precision = 0;
    double recall = 0;
    double f1 = 0;
};

struct KeyMismatchError : std::invalid_argument {
    explicit KeyMismatchError(const std::string& what) : std::invalid_argument(what) {}
};

// Counts the four (label, prediction) combinations. Key sets must be equal;
// otherwise throws KeyMismatchError listing the symmetric difference.
ConfusionMatrix confusion(const std::map<RecordRef, bool>& predictions,
                          const std::map<RecordRef, bool>& labels);

// accuracy=(tp+tn)/total, precision=tp/(tp+fp), recall=tp/(tp+fn), f1 the
// harmonic mean. Zero-denominator precision/recall/f1 yield 0 with a warning.
// Throws std::invalid_argument when the matrix is empty.
ClassificationMetrics metrics(const ConfusionMatrix& cm);

// Maps ground_truth_category through the category table. Records without a
// category, or with a category missing from the table, are left unlabeled.
std::map<RecordRef, bool> label_records(const std::vector<RawRecord>& records,
                                        const std::map<std::string, bool>& category_map);

// Deterministic stratified sample without replacement: exactly n_per_class
// records per class, labels derived via category_map. Throws when a class has
// fewer than n_per_class labeled records, naming the deficient class.
std::vector<RawRecord> stratified_sample(const std::vector<RawRecord>& records,
                                         const std::map<std::string, bool>& category_map,
                                         std::size_t n_per_class, uint64_t seed);

}  // namespace threatgeo::evaluate
