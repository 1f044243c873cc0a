#include "threatgeo/evaluate.hpp"

#include <algorithm>
#include <sstream>

#include "threatgeo/util.hpp"

namespace threatgeo::evaluate {

ConfusionMatrix confusion(const std::map<RecordRef, bool>& predictions,
                          const std::map<RecordRef, bool>& labels) {
    std::vector<std::string> only_pred, only_label;
    for (const auto& [ref, _] : predictions) {
        if (!labels.count(ref)) only_pred.push_back(ref.key());
    }
    for (const auto& [ref, _] : labels) {
        if (!predictions.count(ref)) only_label.push_back(ref.key());
    }
    if (!only_pred.empty() || !only_label.empty()) {
        std::ostringstream os;
        os << "prediction/label key sets differ;";
        if (!only_pred.empty()) {
            os << " only in predictions:";
            for (const auto& k : only_pred) os << " " << k;
            os << ";";
        }
        if (!only_label.empty()) {
            os << " only in labels:";
            for (const auto& k : only_label) os << " " << k;
        }
        throw KeyMismatchError(os.str());
    }

    ConfusionMatrix cm;
    for (const auto& [ref, label] : labels) {
        bool pred = predictions.at(ref);
        if (label) {
            pred ? ++cm.tp : ++cm.fn;
        } else {
            pred ? ++cm.fp : ++cm.tn;
        }
    }
    return cm;
}

ClassificationMetrics metrics(const ConfusionMatrix& cm) {
    const long long total = cm.total();
    if (total <= 0) throw std::invalid_argument("confusion matrix is empty");

    ClassificationMetrics m;
    m.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(total);

    if (cm.tp + cm.fp > 0) {
        m.precision = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp);
    } else {
        util::warn("precision denominator is zero; reporting 0");
    }
    if (cm.tp + cm.fn > 0) {
        m.recall = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
    } else {
        util::warn("recall denominator is zero; reporting 0");
    }
    if (m.precision + m.recall > 0) {
        m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    }
    return m;
}

std::map<RecordRef, bool> label_records(const std::vector<RawRecord>& records,
                                        const std::map<std::string, bool>& category_map) {
    std::map<RecordRef, bool> labels;
    size_t unmapped = 0;
    for (const auto& r : records) {
        if (!r.ground_truth_category) continue;
        auto it = category_map.find(*r.ground_truth_category);
        if (it == category_map.end()) {
            ++unmapped;
            continue;
        }
        labels[r.ref] = it->second;
    }
    if (unmapped > 0) {
        util::warn(std::to_string(unmapped) + " records had categories absent from the mapping");
    }
    return labels;
}

namespace {

// splitmix64; fixed here so sampling is reproducible across platforms and
// standard library versions.
struct SampleRng {
    uint64_t state;
    explicit SampleRng(uint64_t seed) : state(seed) {}
    uint64_t next() {
        state += 0x9e3779b97f4a7c15ULL;
        uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    // Unbiased bounded draw via rejection.
    uint64_t below(uint64_t bound) {
        uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            uint64_t r = next();
            if (r >= threshold) return r % bound;
        }
    }
};

// Partial Fisher-Yates: deterministically pick n items from pool.
std::vector<size_t> draw(std::vector<size_t> pool, size_t n, SampleRng& rng) {
    std::vector<size_t> picked;
    picked.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        size_t j = i + static_cast<size_t>(rng.below(pool.size() - i));
        std::swap(pool[i], pool[j]);
        picked.push_back(pool[i]);
    }
    return picked;
}

}  // namespace

std::vector<RawRecord> stratified_sample(const std::vector<RawRecord>& records,
                                         const std::map<std::string, bool>& category_map,
                                         std::size_t n_per_class, uint64_t seed) {
    auto labels = label_records(records, category_map);

    // Canonical per-class pools ordered by record ref so the draw depends only
    // on the record set, not on input ordering.
    std::vector<size_t> order(records.size());
    for (size_t i = 0; i < records.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return records[a].ref < records[b].ref;
    });

    std::vector<size_t> positive, negative;
    for (size_t idx : order) {
        auto it = labels.find(records[idx].ref);
        if (it == labels.end()) continue;
        (it->second ? positive : negative).push_back(idx);
    }

    if (positive.size() < n_per_class) {
        throw std::invalid_argument("insufficient labeled records for class 'energy': have " +
                                    std::to_string(positive.size()) + ", need " +
                                    std::to_string(n_per_class));
    }
    if (negative.size() < n_per_class) {
        throw std::invalid_argument("insufficient labeled records for class 'non-energy': have " +
                                    std::to_string(negative.size()) + ", need " +
                                    std::to_string(n_per_class));
    }

    std::vector<RawRecord> out;
    if (n_per_class == 0) return out;

    SampleRng rng(seed);
    auto pos_pick = draw(positive, n_per_class, rng);
    auto neg_pick = draw(negative, n_per_class, rng);

    std::vector<size_t> all;
    all.insert(all.end(), pos_pick.begin(), pos_pick.end());
    all.insert(all.end(), neg_pick.begin(), neg_pick.end());
    std::sort(all.begin(), all.end(), [&](size_t a, size_t b) {
        return records[a].ref < records[b].ref;
    });
    out.reserve(all.size());
    for (size_t idx : all) out.push_back(records[idx]);
    return out;
}

}  // namespace threatgeo::evaluate
