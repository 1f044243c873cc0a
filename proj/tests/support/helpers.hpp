#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "threatgeo/evaluate.hpp"
#include "threatgeo/geopolitics.hpp"
#include "threatgeo/ioc.hpp"
#include "threatgeo/record.hpp"
#include "threatgeo/util.hpp"

namespace testsupport {

// Deterministic generator independent of the library's sampling RNG.
struct TestRng {
    uint64_t state;
    explicit TestRng(uint64_t seed) : state(seed ^ 0x9e3779b97f4a7c15ULL) {}

    uint64_t next() {
        state += 0x9e3779b97f4a7c15ULL;
        uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    size_t below(size_t n) { return static_cast<size_t>(next() % n); }
    bool chance(double p) { return static_cast<double>(next() % 10000) < p * 10000; }

    template <typename T>
    const T& pick(const std::vector<T>& pool) {
        return pool[below(pool.size())];
    }
};

class TempDir {
public:
    TempDir() {
        std::string tmpl = (std::filesystem::temp_directory_path() / "threatgeo-XXXXXX").string();
        std::vector<char> buf(tmpl.begin(), tmpl.end());
        buf.push_back('\0');
        if (!mkdtemp(buf.data())) throw std::runtime_error("mkdtemp failed");
        path_ = buf.data();
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

// ---------------------------------------------------------------------------
// Independent oracles (naive implementations the fast paths are checked
// against). These intentionally share no code with the library.
// ---------------------------------------------------------------------------

inline bool naive_word_byte(unsigned char c) {
    return (c >= '0' && c <= '9') || (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c >= 0x80;
}

// Lowercase both sides, then test boundary-delimited substring occurrence for
// each phrase independently.
inline bool naive_classify(const std::vector<std::string>& phrases, const std::string& text) {
    auto lower = [](std::string s) {
        for (char& c : s) {
            if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        }
        return s;
    };
    std::string t = lower(text);
    for (const auto& raw : phrases) {
        std::string p = lower(raw);
        if (p.empty()) continue;
        for (size_t pos = t.find(p); pos != std::string::npos; pos = t.find(p, pos + 1)) {
            bool left = pos == 0 || !naive_word_byte(static_cast<unsigned char>(t[pos - 1]));
            size_t end = pos + p.size();
            bool right = end == t.size() || !naive_word_byte(static_cast<unsigned char>(t[end]));
            if (left && right) return true;
        }
    }
    return false;
}

// Four-counter recount over (label, prediction) pairs.
inline threatgeo::evaluate::ConfusionMatrix naive_confusion(
    const std::vector<std::pair<bool, bool>>& label_pred) {
    threatgeo::evaluate::ConfusionMatrix cm;
    for (auto [label, pred] : label_pred) {
        if (label && pred) ++cm.tp;
        if (label && !pred) ++cm.fn;
        if (!label && pred) ++cm.fp;
        if (!label && !pred) ++cm.tn;
    }
    return cm;
}

// Nested-loop recount of place frequencies for one role/filter.
inline std::map<std::string, long long> naive_place_counts(
    const std::vector<threatgeo::geopolitics::GeoPair>& pairs, threatgeo::geopolitics::Role role,
    threatgeo::geopolitics::EnergyFilter filter) {
    using threatgeo::geopolitics::EnergyFilter;
    using threatgeo::geopolitics::PlaceKind;
    std::map<std::string, long long> counts;
    for (const auto& p : pairs) {
        if (p.role != role) continue;
        if (p.place.kind == PlaceKind::unknown) continue;
        if (filter == EnergyFilter::energy && !p.energy_related) continue;
        if (filter == EnergyFilter::non_energy && p.energy_related) continue;
        ++counts[p.place.name];
    }
    return counts;
}

// Per-engine and group recount straight off the verdict lists.
struct NaiveRates {
    std::map<std::string, std::pair<long long, long long>> per_engine;  // scanned, detected
    long long static_scanned = 0, static_detected = 0;
    long long other_scanned = 0, other_detected = 0;
};

inline NaiveRates naive_detection_recount(const std::vector<threatgeo::ioc::ScanReport>& reports,
                                          const std::map<std::string, bool>& hash_energy,
                                          bool energy_only) {
    using threatgeo::ioc::VerdictOutcome;
    NaiveRates out;
    for (const auto& rep : reports) {
        if (energy_only && !hash_energy.at(rep.hash)) continue;
        for (const auto& v : rep.verdicts) {
            if (v.outcome == VerdictOutcome::unsupported) continue;
            bool det = v.outcome == VerdictOutcome::detected;
            auto& [scanned, detected] = out.per_engine[v.engine];
            ++scanned;
            detected += det ? 1 : 0;
            if (v.is_static_ml) {
                ++out.static_scanned;
                out.static_detected += det ? 1 : 0;
            } else {
                ++out.other_scanned;
                out.other_detected += det ? 1 : 0;
            }
        }
    }
    return out;
}

}  // namespace testsupport
