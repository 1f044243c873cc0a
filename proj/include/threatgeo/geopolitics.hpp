#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "threatgeo/record.hpp"

namespace threatgeo::geopolitics {

enum class PlaceKind { country, region, unknown };

struct CanonicalPlace {
    std::string name;
    PlaceKind kind = PlaceKind::unknown;

    bool operator==(const CanonicalPlace&) const = default;
};

// Alias table for countries plus a list of rankable regions. Lookups are
// case- and whitespace-insensitive; unmapped names come back kind=unknown
// with the (trimmed) raw text preserved.
class CanonicalTable {
public:
    static CanonicalTable load(const std::filesystem::path& countries_file,
                               const std::filesystem::path& regions_file);
    static CanonicalTable load_dir(const std::filesystem::path& geo_dir);

    void add_country(const std::string& canonical, const std::vector<std::string>& aliases);
    void add_region(const std::string& canonical, const std::vector<std::string>& aliases);

    CanonicalPlace canonicalize(std::string_view raw_name) const;

    const std::set<std::string>& countries() const { return countries_; }

private:
    std::map<std::string, CanonicalPlace> lookup_;  // normalized alias -> place
    std::set<std::string> countries_;
};

enum class Alliance { nato, brics, other };

std::string to_string(Alliance a);

// Membership snapshot with a fixed as-of date. NATO and BRICS sets must be
// disjoint and the NATO roster must have its full 32 members.
struct AllianceRoster {
    std::string as_of;
    std::set<std::string> nato;
    std::set<std::string> brics;

    static AllianceRoster load(const std::filesystem::path& path);

    // Regions and unknown places always classify as OTHER.
    Alliance classify(const CanonicalPlace& place) const;
};

enum class Role { origin, target };
enum class EnergyFilter { energy, non_energy, all };
enum class Bucket { month, year };

struct GeoPair {
    RecordRef ref;
    CanonicalPlace place;
    Role role = Role::origin;
    bool energy_related = false;
    std::optional<util::Date> date;
};

using DateLookup = std::map<RecordRef, util::Date>;

// One pair per (record, listed country, role); names canonicalized, energy
// flag copied from the record, dates joined from the lookup when present.
// Only status=ok records contribute.
std::vector<GeoPair> explode_pairs(const std::vector<ThreatRecord>& records,
                                   const CanonicalTable& table, const DateLookup& dates = {});

struct RankedEntry {
    std::string name;
    long long count = 0;

    bool operator==(const RankedEntry&) const = default;
};

// Descending by count, ties by name ascending, at most k entries. Places of
// kind=unknown are excluded; regions rank alongside countries. k must be >= 1.
std::vector<RankedEntry> top_k(const std::vector<GeoPair>& pairs, Role role, std::size_t k,
                               EnergyFilter filter);

// (alliance x energy flag) counts. Every pair of the requested role lands in
// exactly one cell; regions and unknowns bucket to OTHER.
struct AllianceCounts {
    long long counts[3][2] = {{0, 0}, {0, 0}, {0, 0}};

    long long& at(Alliance a, bool energy) { return counts[static_cast<int>(a)][energy ? 1 : 0]; }
    long long at(Alliance a, bool energy) const {
        return counts[static_cast<int>(a)][energy ? 1 : 0];
    }
    long long total() const;
};

AllianceCounts alliance_counts(const AllianceRoster& roster, const std::vector<GeoPair>& pairs,
                               Role role);

// Time-bucketed counts of records whose origin list contains origin_country
// and target list contains target_country (after canonicalization). Periods
// with zero count are omitted; keys are "YYYY" or "YYYY-MM".
std::vector<RankedEntry> dyad_timeline(const std::vector<ThreatRecord>& records,
                                       const DateLookup& dates, const CanonicalTable& table,
                                       const std::string& origin_country,
                                       const std::string& target_country, Bucket bucket);

// Top-k values of a structured-hints field; multi-valued fields explode the
// same way countries do. Same ordering and tie rules as top_k.
std::vector<RankedEntry> rank_categorical(const std::vector<RawRecord>& records,
                                          const std::string& field_name, std::size_t k);

}  // namespace threatgeo::geopolitics
