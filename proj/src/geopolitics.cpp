#include "threatgeo/geopolitics.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include "threatgeo/util.hpp"

namespace threatgeo::geopolitics {

namespace {

std::string norm_key(std::string_view raw) {
    return util::lower_ascii(util::collapse_ws(raw));
}

std::vector<std::string> split_pipe(const std::string& line) {
    std::vector<std::string> parts;
    size_t start = 0;
    while (true) {
        size_t sep = line.find('|', start);
        if (sep == std::string::npos) {
            parts.push_back(util::trim(line.substr(start)));
            break;
        }
        parts.push_back(util::trim(line.substr(start, sep - start)));
        start = sep + 1;
    }
    return parts;
}

void load_alias_file(const std::filesystem::path& path, PlaceKind kind, CanonicalTable& table) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read alias table: " + path.string());
    std::string line;
    while (std::getline(in, line)) {
        std::string t = util::trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto parts = split_pipe(t);
        std::vector<std::string> aliases(parts.begin() + 1, parts.end());
        if (kind == PlaceKind::country) {
            table.add_country(parts[0], aliases);
        } else {
            table.add_region(parts[0], aliases);
        }
    }
}

}  // namespace

CanonicalTable CanonicalTable::load(const std::filesystem::path& countries_file,
                                    const std::filesystem::path& regions_file) {
    CanonicalTable table;
    load_alias_file(countries_file, PlaceKind::country, table);
    load_alias_file(regions_file, PlaceKind::region, table);
    return table;
}

CanonicalTable CanonicalTable::load_dir(const std::filesystem::path& geo_dir) {
    return load(geo_dir / "countries.txt", geo_dir / "regions.txt");
}

void CanonicalTable::add_country(const std::string& canonical,
                                 const std::vector<std::string>& aliases) {
    CanonicalPlace place{canonical, PlaceKind::country};
    lookup_[norm_key(canonical)] = place;
    for (const auto& a : aliases) {
        if (!a.empty()) lookup_[norm_key(a)] = place;
    }
    countries_.insert(canonical);
}

void CanonicalTable::add_region(const std::string& canonical,
                                const std::vector<std::string>& aliases) {
    CanonicalPlace place{canonical, PlaceKind::region};
    lookup_[norm_key(canonical)] = place;
    for (const auto& a : aliases) {
        if (!a.empty()) lookup_[norm_key(a)] = place;
    }
}

CanonicalPlace CanonicalTable::canonicalize(std::string_view raw_name) const {
    std::string trimmed = util::collapse_ws(raw_name);
    auto it = lookup_.find(util::lower_ascii(trimmed));
    if (it != lookup_.end()) return it->second;
    return CanonicalPlace{trimmed, PlaceKind::unknown};
}

std::string to_string(Alliance a) {
    switch (a) {
        case Alliance::nato: return "NATO";
        case Alliance::brics: return "BRICS";
        case Alliance::other: return "OTHER";
    }
    return "OTHER";
}

AllianceRoster AllianceRoster::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read alliance roster: " + path.string());
    AllianceRoster roster;
    std::string line;
    while (std::getline(in, line)) {
        std::string t = util::trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto parts = split_pipe(t);
        if (parts.size() != 2) throw std::runtime_error("bad roster line: " + t);
        if (parts[0] == "as_of") {
            roster.as_of = parts[1];
        } else if (parts[0] == "nato") {
            roster.nato.insert(parts[1]);
        } else if (parts[0] == "brics") {
            roster.brics.insert(parts[1]);
        } else {
            throw std::runtime_error("unknown roster entry kind: " + parts[0]);
        }
    }
    for (const auto& c : roster.nato) {
        if (roster.brics.count(c)) {
            throw std::runtime_error("roster sets overlap on: " + c);
        }
    }
    if (roster.nato.size() != 32) {
        throw std::runtime_error("NATO roster must list 32 members, got " +
                                 std::to_string(roster.nato.size()));
    }
    return roster;
}

Alliance AllianceRoster::classify(const CanonicalPlace& place) const {
    if (place.kind != PlaceKind::country) return Alliance::other;
    if (nato.count(place.name)) return Alliance::nato;
    if (brics.count(place.name)) return Alliance::brics;
    return Alliance::other;
}

std::vector<GeoPair> explode_pairs(const std::vector<ThreatRecord>& records,
                                   const CanonicalTable& table, const DateLookup& dates) {
    std::vector<GeoPair> pairs;
    for (const auto& rec : records) {
        if (rec.status != ExtractStatus::ok) continue;
        std::optional<util::Date> date;
        if (auto it = dates.find(rec.ref); it != dates.end()) date = it->second;
        for (const auto& name : rec.origin_countries) {
            pairs.push_back({rec.ref, table.canonicalize(name), Role::origin, rec.energy_related,
                             date});
        }
        for (const auto& name : rec.target_countries) {
            pairs.push_back({rec.ref, table.canonicalize(name), Role::target, rec.energy_related,
                             date});
        }
    }
    return pairs;
}

namespace {

std::vector<RankedEntry> rank_counts(const std::map<std::string, long long>& counts,
                                     std::size_t k) {
    std::vector<RankedEntry> entries;
    entries.reserve(counts.size());
    for (const auto& [name, count] : counts) entries.push_back({name, count});
    std::stable_sort(entries.begin(), entries.end(), [](const RankedEntry& a, const RankedEntry& b) {
        if (a.count != b.count) return a.count > b.count;
        return a.name < b.name;
    });
    if (entries.size() > k) entries.resize(k);
    return entries;
}

}  // namespace

std::vector<RankedEntry> top_k(const std::vector<GeoPair>& pairs, Role role, std::size_t k,
                               EnergyFilter filter) {
    if (k < 1) throw std::invalid_argument("top_k requires k >= 1");
    std::map<std::string, long long> counts;
    for (const auto& p : pairs) {
        if (p.role != role) continue;
        if (p.place.kind == PlaceKind::unknown) continue;
        if (filter == EnergyFilter::energy && !p.energy_related) continue;
        if (filter == EnergyFilter::non_energy && p.energy_related) continue;
        ++counts[p.place.name];
    }
    return rank_counts(counts, k);
}

long long AllianceCounts::total() const {
    long long t = 0;
    for (const auto& row : counts) {
        for (long long c : row) t += c;
    }
    return t;
}

AllianceCounts alliance_counts(const AllianceRoster& roster, const std::vector<GeoPair>& pairs,
                               Role role) {
    AllianceCounts table;
    for (const auto& p : pairs) {
        if (p.role != role) continue;
        ++table.at(roster.classify(p.place), p.energy_related);
    }
    return table;
}

std::vector<RankedEntry> dyad_timeline(const std::vector<ThreatRecord>& records,
                                       const DateLookup& dates, const CanonicalTable& table,
                                       const std::string& origin_country,
                                       const std::string& target_country, Bucket bucket) {
    const std::string origin = table.canonicalize(origin_country).name;
    const std::string target = table.canonicalize(target_country).name;

    std::map<std::string, long long> counts;
    for (const auto& rec : records) {
        if (rec.status != ExtractStatus::ok) continue;
        auto it = dates.find(rec.ref);
        if (it == dates.end()) continue;

        auto has = [&](const std::vector<std::string>& names, const std::string& wanted) {
            for (const auto& n : names) {
                if (table.canonicalize(n).name == wanted) return true;
            }
            return false;
        };
        if (!has(rec.origin_countries, origin) || !has(rec.target_countries, target)) continue;

        ++counts[bucket == Bucket::year ? it->second.year_key() : it->second.month_key()];
    }

    std::vector<RankedEntry> series;
    series.reserve(counts.size());
    for (const auto& [period, count] : counts) series.push_back({period, count});
    return series;  // std::map keeps periods ascending
}

std::vector<RankedEntry> rank_categorical(const std::vector<RawRecord>& records,
                                          const std::string& field_name, std::size_t k) {
    if (k < 1) throw std::invalid_argument("rank_categorical requires k >= 1");
    std::map<std::string, long long> counts;
    bool seen_field = false;
    for (const auto& rec : records) {
        auto it = rec.structured_hints.find(field_name);
        if (it == rec.structured_hints.end()) continue;
        seen_field = true;
        for (const auto& value : it->second) {
            std::string v = util::trim(value);
            if (!v.empty()) ++counts[v];
        }
    }
    if (!seen_field) {
        util::warn("field '" + field_name + "' missing on every record");
        return {};
    }
    return rank_counts(counts, k);
}

}  // namespace threatgeo::geopolitics
