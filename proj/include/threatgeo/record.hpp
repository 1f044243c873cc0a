#pragma once

#include <compare>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "threatgeo/util.hpp"

#include <nlohmann/json.hpp>

namespace threatgeo {

using ordered_json = nlohmann::ordered_json;

struct RecordRef {
    std::string source_id;
    std::string record_id;

    auto operator<=>(const RecordRef&) const = default;
    std::string key() const { return source_id + "/" + record_id; }
};

// One normalized source entry. structured_hints carries fields the source
// already reports explicitly (e.g. an explicit origin country); values are
// lists because several sources report multi-valued fields.
struct RawRecord {
    RecordRef ref;
    std::optional<util::Date> date;
    std::string description;
    std::map<std::string, std::vector<std::string>> structured_hints;
    std::optional<std::string> ground_truth_category;

    ordered_json to_json() const;
    static RawRecord from_json(const ordered_json& j);
};

enum class ExtractStatus { ok, parse_error, backend_error };

std::string to_string(ExtractStatus s);
ExtractStatus extract_status_from_string(const std::string& s);

struct Provenance {
    std::string model_id;
    double temperature = 0.1;
    std::string timestamp;
};

// Structured extraction result for one record. For status != ok the field
// values are absent and error_message explains the failure.
struct ThreatRecord {
    RecordRef ref;
    std::vector<std::string> origin_countries;
    std::vector<std::string> target_countries;
    bool energy_related = false;
    ExtractStatus status = ExtractStatus::ok;
    std::string error_message;
    Provenance provenance;

    ordered_json to_json() const;
    static ThreatRecord from_json(const ordered_json& j);
};

}  // namespace threatgeo
