#include "threatgeo/record.hpp"

#include <stdexcept>

namespace threatgeo {

ordered_json RawRecord::to_json() const {
    ordered_json j;
    j["source_id"] = ref.source_id;
    j["record_id"] = ref.record_id;
    j["date"] = date ? ordered_json(date->iso()) : ordered_json(nullptr);
    j["description"] = description;
    ordered_json hints = ordered_json::object();
    for (const auto& [k, vals] : structured_hints) {
        if (vals.size() == 1) {
            hints[k] = vals.front();
        } else {
            hints[k] = vals;
        }
    }
    j["structured_hints"] = std::move(hints);
    j["ground_truth_category"] =
        ground_truth_category ? ordered_json(*ground_truth_category) : ordered_json(nullptr);
    return j;
}

RawRecord RawRecord::from_json(const ordered_json& j) {
    RawRecord r;
    r.ref.source_id = j.at("source_id").get<std::string>();
    r.ref.record_id = j.at("record_id").get<std::string>();
    if (j.contains("date") && !j["date"].is_null()) {
        r.date = util::parse_date(j["date"].get<std::string>());
    }
    r.description = j.at("description").get<std::string>();
    if (j.contains("structured_hints") && j["structured_hints"].is_object()) {
        for (const auto& [k, v] : j["structured_hints"].items()) {
            std::vector<std::string> vals;
            if (v.is_array()) {
                for (const auto& e : v) vals.push_back(e.get<std::string>());
            } else if (!v.is_null()) {
                vals.push_back(v.is_string() ? v.get<std::string>() : v.dump());
            }
            if (!vals.empty()) r.structured_hints[k] = std::move(vals);
        }
    }
    if (j.contains("ground_truth_category") && !j["ground_truth_category"].is_null()) {
        r.ground_truth_category = j["ground_truth_category"].get<std::string>();
    }
    return r;
}

std::string to_string(ExtractStatus s) {
    switch (s) {
        case ExtractStatus::ok: return "ok";
        case ExtractStatus::parse_error: return "parse_error";
        case ExtractStatus::backend_error: return "backend_error";
    }
    return "unknown";
}

ExtractStatus extract_status_from_string(const std::string& s) {
    if (s == "ok") return ExtractStatus::ok;
    if (s == "parse_error") return ExtractStatus::parse_error;
    if (s == "backend_error") return ExtractStatus::backend_error;
    throw std::invalid_argument("unknown extraction status: " + s);
}

ordered_json ThreatRecord::to_json() const {
    ordered_json j;
    j["source_id"] = ref.source_id;
    j["record_id"] = ref.record_id;
    j["status"] = to_string(status);
    if (status == ExtractStatus::ok) {
        j["country_of_origin"] = origin_countries;
        j["country_of_target"] = target_countries;
        j["energy_related"] = energy_related;
    } else {
        j["error_message"] = error_message;
    }
    j["provenance"] = {{"model_id", provenance.model_id},
                       {"temperature", provenance.temperature},
                       {"timestamp", provenance.timestamp}};
    return j;
}

ThreatRecord ThreatRecord::from_json(const ordered_json& j) {
    ThreatRecord r;
    r.ref.source_id = j.at("source_id").get<std::string>();
    r.ref.record_id = j.at("record_id").get<std::string>();
    r.status = extract_status_from_string(j.at("status").get<std::string>());
    if (r.status == ExtractStatus::ok) {
        r.origin_countries = j.at("country_of_origin").get<std::vector<std::string>>();
        r.target_countries = j.at("country_of_target").get<std::vector<std::string>>();
        r.energy_related = j.at("energy_related").get<bool>();
    } else {
        r.error_message = j.at("error_message").get<std::string>();
        if (r.error_message.empty()) {
            throw std::invalid_argument("record " + r.ref.key() +
                                        ": non-ok status requires an error message");
        }
    }
    if (j.contains("provenance")) {
        const auto& p = j["provenance"];
        r.provenance.model_id = p.value("model_id", "");
        r.provenance.temperature = p.value("temperature", 0.1);
        r.provenance.timestamp = p.value("timestamp", "");
    }
    return r;
}

}  // namespace threatgeo
