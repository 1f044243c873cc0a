#include "threatgeo/runconfig.hpp"

#include <set>

#include "threatgeo/util.hpp"

namespace threatgeo::config {

namespace {

void check_path(const std::string& field, const std::string& value, bool required,
                std::vector<std::string>& errors) {
    if (value.empty()) {
        if (required) errors.push_back(field + ": missing");
        return;
    }
    if (!std::filesystem::exists(value)) {
        errors.push_back(field + ": path not found: " + value);
    }
}

}  // namespace

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::string raw;
    try {
        raw = io::read_file(path);
    } catch (const std::exception& e) {
        throw ConfigError(e.what(), {"config: unreadable"});
    }
    ordered_json j = ordered_json::parse(raw, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw ConfigError("config is not a JSON object: " + path.string(),
                          {"config: malformed JSON"});
    }

    RunConfig cfg;
    cfg.config_hash = util::content_hash16(raw);
    std::vector<std::string> errors;

    if (j.contains("sources")) {
        size_t i = 0;
        std::set<std::string> seen_ids;
        for (const auto& s : j["sources"]) {
            ingest::SourceDescriptor d;
            try {
                d.source_id = s.at("source_id").get<std::string>();
                d.kind = ingest::source_kind_from_string(s.at("kind").get<std::string>());
                d.format = ingest::source_format_from_string(s.at("format").get<std::string>());
                d.path = s.at("path").get<std::string>();
            } catch (const std::exception& e) {
                errors.push_back("sources[" + std::to_string(i) + "]: " + e.what());
                ++i;
                continue;
            }
            if (!seen_ids.insert(d.source_id).second) {
                errors.push_back("sources[" + std::to_string(i) + "].source_id: duplicate '" +
                                 d.source_id + "'");
            }
            check_path("sources[" + std::to_string(i) + "].path", d.path, true, errors);
            cfg.sources.push_back(std::move(d));
            ++i;
        }
    }

    cfg.schema_path = j.value("schema", "");
    cfg.lexicon_path = j.value("lexicon", "");
    cfg.geo_dir = j.value("geo", "");
    cfg.category_map_path = j.value("category_map", "");
    cfg.cache_dir = j.value("cache_dir", "");
    cfg.output_dir = j.value("output_dir", "");
    cfg.mock_table = j.value("mock_table", "");
    cfg.ioc_fixture = j.value("ioc_fixture", "");
    cfg.seed = j.value("seed", uint64_t{0});
    cfg.top_k = j.value("top_k", std::size_t{5});

    if (j.contains("backend")) {
        const auto& b = j["backend"];
        cfg.backend.model_id = b.value("model_id", "");
        cfg.backend.temperature = b.value("temperature", 0.1);
        cfg.backend.inter_call_delay_s = b.value("inter_call_delay", 7.0);
        cfg.backend.max_retries = b.value("max_retries", 2);
    }
    if (cfg.backend.temperature < 0.0 || cfg.backend.temperature > 1.0) {
        errors.push_back("backend.temperature: must be in [0,1]");
    }

    if (j.contains("dyads")) {
        for (const auto& d : j["dyads"]) {
            DyadSpec spec;
            spec.origin = d.at("origin").get<std::string>();
            spec.target = d.at("target").get<std::string>();
            std::string bucket = d.value("bucket", "year");
            if (bucket == "month") {
                spec.bucket = geopolitics::Bucket::month;
            } else if (bucket == "year") {
                spec.bucket = geopolitics::Bucket::year;
            } else {
                errors.push_back("dyads.bucket: must be 'month' or 'year', got '" + bucket + "'");
            }
            cfg.dyads.push_back(std::move(spec));
        }
    }

    check_path("schema", cfg.schema_path, false, errors);
    check_path("lexicon", cfg.lexicon_path, false, errors);
    check_path("geo", cfg.geo_dir, false, errors);
    check_path("category_map", cfg.category_map_path, false, errors);
    check_path("mock_table", cfg.mock_table, false, errors);
    check_path("ioc_fixture", cfg.ioc_fixture, false, errors);
    // cache_dir and output_dir are created on demand.

    if (!errors.empty()) {
        std::string what = "invalid config " + path.string();
        throw ConfigError(what, errors);
    }
    return cfg;
}

io::MetaHeader RunConfig::meta() const {
    io::MetaHeader m;
    m.seed = seed;
    m.config_hash = config_hash;
    m.run_id = util::content_hash16(config_hash + ":" + std::to_string(seed)).substr(0, 12);
    return m;
}

std::map<std::string, bool> load_category_map(const std::filesystem::path& path) {
    auto j = ordered_json::parse(io::read_file(path));
    std::map<std::string, bool> out;
    for (const auto& [category, value] : j.items()) {
        if (!value.is_boolean()) {
            throw std::invalid_argument("category map value for '" + category +
                                        "' must be a boolean");
        }
        out[category] = value.get<bool>();
    }
    return out;
}

io::MetaHeader make_meta(const std::string& effective_options, uint64_t seed) {
    io::MetaHeader m;
    m.seed = seed;
    m.config_hash = util::content_hash16(effective_options);
    m.run_id = util::content_hash16(m.config_hash + ":" + std::to_string(seed)).substr(0, 12);
    return m;
}

}  // namespace threatgeo::config
