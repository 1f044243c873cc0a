#include "threatgeo/extract.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <set>
#include <sstream>
#include <thread>

#include "threatgeo/util.hpp"

namespace threatgeo::extract {

std::string to_string(FieldKind k) {
    return k == FieldKind::string_list ? "list of strings" : "boolean";
}

ExtractionSchema ExtractionSchema::default_for(const std::string& domain_keyword) {
    ExtractionSchema schema;
    schema.domain_keyword = domain_keyword;
    schema.fields = {
        {"country_of_origin", FieldKind::string_list,
         "Countries the attack or threat actor originates from"},
        {"country_of_target", FieldKind::string_list,
         "Countries targeted by the attack or threat actor"},
        {domain_keyword + "_related", FieldKind::boolean,
         "Whether the incident concerns the " + domain_keyword + " domain"},
    };
    return schema;
}

ExtractionSchema ExtractionSchema::load(const std::filesystem::path& path) {
    auto j = ordered_json::parse(io::read_file(path));
    ExtractionSchema schema;
    schema.domain_keyword = j.value("domain_keyword", "energy");
    if (j.contains("fields")) {
        for (const auto& f : j["fields"]) {
            FieldDescriptor d;
            d.name = f.at("name").get<std::string>();
            std::string kind = f.at("kind").get<std::string>();
            if (kind == "string-list") {
                d.kind = FieldKind::string_list;
            } else if (kind == "boolean") {
                d.kind = FieldKind::boolean;
            } else {
                throw std::invalid_argument("unknown field kind: " + kind);
            }
            d.description = f.value("description", "");
            schema.fields.push_back(std::move(d));
        }
    } else {
        schema = default_for(schema.domain_keyword);
    }
    if (j.contains("extra_examples")) {
        schema.extra_examples = j["extra_examples"].get<std::vector<std::string>>();
    }
    schema.validate();
    return schema;
}

void ExtractionSchema::validate() const {
    if (fields.empty()) throw std::invalid_argument("schema has no fields");
    std::set<std::string> names;
    for (const auto& f : fields) {
        if (f.name.empty()) throw std::invalid_argument("schema field with empty name");
        if (!names.insert(f.name).second) {
            throw std::invalid_argument("duplicate schema field: " + f.name);
        }
    }
}

std::string build_prompt(const ExtractionSchema& schema, const std::string& description) {
    schema.validate();
    if (util::trim(description).empty()) {
        throw std::invalid_argument("description is empty");
    }

    std::ostringstream os;
    os << "You are a cyber threat intelligence analyst for the " << schema.domain_keyword
       << " domain.\n"
       << "Read the incident description and answer with a single JSON object containing "
          "exactly these keys, in this order:\n";
    for (const auto& f : schema.fields) {
        os << "  - \"" << f.name << "\" (" << to_string(f.kind) << ")";
        if (!f.description.empty()) os << ": " << f.description;
        os << "\n";
    }
    os << "Do not add keys, omit keys, or wrap the object in markdown.\n";
    for (const auto& example : schema.extra_examples) {
        os << "Example:\n" << example << "\n";
    }
    os << "Incident description:\n" << description << "\n";
    return os.str();
}

const FieldValue* ParsedFields::find(std::string_view name) const {
    for (const auto& [n, v] : values) {
        if (n == name) return &v;
    }
    return nullptr;
}

std::variant<ParsedFields, ParseError> parse_response(const ExtractionSchema& schema,
                                                      std::string_view body) {
    if (util::trim(body).empty()) return ParseError{"empty response"};

    ordered_json j = ordered_json::parse(body, nullptr, false);
    if (j.is_discarded()) return ParseError{"malformed object text"};
    if (!j.is_object()) return ParseError{"response is not an object"};

    for (const auto& [key, _] : j.items()) {
        bool known = false;
        for (const auto& f : schema.fields) {
            if (f.name == key) { known = true; break; }
        }
        if (!known) return ParseError{"unexpected field: " + key};
    }

    ParsedFields out;
    for (const auto& f : schema.fields) {
        if (!j.contains(f.name)) return ParseError{"missing field: " + f.name};
        const auto& v = j[f.name];
        if (f.kind == FieldKind::string_list) {
            if (!v.is_array()) return ParseError{"type mismatch: " + f.name};
            std::vector<std::string> items;
            for (const auto& e : v) {
                if (!e.is_string()) return ParseError{"type mismatch: " + f.name};
                items.push_back(e.get<std::string>());
            }
            out.values.emplace_back(f.name, std::move(items));
        } else {
            if (!v.is_boolean()) return ParseError{"type mismatch: " + f.name};
            out.values.emplace_back(f.name, v.get<bool>());
        }
    }
    return out;
}

std::string serialize_fields(const ExtractionSchema& schema, const ParsedFields& fields) {
    ordered_json j;
    for (const auto& f : schema.fields) {
        const FieldValue* v = fields.find(f.name);
        if (!v) throw std::invalid_argument("missing value for field: " + f.name);
        if (f.kind == FieldKind::string_list) {
            j[f.name] = std::get<std::vector<std::string>>(*v);
        } else {
            j[f.name] = std::get<bool>(*v);
        }
    }
    return j.dump();
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    Checkpoint cp;
    if (!std::filesystem::exists(path)) return cp;

    // Detect a torn trailing line: content not ending in '\n'.
    std::string content = io::read_file(path);
    bool torn_tail = !content.empty() && content.back() != '\n';
    size_t last_line_no = 0;
    if (!content.empty()) {
        last_line_no = static_cast<size_t>(std::count(content.begin(), content.end(), '\n')) +
                       (torn_tail ? 1 : 0);
    }

    io::for_each_jsonl(
        path,
        [&](size_t, const ordered_json& j) {
            ThreatRecord rec = ThreatRecord::from_json(j);
            auto [it, inserted] = cp.emplace(rec.ref, std::move(rec));
            if (!inserted) {
                util::warn("duplicate checkpoint entry for " + it->first.key() +
                           "; keeping the first");
            }
        },
        [&](size_t line_no, const std::string&) {
            if (torn_tail && line_no == last_line_no) {
                util::warn("ignoring torn trailing checkpoint line " + std::to_string(line_no));
            } else {
                util::warn("skipping malformed checkpoint line " + std::to_string(line_no));
            }
        });
    return cp;
}

namespace {

std::string wallclock_iso() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

ExtractPipeline::ExtractPipeline(Backend& backend, BackendConfig config, ExtractionSchema schema)
    : backend_(backend), config_(std::move(config)), schema_(std::move(schema)) {
    schema_.validate();
    now_iso_ = wallclock_iso;
}

void ExtractPipeline::set_clock(std::function<std::string()> now_iso) {
    now_iso_ = std::move(now_iso);
}

std::string ExtractPipeline::call_backend(const std::string& prompt) {
    // Global throttle: consecutive call starts, retries included, are spaced
    // by at least the configured delay.
    if (throttled_once_) {
        auto next_allowed = last_call_start_ +
                            std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                std::chrono::duration<double>(config_.inter_call_delay_s));
        std::this_thread::sleep_until(next_allowed);
    }
    last_call_start_ = std::chrono::steady_clock::now();
    throttled_once_ = true;
    ++total_calls_;
    return backend_.send(prompt);
}

ThreatRecord ExtractPipeline::extract_one(const RawRecord& record) {
    ThreatRecord out;
    out.ref = record.ref;
    out.provenance = {backend_.model_id().empty() ? config_.model_id : backend_.model_id(),
                      config_.temperature, now_iso_()};

    std::string body;
    bool got_body = false;
    std::string last_error;
    try {
        const std::string prompt = build_prompt(schema_, record.description);
        for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
            try {
                body = call_backend(prompt);
                got_body = true;
                break;
            } catch (const TransportError& e) {
                last_error = e.what();
            }
        }
    } catch (const std::exception& e) {
        out.status = ExtractStatus::backend_error;
        out.error_message = e.what();
        return out;
    }

    if (!got_body) {
        out.status = ExtractStatus::backend_error;
        out.error_message = "transport failed after " + std::to_string(config_.max_retries + 1) +
                            " attempts: " + last_error;
        return out;
    }

    auto parsed = parse_response(schema_, body);
    if (std::holds_alternative<ParseError>(parsed)) {
        out.status = ExtractStatus::parse_error;
        out.error_message = std::get<ParseError>(parsed).reason;
        return out;
    }

    // Field values map positionally by kind: first string-list is the origin
    // list, second the target list, first boolean the domain flag.
    const auto& fields = std::get<ParsedFields>(parsed);
    int list_index = 0;
    bool flag_seen = false;
    for (const auto& [name, value] : fields.values) {
        if (std::holds_alternative<std::vector<std::string>>(value)) {
            const auto& items = std::get<std::vector<std::string>>(value);
            if (list_index == 0) out.origin_countries = items;
            if (list_index == 1) out.target_countries = items;
            ++list_index;
        } else if (!flag_seen) {
            out.energy_related = std::get<bool>(value);
            flag_seen = true;
        }
    }
    out.status = ExtractStatus::ok;
    return out;
}

RunStats ExtractPipeline::run(const std::vector<RawRecord>& records,
                              const std::filesystem::path& checkpoint,
                              const io::MetaHeader& meta,
                              const std::function<bool()>& should_stop) {
    RunStats stats;
    Checkpoint existing = load_checkpoint(checkpoint);
    io::JsonlWriter writer(checkpoint, meta, /*truncate=*/false);

    const size_t calls_at_start = total_calls_;
    for (const auto& record : records) {
        if (existing.count(record.ref)) {
            ++stats.skipped;
            continue;
        }
        if (should_stop && should_stop()) {
            stats.stopped_early = true;
            break;
        }

        ThreatRecord result = extract_one(record);
        stats.backend_calls = total_calls_ - calls_at_start;

        switch (result.status) {
            case ExtractStatus::ok: ++stats.ok; break;
            case ExtractStatus::parse_error: ++stats.parse_errors; break;
            case ExtractStatus::backend_error: ++stats.backend_errors; break;
        }

        writer.append(result.to_json());  // flushed before the next call
        existing.emplace(record.ref, std::move(result));
        ++stats.processed;
    }
    return stats;
}

}  // namespace threatgeo::extract
