#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "threatgeo/backend.hpp"
#include "threatgeo/io.hpp"
#include "threatgeo/record.hpp"

namespace threatgeo::extract {

enum class FieldKind { string_list, boolean };

std::string to_string(FieldKind k);

struct FieldDescriptor {
    std::string name;
    FieldKind kind = FieldKind::string_list;
    std::string description;
};

// Ordered field descriptors injected into the prompt and enforced on every
// response. extra_examples is a hook for prompt-hardening examples; entries
// are appended to the prompt verbatim.
struct ExtractionSchema {
    std::string domain_keyword = "energy";
    std::vector<FieldDescriptor> fields;
    std::vector<std::string> extra_examples;

    // [country_of_origin, country_of_target, <domain>_related]
    static ExtractionSchema default_for(const std::string& domain_keyword = "energy");
    static ExtractionSchema load(const std::filesystem::path& path);

    void validate() const;  // throws on empty or duplicate field names
};

struct BackendConfig {
    std::string model_id;
    double temperature = 0.1;
    std::string response_format = "application/json";
    double inter_call_delay_s = 7.0;
    int max_retries = 2;
};

// Pure function of (schema, description): the prompt names every schema field
// in order with its kind, states the domain keyword, and embeds the
// description verbatim. Throws on an empty schema or blank description.
std::string build_prompt(const ExtractionSchema& schema, const std::string& description);

using FieldValue = std::variant<std::vector<std::string>, bool>;

struct ParsedFields {
    // Schema order.
    std::vector<std::pair<std::string, FieldValue>> values;

    const FieldValue* find(std::string_view name) const;
};

struct ParseError {
    std::string reason;
};

// Strict validation against the schema: the body must be a single JSON object
// holding exactly the schema's fields with matching kinds.
std::variant<ParsedFields, ParseError> parse_response(const ExtractionSchema& schema,
                                                      std::string_view body);

// Canonical serialization of parsed fields (schema order). parse_response of
// the result round-trips to the same values.
std::string serialize_fields(const ExtractionSchema& schema, const ParsedFields& fields);

using Checkpoint = std::map<RecordRef, ThreatRecord>;

// Loads a line-delimited checkpoint; any readable prefix is valid. A torn
// trailing line (interrupted write) is ignored with a warning; duplicate refs
// keep the first entry.
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct RunStats {
    size_t processed = 0;
    size_t skipped = 0;
    size_t backend_calls = 0;
    size_t ok = 0;
    size_t parse_errors = 0;
    size_t backend_errors = 0;
    bool stopped_early = false;
};

// Drives the extraction loop: prompt, throttled inference, strict parsing,
// per-record fault capture, and incremental checkpointing. Exactly one
// backend call is in flight at a time and consecutive call starts are
// separated by at least inter_call_delay_s (retries included).
class ExtractPipeline {
public:
    ExtractPipeline(Backend& backend, BackendConfig config, ExtractionSchema schema);

    // Provenance timestamp source; deterministic runs install a fixed clock.
    void set_clock(std::function<std::string()> now_iso);

    // Never throws past the record boundary: every failure mode is encoded in
    // the returned record's status.
    ThreatRecord extract_one(const RawRecord& record);

    // Records already present in the checkpoint are skipped without a backend
    // call; each result is flushed before the next call begins. should_stop is
    // polled between records for graceful shutdown.
    RunStats run(const std::vector<RawRecord>& records, const std::filesystem::path& checkpoint,
                 const io::MetaHeader& meta, const std::function<bool()>& should_stop = {});

private:
    std::string call_backend(const std::string& prompt);

    Backend& backend_;
    BackendConfig config_;
    ExtractionSchema schema_;
    std::function<std::string()> now_iso_;
    bool throttled_once_ = false;
    size_t total_calls_ = 0;
    std::chrono::steady_clock::time_point last_call_start_{};
};

}  // namespace threatgeo::extract
