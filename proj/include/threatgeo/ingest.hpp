#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "threatgeo/io.hpp"
#include "threatgeo/record.hpp"

namespace threatgeo::ingest {

enum class SourceKind { actor, incident, report, malware };
enum class SourceFormat { json_objects, tabular, text_list };

SourceKind source_kind_from_string(const std::string& s);
SourceFormat source_format_from_string(const std::string& s);
std::string to_string(SourceKind k);
std::string to_string(SourceFormat f);

struct SourceDescriptor {
    std::string source_id;
    SourceKind kind = SourceKind::incident;
    std::string path;
    SourceFormat format = SourceFormat::json_objects;
};

struct IngestError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IngestStats {
    size_t records = 0;
    size_t dropped_empty = 0;
    size_t skipped_malformed = 0;
};

struct IngestResult {
    std::vector<RawRecord> records;
    IngestStats stats;
};

// Declarative per-source field mapping used by the generic readers. Key lists
// are candidates tried in order; dotted keys ("meta.country") descend into
// nested objects.
struct FieldMapping {
    std::vector<std::string> id_keys;
    std::vector<std::string> description_keys;
    std::vector<std::string> date_keys;
    std::vector<std::string> ground_truth_keys;
    // hint name -> candidate source keys
    std::map<std::string, std::vector<std::string>> hint_keys;
};

using AdapterFn = std::function<IngestResult(const SourceDescriptor&)>;

// Adapters are plugins keyed by source_id; unknown sources fall back to a
// generic reader for the descriptor's format.
class AdapterRegistry {
public:
    // Registry preloaded with the builtin source adapters
    // (csis, eurepoc, malpedia, mitre, aiid).
    static AdapterRegistry& builtin();

    void register_adapter(const std::string& source_id, AdapterFn adapter);
    IngestResult ingest(const SourceDescriptor& descriptor) const;

private:
    std::map<std::string, AdapterFn> adapters_;
};

// Loads one dump through the registered adapter (or the generic fallback).
// Unreadable sources throw IngestError; malformed entries are skipped and
// logged with their position; blank descriptions are dropped and counted.
IngestResult ingest_source(const SourceDescriptor& descriptor);

std::map<std::string, size_t> count_by_source(const std::vector<RawRecord>& records);

// Generic format readers, exposed for adapter construction.
IngestResult read_json_objects(const SourceDescriptor& d, const FieldMapping& mapping);
IngestResult read_tabular(const SourceDescriptor& d, const FieldMapping& mapping);
IngestResult read_text_list(const SourceDescriptor& d);

void write_records(const std::filesystem::path& path, const std::vector<RawRecord>& records,
                   const io::MetaHeader& meta);
std::vector<RawRecord> load_records(const std::filesystem::path& path);

}  // namespace threatgeo::ingest
