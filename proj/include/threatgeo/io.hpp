#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "threatgeo/record.hpp"

namespace threatgeo::io {

// Deterministic per-run identity echoed into every output file. Wall-clock
// timestamps never appear here; they live only in the run metadata file.
struct MetaHeader {
    std::string run_id;
    uint64_t seed = 0;
    std::string config_hash;
};

std::string meta_jsonl_line(const MetaHeader& m);   // {"_meta":{...}}
std::string meta_csv_line(const MetaHeader& m);     // "# run_id=... seed=... config_hash=..."
std::string meta_svg_comment(const MetaHeader& m);  // "<!-- ... -->"

std::string read_file(const std::filesystem::path& path);  // throws on failure

// Write via temp file + rename so readers never observe a partial file.
void atomic_write_file(const std::filesystem::path& path, const std::string& content);

// Calls fn(line_no, object) for every JSON object line. Lines holding a
// "_meta" object are skipped. Malformed lines go to on_bad (default: skip).
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(size_t, const ordered_json&)>& fn,
                    const std::function<void(size_t, const std::string&)>& on_bad = {});

std::vector<ordered_json> read_jsonl(const std::filesystem::path& path);

// Append-oriented writer for line-delimited object files. Each append is
// flushed so any prefix of the file is readable after a crash.
class JsonlWriter {
public:
    // truncate=false appends to an existing file (the meta line is only
    // written when the file is created fresh).
    JsonlWriter(const std::filesystem::path& path, const MetaHeader& meta, bool truncate = true);

    void append(const ordered_json& obj);
    void flush();

private:
    std::ofstream out_;
    std::filesystem::path path_;
};

void write_csv(const std::filesystem::path& path, const MetaHeader& meta,
               const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

}  // namespace threatgeo::io
