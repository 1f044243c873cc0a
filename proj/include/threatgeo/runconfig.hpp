#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "threatgeo/extract.hpp"
#include "threatgeo/geopolitics.hpp"
#include "threatgeo/ingest.hpp"
#include "threatgeo/io.hpp"

namespace threatgeo::config {

struct ConfigError : std::runtime_error {
    ConfigError(std::string what, std::vector<std::string> field_errors)
        : std::runtime_error(std::move(what)), fields(std::move(field_errors)) {}
    std::vector<std::string> fields;
};

struct DyadSpec {
    std::string origin;
    std::string target;
    geopolitics::Bucket bucket = geopolitics::Bucket::year;
};

// Declarative run configuration. Secrets never appear here; API keys are
// environment-only.
struct RunConfig {
    std::vector<ingest::SourceDescriptor> sources;
    std::string schema_path;
    std::string lexicon_path;
    std::string geo_dir;
    std::string category_map_path;
    std::string cache_dir;
    std::string output_dir;
    std::string mock_table;   // optional; enables the deterministic backend
    std::string ioc_fixture;  // optional; enables the deterministic scan client
    extract::BackendConfig backend;
    uint64_t seed = 0;
    std::size_t top_k = 5;
    std::vector<DyadSpec> dyads;

    std::string config_hash;  // hash of the config file bytes

    // Parses and validates; every unresolvable path is reported with its
    // field name in one ConfigError.
    static RunConfig load(const std::filesystem::path& path);

    io::MetaHeader meta() const;
};

std::map<std::string, bool> load_category_map(const std::filesystem::path& path);

// Deterministic run identity for ad-hoc subcommand invocations that have no
// config file: hashes the effective option string.
io::MetaHeader make_meta(const std::string& effective_options, uint64_t seed);

}  // namespace threatgeo::config
