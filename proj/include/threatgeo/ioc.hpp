#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "threatgeo/io.hpp"
#include "threatgeo/record.hpp"

namespace threatgeo::ioc {

// One file hash tied to a malware family; the energy flag is inherited from
// the owning threat group(s).
struct IocRecord {
    std::string family;
    std::string hash;  // lowercase hex, 32/40/64 chars
    bool energy_related = false;

    bool operator==(const IocRecord&) const = default;
};

struct GroupToolUsage {
    std::string group;
    bool energy_related = false;
    std::vector<std::string> families;
};

using FamilyIndex = std::map<std::string, std::vector<std::string>>;  // family -> hashes

// One IocRecord per (family, hash); a family's energy flag is the disjunction
// over the groups that use it. max_per_family caps hashes per family
// (0 = unlimited); the cap keeps the lexicographically first hashes so the
// sample is reproducible. Families without hashes produce a warning.
std::vector<IocRecord> harvest_iocs(const std::vector<GroupToolUsage>& groups,
                                    const FamilyIndex& family_index, size_t max_per_family = 0);

void write_iocs(const std::filesystem::path& path, const std::vector<IocRecord>& iocs,
                const io::MetaHeader& meta);
std::vector<IocRecord> load_iocs(const std::filesystem::path& path);

enum class VerdictOutcome { detected, undetected, unsupported };

std::string to_string(VerdictOutcome v);
VerdictOutcome verdict_from_string(const std::string& s);

struct EngineVerdict {
    std::string engine;
    VerdictOutcome outcome = VerdictOutcome::undetected;
    bool is_static_ml = false;
};

struct ScanReport {
    std::string hash;
    std::vector<EngineVerdict> verdicts;  // engine names unique
    std::string fetched_at;

    ordered_json to_json() const;
    static ScanReport from_json(const ordered_json& j);
};

// Engines self-describing as static-ML; used to flag verdicts and split the
// group aggregates.
std::set<std::string> default_static_ml_engines();

struct ScanApiError : std::runtime_error {
    ScanApiError(const std::string& hash, const std::string& msg)
        : std::runtime_error("scan lookup failed for " + hash + ": " + msg), hash(hash) {}
    std::string hash;
};

// Hash-lookup transport for a scanning aggregator; returns the raw response
// body. Implementations throw ScanApiError on failure.
class ScanClient {
public:
    virtual ~ScanClient() = default;
    virtual std::string fetch(const std::string& hash) = 0;
};

class MockScanClient : public ScanClient {
public:
    MockScanClient() = default;
    MockScanClient(MockScanClient&& other) noexcept
        : bodies_(std::move(other.bodies_)),
          errors_(std::move(other.errors_)),
          calls_(other.calls_.load()) {}

    static MockScanClient from_file(const std::filesystem::path& path);

    void add_body(const std::string& hash, std::string body);
    void add_error(const std::string& hash, std::string message);

    std::string fetch(const std::string& hash) override;
    size_t call_count() const { return calls_.load(); }

private:
    std::map<std::string, std::string> bodies_;
    std::map<std::string, std::string> errors_;
    std::atomic<size_t> calls_{0};
    std::mutex mutex_;
};

// Live client: HTTPS GET by hash with a bearer key from the
// THREATGEO_SCAN_API_KEY environment variable, throttled to a
// requests-per-minute budget.
class HttpScanClient : public ScanClient {
public:
    explicit HttpScanClient(std::string base_url, int requests_per_minute = 4);
    std::string fetch(const std::string& hash) override;

private:
    std::string base_url_;
    int rpm_;
    std::mutex mutex_;
    std::chrono::steady_clock::time_point last_request_{};
    bool requested_once_ = false;
};

// Parses an aggregator response (last_analysis_results-style) into verdicts.
// malicious/suspicious count as detected; undetected/harmless as undetected;
// everything else (type-unsupported, timeout, failure) as unsupported.
ScanReport parse_scan_response(const std::string& hash, const std::string& body,
                               const std::set<std::string>& static_ml_engines);

// Local report store: one parsed report plus the verbatim response per hash
// under a fan-out directory, with an append-only index. Writes are atomic
// (temp file + rename).
class ReportCache {
public:
    explicit ReportCache(std::filesystem::path dir);

    bool contains(const std::string& hash) const;
    std::optional<ScanReport> load(const std::string& hash) const;
    void store(const ScanReport& report, const std::string& raw_body);

    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path object_path(const std::string& hash, const char* ext) const;
    std::filesystem::path dir_;
};

// Cache-through fetch: hits return the stored report with no network call;
// misses perform exactly one lookup and persist the report before returning.
// Malformed hashes are rejected before any network activity.
ScanReport fetch_report(ScanClient& client, ReportCache& cache, const std::string& hash,
                        const std::set<std::string>& static_ml_engines,
                        const std::function<std::string()>& now_iso = {});

struct FetchManyStats {
    size_t network_calls = 0;
    size_t cache_hits = 0;
    std::map<std::string, std::string> failures;  // hash -> message
};

// Bounded-parallel fetch with per-hash single-flight (duplicate hashes
// coalesce into one lookup). Failures are collected per hash; the cache stays
// consistent regardless.
std::vector<ScanReport> fetch_many(ScanClient& client, ReportCache& cache,
                                   const std::vector<std::string>& hashes,
                                   const std::set<std::string>& static_ml_engines,
                                   size_t parallelism, FetchManyStats* stats = nullptr,
                                   const std::function<std::string()>& now_iso = {});

struct EngineStats {
    long long scanned = 0;
    long long detected = 0;
    double rate = 0;
    bool is_static_ml = false;
};

struct GroupStats {
    long long scanned = 0;
    long long detected = 0;
    double rate = 0;
};

struct DetectionStats {
    std::map<std::string, EngineStats> engines;
    GroupStats static_ml;
    GroupStats others;
    GroupStats all;
};

enum class IocFilter { energy, all };
enum class Averaging { micro, macro };

// Per-engine rates over the hashes each engine scanned (unsupported verdicts
// leave the denominator unless miss_on_unsupported). Group aggregates are
// micro-averages by default; macro averages the per-engine rates instead.
// Preconditions: reports non-empty, every report hash present in iocs.
DetectionStats detection_rates(const std::vector<ScanReport>& reports,
                               const std::vector<IocRecord>& iocs, IocFilter filter,
                               bool miss_on_unsupported = false,
                               Averaging averaging = Averaging::micro);

struct EngineRate {
    std::string engine;
    double rate = 0;
    bool is_static_ml = false;
};

// Descending by rate, ties alphabetical; engines that scanned nothing are
// excluded from the ranking.
std::vector<EngineRate> rank_engines(const DetectionStats& stats);

}  // namespace threatgeo::ioc
