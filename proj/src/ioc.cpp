#include "threatgeo/ioc.hpp"

#include <algorithm>
#include <cstdlib>
#include <ctime>
#include <thread>

#include "threatgeo/io.hpp"
#include "threatgeo/util.hpp"

#include <httplib.h>

namespace threatgeo::ioc {

std::vector<IocRecord> harvest_iocs(const std::vector<GroupToolUsage>& groups,
                                    const FamilyIndex& family_index, size_t max_per_family) {
    // Family energy flag = disjunction over owning groups.
    std::map<std::string, bool> family_energy;
    for (const auto& g : groups) {
        for (const auto& fam : g.families) {
            family_energy[fam] = family_energy[fam] || g.energy_related;
        }
    }

    std::vector<IocRecord> out;
    for (const auto& [family, energy] : family_energy) {
        auto it = family_index.find(family);
        if (it == family_index.end() || it->second.empty()) {
            util::warn("family '" + family + "' has no known hashes");
            continue;
        }
        std::set<std::string> hashes(it->second.begin(), it->second.end());
        size_t taken = 0;
        for (const auto& h : hashes) {
            if (max_per_family && taken >= max_per_family) break;
            std::string hash = util::lower_ascii(util::trim(h));
            if (!util::is_hex_digest(hash)) {
                util::warn("family '" + family + "': skipping malformed hash '" + h + "'");
                continue;
            }
            out.push_back({family, hash, energy});
            ++taken;
        }
    }
    std::sort(out.begin(), out.end(), [](const IocRecord& a, const IocRecord& b) {
        return std::tie(a.family, a.hash) < std::tie(b.family, b.hash);
    });
    return out;
}

void write_iocs(const std::filesystem::path& path, const std::vector<IocRecord>& iocs,
                const io::MetaHeader& meta) {
    io::JsonlWriter writer(path, meta);
    for (const auto& r : iocs) {
        ordered_json j;
        j["family"] = r.family;
        j["hash"] = r.hash;
        j["energy_related"] = r.energy_related;
        writer.append(j);
    }
}

std::vector<IocRecord> load_iocs(const std::filesystem::path& path) {
    std::vector<IocRecord> out;
    io::for_each_jsonl(path, [&](size_t, const ordered_json& j) {
        IocRecord r;
        r.family = j.value("family", "");
        r.hash = j.at("hash").get<std::string>();
        r.energy_related = j.value("energy_related", false);
        out.push_back(std::move(r));
    });
    return out;
}

std::string to_string(VerdictOutcome v) {
    switch (v) {
        case VerdictOutcome::detected: return "detected";
        case VerdictOutcome::undetected: return "undetected";
        case VerdictOutcome::unsupported: return "unsupported";
    }
    return "unsupported";
}

VerdictOutcome verdict_from_string(const std::string& s) {
    if (s == "detected") return VerdictOutcome::detected;
    if (s == "undetected") return VerdictOutcome::undetected;
    if (s == "unsupported") return VerdictOutcome::unsupported;
    throw std::invalid_argument("unknown verdict: " + s);
}

ordered_json ScanReport::to_json() const {
    ordered_json j;
    j["hash"] = hash;
    j["fetched_at"] = fetched_at;
    ordered_json verdict_list = ordered_json::array();
    for (const auto& v : verdicts) {
        verdict_list.push_back({{"engine", v.engine},
                                {"outcome", to_string(v.outcome)},
                                {"is_static_ml", v.is_static_ml}});
    }
    j["verdicts"] = std::move(verdict_list);
    return j;
}

ScanReport ScanReport::from_json(const ordered_json& j) {
    ScanReport r;
    r.hash = j.at("hash").get<std::string>();
    r.fetched_at = j.value("fetched_at", "");
    for (const auto& v : j.at("verdicts")) {
        r.verdicts.push_back({v.at("engine").get<std::string>(),
                              verdict_from_string(v.at("outcome").get<std::string>()),
                              v.value("is_static_ml", false)});
    }
    return r;
}

std::set<std::string> default_static_ml_engines() { return {"Acronis", "SentinelOne"}; }

MockScanClient MockScanClient::from_file(const std::filesystem::path& path) {
    MockScanClient client;
    auto j = ordered_json::parse(io::read_file(path));
    for (const auto& [hash, body] : j.at("responses").items()) {
        client.bodies_[hash] = body.is_string() ? body.get<std::string>() : body.dump();
    }
    if (j.contains("errors")) {
        for (const auto& [hash, msg] : j["errors"].items()) {
            client.errors_[hash] = msg.get<std::string>();
        }
    }
    return client;
}

void MockScanClient::add_body(const std::string& hash, std::string body) {
    bodies_[hash] = std::move(body);
}

void MockScanClient::add_error(const std::string& hash, std::string message) {
    errors_[hash] = std::move(message);
}

std::string MockScanClient::fetch(const std::string& hash) {
    calls_.fetch_add(1);
    std::lock_guard<std::mutex> lock(mutex_);
    if (auto it = errors_.find(hash); it != errors_.end()) {
        throw ScanApiError(hash, it->second);
    }
    auto it = bodies_.find(hash);
    if (it == bodies_.end()) throw ScanApiError(hash, "no mock response configured");
    return it->second;
}

HttpScanClient::HttpScanClient(std::string base_url, int requests_per_minute)
    : base_url_(std::move(base_url)), rpm_(requests_per_minute > 0 ? requests_per_minute : 1) {}

std::string HttpScanClient::fetch(const std::string& hash) {
    const char* key = std::getenv("THREATGEO_SCAN_API_KEY");
    if (!key || !*key) throw ScanApiError(hash, "THREATGEO_SCAN_API_KEY is not set");

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (base_url_.rfind("https://", 0) == 0) {
        throw ScanApiError(hash, "built without TLS support; https endpoint unavailable");
    }
#endif

    {
        // Requests-per-minute budget, enforced across threads.
        std::lock_guard<std::mutex> lock(mutex_);
        auto min_gap = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
            std::chrono::duration<double>(60.0 / rpm_));
        if (requested_once_) std::this_thread::sleep_until(last_request_ + min_gap);
        last_request_ = std::chrono::steady_clock::now();
        requested_once_ = true;
    }

    httplib::Client client(base_url_);
    client.set_connection_timeout(30);
    client.set_read_timeout(60);
    httplib::Headers headers{{"Authorization", std::string("Bearer ") + key}};
    auto res = client.Get("/api/v3/files/" + hash, headers);
    if (!res) throw ScanApiError(hash, httplib::to_string(res.error()));
    if (res->status != 200) {
        throw ScanApiError(hash, "status " + std::to_string(res->status));
    }
    return res->body;
}

ScanReport parse_scan_response(const std::string& hash, const std::string& body,
                               const std::set<std::string>& static_ml_engines) {
    auto j = ordered_json::parse(body, nullptr, false);
    if (j.is_discarded()) throw ScanApiError(hash, "malformed response body");

    const ordered_json* results = nullptr;
    if (j.contains("data") && j["data"].contains("attributes") &&
        j["data"]["attributes"].contains("last_analysis_results")) {
        results = &j["data"]["attributes"]["last_analysis_results"];
    } else if (j.contains("last_analysis_results")) {
        results = &j["last_analysis_results"];
    } else if (j.contains("scans")) {
        results = &j["scans"];
    }
    if (!results || !results->is_object()) {
        throw ScanApiError(hash, "response carries no per-engine results");
    }

    ScanReport report;
    report.hash = hash;
    std::set<std::string> seen;
    for (const auto& [engine, entry] : results->items()) {
        if (!seen.insert(engine).second) continue;  // engine names unique per report
        EngineVerdict v;
        v.engine = engine;
        v.is_static_ml = static_ml_engines.count(engine) > 0;
        std::string category;
        if (entry.is_object() && entry.contains("category") && entry["category"].is_string()) {
            category = entry["category"].get<std::string>();
        } else if (entry.is_object() && entry.contains("detected")) {
            category = entry["detected"].get<bool>() ? "malicious" : "undetected";
        }
        if (category == "malicious" || category == "suspicious") {
            v.outcome = VerdictOutcome::detected;
        } else if (category == "undetected" || category == "harmless") {
            v.outcome = VerdictOutcome::undetected;
        } else {
            v.outcome = VerdictOutcome::unsupported;
        }
        report.verdicts.push_back(std::move(v));
    }
    return report;
}

ReportCache::ReportCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_ / "objects");
}

std::filesystem::path ReportCache::object_path(const std::string& hash, const char* ext) const {
    std::string fanout = hash.size() >= 2 ? hash.substr(0, 2) : std::string("xx");
    return dir_ / "objects" / fanout / (hash + ext);
}

bool ReportCache::contains(const std::string& hash) const {
    return std::filesystem::exists(object_path(hash, ".json"));
}

std::optional<ScanReport> ReportCache::load(const std::string& hash) const {
    auto path = object_path(hash, ".json");
    if (!std::filesystem::exists(path)) return std::nullopt;
    return ScanReport::from_json(ordered_json::parse(io::read_file(path)));
}

void ReportCache::store(const ScanReport& report, const std::string& raw_body) {
    auto path = object_path(report.hash, ".json");
    std::filesystem::create_directories(path.parent_path());
    // Raw response first so the parsed report never points at a missing blob.
    io::atomic_write_file(object_path(report.hash, ".raw"), raw_body);
    io::atomic_write_file(path, report.to_json().dump() + "\n");

    ordered_json idx;
    idx["hash"] = report.hash;
    idx["fetched_at"] = report.fetched_at;
    std::ofstream index(dir_ / "index.jsonl", std::ios::app | std::ios::binary);
    index << idx.dump() << "\n";
}

namespace {

std::string scan_clock_now() {
    std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

ScanReport fetch_report(ScanClient& client, ReportCache& cache, const std::string& hash,
                        const std::set<std::string>& static_ml_engines,
                        const std::function<std::string()>& now_iso) {
    std::string canonical = util::lower_ascii(util::trim(hash));
    if (!util::is_hex_digest(canonical)) {
        throw std::invalid_argument("malformed hash: " + hash);
    }
    if (auto cached = cache.load(canonical)) return *cached;

    std::string body = client.fetch(canonical);
    ScanReport report = parse_scan_response(canonical, body, static_ml_engines);
    report.fetched_at = now_iso ? now_iso() : scan_clock_now();
    cache.store(report, body);
    return report;
}

std::vector<ScanReport> fetch_many(ScanClient& client, ReportCache& cache,
                                   const std::vector<std::string>& hashes,
                                   const std::set<std::string>& static_ml_engines,
                                   size_t parallelism, FetchManyStats* stats,
                                   const std::function<std::string()>& now_iso) {
    // Single-flight: duplicate hashes coalesce before any work is issued.
    std::vector<std::string> unique;
    {
        std::set<std::string> seen;
        for (const auto& h : hashes) {
            std::string canonical = util::lower_ascii(util::trim(h));
            if (seen.insert(canonical).second) unique.push_back(canonical);
        }
    }

    std::vector<std::optional<ScanReport>> results(unique.size());
    std::mutex stats_mutex;
    FetchManyStats local;
    std::atomic<size_t> next{0};

    auto worker = [&]() {
        for (;;) {
            size_t i = next.fetch_add(1);
            if (i >= unique.size()) return;
            const std::string& hash = unique[i];
            try {
                bool hit = cache.contains(hash);
                results[i] = fetch_report(client, cache, hash, static_ml_engines, now_iso);
                std::lock_guard<std::mutex> lock(stats_mutex);
                hit ? ++local.cache_hits : ++local.network_calls;
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(stats_mutex);
                local.failures[hash] = e.what();
            }
        }
    };

    size_t n_threads = std::max<size_t>(1, std::min(parallelism, unique.size()));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(n_threads);
        for (size_t i = 0; i < n_threads; ++i) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }

    std::vector<ScanReport> out;
    out.reserve(unique.size());
    for (auto& r : results) {
        if (r) out.push_back(std::move(*r));
    }
    if (stats) *stats = std::move(local);
    return out;
}

DetectionStats detection_rates(const std::vector<ScanReport>& reports,
                               const std::vector<IocRecord>& iocs, IocFilter filter,
                               bool miss_on_unsupported, Averaging averaging) {
    if (reports.empty()) throw std::invalid_argument("no scan reports to aggregate");

    // Energy flag per hash: disjunction over ioc rows sharing the hash.
    std::map<std::string, bool> hash_energy;
    for (const auto& r : iocs) {
        hash_energy[r.hash] = hash_energy[r.hash] || r.energy_related;
    }
    for (const auto& rep : reports) {
        if (!hash_energy.count(rep.hash)) {
            throw std::invalid_argument("report hash not present in ioc set: " + rep.hash);
        }
    }

    DetectionStats stats;
    for (const auto& rep : reports) {
        if (filter == IocFilter::energy && !hash_energy[rep.hash]) continue;
        for (const auto& v : rep.verdicts) {
            EngineStats& e = stats.engines[v.engine];
            e.is_static_ml = e.is_static_ml || v.is_static_ml;
            if (v.outcome == VerdictOutcome::unsupported && !miss_on_unsupported) continue;
            ++e.scanned;
            if (v.outcome == VerdictOutcome::detected) ++e.detected;
        }
    }

    size_t static_engines = 0, other_engines = 0;
    double static_rate_sum = 0, other_rate_sum = 0;
    for (auto& [name, e] : stats.engines) {
        e.rate = e.scanned > 0 ? static_cast<double>(e.detected) / static_cast<double>(e.scanned)
                               : 0.0;
        GroupStats& group = e.is_static_ml ? stats.static_ml : stats.others;
        group.scanned += e.scanned;
        group.detected += e.detected;
        if (e.scanned > 0) {
            if (e.is_static_ml) {
                ++static_engines;
                static_rate_sum += e.rate;
            } else {
                ++other_engines;
                other_rate_sum += e.rate;
            }
        }
    }
    stats.all.scanned = stats.static_ml.scanned + stats.others.scanned;
    stats.all.detected = stats.static_ml.detected + stats.others.detected;

    auto micro = [](GroupStats& g) {
        g.rate = g.scanned > 0 ? static_cast<double>(g.detected) / static_cast<double>(g.scanned)
                               : 0.0;
    };
    if (averaging == Averaging::micro) {
        micro(stats.static_ml);
        micro(stats.others);
        micro(stats.all);
    } else {
        stats.static_ml.rate = static_engines ? static_rate_sum / static_engines : 0.0;
        stats.others.rate = other_engines ? other_rate_sum / other_engines : 0.0;
        size_t n = static_engines + other_engines;
        stats.all.rate = n ? (static_rate_sum + other_rate_sum) / n : 0.0;
    }
    return stats;
}

std::vector<EngineRate> rank_engines(const DetectionStats& stats) {
    if (stats.engines.empty()) throw std::invalid_argument("no engine statistics to rank");
    std::vector<EngineRate> ranked;
    for (const auto& [name, e] : stats.engines) {
        if (e.scanned == 0) continue;  // never scanned anything: excluded
        ranked.push_back({name, e.rate, e.is_static_ml});
    }
    std::sort(ranked.begin(), ranked.end(), [](const EngineRate& a, const EngineRate& b) {
        if (a.rate != b.rate) return a.rate > b.rate;
        return a.engine < b.engine;
    });
    return ranked;
}

}  // namespace threatgeo::ioc
