#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "support/helpers.hpp"
#include "threatgeo/ioc.hpp"

using namespace threatgeo;
using namespace threatgeo::ioc;
using testsupport::TestRng;

namespace {

std::string fake_md5(int i) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%032x", i);
    return std::string(buf, 32);
}

std::string vt_body(const std::map<std::string, std::string>& engine_categories) {
    ordered_json results = ordered_json::object();
    for (const auto& [engine, category] : engine_categories) {
        results[engine] = {{"category", category}};
    }
    ordered_json j;
    j["data"] = {{"attributes", {{"last_analysis_results", results}}}};
    return j.dump();
}

ScanReport report_for(const std::string& hash,
                      const std::vector<std::tuple<std::string, VerdictOutcome, bool>>& vs) {
    ScanReport r;
    r.hash = hash;
    for (const auto& [engine, outcome, is_ml] : vs) r.verdicts.push_back({engine, outcome, is_ml});
    return r;
}

std::function<std::string()> fixed_clock() {
    return [] { return std::string("1970-01-01T00:00:00Z"); };
}

}  // namespace

TEST_CASE("harvest_iocs explodes families into records") {
    FamilyIndex index = {{"FamA", {fake_md5(1), fake_md5(2)}}, {"FamB", {fake_md5(3)}}};

    SUBCASE("energy group with two hashes") {
        auto iocs = harvest_iocs({{"g1", true, {"FamA"}}}, index);
        REQUIRE(iocs.size() == 2);
        for (const auto& r : iocs) {
            CHECK(r.family == "FamA");
            CHECK(r.energy_related);
        }
    }
    SUBCASE("energy flag is a disjunction over owning groups") {
        auto iocs = harvest_iocs({{"g1", false, {"FamA"}}, {"g2", true, {"FamA"}}}, index);
        REQUIRE(iocs.size() == 2);
        CHECK(iocs[0].energy_related);
    }
    SUBCASE("family without hashes warns but does not fail") {
        auto iocs = harvest_iocs({{"g1", true, {"Ghost"}}}, index);
        CHECK(iocs.empty());
    }
    SUBCASE("(family, hash) pairs are unique even with repeated groups") {
        auto iocs = harvest_iocs({{"g1", false, {"FamA", "FamA"}}, {"g2", false, {"FamA"}}},
                                 index);
        CHECK(iocs.size() == 2);
    }
    SUBCASE("max_per_family caps deterministically") {
        auto iocs = harvest_iocs({{"g1", false, {"FamA"}}}, index, 1);
        REQUIRE(iocs.size() == 1);
        CHECK(iocs[0].hash == fake_md5(1));  // lexicographically first
    }
    SUBCASE("malformed hashes are skipped") {
        FamilyIndex bad = {{"FamX", {"nothex", fake_md5(9)}}};
        auto iocs = harvest_iocs({{"g1", false, {"FamX"}}}, bad);
        REQUIRE(iocs.size() == 1);
        CHECK(iocs[0].hash == fake_md5(9));
    }
}

TEST_CASE("fetch_report honors the cache contract") {
    testsupport::TempDir tmp;
    ReportCache cache(tmp.path() / "cache");
    MockScanClient client;
    auto hash = fake_md5(42);
    client.add_body(hash, vt_body({{"EngineA", "malicious"}, {"EngineB", "undetected"}}));

    auto first = fetch_report(client, cache, hash, default_static_ml_engines(), fixed_clock());
    CHECK(client.call_count() == 1);
    REQUIRE(first.verdicts.size() == 2);
    CHECK(first.fetched_at == "1970-01-01T00:00:00Z");

    auto second = fetch_report(client, cache, hash, default_static_ml_engines(), fixed_clock());
    CHECK(client.call_count() == 1);  // cache hit: no network call
    CHECK(second.to_json() == first.to_json());
}

TEST_CASE("uppercase input hashes canonicalize to the same cache entry") {
    testsupport::TempDir tmp;
    ReportCache cache(tmp.path() / "cache");
    MockScanClient client;
    auto hash = fake_md5(7);
    client.add_body(hash, vt_body({{"EngineA", "malicious"}}));

    fetch_report(client, cache, hash, default_static_ml_engines(), fixed_clock());
    std::string upper = hash;
    for (char& c : upper) c = static_cast<char>(std::toupper(c));
    fetch_report(client, cache, upper, default_static_ml_engines(), fixed_clock());
    CHECK(client.call_count() == 1);
}

TEST_CASE("malformed hashes are rejected before any network activity") {
    testsupport::TempDir tmp;
    ReportCache cache(tmp.path() / "cache");
    MockScanClient client;
    CHECK_THROWS_AS(
        fetch_report(client, cache, "zz123", default_static_ml_engines(), fixed_clock()),
        std::invalid_argument);
    CHECK_THROWS_AS(fetch_report(client, cache, fake_md5(1) + "0", default_static_ml_engines(),
                                 fixed_clock()),
                    std::invalid_argument);
    CHECK(client.call_count() == 0);
}

TEST_CASE("a 70-engine response yields 70 verdicts") {
    testsupport::TempDir tmp;
    ReportCache cache(tmp.path() / "cache");
    MockScanClient client;
    auto hash = fake_md5(70);
    std::map<std::string, std::string> engines;
    for (int i = 0; i < 70; ++i) {
        engines["Engine" + std::to_string(i)] = i % 3 == 0 ? "malicious" : "undetected";
    }
    client.add_body(hash, vt_body(engines));
    auto report = fetch_report(client, cache, hash, default_static_ml_engines(), fixed_clock());
    CHECK(report.verdicts.size() == 70);
}

TEST_CASE("api errors identify the hash and leave the cache consistent") {
    testsupport::TempDir tmp;
    ReportCache cache(tmp.path() / "cache");
    MockScanClient client;
    auto hash = fake_md5(13);
    client.add_error(hash, "quota exceeded");
    try {
        fetch_report(client, cache, hash, default_static_ml_engines(), fixed_clock());
        FAIL("expected ScanApiError");
    } catch (const ScanApiError& e) {
        CHECK(std::string(e.what()).find(hash) != std::string::npos);
    }
    CHECK_FALSE(cache.contains(hash));
}

TEST_CASE("cache soundness: fetching 10 hashes twice issues exactly 10 calls") {
    testsupport::TempDir tmp;
    ReportCache cache(tmp.path() / "cache");
    MockScanClient client;
    std::vector<std::string> hashes;
    for (int i = 0; i < 10; ++i) {
        hashes.push_back(fake_md5(100 + i));
        client.add_body(hashes.back(), vt_body({{"EngineA", "malicious"}}));
    }

    FetchManyStats stats1;
    auto r1 = fetch_many(client, cache, hashes, default_static_ml_engines(), 3, &stats1,
                         fixed_clock());
    CHECK(r1.size() == 10);
    CHECK(stats1.network_calls == 10);

    FetchManyStats stats2;
    auto r2 = fetch_many(client, cache, hashes, default_static_ml_engines(), 3, &stats2,
                         fixed_clock());
    CHECK(r2.size() == 10);
    CHECK(stats2.network_calls == 0);
    CHECK(stats2.cache_hits == 10);
    CHECK(client.call_count() == 10);
}

TEST_CASE("duplicate hashes coalesce into a single lookup") {
    testsupport::TempDir tmp;
    ReportCache cache(tmp.path() / "cache");
    MockScanClient client;
    auto hash = fake_md5(55);
    client.add_body(hash, vt_body({{"EngineA", "malicious"}}));
    std::vector<std::string> hashes(8, hash);
    auto reports =
        fetch_many(client, cache, hashes, default_static_ml_engines(), 4, nullptr, fixed_clock());
    CHECK(reports.size() == 1);
    CHECK(client.call_count() == 1);
}

TEST_CASE("fetch failures are collected without corrupting the cache") {
    testsupport::TempDir tmp;
    ReportCache cache(tmp.path() / "cache");
    MockScanClient client;
    client.add_body(fake_md5(1), vt_body({{"EngineA", "malicious"}}));
    client.add_error(fake_md5(2), "server down");

    FetchManyStats stats;
    auto reports = fetch_many(client, cache, {fake_md5(1), fake_md5(2)},
                              default_static_ml_engines(), 2, &stats, fixed_clock());
    CHECK(reports.size() == 1);
    REQUIRE(stats.failures.size() == 1);
    CHECK(stats.failures.count(fake_md5(2)));
    CHECK(cache.contains(fake_md5(1)));
    CHECK_FALSE(cache.contains(fake_md5(2)));
}

TEST_CASE("reports persist across cache instances, raw body alongside") {
    testsupport::TempDir tmp;
    auto dir = tmp.path() / "cache";
    auto hash = fake_md5(21);
    std::string body = vt_body({{"Acronis", "malicious"}, {"EngineB", "undetected"}});
    {
        ReportCache cache(dir);
        MockScanClient client;
        client.add_body(hash, body);
        fetch_report(client, cache, hash, default_static_ml_engines(), fixed_clock());
    }
    ReportCache reopened(dir);
    auto loaded = reopened.load(hash);
    REQUIRE(loaded.has_value());
    REQUIRE(loaded->verdicts.size() == 2);
    CHECK(loaded->verdicts[0].engine == "Acronis");
    CHECK(loaded->verdicts[0].is_static_ml);
    CHECK(loaded->verdicts[0].outcome == VerdictOutcome::detected);

    auto raw_path = dir / "objects" / hash.substr(0, 2) / (hash + ".raw");
    REQUIRE(std::filesystem::exists(raw_path));
    CHECK(io::read_file(raw_path) == body);
}

TEST_CASE("scan response categories map onto verdict outcomes") {
    auto report = parse_scan_response(
        fake_md5(3),
        vt_body({{"A", "malicious"},
                 {"B", "suspicious"},
                 {"C", "undetected"},
                 {"D", "harmless"},
                 {"E", "type-unsupported"},
                 {"F", "timeout"}}),
        {"A"});
    REQUIRE(report.verdicts.size() == 6);
    auto outcome = [&](const std::string& engine) {
        for (const auto& v : report.verdicts) {
            if (v.engine == engine) return v.outcome;
        }
        throw std::runtime_error("missing engine");
    };
    CHECK(outcome("A") == VerdictOutcome::detected);
    CHECK(outcome("B") == VerdictOutcome::detected);
    CHECK(outcome("C") == VerdictOutcome::undetected);
    CHECK(outcome("D") == VerdictOutcome::undetected);
    CHECK(outcome("E") == VerdictOutcome::unsupported);
    CHECK(outcome("F") == VerdictOutcome::unsupported);
    CHECK_THROWS_AS(parse_scan_response(fake_md5(4), "not json", {}), ScanApiError);
    CHECK_THROWS_AS(parse_scan_response(fake_md5(4), "{\"data\":{}}", {}), ScanApiError);
}

namespace {

std::vector<IocRecord> iocs_for(const std::vector<ScanReport>& reports, bool energy = true) {
    std::vector<IocRecord> iocs;
    for (const auto& r : reports) iocs.push_back({"fam", r.hash, energy});
    return iocs;
}

}  // namespace

TEST_CASE("detection_rates basics") {
    SUBCASE("one engine, 10 hashes, 8 detected -> 0.8") {
        std::vector<ScanReport> reports;
        for (int i = 0; i < 10; ++i) {
            reports.push_back(report_for(
                fake_md5(i),
                {{"Solo", i < 8 ? VerdictOutcome::detected : VerdictOutcome::undetected,
                  false}}));
        }
        auto stats = detection_rates(reports, iocs_for(reports), IocFilter::all);
        CHECK(stats.engines.at("Solo").rate == doctest::Approx(0.8));
        CHECK(stats.all.rate == doctest::Approx(0.8));
    }
    SUBCASE("unsupported verdicts leave the denominator") {
        std::vector<ScanReport> reports = {
            report_for(fake_md5(1), {{"E", VerdictOutcome::detected, false}}),
            report_for(fake_md5(2), {{"E", VerdictOutcome::unsupported, false}}),
        };
        auto stats = detection_rates(reports, iocs_for(reports), IocFilter::all);
        CHECK(stats.engines.at("E").scanned == 1);
        CHECK(stats.engines.at("E").rate == doctest::Approx(1.0));

        auto strict = detection_rates(reports, iocs_for(reports), IocFilter::all,
                                      /*miss_on_unsupported=*/true);
        CHECK(strict.engines.at("E").scanned == 2);
        CHECK(strict.engines.at("E").rate == doctest::Approx(0.5));
    }
    SUBCASE("engine unsupported on every hash is excluded from ranking") {
        std::vector<ScanReport> reports = {
            report_for(fake_md5(1), {{"Dead", VerdictOutcome::unsupported, false},
                                     {"Live", VerdictOutcome::detected, false}}),
        };
        auto stats = detection_rates(reports, iocs_for(reports), IocFilter::all);
        CHECK(stats.engines.at("Dead").scanned == 0);
        auto ranked = rank_engines(stats);
        REQUIRE(ranked.size() == 1);
        CHECK(ranked[0].engine == "Live");
    }
    SUBCASE("energy filter restricts the hash set") {
        std::vector<ScanReport> reports = {
            report_for(fake_md5(1), {{"E", VerdictOutcome::detected, false}}),
            report_for(fake_md5(2), {{"E", VerdictOutcome::undetected, false}}),
        };
        std::vector<IocRecord> iocs = {{"f", fake_md5(1), true}, {"f", fake_md5(2), false}};
        auto stats = detection_rates(reports, iocs, IocFilter::energy);
        CHECK(stats.engines.at("E").scanned == 1);
        CHECK(stats.engines.at("E").rate == doctest::Approx(1.0));
    }
    SUBCASE("empty report set is an error") {
        CHECK_THROWS_AS(detection_rates({}, {}, IocFilter::all), std::invalid_argument);
    }
    SUBCASE("report hash missing from the ioc set is an error") {
        std::vector<ScanReport> reports = {
            report_for(fake_md5(1), {{"E", VerdictOutcome::detected, false}})};
        CHECK_THROWS_AS(detection_rates(reports, {}, IocFilter::all), std::invalid_argument);
    }
}

TEST_CASE("group aggregates split static-ML from the rest") {
    // Engineered split: static-ML micro 46.8%, others 88.4%.
    std::vector<ScanReport> reports;
    for (int i = 0; i < 250; ++i) {
        std::vector<std::tuple<std::string, VerdictOutcome, bool>> vs;
        auto v = [&](int threshold) {
            return i < threshold ? VerdictOutcome::detected : VerdictOutcome::undetected;
        };
        vs.emplace_back("Acronis", v(117), true);
        vs.emplace_back("SentinelOne", v(117), true);
        for (int e = 0; e < 6; ++e) vs.emplace_back("Vendor" + std::to_string(e), v(221), false);
        reports.push_back(report_for(fake_md5(i), vs));
    }
    auto stats = detection_rates(reports, iocs_for(reports), IocFilter::all);
    CHECK(stats.static_ml.rate == doctest::Approx(0.468).epsilon(1e-9));
    CHECK(stats.others.rate == doctest::Approx(0.884).epsilon(1e-9));
    CHECK(stats.all.detected == stats.static_ml.detected + stats.others.detected);
    CHECK(stats.all.scanned == stats.static_ml.scanned + stats.others.scanned);

    // The macro flag averages per-engine rates instead.
    auto macro = detection_rates(reports, iocs_for(reports), IocFilter::all, false,
                                 Averaging::macro);
    CHECK(macro.static_ml.rate == doctest::Approx(0.468).epsilon(1e-9));
    CHECK(macro.others.rate == doctest::Approx(0.884).epsilon(1e-9));

    // Top engine beats the best static-ML engine on this fixture.
    auto ranked = rank_engines(stats);
    REQUIRE_FALSE(ranked.empty());
    CHECK_FALSE(ranked[0].is_static_ml);
    double best_static = 0;
    for (const auto& e : ranked) {
        if (e.is_static_ml) best_static = std::max(best_static, e.rate);
    }
    CHECK(ranked[0].rate > best_static);
}

TEST_CASE("rank_engines orders by rate then name and flags static-ML") {
    std::vector<ScanReport> reports = {
        report_for(fake_md5(1), {{"Alpha", VerdictOutcome::detected, false},
                                 {"Beta", VerdictOutcome::detected, false},
                                 {"Acronis", VerdictOutcome::undetected, true}}),
        report_for(fake_md5(2), {{"Alpha", VerdictOutcome::detected, false},
                                 {"Beta", VerdictOutcome::detected, false},
                                 {"Acronis", VerdictOutcome::detected, true}}),
    };
    auto ranked = rank_engines(detection_rates(reports, iocs_for(reports), IocFilter::all));
    REQUIRE(ranked.size() == 3);
    CHECK(ranked[0].engine == "Alpha");  // 1.0, tie broken alphabetically
    CHECK(ranked[1].engine == "Beta");
    CHECK(ranked[2].engine == "Acronis");
    CHECK(ranked[2].is_static_ml);
}

TEST_CASE("rates match a brute-force recount on a 20x10 fixture") {
    TestRng rng(2024);
    std::vector<std::string> engines;
    for (int e = 0; e < 10; ++e) engines.push_back("Eng" + std::to_string(e));
    std::set<std::string> static_ml = {"Eng0", "Eng7"};

    std::vector<ScanReport> reports;
    std::map<std::string, bool> hash_energy;
    std::vector<IocRecord> iocs;
    for (int i = 0; i < 20; ++i) {
        std::vector<std::tuple<std::string, VerdictOutcome, bool>> vs;
        for (const auto& e : engines) {
            VerdictOutcome outcome = rng.chance(0.15) ? VerdictOutcome::unsupported
                                     : rng.chance(0.6) ? VerdictOutcome::detected
                                                       : VerdictOutcome::undetected;
            vs.emplace_back(e, outcome, static_ml.count(e) > 0);
        }
        auto hash = fake_md5(500 + i);
        bool energy = rng.chance(0.5);
        hash_energy[hash] = energy;
        iocs.push_back({"fam", hash, energy});
        reports.push_back(report_for(hash, vs));
    }

    for (bool energy_only : {false, true}) {
        auto stats = detection_rates(reports, iocs,
                                     energy_only ? IocFilter::energy : IocFilter::all);
        auto naive = testsupport::naive_detection_recount(reports, hash_energy, energy_only);
        for (const auto& [engine, counts] : naive.per_engine) {
            CHECK(stats.engines.at(engine).scanned == counts.first);
            CHECK(stats.engines.at(engine).detected == counts.second);
        }
        CHECK(stats.static_ml.scanned == naive.static_scanned);
        CHECK(stats.static_ml.detected == naive.static_detected);
        CHECK(stats.others.scanned == naive.other_scanned);
        CHECK(stats.others.detected == naive.other_detected);
    }
}

TEST_CASE("adding a detected verdict never lowers an engine's rate") {
    TestRng rng(31);
    for (int it = 0; it < 100; ++it) {
        std::vector<ScanReport> reports;
        size_t n = 1 + rng.below(10);
        for (size_t i = 0; i < n; ++i) {
            reports.push_back(report_for(
                fake_md5(static_cast<int>(800 + i)),
                {{"E", rng.chance(0.5) ? VerdictOutcome::detected : VerdictOutcome::undetected,
                  false}}));
        }
        auto before =
            detection_rates(reports, iocs_for(reports), IocFilter::all).engines.at("E").rate;
        reports.push_back(
            report_for(fake_md5(999), {{"E", VerdictOutcome::detected, false}}));
        auto after =
            detection_rates(reports, iocs_for(reports), IocFilter::all).engines.at("E").rate;
        CHECK(after >= before - 1e-12);
    }
}

TEST_CASE("ioc files round-trip") {
    testsupport::TempDir tmp;
    auto path = tmp.path() / "iocs.jsonl";
    std::vector<IocRecord> iocs = {{"FamA", fake_md5(1), true}, {"FamB", fake_md5(2), false}};
    write_iocs(path, iocs, {"rid", 0, "cfg"});
    auto loaded = load_iocs(path);
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0] == iocs[0]);
    CHECK(loaded[1] == iocs[1]);
}
