#include <atomic>
#include <csignal>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <memory>
#include <sstream>

#include "threatgeo/baseline.hpp"
#include "threatgeo/chart.hpp"
#include "threatgeo/evaluate.hpp"
#include "threatgeo/extract.hpp"
#include "threatgeo/geopolitics.hpp"
#include "threatgeo/ingest.hpp"
#include "threatgeo/ioc.hpp"
#include "threatgeo/runconfig.hpp"
#include "threatgeo/util.hpp"

#include <CLI11.hpp>

namespace fs = std::filesystem;
using namespace threatgeo;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitPipeline = 1;
constexpr int kExitConfig = 2;

std::atomic<bool> g_stop_requested{false};

void handle_signal(int) { g_stop_requested.store(true); }

// Deterministic run identity for flag-driven invocations.
io::MetaHeader flag_meta(const CLI::App* cmd, uint64_t seed) {
    std::ostringstream os;
    os << cmd->get_name();
    for (const auto* opt : cmd->get_options()) {
        for (const auto& v : opt->results()) os << " " << opt->get_name() << "=" << v;
    }
    return config::make_meta(os.str(), seed);
}

std::map<RecordRef, bool> load_bool_file(const fs::path& path) {
    std::map<RecordRef, bool> out;
    io::for_each_jsonl(path, [&](size_t, const ordered_json& j) {
        RecordRef ref{j.at("source_id").get<std::string>(), j.at("record_id").get<std::string>()};
        out[ref] = j.at("value").get<bool>();
    });
    return out;
}

void write_bool_file(const fs::path& path, const std::map<RecordRef, bool>& values,
                     const io::MetaHeader& meta) {
    io::JsonlWriter writer(path, meta);
    for (const auto& [ref, value] : values) {
        ordered_json j;
        j["source_id"] = ref.source_id;
        j["record_id"] = ref.record_id;
        j["value"] = value;
        writer.append(j);
    }
}

std::vector<ThreatRecord> load_threat_records(const fs::path& checkpoint) {
    std::vector<ThreatRecord> records;
    for (auto& [ref, rec] : extract::load_checkpoint(checkpoint)) records.push_back(rec);
    return records;
}

geopolitics::DateLookup date_lookup(const std::vector<RawRecord>& records) {
    geopolitics::DateLookup dates;
    for (const auto& r : records) {
        if (r.date) dates[r.ref] = *r.date;
    }
    return dates;
}

std::string fmt_rate(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

void write_metrics_file(const fs::path& path, const evaluate::ConfusionMatrix& cm,
                        const evaluate::ClassificationMetrics& m, const io::MetaHeader& meta) {
    // Hand-formatted so the metric values keep exactly four decimal places.
    std::ostringstream os;
    os << "{\n";
    os << "  \"metadata\": {\"run_id\": \"" << meta.run_id << "\", \"seed\": " << meta.seed
       << ", \"config_hash\": \"" << meta.config_hash << "\"},\n";
    os << "  \"matrix\": {\"tn\": " << cm.tn << ", \"fp\": " << cm.fp << ", \"fn\": " << cm.fn
       << ", \"tp\": " << cm.tp << "},\n";
    os << "  \"metrics\": {\"accuracy\": " << fmt_rate(m.accuracy)
       << ", \"precision\": " << fmt_rate(m.precision) << ", \"recall\": " << fmt_rate(m.recall)
       << ", \"f1\": " << fmt_rate(m.f1) << "}\n";
    os << "}\n";
    io::atomic_write_file(path, os.str());
}

// ---------------------------------------------------------------------------
// Shared analysis emitters (used by the geo-* subcommands and `report`)
// ---------------------------------------------------------------------------

void emit_top_places(const std::vector<geopolitics::GeoPair>& pairs, geopolitics::Role role,
                     std::size_t k, geopolitics::EnergyFilter filter, const fs::path& csv_path,
                     const fs::path& chart_path, const io::MetaHeader& meta,
                     const std::string& title) {
    using geopolitics::EnergyFilter;

    auto ranked = geopolitics::top_k(pairs, role, k, filter);

    // Per-place split needed for the energy vs non-energy series.
    auto count_for = [&](const std::string& place, EnergyFilter f) -> long long {
        auto full = geopolitics::top_k(pairs, role, std::max<std::size_t>(pairs.size(), 1), f);
        for (const auto& e : full) {
            if (e.name == place) return e.count;
        }
        return 0;
    };

    std::vector<std::vector<std::string>> rows;
    chart::ChartTable table;
    table.title = title;
    table.y_label = "incident pairs";
    if (filter == EnergyFilter::all) {
        chart::Series energy{"energy", {}}, non_energy{"non-energy", {}};
        int rank = 1;
        for (const auto& e : ranked) {
            long long ce = count_for(e.name, EnergyFilter::energy);
            long long cn = count_for(e.name, EnergyFilter::non_energy);
            rows.push_back({std::to_string(rank), e.name, std::to_string(ce), "energy"});
            rows.push_back({std::to_string(rank), e.name, std::to_string(cn), "non-energy"});
            table.categories.push_back(e.name);
            energy.values.push_back(static_cast<double>(ce));
            non_energy.values.push_back(static_cast<double>(cn));
            ++rank;
        }
        table.series = {energy, non_energy};
    } else {
        const std::string flag = filter == EnergyFilter::energy ? "energy" : "non-energy";
        chart::Series series{flag, {}};
        int rank = 1;
        for (const auto& e : ranked) {
            rows.push_back({std::to_string(rank), e.name, std::to_string(e.count), flag});
            table.categories.push_back(e.name);
            series.values.push_back(static_cast<double>(e.count));
            ++rank;
        }
        table.series = {series};
    }

    io::write_csv(csv_path, meta, {"rank", "place", "count", "energy_flag"}, rows);
    if (!chart_path.empty()) chart::emit_grouped_bar_svg(table, chart_path, meta);
}

void emit_alliances(const geopolitics::AllianceCounts& counts, const fs::path& csv_path,
                    const fs::path& chart_path, const io::MetaHeader& meta,
                    const std::string& title) {
    using geopolitics::Alliance;
    std::vector<std::vector<std::string>> rows;
    chart::ChartTable table;
    table.title = title;
    table.y_label = "incident pairs";
    chart::Series energy{"energy", {}}, non_energy{"non-energy", {}};
    for (Alliance a : {Alliance::nato, Alliance::brics, Alliance::other}) {
        rows.push_back({geopolitics::to_string(a), "energy", std::to_string(counts.at(a, true))});
        rows.push_back(
            {geopolitics::to_string(a), "non-energy", std::to_string(counts.at(a, false))});
        table.categories.push_back(geopolitics::to_string(a));
        energy.values.push_back(static_cast<double>(counts.at(a, true)));
        non_energy.values.push_back(static_cast<double>(counts.at(a, false)));
    }
    table.series = {energy, non_energy};
    io::write_csv(csv_path, meta, {"alliance", "energy_flag", "count"}, rows);
    if (!chart_path.empty()) chart::emit_grouped_bar_svg(table, chart_path, meta);
}

void emit_timeline(const std::vector<geopolitics::RankedEntry>& series,
                   geopolitics::Bucket bucket, const fs::path& csv_path,
                   const fs::path& chart_path, const io::MetaHeader& meta,
                   const std::string& title) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& e : series) rows.push_back({e.name, std::to_string(e.count)});
    io::write_csv(csv_path, meta, {"period", "count"}, rows);
    if (!chart_path.empty()) chart::emit_timeline_svg(title, series, bucket, chart_path, meta);
}

void emit_ranking(const std::vector<geopolitics::RankedEntry>& ranked, const fs::path& csv_path,
                  const fs::path& chart_path, const io::MetaHeader& meta,
                  const std::string& title, const std::string& value_label) {
    std::vector<std::vector<std::string>> rows;
    chart::ChartTable table;
    table.title = title;
    table.y_label = "records";
    chart::Series series{value_label, {}};
    int rank = 1;
    for (const auto& e : ranked) {
        rows.push_back({std::to_string(rank), e.name, std::to_string(e.count)});
        table.categories.push_back(e.name);
        series.values.push_back(static_cast<double>(e.count));
        ++rank;
    }
    table.series = {series};
    io::write_csv(csv_path, meta, {"rank", "value", "count"}, rows);
    if (!chart_path.empty()) chart::emit_grouped_bar_svg(table, chart_path, meta);
}

void emit_engine_rates(const ioc::DetectionStats& stats, const fs::path& csv_path,
                       const fs::path& chart_path, const io::MetaHeader& meta,
                       const std::string& title) {
    auto ranked = ioc::rank_engines(stats);
    std::vector<std::vector<std::string>> rows;
    chart::ChartTable table;
    table.title = title;
    table.y_label = "detection rate";
    chart::Series series{"detection rate", {}};
    int rank = 1;
    for (const auto& e : ranked) {
        const auto& es = stats.engines.at(e.engine);
        rows.push_back({std::to_string(rank), e.engine, e.is_static_ml ? "yes" : "no",
                        std::to_string(es.scanned), std::to_string(es.detected),
                        fmt_rate(e.rate)});
        table.categories.push_back(e.engine);
        table.highlight.push_back(e.is_static_ml);
        series.values.push_back(e.rate);
        ++rank;
    }
    auto group_row = [&](const std::string& name, const ioc::GroupStats& g) {
        rows.push_back({"", name, "", std::to_string(g.scanned), std::to_string(g.detected),
                        fmt_rate(g.rate)});
    };
    group_row("group: static-ml", stats.static_ml);
    group_row("group: others", stats.others);
    group_row("group: all", stats.all);
    table.series = {series};
    io::write_csv(csv_path, meta, {"rank", "engine", "static_ml", "scanned", "detected", "rate"},
                  rows);
    if (!chart_path.empty()) chart::emit_grouped_bar_svg(table, chart_path, meta);
}

// ---------------------------------------------------------------------------
// Subcommand implementations
// ---------------------------------------------------------------------------

int run_ingest(const std::string& config_path, const std::string& single_path,
               const std::string& source_id, const std::string& kind, const std::string& format,
               const std::string& out, uint64_t seed, const io::MetaHeader& meta) {
    std::vector<ingest::SourceDescriptor> sources;
    io::MetaHeader effective_meta = meta;
    if (!config_path.empty()) {
        auto cfg = config::RunConfig::load(config_path);
        sources = cfg.sources;
        effective_meta = cfg.meta();
    } else {
        if (single_path.empty() || source_id.empty()) {
            std::cerr << "ingest: either --config or (--in, --source-id) is required\n";
            return kExitConfig;
        }
        ingest::SourceDescriptor d;
        d.source_id = source_id;
        d.kind = ingest::source_kind_from_string(kind);
        d.format = ingest::source_format_from_string(format);
        d.path = single_path;
        sources.push_back(std::move(d));
    }
    (void)seed;

    std::vector<RawRecord> all;
    ingest::IngestStats totals;
    for (const auto& d : sources) {
        auto result = ingest::ingest_source(d);
        std::cerr << d.source_id << ": " << result.stats.records << " records, "
                  << result.stats.dropped_empty << " dropped (empty description), "
                  << result.stats.skipped_malformed << " malformed\n";
        totals.records += result.stats.records;
        totals.dropped_empty += result.stats.dropped_empty;
        totals.skipped_malformed += result.stats.skipped_malformed;
        for (auto& r : result.records) all.push_back(std::move(r));
    }
    ingest::write_records(out, all, effective_meta);
    std::cerr << "total: " << totals.records << " records -> " << out << "\n";
    return kExitOk;
}

int run_extract(const std::string& schema_path, const std::string& in, const std::string& out,
                double delay, double temperature, const std::string& mock_path,
                const std::string& model, int max_retries, const io::MetaHeader& meta) {
    if (temperature < 0.0 || temperature > 1.0) {
        std::cerr << "extract: --temperature must be in [0,1]\n";
        return kExitConfig;
    }
    auto schema = schema_path.empty() ? extract::ExtractionSchema::default_for()
                                      : extract::ExtractionSchema::load(schema_path);
    auto records = ingest::load_records(in);

    extract::BackendConfig config;
    config.model_id = model;
    config.temperature = temperature;
    config.inter_call_delay_s = delay;
    config.max_retries = max_retries;

    std::unique_ptr<extract::Backend> backend;
    bool deterministic = false;
    if (!mock_path.empty()) {
        backend = std::make_unique<extract::MockBackend>(
            extract::MockBackend::from_file(mock_path));
        deterministic = true;
    } else {
        backend = std::make_unique<extract::HttpBackend>(
            "https://generativelanguage.googleapis.com",
            model.empty() ? "gemini-1.5-flash-latest" : model, temperature);
    }

    extract::ExtractPipeline pipeline(*backend, config, schema);
    if (deterministic) {
        pipeline.set_clock([] { return std::string("1970-01-01T00:00:00Z"); });
    }

    std::signal(SIGINT, handle_signal);
    std::signal(SIGTERM, handle_signal);
    auto stats = pipeline.run(records, out, meta, [] { return g_stop_requested.load(); });

    std::cerr << "extract: " << stats.processed << " processed (" << stats.ok << " ok, "
              << stats.parse_errors << " parse errors, " << stats.backend_errors
              << " backend errors), " << stats.skipped << " skipped, " << stats.backend_calls
              << " backend calls\n";
    if (stats.stopped_early) {
        std::cerr << "extract: stopped early on request; checkpoint is resumable\n";
        return kExitPipeline;
    }
    if (stats.processed > 0 && stats.backend_errors == stats.processed) {
        std::cerr << "extract: every record failed at the transport level\n";
        return kExitPipeline;
    }
    return kExitOk;
}

int run_baseline(const std::string& lexicon_path, const std::string& in, const std::string& out,
                 const std::string& domain, const io::MetaHeader& meta) {
    auto lexicon = baseline::load_lexicon(lexicon_path, domain);
    baseline::PhraseMatcher matcher(lexicon);
    auto records = ingest::load_records(in);

    std::map<RecordRef, bool> predictions;
    for (const auto& r : records) predictions[r.ref] = matcher.matches(r.description);
    write_bool_file(out, predictions, meta);
    std::cerr << "baseline: classified " << predictions.size() << " records with "
              << lexicon.phrases.size() << " phrases\n";
    return kExitOk;
}

int run_evaluate(const std::string& pred_path, const std::string& labels_path,
                 const std::string& records_path, const std::string& category_map_path,
                 const std::string& out, const io::MetaHeader& meta) {
    auto predictions = load_bool_file(pred_path);

    std::map<RecordRef, bool> labels;
    if (!labels_path.empty()) {
        labels = load_bool_file(labels_path);
    } else if (!records_path.empty() && !category_map_path.empty()) {
        auto records = ingest::load_records(records_path);
        labels = evaluate::label_records(records, config::load_category_map(category_map_path));
        // Evaluation is over the labeled subset the predictions cover.
        std::erase_if(labels, [&](const auto& kv) { return !predictions.count(kv.first); });
        std::erase_if(predictions, [&](const auto& kv) { return !labels.count(kv.first); });
    } else {
        std::cerr << "evaluate: --labels or (--records and --category-map) required\n";
        return kExitConfig;
    }

    auto cm = evaluate::confusion(predictions, labels);
    auto m = evaluate::metrics(cm);
    write_metrics_file(out, cm, m, meta);
    std::cerr << "evaluate: n=" << cm.total() << " accuracy=" << fmt_rate(m.accuracy)
              << " precision=" << fmt_rate(m.precision) << " recall=" << fmt_rate(m.recall)
              << " f1=" << fmt_rate(m.f1) << "\n";
    return kExitOk;
}

int run_sample(const std::string& in, const std::string& category_map_path, std::size_t n,
               uint64_t seed, const std::string& out, const io::MetaHeader& meta) {
    auto records = ingest::load_records(in);
    auto sampled =
        evaluate::stratified_sample(records, config::load_category_map(category_map_path), n, seed);
    ingest::write_records(out, sampled, meta);
    std::cerr << "sample: " << sampled.size() << " records (" << n << " per class)\n";
    return kExitOk;
}

int run_ioc_fetch(const std::string& hashes_path, const std::string& cache_dir,
                  const std::string& mock_path, const std::string& api_url, int rpm,
                  size_t parallel) {
    // Hash list: one per line, or the iocs JSONL format.
    std::vector<std::string> hashes;
    std::string content = io::read_file(hashes_path);
    if (!content.empty() && content.front() == '{') {
        for (const auto& r : ioc::load_iocs(hashes_path)) hashes.push_back(r.hash);
    } else {
        std::istringstream is(content);
        std::string line;
        while (std::getline(is, line)) {
            std::string t = util::trim(line);
            if (!t.empty() && t[0] != '#') hashes.push_back(t);
        }
    }

    std::unique_ptr<ioc::ScanClient> client;
    std::function<std::string()> clock;
    if (!mock_path.empty()) {
        client = std::make_unique<ioc::MockScanClient>(ioc::MockScanClient::from_file(mock_path));
        clock = [] { return std::string("1970-01-01T00:00:00Z"); };
    } else {
        client = std::make_unique<ioc::HttpScanClient>(
            api_url.empty() ? "https://www.virustotal.com" : api_url, rpm);
    }

    ioc::ReportCache cache(cache_dir);
    ioc::FetchManyStats stats;
    auto reports = ioc::fetch_many(*client, cache, hashes, ioc::default_static_ml_engines(),
                                   parallel, &stats, clock);
    std::cerr << "ioc-fetch: " << reports.size() << " reports (" << stats.network_calls
              << " lookups, " << stats.cache_hits << " cache hits, " << stats.failures.size()
              << " failures)\n";
    for (const auto& [hash, msg] : stats.failures) {
        std::cerr << "  failed " << hash << ": " << msg << "\n";
    }
    return stats.failures.empty() ? kExitOk : kExitPipeline;
}

int run_ioc_rates(const std::string& cache_dir, const std::string& iocs_path,
                  const std::string& out, const std::string& chart_path, bool energy_only,
                  bool miss_on_unsupported, bool macro, const io::MetaHeader& meta) {
    auto iocs = ioc::load_iocs(iocs_path);
    ioc::ReportCache cache(cache_dir);

    std::vector<ioc::ScanReport> reports;
    std::set<std::string> seen;
    for (const auto& r : iocs) {
        if (!seen.insert(r.hash).second) continue;
        if (auto report = cache.load(r.hash)) reports.push_back(std::move(*report));
    }
    if (reports.empty()) {
        std::cerr << "ioc-rates: no cached reports for the given iocs; run ioc-fetch first\n";
        return kExitPipeline;
    }

    auto stats = ioc::detection_rates(reports, iocs,
                                      energy_only ? ioc::IocFilter::energy : ioc::IocFilter::all,
                                      miss_on_unsupported,
                                      macro ? ioc::Averaging::macro : ioc::Averaging::micro);
    emit_engine_rates(stats, out, chart_path, meta, "Detection rate by engine");
    std::cerr << "ioc-rates: " << stats.engines.size() << " engines over " << reports.size()
              << " reports; static-ml " << fmt_rate(stats.static_ml.rate) << ", others "
              << fmt_rate(stats.others.rate) << ", all " << fmt_rate(stats.all.rate) << "\n";
    return kExitOk;
}

int run_ioc_harvest(const std::string& checkpoint_path, const std::string& records_path,
                    const std::string& families_path, const std::string& out,
                    size_t max_per_family, const io::MetaHeader& meta) {
    auto checkpoint = extract::load_checkpoint(checkpoint_path);
    auto records = ingest::load_records(records_path);

    std::vector<ioc::GroupToolUsage> groups;
    for (const auto& r : records) {
        auto it = r.structured_hints.find("families");
        if (it == r.structured_hints.end()) continue;
        ioc::GroupToolUsage g;
        g.group = r.ref.key();
        auto cp = checkpoint.find(r.ref);
        g.energy_related = cp != checkpoint.end() && cp->second.status == ExtractStatus::ok &&
                           cp->second.energy_related;
        g.families = it->second;
        groups.push_back(std::move(g));
    }

    ioc::FamilyIndex index;
    auto j = ordered_json::parse(io::read_file(families_path));
    for (const auto& [family, hashes] : j.items()) {
        index[family] = hashes.get<std::vector<std::string>>();
    }

    auto iocs = ioc::harvest_iocs(groups, index, max_per_family);
    ioc::write_iocs(out, iocs, meta);
    size_t energy = 0;
    for (const auto& r : iocs) energy += r.energy_related ? 1 : 0;
    std::cerr << "ioc-harvest: " << iocs.size() << " iocs from " << groups.size() << " groups; "
              << energy << " energy-related\n";
    return kExitOk;
}

int run_report(const std::string& config_path) {
    auto cfg = config::RunConfig::load(config_path);
    auto meta = cfg.meta();
    fs::path out_dir = cfg.output_dir;
    fs::path report_dir = out_dir / "report";
    fs::create_directories(report_dir);

    fs::path checkpoint_path = out_dir / "checkpoint.jsonl";
    fs::path records_path = out_dir / "records.jsonl";
    if (!fs::exists(checkpoint_path) || !fs::exists(records_path)) {
        std::cerr << "report: run directory lacks records.jsonl/checkpoint.jsonl\n";
        return kExitPipeline;
    }

    auto table = geopolitics::CanonicalTable::load_dir(cfg.geo_dir);
    auto roster = geopolitics::AllianceRoster::load(fs::path(cfg.geo_dir) / "alliances.txt");
    auto records = ingest::load_records(records_path);
    auto threats = load_threat_records(checkpoint_path);
    auto dates = date_lookup(records);
    auto pairs = geopolitics::explode_pairs(threats, table, dates);

    using geopolitics::Role;
    emit_top_places(pairs, Role::origin, cfg.top_k, geopolitics::EnergyFilter::all,
                    report_dir / "top_origins.csv", report_dir / "top_origins.svg", meta,
                    "Top threat origins");
    emit_top_places(pairs, Role::target, cfg.top_k, geopolitics::EnergyFilter::all,
                    report_dir / "top_targets.csv", report_dir / "top_targets.svg", meta,
                    "Top threat targets");
    emit_alliances(geopolitics::alliance_counts(roster, pairs, Role::origin),
                   report_dir / "alliances_origins.csv", report_dir / "alliances_origins.svg",
                   meta, "Threat origins by alliance");
    emit_alliances(geopolitics::alliance_counts(roster, pairs, Role::target),
                   report_dir / "alliances_targets.csv", report_dir / "alliances_targets.svg",
                   meta, "Threat targets by alliance");

    for (const auto& dyad : cfg.dyads) {
        auto series = geopolitics::dyad_timeline(threats, dates, table, dyad.origin, dyad.target,
                                                 dyad.bucket);
        std::string stem = "timeline_" + util::lower_ascii(dyad.origin) + "_" +
                           util::lower_ascii(dyad.target);
        for (auto& c : stem) {
            if (c == ' ') c = '-';
        }
        emit_timeline(series, dyad.bucket, report_dir / (stem + ".csv"),
                      report_dir / (stem + ".svg"), meta, dyad.origin + " -> " + dyad.target);
    }

    auto harmed = geopolitics::rank_categorical(records, "harmed_parties", 10);
    if (!harmed.empty()) {
        emit_ranking(harmed, report_dir / "harmed_parties.csv", report_dir / "harmed_parties.svg",
                     meta, "Top alleged harmed parties", "records");
    }

    fs::path iocs_path = out_dir / "iocs.jsonl";
    if (fs::exists(iocs_path) && !cfg.cache_dir.empty() && fs::exists(cfg.cache_dir)) {
        auto iocs = ioc::load_iocs(iocs_path);
        ioc::ReportCache cache(cfg.cache_dir);
        std::vector<ioc::ScanReport> reports;
        std::set<std::string> seen;
        for (const auto& r : iocs) {
            if (!seen.insert(r.hash).second) continue;
            if (auto report = cache.load(r.hash)) reports.push_back(std::move(*report));
        }
        if (!reports.empty()) {
            auto stats = ioc::detection_rates(reports, iocs, ioc::IocFilter::all);
            emit_engine_rates(stats, report_dir / "engine_rates.csv",
                              report_dir / "engine_rates.svg", meta,
                              "Detection rate by engine");
        }
    }

    fs::path metrics_path = out_dir / "metrics.json";
    if (fs::exists(metrics_path)) {
        auto mj = ordered_json::parse(io::read_file(metrics_path));
        const auto& mm = mj.at("metrics");
        chart::ChartTable mt;
        mt.title = "Energy classification metrics";
        mt.y_label = "score";
        mt.categories = {"accuracy", "precision", "recall", "f1"};
        chart::Series s{"score", {}};
        std::vector<std::vector<std::string>> rows;
        for (const auto& name : mt.categories) {
            double v = mm.at(name).get<double>();
            s.values.push_back(v);
            rows.push_back({name, fmt_rate(v)});
        }
        mt.series = {s};
        io::write_csv(report_dir / "metrics.csv", meta, {"metric", "value"}, rows);
        chart::emit_grouped_bar_svg(mt, report_dir / "metrics.svg", meta);
    }

    // Wall-clock timestamps live only here; every other output embeds just
    // the deterministic run identity.
    {
        std::time_t t = std::time(nullptr);
        std::tm tm{};
        gmtime_r(&t, &tm);
        char stamp[32];
        std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", &tm);
        ordered_json mj;
        mj["run_id"] = meta.run_id;
        mj["seed"] = meta.seed;
        mj["config_hash"] = meta.config_hash;
        mj["generated_at"] = stamp;
        io::atomic_write_file(out_dir / "run_meta.json", mj.dump(2) + "\n");
    }

    std::cerr << "report: artifacts written to " << report_dir.string() << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"threatgeo: cyber-threat geopolitics analytics pipeline"};
    app.require_subcommand(1);

    // --- ingest ---
    auto* cmd_ingest = app.add_subcommand("ingest", "Load source dumps into normalized records");
    std::string ing_config, ing_in, ing_source, ing_kind = "incident",
                ing_format = "json-objects", ing_out;
    uint64_t ing_seed = 0;
    cmd_ingest->add_option("--config", ing_config, "Run config file");
    cmd_ingest->add_option("--in", ing_in, "Single source dump path");
    cmd_ingest->add_option("--source-id", ing_source, "Source id for --in");
    cmd_ingest->add_option("--kind", ing_kind, "actor|incident|report|malware");
    cmd_ingest->add_option("--format", ing_format, "json-objects|tabular|text-list");
    cmd_ingest->add_option("--out", ing_out, "Normalized records file")->required();
    cmd_ingest->add_option("--seed", ing_seed, "Run seed");

    // --- extract ---
    auto* cmd_extract = app.add_subcommand("extract", "Schema-enforced structured extraction");
    std::string ext_schema, ext_in, ext_out, ext_mock, ext_model = "gemini-1.5-flash-latest";
    double ext_delay = 7.0, ext_temp = 0.1;
    int ext_retries = 2;
    uint64_t ext_seed = 0;
    cmd_extract->add_option("--schema", ext_schema, "Extraction schema file");
    cmd_extract->add_option("--in", ext_in, "Normalized records file")->required();
    cmd_extract->add_option("--out", ext_out, "Checkpoint file")->required();
    cmd_extract->add_option("--delay", ext_delay, "Seconds between backend calls");
    cmd_extract->add_option("--temperature", ext_temp, "Sampling temperature");
    cmd_extract->add_option("--mock", ext_mock, "Deterministic mock response table");
    cmd_extract->add_option("--model", ext_model, "Model id");
    cmd_extract->add_option("--max-retries", ext_retries, "Transport retries per record");
    cmd_extract->add_option("--seed", ext_seed, "Run seed");

    // --- baseline ---
    auto* cmd_baseline = app.add_subcommand("baseline", "Lexicon phrase-match classifier");
    std::string base_lexicon, base_in, base_out, base_domain = "energy";
    uint64_t base_seed = 0;
    cmd_baseline->add_option("--lexicon", base_lexicon, "Lexicon file")->required();
    cmd_baseline->add_option("--in", base_in, "Normalized records file")->required();
    cmd_baseline->add_option("--out", base_out, "Predictions file")->required();
    cmd_baseline->add_option("--domain", base_domain, "Domain label");
    cmd_baseline->add_option("--seed", base_seed, "Run seed");

    // --- evaluate ---
    auto* cmd_eval = app.add_subcommand("evaluate", "Confusion matrix and metrics");
    std::string ev_pred, ev_labels, ev_records, ev_catmap, ev_out;
    uint64_t ev_seed = 0;
    cmd_eval->add_option("--pred", ev_pred, "Predictions file")->required();
    cmd_eval->add_option("--labels", ev_labels, "Labels file");
    cmd_eval->add_option("--records", ev_records, "Records file (derive labels)");
    cmd_eval->add_option("--category-map", ev_catmap, "Category->bool map (derive labels)");
    cmd_eval->add_option("--out", ev_out, "Metrics output file")->required();
    cmd_eval->add_option("--seed", ev_seed, "Run seed");

    // --- sample ---
    auto* cmd_sample = app.add_subcommand("sample", "Deterministic stratified sample");
    std::string smp_in, smp_catmap, smp_out;
    std::size_t smp_n = 100;
    uint64_t smp_seed = 0;
    cmd_sample->add_option("--in", smp_in, "Records file")->required();
    cmd_sample->add_option("--category-map", smp_catmap, "Category->bool map")->required();
    cmd_sample->add_option("--n", smp_n, "Records per class");
    cmd_sample->add_option("--seed", smp_seed, "Sampling seed");
    cmd_sample->add_option("--out", smp_out, "Sampled records file")->required();

    // --- geo-top ---
    auto* cmd_geotop = app.add_subcommand("geo-top", "Top-K origin/target ranking");
    std::string gt_in, gt_geo = "data/geo", gt_role = "origin", gt_energy = "all", gt_out,
                gt_chart;
    std::size_t gt_k = 5;
    uint64_t gt_seed = 0;
    cmd_geotop->add_option("--in", gt_in, "Checkpoint file")->required();
    cmd_geotop->add_option("--geo", gt_geo, "Geo data directory");
    cmd_geotop->add_option("--role", gt_role, "origin|target");
    cmd_geotop->add_option("--k", gt_k, "Entries to keep");
    cmd_geotop->add_option("--energy", gt_energy, "all|energy|non-energy");
    cmd_geotop->add_option("--out", gt_out, "CSV output")->required();
    cmd_geotop->add_option("--chart", gt_chart, "SVG chart output");
    cmd_geotop->add_option("--seed", gt_seed, "Run seed");

    // --- geo-alliances ---
    auto* cmd_geoall = app.add_subcommand("geo-alliances", "Alliance clustering counts");
    std::string ga_in, ga_geo = "data/geo", ga_role = "origin", ga_out, ga_chart;
    uint64_t ga_seed = 0;
    cmd_geoall->add_option("--in", ga_in, "Checkpoint file")->required();
    cmd_geoall->add_option("--geo", ga_geo, "Geo data directory");
    cmd_geoall->add_option("--role", ga_role, "origin|target");
    cmd_geoall->add_option("--out", ga_out, "CSV output")->required();
    cmd_geoall->add_option("--chart", ga_chart, "SVG chart output");
    cmd_geoall->add_option("--seed", ga_seed, "Run seed");

    // --- geo-timeline ---
    auto* cmd_geotl = app.add_subcommand("geo-timeline", "Conflict-dyad timeline");
    std::string tl_in, tl_records, tl_geo = "data/geo", tl_origin, tl_target,
                tl_bucket = "year", tl_out, tl_chart;
    uint64_t tl_seed = 0;
    cmd_geotl->add_option("--in", tl_in, "Checkpoint file")->required();
    cmd_geotl->add_option("--records", tl_records, "Records file (dates)")->required();
    cmd_geotl->add_option("--geo", tl_geo, "Geo data directory");
    cmd_geotl->add_option("--origin", tl_origin, "Origin country")->required();
    cmd_geotl->add_option("--target", tl_target, "Target country")->required();
    cmd_geotl->add_option("--bucket", tl_bucket, "year|month");
    cmd_geotl->add_option("--out", tl_out, "CSV output")->required();
    cmd_geotl->add_option("--chart", tl_chart, "SVG chart output");
    cmd_geotl->add_option("--seed", tl_seed, "Run seed");

    // --- rank ---
    auto* cmd_rank = app.add_subcommand("rank", "Top-K of a structured-hints field");
    std::string rk_in, rk_field, rk_out, rk_chart;
    std::size_t rk_k = 10;
    uint64_t rk_seed = 0;
    cmd_rank->add_option("--in", rk_in, "Records file")->required();
    cmd_rank->add_option("--field", rk_field, "Hint field name")->required();
    cmd_rank->add_option("--k", rk_k, "Entries to keep");
    cmd_rank->add_option("--out", rk_out, "CSV output")->required();
    cmd_rank->add_option("--chart", rk_chart, "SVG chart output");
    cmd_rank->add_option("--seed", rk_seed, "Run seed");

    // --- ioc-fetch / ioc-rates / ioc-harvest (also grouped under `ioc`) ---
    std::string if_hashes, if_cache, if_mock, if_api;
    int if_rpm = 4;
    std::size_t if_parallel = 1;
    auto add_fetch_opts = [&](CLI::App* cmd) {
        cmd->add_option("--hashes", if_hashes, "Hash list or iocs file")->required();
        cmd->add_option("--cache", if_cache, "Cache directory")->required();
        cmd->add_option("--mock", if_mock, "Mock scan responses file");
        cmd->add_option("--api-url", if_api, "Scan API base URL");
        cmd->add_option("--rpm", if_rpm, "Requests per minute (live mode)");
        cmd->add_option("--parallel", if_parallel, "Parallel lookups");
    };

    std::string ir_cache, ir_iocs, ir_out, ir_chart;
    bool ir_energy = false, ir_miss = false, ir_macro = false;
    uint64_t ir_seed = 0;
    auto add_rates_opts = [&](CLI::App* cmd) {
        cmd->add_option("--cache", ir_cache, "Cache directory")->required();
        cmd->add_option("--iocs", ir_iocs, "IOC records file")->required();
        cmd->add_option("--out", ir_out, "CSV output")->required();
        cmd->add_option("--chart", ir_chart, "SVG chart output");
        cmd->add_flag("--energy-only", ir_energy, "Restrict to energy-related hashes");
        cmd->add_flag("--miss-on-unsupported", ir_miss,
                      "Count unsupported verdicts as misses");
        cmd->add_flag("--macro", ir_macro, "Macro-average the group rates");
        cmd->add_option("--seed", ir_seed, "Run seed");
    };

    std::string ih_checkpoint, ih_records, ih_families, ih_out;
    std::size_t ih_cap = 0;
    uint64_t ih_seed = 0;
    auto add_harvest_opts = [&](CLI::App* cmd) {
        cmd->add_option("--groups", ih_checkpoint, "Checkpoint with group flags")->required();
        cmd->add_option("--records", ih_records, "Records file with family hints")->required();
        cmd->add_option("--families", ih_families, "Family->hashes index (JSON)")->required();
        cmd->add_option("--out", ih_out, "IOC records output")->required();
        cmd->add_option("--max-per-family", ih_cap, "Cap hashes per family (0 = all)");
        cmd->add_option("--seed", ih_seed, "Run seed");
    };

    auto* cmd_ioc_fetch = app.add_subcommand("ioc-fetch", "Fetch scan reports into the cache");
    add_fetch_opts(cmd_ioc_fetch);
    auto* cmd_ioc_rates = app.add_subcommand("ioc-rates", "Per-engine detection rates");
    add_rates_opts(cmd_ioc_rates);
    auto* cmd_ioc = app.add_subcommand("ioc", "IOC analytics");
    cmd_ioc->require_subcommand(1);
    auto* cmd_ioc_fetch2 = cmd_ioc->add_subcommand("fetch", "Fetch scan reports into the cache");
    add_fetch_opts(cmd_ioc_fetch2);
    auto* cmd_ioc_rates2 = cmd_ioc->add_subcommand("rates", "Per-engine detection rates");
    add_rates_opts(cmd_ioc_rates2);
    auto* cmd_ioc_harvest = cmd_ioc->add_subcommand("harvest", "Collect IOC hashes per family");
    add_harvest_opts(cmd_ioc_harvest);

    // --- report ---
    auto* cmd_report = app.add_subcommand("report", "Emit tables and charts for a run");
    std::string rp_config;
    cmd_report->add_option("--config", rp_config, "Run config file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help() << "\n";
        return kExitConfig;
    }

    try {
        if (cmd_ingest->parsed()) {
            return run_ingest(ing_config, ing_in, ing_source, ing_kind, ing_format, ing_out,
                              ing_seed, flag_meta(cmd_ingest, ing_seed));
        }
        if (cmd_extract->parsed()) {
            return run_extract(ext_schema, ext_in, ext_out, ext_delay, ext_temp, ext_mock,
                               ext_model, ext_retries, flag_meta(cmd_extract, ext_seed));
        }
        if (cmd_baseline->parsed()) {
            return run_baseline(base_lexicon, base_in, base_out, base_domain,
                                flag_meta(cmd_baseline, base_seed));
        }
        if (cmd_eval->parsed()) {
            return run_evaluate(ev_pred, ev_labels, ev_records, ev_catmap, ev_out,
                                flag_meta(cmd_eval, ev_seed));
        }
        if (cmd_sample->parsed()) {
            return run_sample(smp_in, smp_catmap, smp_n, smp_seed, smp_out,
                              flag_meta(cmd_sample, smp_seed));
        }
        if (cmd_geotop->parsed()) {
            auto table = geopolitics::CanonicalTable::load_dir(gt_geo);
            auto threats = load_threat_records(gt_in);
            auto pairs = geopolitics::explode_pairs(threats, table);
            auto role = gt_role == "target" ? geopolitics::Role::target
                                            : geopolitics::Role::origin;
            geopolitics::EnergyFilter filter = geopolitics::EnergyFilter::all;
            if (gt_energy == "energy") filter = geopolitics::EnergyFilter::energy;
            if (gt_energy == "non-energy") filter = geopolitics::EnergyFilter::non_energy;
            emit_top_places(pairs, role, gt_k, filter, gt_out, gt_chart,
                            flag_meta(cmd_geotop, gt_seed), "Top threat " + gt_role + "s");
            return kExitOk;
        }
        if (cmd_geoall->parsed()) {
            auto table = geopolitics::CanonicalTable::load_dir(ga_geo);
            auto roster = geopolitics::AllianceRoster::load(fs::path(ga_geo) / "alliances.txt");
            auto threats = load_threat_records(ga_in);
            auto pairs = geopolitics::explode_pairs(threats, table);
            auto role = ga_role == "target" ? geopolitics::Role::target
                                            : geopolitics::Role::origin;
            emit_alliances(geopolitics::alliance_counts(roster, pairs, role), ga_out, ga_chart,
                           flag_meta(cmd_geoall, ga_seed),
                           "Threat " + ga_role + "s by alliance");
            return kExitOk;
        }
        if (cmd_geotl->parsed()) {
            auto table = geopolitics::CanonicalTable::load_dir(tl_geo);
            auto threats = load_threat_records(tl_in);
            auto dates = date_lookup(ingest::load_records(tl_records));
            auto bucket = tl_bucket == "month" ? geopolitics::Bucket::month
                                               : geopolitics::Bucket::year;
            auto series = geopolitics::dyad_timeline(threats, dates, table, tl_origin, tl_target,
                                                     bucket);
            emit_timeline(series, bucket, tl_out, tl_chart, flag_meta(cmd_geotl, tl_seed),
                          tl_origin + " -> " + tl_target);
            return kExitOk;
        }
        if (cmd_rank->parsed()) {
            auto records = ingest::load_records(rk_in);
            auto ranked = geopolitics::rank_categorical(records, rk_field, rk_k);
            emit_ranking(ranked, rk_out, rk_chart, flag_meta(cmd_rank, rk_seed),
                         "Top " + rk_field, rk_field);
            return kExitOk;
        }
        if (cmd_ioc_fetch->parsed() || cmd_ioc_fetch2->parsed()) {
            return run_ioc_fetch(if_hashes, if_cache, if_mock, if_api, if_rpm, if_parallel);
        }
        if (cmd_ioc_rates->parsed() || cmd_ioc_rates2->parsed()) {
            auto* cmd = cmd_ioc_rates->parsed() ? cmd_ioc_rates : cmd_ioc_rates2;
            return run_ioc_rates(ir_cache, ir_iocs, ir_out, ir_chart, ir_energy, ir_miss,
                                 ir_macro, flag_meta(cmd, ir_seed));
        }
        if (cmd_ioc_harvest->parsed()) {
            return run_ioc_harvest(ih_checkpoint, ih_records, ih_families, ih_out, ih_cap,
                                   flag_meta(cmd_ioc_harvest, ih_seed));
        }
        if (cmd_report->parsed()) {
            return run_report(rp_config);
        }
    } catch (const config::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        for (const auto& f : e.fields) std::cerr << "  - " << f << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitPipeline;
    }
    return kExitConfig;
}
