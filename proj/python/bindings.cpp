#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "threatgeo/baseline.hpp"
#include "threatgeo/evaluate.hpp"
#include "threatgeo/extract.hpp"
#include "threatgeo/geopolitics.hpp"
#include "threatgeo/ioc.hpp"

namespace py = pybind11;
using namespace threatgeo;

namespace {

// Python callers address records by "source_id/record_id" strings.
RecordRef ref_from_key(const std::string& key) {
    auto sep = key.find('/');
    if (sep == std::string::npos) return RecordRef{"", key};
    return RecordRef{key.substr(0, sep), key.substr(sep + 1)};
}

std::map<RecordRef, bool> bool_map_from_py(const std::map<std::string, bool>& in) {
    std::map<RecordRef, bool> out;
    for (const auto& [key, value] : in) out[ref_from_key(key)] = value;
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Threat-intelligence geopolitics analytics core";

    // --- evaluate ---
    py::class_<evaluate::ConfusionMatrix>(m, "ConfusionMatrix")
        .def(py::init<>())
        .def(py::init([](long long tn, long long fp, long long fn, long long tp) {
                 return evaluate::ConfusionMatrix{tn, fp, fn, tp};
             }),
             py::arg("tn"), py::arg("fp"), py::arg("fn"), py::arg("tp"))
        .def_readwrite("tn", &evaluate::ConfusionMatrix::tn)
        .def_readwrite("fp", &evaluate::ConfusionMatrix::fp)
        .def_readwrite("fn", &evaluate::ConfusionMatrix::fn)
        .def_readwrite("tp", &evaluate::ConfusionMatrix::tp)
        .def("total", &evaluate::ConfusionMatrix::total);

    py::class_<evaluate::ClassificationMetrics>(m, "ClassificationMetrics")
        .def_readonly("accuracy", &evaluate::ClassificationMetrics::accuracy)
        .def_readonly("precision", &evaluate::ClassificationMetrics::precision)
        .def_readonly("recall", &evaluate::ClassificationMetrics::recall)
        .def_readonly("f1", &evaluate::ClassificationMetrics::f1);

    m.def("metrics", &evaluate::metrics, py::arg("cm"));
    m.def(
        "confusion",
        [](const std::map<std::string, bool>& predictions,
           const std::map<std::string, bool>& labels) {
            return evaluate::confusion(bool_map_from_py(predictions), bool_map_from_py(labels));
        },
        py::arg("predictions"), py::arg("labels"),
        "Confusion matrix from {'source/record': bool} maps");

    // --- baseline ---
    py::class_<baseline::Lexicon>(m, "Lexicon")
        .def(py::init([](std::vector<std::string> phrases, std::string domain) {
                 return baseline::make_lexicon(std::move(phrases), std::move(domain));
             }),
             py::arg("phrases"), py::arg("domain_label") = "energy")
        .def_readonly("domain_label", &baseline::Lexicon::domain_label)
        .def_readonly("phrases", &baseline::Lexicon::phrases);

    m.def("load_lexicon", &baseline::load_lexicon, py::arg("path"),
          py::arg("domain_label") = "energy");
    m.def("classify", &baseline::classify, py::arg("lexicon"), py::arg("text"));

    py::class_<baseline::PhraseMatcher>(m, "PhraseMatcher")
        .def(py::init<const baseline::Lexicon&>())
        .def("matches", &baseline::PhraseMatcher::matches);

    // --- geopolitics ---
    py::enum_<geopolitics::PlaceKind>(m, "PlaceKind")
        .value("country", geopolitics::PlaceKind::country)
        .value("region", geopolitics::PlaceKind::region)
        .value("unknown", geopolitics::PlaceKind::unknown);

    py::class_<geopolitics::CanonicalPlace>(m, "CanonicalPlace")
        .def_readonly("name", &geopolitics::CanonicalPlace::name)
        .def_readonly("kind", &geopolitics::CanonicalPlace::kind);

    py::class_<geopolitics::CanonicalTable>(m, "CanonicalTable")
        .def_static("load_dir", &geopolitics::CanonicalTable::load_dir, py::arg("geo_dir"))
        .def("canonicalize", &geopolitics::CanonicalTable::canonicalize, py::arg("raw_name"));

    py::class_<geopolitics::AllianceRoster>(m, "AllianceRoster")
        .def_static("load", &geopolitics::AllianceRoster::load, py::arg("path"))
        .def_readonly("as_of", &geopolitics::AllianceRoster::as_of)
        .def("classify", [](const geopolitics::AllianceRoster& roster,
                            const geopolitics::CanonicalPlace& place) {
            return geopolitics::to_string(roster.classify(place));
        });

    // --- extract (prompt + response handling) ---
    py::class_<extract::ExtractionSchema>(m, "ExtractionSchema")
        .def_static("default_for", &extract::ExtractionSchema::default_for,
                    py::arg("domain_keyword") = "energy")
        .def_readonly("domain_keyword", &extract::ExtractionSchema::domain_keyword);

    m.def("build_prompt", &extract::build_prompt, py::arg("schema"), py::arg("description"));
    m.def(
        "parse_response",
        [](const extract::ExtractionSchema& schema, const std::string& body) -> py::object {
            auto result = extract::parse_response(schema, body);
            if (std::holds_alternative<extract::ParseError>(result)) {
                py::dict d;
                d["error"] = std::get<extract::ParseError>(result).reason;
                return d;
            }
            py::dict d;
            for (const auto& [name, value] : std::get<extract::ParsedFields>(result).values) {
                if (std::holds_alternative<bool>(value)) {
                    d[name.c_str()] = std::get<bool>(value);
                } else {
                    d[name.c_str()] = std::get<std::vector<std::string>>(value);
                }
            }
            return d;
        },
        py::arg("schema"), py::arg("body"),
        "Validated field values, or {'error': reason} on failure");

    // --- ioc analytics ---
    py::class_<ioc::IocRecord>(m, "IocRecord")
        .def(py::init([](std::string family, std::string hash, bool energy) {
                 return ioc::IocRecord{std::move(family), std::move(hash), energy};
             }),
             py::arg("family"), py::arg("hash"), py::arg("energy_related") = false)
        .def_readonly("family", &ioc::IocRecord::family)
        .def_readonly("hash", &ioc::IocRecord::hash)
        .def_readonly("energy_related", &ioc::IocRecord::energy_related);

    py::class_<ioc::EngineVerdict>(m, "EngineVerdict")
        .def(py::init([](std::string engine, const std::string& outcome, bool is_static_ml) {
                 return ioc::EngineVerdict{std::move(engine),
                                           ioc::verdict_from_string(outcome), is_static_ml};
             }),
             py::arg("engine"), py::arg("outcome"), py::arg("is_static_ml") = false);

    py::class_<ioc::ScanReport>(m, "ScanReport")
        .def(py::init([](std::string hash, std::vector<ioc::EngineVerdict> verdicts) {
                 return ioc::ScanReport{std::move(hash), std::move(verdicts), ""};
             }),
             py::arg("hash"), py::arg("verdicts"))
        .def_readonly("hash", &ioc::ScanReport::hash);

    py::class_<ioc::GroupStats>(m, "GroupStats")
        .def_readonly("scanned", &ioc::GroupStats::scanned)
        .def_readonly("detected", &ioc::GroupStats::detected)
        .def_readonly("rate", &ioc::GroupStats::rate);

    py::class_<ioc::DetectionStats>(m, "DetectionStats")
        .def_readonly("static_ml", &ioc::DetectionStats::static_ml)
        .def_readonly("others", &ioc::DetectionStats::others)
        .def_readonly("all", &ioc::DetectionStats::all)
        .def("engine_rate", [](const ioc::DetectionStats& stats, const std::string& engine) {
            return stats.engines.at(engine).rate;
        });

    m.def(
        "detection_rates",
        [](const std::vector<ioc::ScanReport>& reports, const std::vector<ioc::IocRecord>& iocs,
           bool energy_only, bool miss_on_unsupported, bool macro) {
            return ioc::detection_rates(reports, iocs,
                                        energy_only ? ioc::IocFilter::energy : ioc::IocFilter::all,
                                        miss_on_unsupported,
                                        macro ? ioc::Averaging::macro : ioc::Averaging::micro);
        },
        py::arg("reports"), py::arg("iocs"), py::arg("energy_only") = false,
        py::arg("miss_on_unsupported") = false, py::arg("macro") = false);

    m.def("rank_engines", [](const ioc::DetectionStats& stats) {
        std::vector<std::tuple<std::string, double, bool>> out;
        for (const auto& e : ioc::rank_engines(stats)) {
            out.emplace_back(e.engine, e.rate, e.is_static_ml);
        }
        return out;
    });

    m.attr("__version__") = "0.1.0";
}
