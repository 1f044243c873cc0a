#include "threatgeo/ingest.hpp"

#include <fstream>
#include <sstream>

#include "threatgeo/util.hpp"

namespace threatgeo::ingest {

SourceKind source_kind_from_string(const std::string& s) {
    if (s == "actor") return SourceKind::actor;
    if (s == "incident") return SourceKind::incident;
    if (s == "report") return SourceKind::report;
    if (s == "malware") return SourceKind::malware;
    throw std::invalid_argument("unknown source kind: " + s);
}

SourceFormat source_format_from_string(const std::string& s) {
    if (s == "json-objects") return SourceFormat::json_objects;
    if (s == "tabular") return SourceFormat::tabular;
    if (s == "text-list") return SourceFormat::text_list;
    throw std::invalid_argument("unknown source format: " + s);
}

std::string to_string(SourceKind k) {
    switch (k) {
        case SourceKind::actor: return "actor";
        case SourceKind::incident: return "incident";
        case SourceKind::report: return "report";
        case SourceKind::malware: return "malware";
    }
    return "incident";
}

std::string to_string(SourceFormat f) {
    switch (f) {
        case SourceFormat::json_objects: return "json-objects";
        case SourceFormat::tabular: return "tabular";
        case SourceFormat::text_list: return "text-list";
    }
    return "json-objects";
}

namespace {

// Dotted-path lookup into a JSON object ("meta.country").
const ordered_json* find_path(const ordered_json& obj, const std::string& path) {
    const ordered_json* cur = &obj;
    size_t start = 0;
    while (true) {
        size_t dot = path.find('.', start);
        std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
        if (!cur->is_object() || !cur->contains(key)) return nullptr;
        cur = &(*cur)[key];
        if (dot == std::string::npos) return cur;
        start = dot + 1;
    }
}

std::vector<std::string> as_string_list(const ordered_json& v) {
    std::vector<std::string> out;
    if (v.is_array()) {
        for (const auto& e : v) {
            std::string s = util::trim(e.is_string() ? e.get<std::string>() : e.dump());
            if (!s.empty()) out.push_back(std::move(s));
        }
    } else if (v.is_string()) {
        std::string s = util::trim(v.get<std::string>());
        if (!s.empty()) out.push_back(std::move(s));
    } else if (!v.is_null()) {
        out.push_back(v.dump());
    }
    return out;
}

std::optional<std::string> first_string(const ordered_json& obj,
                                        const std::vector<std::string>& keys) {
    for (const auto& k : keys) {
        if (const ordered_json* v = find_path(obj, k)) {
            std::string s;
            if (v->is_string()) {
                s = v->get<std::string>();
            } else if (v->is_number_integer()) {
                s = std::to_string(v->get<long long>());
            } else {
                continue;
            }
            s = util::trim(s);
            if (!s.empty()) return s;
        }
    }
    return std::nullopt;
}

// Builds a RawRecord out of one parsed JSON entry. Returns false when the
// description is blank (the caller counts the drop).
bool record_from_object(const SourceDescriptor& d, const FieldMapping& m, const ordered_json& obj,
                        const std::string& raw_entry, RawRecord& out) {
    std::optional<std::string> desc = first_string(obj, m.description_keys);
    if (!desc) return false;

    out.ref.source_id = d.source_id;
    if (auto id = first_string(obj, m.id_keys)) {
        out.ref.record_id = *id;
    } else {
        out.ref.record_id = util::content_hash16(raw_entry);
    }
    out.description = *desc;
    if (auto ds = first_string(obj, m.date_keys)) {
        out.date = util::parse_date(*ds);
        if (!out.date) util::warn(d.source_id + ": unparseable date '" + *ds + "'");
    }
    out.ground_truth_category = first_string(obj, m.ground_truth_keys);
    for (const auto& [hint, keys] : m.hint_keys) {
        for (const auto& k : keys) {
            if (const ordered_json* v = find_path(obj, k)) {
                auto vals = as_string_list(*v);
                if (!vals.empty()) {
                    out.structured_hints[hint] = std::move(vals);
                    break;
                }
            }
        }
    }
    return true;
}

}  // namespace

IngestResult read_json_objects(const SourceDescriptor& d, const FieldMapping& mapping) {
    std::ifstream in(d.path, std::ios::binary);
    if (!in) throw IngestError("cannot read source '" + d.source_id + "': " + d.path);

    IngestResult result;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string t = util::trim(line);
        if (t.empty()) continue;
        if (line_no == 1 && t[0] == '[') {
            throw IngestError("source '" + d.source_id +
                              "' is a JSON array; expected line-delimited objects");
        }
        ordered_json obj = ordered_json::parse(t, nullptr, false);
        if (obj.is_discarded() || !obj.is_object()) {
            util::warn(d.source_id + ": skipping malformed entry at line " +
                       std::to_string(line_no));
            ++result.stats.skipped_malformed;
            continue;
        }
        RawRecord rec;
        if (!record_from_object(d, mapping, obj, t, rec)) {
            ++result.stats.dropped_empty;
            util::warn(d.source_id + ": dropping entry with empty description at line " +
                       std::to_string(line_no));
            continue;
        }
        result.records.push_back(std::move(rec));
        ++result.stats.records;
    }
    return result;
}

namespace {

// RFC-4180-ish row reader: quoted fields may contain the delimiter, doubled
// quotes and embedded newlines.
class CsvReader {
public:
    CsvReader(std::istream& in, char delim) : in_(in), delim_(delim) {}

    bool next_row(std::vector<std::string>& row) {
        row.clear();
        std::string field;
        bool in_quotes = false;
        bool any = false;
        int c;
        while ((c = in_.get()) != EOF) {
            any = true;
            char ch = static_cast<char>(c);
            if (in_quotes) {
                if (ch == '"') {
                    if (in_.peek() == '"') {
                        field.push_back('"');
                        in_.get();
                    } else {
                        in_quotes = false;
                    }
                } else {
                    field.push_back(ch);
                }
            } else if (ch == '"') {
                in_quotes = true;
            } else if (ch == delim_) {
                row.push_back(std::move(field));
                field.clear();
            } else if (ch == '\n') {
                if (!field.empty() && field.back() == '\r') field.pop_back();
                row.push_back(std::move(field));
                return true;
            } else {
                field.push_back(ch);
            }
        }
        if (!any) return false;
        if (!field.empty() && field.back() == '\r') field.pop_back();
        row.push_back(std::move(field));
        return true;
    }

private:
    std::istream& in_;
    char delim_;
};

int find_column(const std::vector<std::string>& header, const std::vector<std::string>& keys) {
    for (const auto& key : keys) {
        std::string want = util::lower_ascii(util::trim(key));
        for (size_t i = 0; i < header.size(); ++i) {
            if (util::lower_ascii(util::trim(header[i])) == want) return static_cast<int>(i);
        }
    }
    return -1;
}

std::string cell(const std::vector<std::string>& row, int idx) {
    if (idx < 0 || idx >= static_cast<int>(row.size())) return "";
    return util::trim(row[static_cast<size_t>(idx)]);
}

}  // namespace

IngestResult read_tabular(const SourceDescriptor& d, const FieldMapping& mapping) {
    std::ifstream in(d.path, std::ios::binary);
    if (!in) throw IngestError("cannot read source '" + d.source_id + "': " + d.path);

    // Delimiter sniffing on the header line: tab wins when present.
    std::string header_line;
    if (!std::getline(in, header_line)) {
        return {};  // empty dump
    }
    char delim = header_line.find('\t') != std::string::npos ? '\t' : ',';
    in.seekg(0);

    CsvReader reader(in, delim);
    std::vector<std::string> header;
    if (!reader.next_row(header)) return {};

    const int id_col = find_column(header, mapping.id_keys);
    const int desc_col = find_column(header, mapping.description_keys);
    const int date_col = find_column(header, mapping.date_keys);
    const int gt_col = find_column(header, mapping.ground_truth_keys);
    if (desc_col < 0) {
        throw IngestError("source '" + d.source_id + "': no description column found");
    }
    std::map<std::string, int> hint_cols;
    for (const auto& [hint, keys] : mapping.hint_keys) {
        int col = find_column(header, keys);
        if (col >= 0) hint_cols[hint] = col;
    }

    IngestResult result;
    std::vector<std::string> row;
    size_t row_no = 1;
    while (reader.next_row(row)) {
        ++row_no;
        if (row.size() == 1 && util::trim(row[0]).empty()) continue;
        if (row.size() > header.size()) {
            util::warn(d.source_id + ": skipping malformed row " + std::to_string(row_no) +
                       " (column count " + std::to_string(row.size()) + " > header " +
                       std::to_string(header.size()) + ")");
            ++result.stats.skipped_malformed;
            continue;
        }

        std::string desc = cell(row, desc_col);
        if (desc.empty()) {
            ++result.stats.dropped_empty;
            util::warn(d.source_id + ": dropping row " + std::to_string(row_no) +
                       " with empty description");
            continue;
        }

        RawRecord rec;
        rec.ref.source_id = d.source_id;
        std::string id = cell(row, id_col);
        if (id.empty()) {
            std::ostringstream raw;
            for (size_t i = 0; i < row.size(); ++i) {
                if (i) raw << delim;
                raw << row[i];
            }
            id = util::content_hash16(raw.str());
        }
        rec.ref.record_id = id;
        rec.description = desc;
        if (std::string ds = cell(row, date_col); !ds.empty()) {
            rec.date = util::parse_date(ds);
            if (!rec.date) util::warn(d.source_id + ": unparseable date '" + ds + "'");
        }
        if (std::string gt = cell(row, gt_col); !gt.empty()) rec.ground_truth_category = gt;
        for (const auto& [hint, col] : hint_cols) {
            if (std::string v = cell(row, col); !v.empty()) {
                rec.structured_hints[hint] = {v};
            }
        }
        result.records.push_back(std::move(rec));
        ++result.stats.records;
    }
    return result;
}

IngestResult read_text_list(const SourceDescriptor& d) {
    std::ifstream in(d.path, std::ios::binary);
    if (!in) throw IngestError("cannot read source '" + d.source_id + "': " + d.path);

    IngestResult result;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string t = util::trim(line);
        if (t.empty()) {
            continue;  // blank separator lines are not entries
        }

        // Optional leading "YYYY[-MM[-DD]]:" date prefix.
        RawRecord rec;
        rec.ref.source_id = d.source_id;
        std::string body = t;
        if (size_t colon = t.find(':'); colon != std::string::npos && colon <= 10) {
            if (auto date = util::parse_date(t.substr(0, colon))) {
                rec.date = date;
                body = util::trim(t.substr(colon + 1));
            }
        }
        if (body.empty()) {
            ++result.stats.dropped_empty;
            util::warn(d.source_id + ": dropping entry with empty description at line " +
                       std::to_string(line_no));
            continue;
        }
        rec.ref.record_id = util::content_hash16(t);
        rec.description = body;
        result.records.push_back(std::move(rec));
        ++result.stats.records;
    }
    return result;
}

namespace {

FieldMapping generic_mapping() {
    FieldMapping m;
    m.id_keys = {"id", "record_id", "uid", "name"};
    m.description_keys = {"description", "text", "summary", "title"};
    m.date_keys = {"date", "start_date", "created"};
    m.ground_truth_keys = {"category", "ground_truth_category"};
    return m;
}

IngestResult generic_ingest(const SourceDescriptor& d) {
    switch (d.format) {
        case SourceFormat::json_objects: return read_json_objects(d, generic_mapping());
        case SourceFormat::tabular: return read_tabular(d, generic_mapping());
        case SourceFormat::text_list: return read_text_list(d);
    }
    throw IngestError("unsupported format");
}

AdapterRegistry make_builtin_registry() {
    AdapterRegistry reg;

    // Actor profiles with the origin country reported explicitly.
    reg.register_adapter("malpedia", [](const SourceDescriptor& d) {
        FieldMapping m;
        m.id_keys = {"uid", "id", "value", "name"};
        m.description_keys = {"description", "meta.description"};
        m.date_keys = {"date", "meta.date"};
        m.hint_keys = {{"origin", {"country", "meta.country", "origin"}},
                       {"families", {"families", "tools", "malware"}},
                       {"aliases", {"aliases", "meta.synonyms"}}};
        return read_json_objects(d, m);
    });

    reg.register_adapter("mitre", [](const SourceDescriptor& d) {
        FieldMapping m;
        m.id_keys = {"id", "group_id", "name"};
        m.description_keys = {"description"};
        m.date_keys = {"created", "modified"};
        m.hint_keys = {{"aliases", {"aliases"}}, {"families", {"software", "tools"}}};
        return read_json_objects(d, m);
    });

    // Incident table with explicit origin/target columns and the receiver
    // category used as a ground-truth label.
    reg.register_adapter("eurepoc", [](const SourceDescriptor& d) {
        FieldMapping m;
        m.id_keys = {"id", "incident_id", "ID"};
        m.description_keys = {"description", "name"};
        m.date_keys = {"start_date", "date"};
        m.ground_truth_keys = {"receiver_category", "receiver category"};
        m.hint_keys = {{"origin", {"initiator_country", "initiator country"}},
                       {"target", {"receiver_country", "receiver country"}}};
        return read_tabular(d, m);
    });

    // Dated free-text entries, one incident per line.
    reg.register_adapter("csis", [](const SourceDescriptor& d) { return read_text_list(d); });

    reg.register_adapter("aiid", [](const SourceDescriptor& d) {
        FieldMapping m;
        m.id_keys = {"incident_id", "id"};
        m.description_keys = {"description", "title"};
        m.date_keys = {"date"};
        m.hint_keys = {
            {"harmed_parties",
             {"alleged_harmed_parties", "Alleged harmed or nearly harmed parties"}},
            {"developer", {"alleged_developer", "Alleged deployer of AI system"}}};
        return read_json_objects(d, m);
    });

    return reg;
}

}  // namespace

AdapterRegistry& AdapterRegistry::builtin() {
    static AdapterRegistry registry = make_builtin_registry();
    return registry;
}

void AdapterRegistry::register_adapter(const std::string& source_id, AdapterFn adapter) {
    adapters_[source_id] = std::move(adapter);
}

IngestResult AdapterRegistry::ingest(const SourceDescriptor& descriptor) const {
    auto it = adapters_.find(descriptor.source_id);
    if (it != adapters_.end()) return it->second(descriptor);
    return generic_ingest(descriptor);
}

IngestResult ingest_source(const SourceDescriptor& descriptor) {
    return AdapterRegistry::builtin().ingest(descriptor);
}

std::map<std::string, size_t> count_by_source(const std::vector<RawRecord>& records) {
    std::map<std::string, size_t> counts;
    for (const auto& r : records) ++counts[r.ref.source_id];
    return counts;
}

void write_records(const std::filesystem::path& path, const std::vector<RawRecord>& records,
                   const io::MetaHeader& meta) {
    io::JsonlWriter writer(path, meta);
    for (const auto& r : records) writer.append(r.to_json());
}

std::vector<RawRecord> load_records(const std::filesystem::path& path) {
    std::vector<RawRecord> records;
    io::for_each_jsonl(path, [&](size_t, const ordered_json& j) {
        records.push_back(RawRecord::from_json(j));
    });
    return records;
}

}  // namespace threatgeo::ingest
