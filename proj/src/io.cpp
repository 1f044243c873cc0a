#include "threatgeo/io.hpp"

#include <sstream>
#include <stdexcept>

namespace threatgeo::io {

std::string meta_jsonl_line(const MetaHeader& m) {
    ordered_json j;
    j["_meta"] = {{"run_id", m.run_id}, {"seed", m.seed}, {"config_hash", m.config_hash}};
    return j.dump();
}

std::string meta_csv_line(const MetaHeader& m) {
    std::ostringstream os;
    os << "# run_id=" << m.run_id << " seed=" << m.seed << " config_hash=" << m.config_hash;
    return os.str();
}

std::string meta_svg_comment(const MetaHeader& m) {
    std::ostringstream os;
    os << "<!-- run_id=" << m.run_id << " seed=" << m.seed << " config_hash=" << m.config_hash
       << " -->";
    return os.str();
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read file: " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void atomic_write_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write file: " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw std::runtime_error("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(size_t, const ordered_json&)>& fn,
                    const std::function<void(size_t, const std::string&)>& on_bad) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read file: " + path.string());
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        ordered_json j = ordered_json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            if (on_bad) on_bad(line_no, line);
            continue;
        }
        if (j.is_object() && j.contains("_meta")) continue;
        fn(line_no, j);
    }
}

std::vector<ordered_json> read_jsonl(const std::filesystem::path& path) {
    std::vector<ordered_json> out;
    for_each_jsonl(path, [&](size_t, const ordered_json& j) { out.push_back(j); });
    return out;
}

JsonlWriter::JsonlWriter(const std::filesystem::path& path, const MetaHeader& meta, bool truncate)
    : path_(path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    bool fresh = truncate || !std::filesystem::exists(path) ||
                 std::filesystem::file_size(path) == 0;
    out_.open(path, std::ios::binary | (fresh ? std::ios::trunc : std::ios::app));
    if (!out_) throw std::runtime_error("cannot open for writing: " + path.string());
    if (fresh) {
        out_ << meta_jsonl_line(meta) << "\n";
        out_.flush();
    }
}

void JsonlWriter::append(const ordered_json& obj) {
    out_ << obj.dump() << "\n";
    out_.flush();
    if (!out_) throw std::runtime_error("checkpoint write failed: " + path_.string());
}

void JsonlWriter::flush() { out_.flush(); }

namespace {

std::string csv_escape(const std::string& field) {
    bool needs_quote = field.find_first_of(",\"\n\r") != std::string::npos;
    if (!needs_quote) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

}  // namespace

void write_csv(const std::filesystem::path& path, const MetaHeader& meta,
               const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    std::ostringstream os;
    os << meta_csv_line(meta) << "\n";
    for (size_t i = 0; i < header.size(); ++i) {
        if (i) os << ",";
        os << csv_escape(header[i]);
    }
    os << "\n";
    for (const auto& row : rows) {
        for (size_t i = 0; i < row.size(); ++i) {
            if (i) os << ",";
            os << csv_escape(row[i]);
        }
        os << "\n";
    }
    atomic_write_file(path, os.str());
}

}  // namespace threatgeo::io
