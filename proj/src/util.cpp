#include "threatgeo/util.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <iostream>

namespace threatgeo::util {

uint64_t fnv1a64(std::string_view data) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return std::string(buf, 16);
}

std::string trim(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string lower_ascii(std::string_view s) {
    std::string out(s);
    for (char& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

std::string collapse_ws(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool in_ws = true;  // leading whitespace dropped
    for (unsigned char c : s) {
        if (std::isspace(c)) {
            in_ws = true;
        } else {
            if (in_ws && !out.empty()) out.push_back(' ');
            in_ws = false;
            out.push_back(static_cast<char>(c));
        }
    }
    return out;
}

bool is_hex_digest(std::string_view s) {
    if (s.size() != 32 && s.size() != 40 && s.size() != 64) return false;
    for (char c : s) {
        bool ok = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
        if (!ok) return false;
    }
    return true;
}

void warn(const std::string& msg) {
    std::cerr << "[threatgeo] warning: " << msg << "\n";
}

std::string Date::iso() const {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
    return buf;
}

std::string Date::month_key() const {
    char buf[12];
    std::snprintf(buf, sizeof(buf), "%04d-%02d", year, month);
    return buf;
}

std::string Date::year_key() const {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "%04d", year);
    return buf;
}

namespace {

bool parse_int(std::string_view s, int& out) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && p == s.data() + s.size();
}

}  // namespace

std::optional<Date> parse_date(std::string_view s) {
    std::string t = trim(s);
    // Drop a time component ("2024-09-19T10:00:00" or "2024-09-19 10:00").
    if (auto pos = t.find_first_of("T "); pos != std::string::npos) t.resize(pos);
    if (t.empty()) return std::nullopt;

    std::string_view rest = t;
    std::string_view parts[3];
    size_t n = 0;
    while (n < 3) {
        size_t sep = rest.find_first_of("-/");
        if (sep == std::string_view::npos) {
            parts[n++] = rest;
            rest = {};
            break;
        }
        parts[n++] = rest.substr(0, sep);
        rest = rest.substr(sep + 1);
    }
    if (!rest.empty()) return std::nullopt;

    Date d;
    if (n < 1 || parts[0].size() != 4 || !parse_int(parts[0], d.year)) return std::nullopt;
    if (n >= 2 && (!parse_int(parts[1], d.month) || d.month < 1 || d.month > 12)) return std::nullopt;
    if (n >= 3 && (!parse_int(parts[2], d.day) || d.day < 1 || d.day > 31)) return std::nullopt;
    return d;
}

}  // namespace threatgeo::util
