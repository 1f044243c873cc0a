#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace threatgeo::util {

// FNV-1a, 64-bit. Used for synthetic record ids, run ids and config hashes.
uint64_t fnv1a64(std::string_view data);

// 16 lowercase hex chars.
std::string hex64(uint64_t v);

inline std::string content_hash16(std::string_view data) { return hex64(fnv1a64(data)); }

std::string trim(std::string_view s);
std::string lower_ascii(std::string_view s);

// Collapse runs of whitespace to a single space and trim the ends.
std::string collapse_ws(std::string_view s);

// Word characters for boundary checks. Bytes >= 0x80 count as word bytes so
// multi-byte UTF-8 sequences never introduce spurious boundaries.
inline bool is_word_byte(unsigned char c) {
    return (c >= '0' && c <= '9') || (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c >= 0x80;
}

// 32/40/64 lowercase hex chars (md5/sha1/sha256).
bool is_hex_digest(std::string_view s);

void warn(const std::string& msg);

struct Date {
    int year = 0;
    int month = 1;
    int day = 1;

    auto operator<=>(const Date&) const = default;

    std::string iso() const;        // YYYY-MM-DD
    std::string month_key() const;  // YYYY-MM
    std::string year_key() const;   // YYYY
};

// Lenient parse: "YYYY", "YYYY-MM" and "YYYY-MM-DD" (also with '/'), partial
// dates normalized to the first day. Trailing time components are ignored.
std::optional<Date> parse_date(std::string_view s);

}  // namespace threatgeo::util
