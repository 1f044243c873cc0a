#include "threatgeo/chart.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "threatgeo/util.hpp"

namespace threatgeo::chart {

namespace {

constexpr double kWidth = 900;
constexpr double kHeight = 420;
constexpr double kMarginLeft = 70;
constexpr double kMarginRight = 30;
constexpr double kMarginTop = 50;
constexpr double kMarginBottom = 90;

const char* kPalette[] = {"#4e79a7", "#f28e2b", "#59a14f", "#b07aa1", "#76b7b2", "#edc948"};
constexpr const char* kHighlight = "#d62728";

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string xml_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

// Round the axis maximum up to 1/2/5 x 10^k so tick labels stay clean.
double nice_ceiling(double max_value) {
    if (max_value <= 0) return 1;
    double mag = std::pow(10.0, std::floor(std::log10(max_value)));
    for (double m : {1.0, 2.0, 5.0, 10.0}) {
        if (max_value <= m * mag + 1e-9) return m * mag;
    }
    return 10 * mag;
}

void svg_open(std::ostringstream& os, const io::MetaHeader& meta, const std::string& title) {
    os << io::meta_svg_comment(meta) << "\n";
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(kWidth) << "\" height=\""
       << fmt(kHeight) << "\" viewBox=\"0 0 " << fmt(kWidth) << " " << fmt(kHeight) << "\">\n";
    os << "<rect x=\"0\" y=\"0\" width=\"" << fmt(kWidth) << "\" height=\"" << fmt(kHeight)
       << "\" fill=\"white\"/>\n";
    os << "<text x=\"" << fmt(kWidth / 2) << "\" y=\"24\" text-anchor=\"middle\" "
          "font-family=\"sans-serif\" font-size=\"16\" font-weight=\"bold\">"
       << xml_escape(title) << "</text>\n";
}

void svg_axes(std::ostringstream& os, double y_max, const std::string& y_label) {
    const double plot_h = kHeight - kMarginTop - kMarginBottom;
    const double plot_w = kWidth - kMarginLeft - kMarginRight;
    os << "<line x1=\"" << fmt(kMarginLeft) << "\" y1=\"" << fmt(kMarginTop) << "\" x2=\""
       << fmt(kMarginLeft) << "\" y2=\"" << fmt(kMarginTop + plot_h)
       << "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
    os << "<line x1=\"" << fmt(kMarginLeft) << "\" y1=\"" << fmt(kMarginTop + plot_h)
       << "\" x2=\"" << fmt(kMarginLeft + plot_w) << "\" y2=\"" << fmt(kMarginTop + plot_h)
       << "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
    for (int tick = 0; tick <= 4; ++tick) {
        double frac = tick / 4.0;
        double y = kMarginTop + plot_h * (1.0 - frac);
        os << "<line x1=\"" << fmt(kMarginLeft - 4) << "\" y1=\"" << fmt(y) << "\" x2=\""
           << fmt(kMarginLeft) << "\" y2=\"" << fmt(y)
           << "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
        double value = y_max * frac;
        char label[32];
        if (y_max >= 4 && std::abs(value - std::round(value)) < 1e-9) {
            std::snprintf(label, sizeof(label), "%.0f", value);
        } else {
            std::snprintf(label, sizeof(label), "%.2f", value);
        }
        os << "<text x=\"" << fmt(kMarginLeft - 8) << "\" y=\"" << fmt(y + 4)
           << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << label
           << "</text>\n";
    }
    if (!y_label.empty()) {
        os << "<text x=\"18\" y=\"" << fmt(kMarginTop + plot_h / 2)
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
              "transform=\"rotate(-90 18 "
           << fmt(kMarginTop + plot_h / 2) << ")\">" << xml_escape(y_label) << "</text>\n";
    }
}

}  // namespace

bool emit_grouped_bar_svg(const ChartTable& table, const std::filesystem::path& path,
                          const io::MetaHeader& meta) {
    if (table.categories.empty() || table.series.empty()) {
        util::warn("empty chart table; skipping " + path.string());
        return false;
    }

    double max_value = 0;
    for (const auto& s : table.series) {
        for (double v : s.values) max_value = std::max(max_value, v);
    }
    const double y_max = nice_ceiling(max_value);
    const double plot_h = kHeight - kMarginTop - kMarginBottom;
    const double plot_w = kWidth - kMarginLeft - kMarginRight;
    const size_t n_cat = table.categories.size();
    const size_t n_series = table.series.size();
    const double group_w = plot_w / static_cast<double>(n_cat);
    const double bar_w = group_w * 0.8 / static_cast<double>(n_series);

    std::ostringstream os;
    svg_open(os, meta, table.title);
    svg_axes(os, y_max, table.y_label);

    for (size_t c = 0; c < n_cat; ++c) {
        bool highlighted = c < table.highlight.size() && table.highlight[c];
        os << "<g class=\"bargroup\">\n";
        for (size_t s = 0; s < n_series; ++s) {
            double value = c < table.series[s].values.size() ? table.series[s].values[c] : 0.0;
            double h = y_max > 0 ? plot_h * (value / y_max) : 0.0;
            double x = kMarginLeft + group_w * static_cast<double>(c) + group_w * 0.1 +
                       bar_w * static_cast<double>(s);
            double y = kMarginTop + plot_h - h;
            const char* color =
                highlighted ? kHighlight : kPalette[s % (sizeof(kPalette) / sizeof(*kPalette))];
            os << "<rect x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" width=\"" << fmt(bar_w)
               << "\" height=\"" << fmt(h) << "\" fill=\"" << color << "\"/>\n";
        }
        os << "</g>\n";
        double label_x = kMarginLeft + group_w * (static_cast<double>(c) + 0.5);
        double label_y = kMarginTop + plot_h + 14;
        os << "<text x=\"" << fmt(label_x) << "\" y=\"" << fmt(label_y)
           << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" "
              "transform=\"rotate(-35 "
           << fmt(label_x) << " " << fmt(label_y) << ")\">" << xml_escape(table.categories[c])
           << "</text>\n";
    }

    // Legend (top right), only when there is more than one series.
    if (n_series > 1) {
        double lx = kWidth - kMarginRight - 170;
        double ly = kMarginTop - 12;
        for (size_t s = 0; s < n_series; ++s) {
            const char* color = kPalette[s % (sizeof(kPalette) / sizeof(*kPalette))];
            os << "<rect x=\"" << fmt(lx) << "\" y=\"" << fmt(ly + 16 * static_cast<double>(s))
               << "\" width=\"12\" height=\"12\" fill=\"" << color << "\"/>\n";
            os << "<text x=\"" << fmt(lx + 18) << "\" y=\""
               << fmt(ly + 16 * static_cast<double>(s) + 10)
               << "\" font-family=\"sans-serif\" font-size=\"11\">"
               << xml_escape(table.series[s].name) << "</text>\n";
        }
    }

    os << "</svg>\n";
    io::atomic_write_file(path, os.str());
    return true;
}

std::vector<geopolitics::RankedEntry> fill_period_gaps(
    const std::vector<geopolitics::RankedEntry>& periods, geopolitics::Bucket bucket) {
    if (periods.empty()) return {};

    auto parse_key = [&](const std::string& key) {
        auto date = util::parse_date(key);
        if (!date) throw std::invalid_argument("bad period key: " + key);
        return bucket == geopolitics::Bucket::year ? date->year
                                                   : date->year * 12 + (date->month - 1);
    };
    auto key_of = [&](int idx) {
        char buf[16];
        if (bucket == geopolitics::Bucket::year) {
            std::snprintf(buf, sizeof(buf), "%04d", idx);
        } else {
            std::snprintf(buf, sizeof(buf), "%04d-%02d", idx / 12, idx % 12 + 1);
        }
        return std::string(buf);
    };

    std::map<int, long long> by_index;
    for (const auto& p : periods) by_index[parse_key(p.name)] += p.count;

    std::vector<geopolitics::RankedEntry> out;
    for (int idx = by_index.begin()->first; idx <= by_index.rbegin()->first; ++idx) {
        auto it = by_index.find(idx);
        out.push_back({key_of(idx), it == by_index.end() ? 0 : it->second});
    }
    return out;
}

bool emit_timeline_svg(const std::string& title,
                       const std::vector<geopolitics::RankedEntry>& periods,
                       geopolitics::Bucket bucket, const std::filesystem::path& path,
                       const io::MetaHeader& meta) {
    if (periods.empty()) {
        util::warn("empty timeline; skipping " + path.string());
        return false;
    }

    auto filled = fill_period_gaps(periods, bucket);
    long long max_count = 0;
    for (const auto& p : filled) max_count = std::max(max_count, p.count);
    const double y_max = nice_ceiling(static_cast<double>(max_count));
    const double plot_h = kHeight - kMarginTop - kMarginBottom;
    const double plot_w = kWidth - kMarginLeft - kMarginRight;
    const double slot_w = plot_w / static_cast<double>(filled.size());
    const double bar_w = slot_w * 0.7;

    std::ostringstream os;
    svg_open(os, meta, title);
    svg_axes(os, y_max, "incidents");

    // Label at most ~12 periods to keep the axis readable.
    size_t label_step = std::max<size_t>(1, filled.size() / 12);
    for (size_t i = 0; i < filled.size(); ++i) {
        double h = y_max > 0 ? plot_h * (static_cast<double>(filled[i].count) / y_max) : 0.0;
        double x = kMarginLeft + slot_w * static_cast<double>(i) + (slot_w - bar_w) / 2;
        double y = kMarginTop + plot_h - h;
        os << "<rect class=\"period\" x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" width=\""
           << fmt(bar_w) << "\" height=\"" << fmt(h) << "\" fill=\"" << kPalette[0] << "\"/>\n";
        if (i % label_step == 0) {
            double label_x = kMarginLeft + slot_w * (static_cast<double>(i) + 0.5);
            double label_y = kMarginTop + plot_h + 14;
            os << "<text x=\"" << fmt(label_x) << "\" y=\"" << fmt(label_y)
               << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\" "
                  "transform=\"rotate(-45 "
               << fmt(label_x) << " " << fmt(label_y) << ")\">" << xml_escape(filled[i].name)
               << "</text>\n";
        }
    }

    os << "</svg>\n";
    io::atomic_write_file(path, os.str());
    return true;
}

}  // namespace threatgeo::chart
