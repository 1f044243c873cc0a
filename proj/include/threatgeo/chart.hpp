#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "threatgeo/geopolitics.hpp"
#include "threatgeo/io.hpp"

namespace threatgeo::chart {

struct Series {
    std::string name;
    std::vector<double> values;  // one per category
};

// Input table for the bar charts: categories along the x axis, one bar per
// series within each category group. highlight flags render a category's
// bars in the alert color (used for static-ML engines).
struct ChartTable {
    std::string title;
    std::string y_label;
    std::vector<std::string> categories;
    std::vector<Series> series;
    std::vector<bool> highlight;  // optional, per category
};

// Deterministic SVG: identical input produces byte-identical output. Returns
// false (and warns) when the table is empty instead of writing a file.
bool emit_grouped_bar_svg(const ChartTable& table, const std::filesystem::path& path,
                          const io::MetaHeader& meta);

// Period series rendered as a contiguous timeline; periods missing from the
// input are rendered as zero-height slots.
bool emit_timeline_svg(const std::string& title,
                       const std::vector<geopolitics::RankedEntry>& periods,
                       geopolitics::Bucket bucket, const std::filesystem::path& path,
                       const io::MetaHeader& meta);

// Gap filling used by the timeline renderer (exposed for tests).
std::vector<geopolitics::RankedEntry> fill_period_gaps(
    const std::vector<geopolitics::RankedEntry>& periods, geopolitics::Bucket bucket);

}  // namespace threatgeo::chart
