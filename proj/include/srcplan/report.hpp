#pragma once

// Tabular output (CSV, markdown) and small SVG plots.

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace srcplan {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

// Header lines "# key: value", then RFC 4180 rows.
using ReportMeta = std::vector<std::pair<std::string, std::string>>;

std::string to_csv(const Table& table, const ReportMeta& meta = {});
std::string to_markdown(const Table& table);
// Reads CSV written by to_csv; '#' lines are skipped.
Table parse_csv(std::string_view text);
Table read_csv(const std::filesystem::path& path);

// Fixed-precision decimal; "nan" for NaN.
std::string format_number(double x, int precision = 4);

std::string svg_histogram(const std::string& title, const std::vector<double>& values, std::size_t bins = 20);
std::string svg_heatmap(const std::string& title, const std::vector<std::string>& labels,
                        const std::vector<std::vector<double>>& values);

// One schema's row of the summary table. Missing comparisons stay empty.
struct SummaryRow {
    std::string schema;
    std::size_t k = 0;
    double ppl = 0.0;
    std::optional<double> delta_base_k, p_base_k;
    std::optional<double> delta_base_r, p_base_r;
    std::optional<double> f1;
    std::optional<double> ratio_base_k, f1_p_base_k;
    std::optional<double> ratio_base_r, f1_p_base_r;
};

// "**" when p < 0.05.
std::string significance_stars(std::optional<double> p);
Table summary_table(const std::vector<SummaryRow>& rows);

void write_text(const std::filesystem::path& path, const std::string& content);
std::string read_text(const std::filesystem::path& path);

}  // namespace srcplan
