#include "srcplan/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/core.h>

#include "srcplan/error.hpp"

namespace srcplan {

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

std::string to_csv(const Table& table, const ReportMeta& meta) {
    std::string out;
    for (const auto& [k, v] : meta) out += "# " + k + ": " + v + "\n";
    auto row = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out += ',';
            out += csv_field(cells[i]);
        }
        out += '\n';
    };
    row(table.header);
    for (const auto& r : table.rows) row(r);
    return out;
}

std::string to_markdown(const Table& table) {
    std::string out = "|";
    for (const auto& h : table.header) out += " " + h + " |";
    out += "\n|";
    for (std::size_t i = 0; i < table.header.size(); ++i) out += " --- |";
    out += "\n";
    for (const auto& r : table.rows) {
        out += "|";
        for (const auto& c : r) out += " " + c + " |";
        out += "\n";
    }
    return out;
}

Table parse_csv(std::string_view text) {
    Table t;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false, at_line_start = true, skipping = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (at_line_start) {
            at_line_start = false;
            skipping = c == '#';
        }
        if (skipping) {
            if (c == '\n') at_line_start = true;
            continue;
        }
        if (quoted) {
            if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
                field += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            row.push_back(std::move(field));
            field.clear();
        } else if (c == '\n') {
            row.push_back(std::move(field));
            field.clear();
            rows.push_back(std::move(row));
            row.clear();
            at_line_start = true;
        } else if (c != '\r') {
            field += c;
        }
    }
    if (quoted) throw DataError("csv: unterminated quoted field");
    if (!field.empty() || !row.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DataError("csv: no header row");
    t.header = std::move(rows.front());
    t.rows.assign(std::make_move_iterator(rows.begin() + 1), std::make_move_iterator(rows.end()));
    for (std::size_t i = 0; i < t.rows.size(); ++i)
        if (t.rows[i].size() != t.header.size())
            throw DataError(fmt::format("csv: row {} has {} fields, header has {}", i + 1, t.rows[i].size(),
                                        t.header.size()));
    return t;
}

Table read_csv(const std::filesystem::path& path) {
    try {
        return parse_csv(read_text(path));
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

std::string format_number(double x, int precision) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    std::string s = fmt::format("{:.{}f}", x, precision);
    if (s.find_first_not_of("-0.") == std::string::npos) s = fmt::format("{:.{}f}", 0.0, precision);  // no "-0.0000"
    return s;
}

std::string svg_histogram(const std::string& title, const std::vector<double>& values, std::size_t bins) {
    const double W = 480, H = 300, pad = 40;
    std::string out = fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" font-family=\"sans-serif\" "
        "font-size=\"11\">\n<text x=\"{}\" y=\"18\" text-anchor=\"middle\">{}</text>\n",
        W, H, W / 2, xml_escape(title));
    if (values.empty() || bins == 0) return out + "</svg>\n";
    const auto [mn_it, mx_it] = std::minmax_element(values.begin(), values.end());
    const double lo = *mn_it, hi = *mx_it > *mn_it ? *mx_it : *mn_it + 1.0;
    std::vector<std::size_t> counts(bins, 0);
    for (double v : values) {
        auto b = static_cast<std::size_t>((v - lo) / (hi - lo) * static_cast<double>(bins));
        ++counts[std::min(b, bins - 1)];
    }
    const double peak = static_cast<double>(*std::max_element(counts.begin(), counts.end()));
    const double bw = (W - 2 * pad) / static_cast<double>(bins);
    for (std::size_t i = 0; i < bins; ++i) {
        const double h = (H - 2 * pad) * static_cast<double>(counts[i]) / peak;
        out += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"#4a7ab5\"/>\n",
                           pad + bw * static_cast<double>(i), H - pad - h, bw * 0.95, h);
    }
    out += fmt::format("<text x=\"{}\" y=\"{}\">{}</text>\n", pad, H - pad + 15, format_number(lo, 3));
    out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n", W - pad, H - pad + 15,
                       format_number(hi, 3));
    out += fmt::format("<text x=\"{}\" y=\"{}\">n = {}</text>\n", pad, pad - 8, values.size());
    return out + "</svg>\n";
}

std::string svg_heatmap(const std::string& title, const std::vector<std::string>& labels,
                        const std::vector<std::vector<double>>& values) {
    const double cell = 60, left = 120, top = 40;
    const double n = static_cast<double>(labels.size());
    std::string out = fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" font-family=\"sans-serif\" "
        "font-size=\"11\">\n<text x=\"{}\" y=\"18\">{}</text>\n",
        left + cell * n + 20, top + cell * n + 20, left, xml_escape(title));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        out += fmt::format("<text x=\"{}\" y=\"{:.1f}\" text-anchor=\"end\">{}</text>\n", left - 6,
                           top + cell * (static_cast<double>(i) + 0.55), xml_escape(labels[i]));
        for (std::size_t j = 0; j < labels.size(); ++j) {
            const double v = std::clamp(values[i][j], 0.0, 1.0);
            const int shade = static_cast<int>(std::lround(255.0 * (1.0 - v)));
            out += fmt::format(
                "<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"{}\" height=\"{}\" fill=\"rgb({},{},255)\"/>\n"
                "<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{}</text>\n",
                left + cell * static_cast<double>(j), top + cell * static_cast<double>(i), cell, cell, shade, shade,
                left + cell * (static_cast<double>(j) + 0.5), top + cell * (static_cast<double>(i) + 0.55),
                format_number(values[i][j], 2));
        }
    }
    return out + "</svg>\n";
}

std::string significance_stars(std::optional<double> p) { return p && *p < 0.05 ? "**" : ""; }

Table summary_table(const std::vector<SummaryRow>& rows) {
    Table t;
    t.header = {"schema", "k", "ppl", "delta_base_k", "delta_base_r", "f1", "ratio_base_k", "ratio_base_r"};
    auto cell = [](std::optional<double> v, std::optional<double> p) {
        return v ? format_number(*v) + significance_stars(p) : std::string{};
    };
    for (const auto& r : rows) {
        t.rows.push_back({r.schema, std::to_string(r.k), format_number(r.ppl), cell(r.delta_base_k, r.p_base_k),
                          cell(r.delta_base_r, r.p_base_r), cell(r.f1, std::nullopt),
                          cell(r.ratio_base_k, r.f1_p_base_k), cell(r.ratio_base_r, r.f1_p_base_r)});
    }
    return t;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << content;
    if (!out) throw DataError("write failed for " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace srcplan
