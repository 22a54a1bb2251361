#pragma once

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "biasaudit/corpus.hpp"
#include "biasaudit/stats.hpp"
#include "biasaudit/trial.hpp"

namespace biasaudit {

// ---------------------------------------------------------------------------
// Rounding and formatting. Every number in every emitted table is the stats
// value rounded half to even at a fixed precision: chi-squared 2 decimals,
// phi and CI bounds 3, gaps and r 2. CI bounds additionally drop trailing
// zeros ("0.100" prints as "0.1"), matching the published tables.

inline double round_half_even(double v, int decimals) {
    double scale = std::pow(10.0, decimals);
    return std::nearbyint(v * scale) / scale;
}

namespace detail {

inline std::string format_fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, round_half_even(v, decimals));
    return buf;
}

inline std::string format_stripped(double v, int decimals) {
    std::string s = format_fixed(v, decimals);
    if (s.find('.') == std::string::npos) return s;
    while (s.back() == '0') s.pop_back();
    if (s.back() == '.') s.pop_back();
    return s;
}

inline std::string format_p(double p) {
    if (p < 0.001) return "<0.001";
    return format_fixed(p, 3);
}

inline std::string format_ci(double lo, double hi) {
    return "(" + format_stripped(lo, 3) + ", " + format_stripped(hi, 3) + ")";
}

// RFC 4180: quote fields containing commas or quotes, doubling inner quotes.
inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

inline std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open '" + path + "' for writing");
    out << content;
    out.flush();
    if (!out) throw io_error("failed writing '" + path + "'");
}

struct stereotype_caption {
    std::string heading;  // '"<name>": <theme>'
    std::string label_a = "A";
    std::string label_b = "B";
};

inline stereotype_caption caption_for(std::string_view stereotype_id, const corpus* corp) {
    stereotype_caption cap;
    if (corp && corp->has_stereotype(stereotype_id)) {
        const stereotype& st = corp->find_stereotype(stereotype_id);
        std::string name = st.name;
        for (char& c : name) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        cap.heading = "\"" + name + "\": " + st.theme;
        cap.label_a = st.option_a_label;
        cap.label_b = st.option_b_label;
    } else {
        cap.heading = "\"" + std::string(stereotype_id) + "\"";
    }
    return cap;
}

}  // namespace detail

enum class table_format { markdown, csv };

inline table_format parse_table_format(std::string_view s) {
    if (s == "markdown" || s == "md") return table_format::markdown;
    if (s == "csv") return table_format::csv;
    throw parse_error("unknown table format: " + std::string(s));
}

// ---------------------------------------------------------------------------
// Statistics tables: one section per stereotype, one row per model, with the
// AT-NA column group before the ST-AST group.

inline std::string render_stats_table(const std::vector<stat_bundle>& bundles, table_format fmt,
                                      const corpus* corp = nullptr) {
    if (bundles.empty()) throw insufficient_data("no stat bundles to report");

    std::vector<std::string> stereotype_order;
    std::map<std::string, std::vector<const stat_bundle*>> by_stereotype;
    for (const auto& b : bundles) {
        auto [it, fresh] = by_stereotype.try_emplace(b.stereotype_id);
        if (fresh) stereotype_order.push_back(b.stereotype_id);
        it->second.push_back(&b);
    }

    std::string out;
    if (fmt == table_format::csv) {
        out +=
            "stereotype,model,at_na_chi2,at_na_p,at_na_phi,at_na_ci,"
            "st_ast_chi2,st_ast_p,st_ast_phi,st_ast_ci\n";
        for (const auto& sid : stereotype_order)
            for (const stat_bundle* b : by_stereotype[sid]) {
                out += detail::csv_field(sid) + "," + detail::csv_field(b->model) + ",";
                out += detail::format_fixed(b->at_na.chi2, 2) + ",";
                out += detail::format_p(b->at_na.p_for_reporting()) + ",";
                out += detail::format_fixed(b->at_na.phi, 3) + ",";
                out += detail::csv_field(
                           detail::format_ci(b->at_na.phi_ci_lower, b->at_na.phi_ci_upper)) +
                       ",";
                out += detail::format_fixed(b->st_ast.chi2, 2) + ",";
                out += detail::format_p(b->st_ast.p_for_reporting()) + ",";
                out += detail::format_fixed(b->st_ast.phi, 3) + ",";
                out += detail::csv_field(
                    detail::format_ci(b->st_ast.phi_ci_lower, b->st_ast.phi_ci_upper));
                out += "\n";
            }
        return out;
    }

    out += "# Chi-squared statistics per model and stereotype\n";
    for (const auto& sid : stereotype_order) {
        out += "\n## " + detail::caption_for(sid, corp).heading + "\n\n";
        out += "| Model | AT-NA chi2 | p | phi | 95% CI | ST-AST chi2 | p | phi | 95% CI |\n";
        out += "|---|---|---|---|---|---|---|---|---|\n";
        for (const stat_bundle* b : by_stereotype[sid]) {
            out += "| " + b->model + " | ";
            out += detail::format_fixed(b->at_na.chi2, 2) + " | ";
            out += detail::format_p(b->at_na.p_for_reporting()) + " | ";
            out += detail::format_fixed(b->at_na.phi, 3) + " | ";
            out += detail::format_ci(b->at_na.phi_ci_lower, b->at_na.phi_ci_upper) + " | ";
            out += detail::format_fixed(b->st_ast.chi2, 2) + " | ";
            out += detail::format_p(b->st_ast.p_for_reporting()) + " | ";
            out += detail::format_fixed(b->st_ast.phi, 3) + " | ";
            out += detail::format_ci(b->st_ast.phi_ci_lower, b->st_ast.phi_ci_upper) + " |\n";
        }
    }
    return out;
}

inline void emit_stats_table(const std::vector<stat_bundle>& bundles, table_format fmt,
                             const std::string& path, const corpus* corp = nullptr) {
    detail::write_file(path, render_stats_table(bundles, fmt, corp));
}

// ---------------------------------------------------------------------------
// Frequency tables: per-model valid-decision counts per option and condition,
// ordered AT NA ST AST within each option group, INVALID counts in the final
// column.

namespace detail {

inline constexpr std::array<condition_kind, 4> frequency_condition_order = {
    condition_kind::AT, condition_kind::NA, condition_kind::ST, condition_kind::AST};

struct model_frequencies {
    std::string model;
    std::array<long long, 4> option_a{};  // indexed by condition_kind
    std::array<long long, 4> option_b{};
    long long invalid = 0;
};

inline std::vector<model_frequencies> frequencies_for(const std::vector<trial_record>& records,
                                                      std::string_view stereotype_id) {
    std::vector<model_frequencies> rows;
    std::map<std::string, std::size_t> row_of;
    for (const auto& r : records) {
        if (r.stereotype_id != stereotype_id) continue;
        auto [it, fresh] = row_of.try_emplace(r.key.model, rows.size());
        if (fresh) rows.push_back({r.key.model, {}, {}, 0});
        model_frequencies& row = rows[it->second];
        if (r.dec == decision::INVALID) {
            ++row.invalid;
            continue;
        }
        auto i = static_cast<std::size_t>(r.key.cond.kind);
        (r.dec == decision::A ? row.option_a : row.option_b)[i] += 1;
    }
    if (rows.empty())
        throw insufficient_data("log has no trials for stereotype '" +
                                std::string(stereotype_id) + "'");
    return rows;
}

// The bundles' contingency tables hold the same counts the log would yield,
// keyed by condition: AT/NA sit in cond1/cond2 of one table, ST/AST of the
// other.
inline std::vector<model_frequencies> frequencies_from_bundles(
    const std::vector<stat_bundle>& bundles, std::string_view stereotype_id) {
    std::vector<model_frequencies> rows;
    for (const auto& b : bundles) {
        if (b.stereotype_id != stereotype_id) continue;
        model_frequencies row;
        row.model = b.model;
        row.invalid = b.invalid_trials;
        auto set = [&](condition_kind k, long long a_count, long long b_count) {
            row.option_a[static_cast<std::size_t>(k)] = a_count;
            row.option_b[static_cast<std::size_t>(k)] = b_count;
        };
        set(condition_kind::AT, b.at_na_table.a, b.at_na_table.b);
        set(condition_kind::NA, b.at_na_table.c, b.at_na_table.d);
        set(condition_kind::ST, b.st_ast_table.a, b.st_ast_table.b);
        set(condition_kind::AST, b.st_ast_table.c, b.st_ast_table.d);
        rows.push_back(std::move(row));
    }
    if (rows.empty())
        throw insufficient_data("no bundles for stereotype '" + std::string(stereotype_id) +
                                "'");
    return rows;
}

inline std::string counts_in_order(const std::array<long long, 4>& counts) {
    std::string s;
    for (condition_kind k : frequency_condition_order) {
        if (!s.empty()) s += ' ';
        s += std::to_string(counts[static_cast<std::size_t>(k)]);
    }
    return s;
}

inline std::string render_frequency_rows(const std::vector<model_frequencies>& rows,
                                         std::string_view stereotype_id, table_format fmt,
                                         const corpus* corp, bool csv_header) {
    stereotype_caption cap = caption_for(stereotype_id, corp);

    std::string out;
    if (fmt == table_format::csv) {
        if (csv_header)
            out +=
                "stereotype,model,a_at,a_na,a_st,a_ast,b_at,b_na,b_st,b_ast,invalid\n";
        for (const auto& row : rows) {
            out += csv_field(std::string(stereotype_id)) + "," + csv_field(row.model);
            for (condition_kind k : frequency_condition_order)
                out += "," + std::to_string(row.option_a[static_cast<std::size_t>(k)]);
            for (condition_kind k : frequency_condition_order)
                out += "," + std::to_string(row.option_b[static_cast<std::size_t>(k)]);
            out += "," + std::to_string(row.invalid) + "\n";
        }
        return out;
    }

    out += "## " + cap.heading + "\n\n";
    out += "| Model | " + cap.label_a + " / " + cap.label_b + " (AT NA ST AST) | Invalid |\n";
    out += "|---|---|---|\n";
    for (const auto& row : rows)
        out += "| " + row.model + " | " + counts_in_order(row.option_a) + " / " +
               counts_in_order(row.option_b) + " | " + std::to_string(row.invalid) + " |\n";
    return out;
}

}  // namespace detail

inline std::string render_frequency_table(const std::vector<trial_record>& records,
                                          std::string_view stereotype_id, table_format fmt,
                                          const corpus* corp = nullptr,
                                          bool csv_header = true) {
    return detail::render_frequency_rows(detail::frequencies_for(records, stereotype_id),
                                         stereotype_id, fmt, corp, csv_header);
}

inline std::string render_frequency_table(const std::vector<stat_bundle>& bundles,
                                          std::string_view stereotype_id, table_format fmt,
                                          const corpus* corp = nullptr,
                                          bool csv_header = true) {
    return detail::render_frequency_rows(detail::frequencies_from_bundles(bundles, stereotype_id),
                                         stereotype_id, fmt, corp, csv_header);
}

// Source is either the trial records or the stat bundles.
template <typename Source>
inline std::string render_frequency_tables(const Source& source,
                                           const std::vector<std::string>& stereotype_order,
                                           table_format fmt, const corpus* corp = nullptr) {
    if (stereotype_order.empty()) throw insufficient_data("no stereotypes to report");
    std::string out;
    if (fmt == table_format::markdown) out += "# Decision frequencies per model and stereotype\n\n";
    bool first = true;
    for (const auto& sid : stereotype_order) {
        if (fmt == table_format::markdown && !first) out += "\n";
        out += render_frequency_table(source, sid, fmt, corp, /*csv_header=*/first);
        first = false;
    }
    return out;
}

template <typename Source>
inline void emit_frequency_table(const Source& source, std::string_view stereotype_id,
                                 table_format fmt, const std::string& path,
                                 const corpus* corp = nullptr) {
    detail::write_file(path, render_frequency_table(source, stereotype_id, fmt, corp));
}

// ---------------------------------------------------------------------------
// Heatmaps: models x stereotypes grids of gaps or correlations, with a
// significance mask (adjusted p < .05) rendered as asterisks.

enum class heatmap_kind { st_ast, at_na, correlation };

inline std::string_view to_string(heatmap_kind k) {
    switch (k) {
        case heatmap_kind::st_ast: return "st_ast";
        case heatmap_kind::at_na: return "at_na";
        case heatmap_kind::correlation: return "correlation";
    }
    return "";
}

enum class heatmap_format { csv, svg };

struct heatmap_matrix {
    heatmap_kind kind = heatmap_kind::at_na;
    std::vector<std::string> models;       // rows
    std::vector<std::string> stereotypes;  // cols
    std::vector<std::vector<double>> values;  // NaN marks a missing cell
    std::vector<std::vector<char>> significance;

    void check() const {
        if (values.size() != models.size() || significance.size() != models.size())
            throw validation_error("heatmap rows do not match model count");
        for (std::size_t i = 0; i < values.size(); ++i)
            if (values[i].size() != stereotypes.size() ||
                significance[i].size() != stereotypes.size())
                throw validation_error("heatmap row " + std::to_string(i) +
                                       " does not match stereotype count");
    }
};

// Correlation cells carry no chi-squared test, so that mask is all-false;
// the asterisk convention belongs to the two gap heatmaps.
inline heatmap_matrix build_heatmap(const std::vector<stat_bundle>& bundles, heatmap_kind kind) {
    if (bundles.empty()) throw insufficient_data("no stat bundles to report");
    heatmap_matrix m;
    m.kind = kind;
    std::map<std::string, std::size_t> row_of, col_of;
    for (const auto& b : bundles) {
        if (row_of.try_emplace(b.model, m.models.size()).second) m.models.push_back(b.model);
        if (col_of.try_emplace(b.stereotype_id, m.stereotypes.size()).second)
            m.stereotypes.push_back(b.stereotype_id);
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    m.values.assign(m.models.size(), std::vector<double>(m.stereotypes.size(), nan));
    m.significance.assign(m.models.size(), std::vector<char>(m.stereotypes.size(), 0));
    for (const auto& b : bundles) {
        std::size_t i = row_of[b.model], j = col_of[b.stereotype_id];
        switch (kind) {
            case heatmap_kind::st_ast:
                m.values[i][j] = b.st_ast_gap.gap;
                m.significance[i][j] = b.st_ast.p_for_reporting() < 0.05;
                break;
            case heatmap_kind::at_na:
                m.values[i][j] = b.at_na_gap.gap;
                m.significance[i][j] = b.at_na.p_for_reporting() < 0.05;
                break;
            case heatmap_kind::correlation:
                if (b.r) m.values[i][j] = b.r->r;
                break;
        }
    }
    return m;
}

namespace detail {

struct rgb {
    int r, g, b;
};

inline std::string to_hex_color(rgb c) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c.r, c.g, c.b);
    return buf;
}

inline rgb lerp(rgb from, rgb to, double t) {
    auto mix = [&](int a, int b) {
        return static_cast<int>(std::lround(a + (b - a) * t));
    };
    return {mix(from.r, to.r), mix(from.g, to.g), mix(from.b, to.b)};
}

}  // namespace detail

inline std::string render_heatmap(const heatmap_matrix& m, heatmap_format fmt) {
    m.check();

    if (fmt == heatmap_format::csv) {
        std::string out = "model,stereotype,value,significant\n";
        for (std::size_t i = 0; i < m.models.size(); ++i)
            for (std::size_t j = 0; j < m.stereotypes.size(); ++j) {
                out += detail::csv_field(m.models[i]) + "," +
                       detail::csv_field(m.stereotypes[j]) + ",";
                if (!std::isnan(m.values[i][j])) out += detail::format_fixed(m.values[i][j], 2);
                out += m.significance[i][j] ? ",true\n" : ",false\n";
            }
        return out;
    }

    double max_abs = 0;
    for (const auto& row : m.values)
        for (double v : row)
            if (!std::isnan(v)) max_abs = std::max(max_abs, std::abs(v));

    const bool diverging = m.kind == heatmap_kind::correlation;
    const detail::rgb white{255, 255, 255}, blue{8, 48, 107}, red{178, 24, 43};
    const int cell_w = 72, cell_h = 26, left = 150, top = 96, pad = 16;
    const int width = left + cell_w * static_cast<int>(m.stereotypes.size()) + pad;
    const int height = top + cell_h * static_cast<int>(m.models.size()) + pad;

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
           "\" height=\"" + std::to_string(height) + "\" font-family=\"sans-serif\">\n";
    svg += "<!-- kind=" + std::string(to_string(m.kind)) +
           " scale_max=" + detail::format_stripped(max_abs, 4) + " rows=" +
           std::to_string(m.models.size()) + " cols=" + std::to_string(m.stereotypes.size()) +
           " significance=adjusted_p_lt_0.05" +
           std::string(diverging ? " scale=diverging" : " scale=sequential") + " -->\n";

    std::string title;
    switch (m.kind) {
        case heatmap_kind::st_ast: title = "ST-AST gap per model and stereotype"; break;
        case heatmap_kind::at_na: title = "AT-NA gap per model and stereotype"; break;
        case heatmap_kind::correlation:
            title = "Correlation of per-scenario ST-AST and AT-NA gaps";
            break;
    }
    svg += "<text x=\"" + std::to_string(left) + "\" y=\"18\" font-size=\"14\">" +
           detail::xml_escape(title) + "</text>\n";

    for (std::size_t j = 0; j < m.stereotypes.size(); ++j) {
        int x = left + static_cast<int>(j) * cell_w + cell_w / 2;
        svg += "<text x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(top - 6) +
               "\" font-size=\"10\" text-anchor=\"start\" transform=\"rotate(-40 " +
               std::to_string(x) + " " + std::to_string(top - 6) + ")\">" +
               detail::xml_escape(m.stereotypes[j]) + "</text>\n";
    }
    for (std::size_t i = 0; i < m.models.size(); ++i) {
        int y = top + static_cast<int>(i) * cell_h + cell_h / 2 + 4;
        svg += "<text x=\"" + std::to_string(left - 6) + "\" y=\"" + std::to_string(y) +
               "\" font-size=\"11\" text-anchor=\"end\">" + detail::xml_escape(m.models[i]) +
               "</text>\n";
    }

    for (std::size_t i = 0; i < m.models.size(); ++i) {
        for (std::size_t j = 0; j < m.stereotypes.size(); ++j) {
            int x = left + static_cast<int>(j) * cell_w;
            int y = top + static_cast<int>(i) * cell_h;
            double v = m.values[i][j];
            std::string fill = "#f0f0f0";
            std::string label;
            double t = 0;
            if (!std::isnan(v)) {
                t = max_abs == 0 ? 0 : std::abs(v) / max_abs;
                fill = detail::to_hex_color(
                    detail::lerp(white, diverging && v < 0 ? red : blue, t));
                label = detail::format_fixed(v, 2);
                if (m.significance[i][j]) label += "*";
            }
            svg += "<rect x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(y) +
                   "\" width=\"" + std::to_string(cell_w) + "\" height=\"" +
                   std::to_string(cell_h) + "\" fill=\"" + fill +
                   "\" stroke=\"#ffffff\"/>\n";
            if (!label.empty())
                svg += "<text x=\"" + std::to_string(x + cell_w / 2) + "\" y=\"" +
                       std::to_string(y + cell_h / 2 + 4) +
                       "\" font-size=\"11\" text-anchor=\"middle\" fill=\"" +
                       (t > 0.55 ? std::string("#ffffff") : std::string("#1a1a1a")) + "\">" +
                       label + "</text>\n";
        }
    }
    svg += "</svg>\n";
    return svg;
}

inline void emit_heatmap(const heatmap_matrix& m, heatmap_format fmt, const std::string& path) {
    detail::write_file(path, render_heatmap(m, fmt));
}

// ---------------------------------------------------------------------------
// Bundle serialization, so `report` can re-emit tables from a saved analysis
// without the trial log.

inline nlohmann::ordered_json bundle_to_json(const stat_bundle& b) {
    auto table = [](const contingency_table& t) {
        nlohmann::ordered_json j;
        j["a"] = t.a;
        j["b"] = t.b;
        j["c"] = t.c;
        j["d"] = t.d;
        j["cond1_label"] = t.cond1_label;
        j["cond2_label"] = t.cond2_label;
        j["option_a_label"] = t.option_a_label;
        j["option_b_label"] = t.option_b_label;
        return j;
    };
    auto gap = [](const gap_stat& g) {
        nlohmann::ordered_json j;
        j["gap"] = g.gap;
        j["signed_gap"] = g.signed_gap;
        j["p1"] = g.p1;
        j["p2"] = g.p2;
        return j;
    };
    auto chi = [](const chi_square_stat& s) {
        nlohmann::ordered_json j;
        j["chi2"] = s.chi2;
        j["df"] = s.df;
        j["p_raw"] = s.p_raw;
        if (s.has_adjusted()) j["p_adjusted"] = s.p_adjusted;
        else j["p_adjusted"] = nullptr;
        j["phi"] = s.phi;
        j["phi_ci_lower"] = s.phi_ci_lower;
        j["phi_ci_upper"] = s.phi_ci_upper;
        j["n"] = s.n;
        return j;
    };
    nlohmann::ordered_json j;
    j["model"] = b.model;
    j["stereotype_id"] = b.stereotype_id;
    j["at_na_table"] = table(b.at_na_table);
    j["st_ast_table"] = table(b.st_ast_table);
    j["at_na_gap"] = gap(b.at_na_gap);
    j["st_ast_gap"] = gap(b.st_ast_gap);
    j["at_na"] = chi(b.at_na);
    j["st_ast"] = chi(b.st_ast);
    if (b.r) {
        j["r"] = b.r->r;
        j["r_n_scenarios"] = b.r->n_scenarios;
    } else {
        j["r"] = nullptr;
    }
    j["r_note"] = b.r_note;
    j["invalid_trials"] = b.invalid_trials;
    return j;
}

inline stat_bundle bundle_from_json(const nlohmann::json& j) {
    auto table = [](const nlohmann::json& t) {
        contingency_table out;
        out.a = t.at("a").get<long long>();
        out.b = t.at("b").get<long long>();
        out.c = t.at("c").get<long long>();
        out.d = t.at("d").get<long long>();
        out.cond1_label = t.at("cond1_label").get<std::string>();
        out.cond2_label = t.at("cond2_label").get<std::string>();
        out.option_a_label = t.at("option_a_label").get<std::string>();
        out.option_b_label = t.at("option_b_label").get<std::string>();
        return out;
    };
    auto gap = [](const nlohmann::json& g) {
        gap_stat out;
        out.gap = g.at("gap").get<double>();
        out.signed_gap = g.at("signed_gap").get<double>();
        out.p1 = g.at("p1").get<double>();
        out.p2 = g.at("p2").get<double>();
        return out;
    };
    auto chi = [](const nlohmann::json& s) {
        chi_square_stat out;
        out.chi2 = s.at("chi2").get<double>();
        out.df = s.at("df").get<int>();
        out.p_raw = s.at("p_raw").get<double>();
        if (!s.at("p_adjusted").is_null()) out.p_adjusted = s.at("p_adjusted").get<double>();
        out.phi = s.at("phi").get<double>();
        out.phi_ci_lower = s.at("phi_ci_lower").get<double>();
        out.phi_ci_upper = s.at("phi_ci_upper").get<double>();
        out.n = s.at("n").get<long long>();
        return out;
    };
    stat_bundle b;
    b.model = j.at("model").get<std::string>();
    b.stereotype_id = j.at("stereotype_id").get<std::string>();
    b.at_na_table = table(j.at("at_na_table"));
    b.st_ast_table = table(j.at("st_ast_table"));
    b.at_na_gap = gap(j.at("at_na_gap"));
    b.st_ast_gap = gap(j.at("st_ast_gap"));
    b.at_na = chi(j.at("at_na"));
    b.st_ast = chi(j.at("st_ast"));
    if (!j.at("r").is_null())
        b.r = correlation_stat{j.at("r").get<double>(),
                               j.at("r_n_scenarios").get<std::size_t>()};
    b.r_note = j.at("r_note").get<std::string>();
    b.invalid_trials = j.at("invalid_trials").get<long long>();
    return b;
}

inline nlohmann::ordered_json bundles_to_json(const std::vector<stat_bundle>& bundles) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& b : bundles) arr.push_back(bundle_to_json(b));
    return arr;
}

inline std::vector<stat_bundle> bundles_from_json(const nlohmann::json& j) {
    if (!j.is_array()) throw parse_error("bundles file must hold a JSON array");
    std::vector<stat_bundle> out;
    for (const auto& e : j) out.push_back(bundle_from_json(e));
    return out;
}

}  // namespace biasaudit
