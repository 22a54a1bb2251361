#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "biasaudit/errors.hpp"

namespace biasaudit {

// The four experimental conditions: stereotype trait, anti-stereotype trait,
// autism disclosure, and the bare prompt.
enum class condition_kind { ST, AST, AT, NA };

inline constexpr std::array<condition_kind, 4> all_condition_kinds = {
    condition_kind::ST, condition_kind::AST, condition_kind::AT, condition_kind::NA};

inline constexpr int phrasing_count = 5;

constexpr bool is_phrased(condition_kind k) { return k != condition_kind::NA; }

constexpr std::string_view to_string(condition_kind k) {
    switch (k) {
        case condition_kind::ST: return "ST";
        case condition_kind::AST: return "AST";
        case condition_kind::AT: return "AT";
        case condition_kind::NA: return "NA";
    }
    return "";
}

inline condition_kind parse_condition_kind(std::string_view s) {
    for (condition_kind k : all_condition_kinds)
        if (s == to_string(k)) return k;
    throw parse_error("unknown condition kind: " + std::string(s));
}

// A condition as applied to one prompt. NA has no phrasing dimension and
// carries phrasing_index = -1.
struct condition {
    condition_kind kind = condition_kind::NA;
    int phrasing_index = -1;

    static condition na() { return {condition_kind::NA, -1}; }
    static condition phrased(condition_kind k, int index) {
        condition c{k, index};
        c.check();
        return c;
    }

    void check() const {
        if (kind == condition_kind::NA) {
            if (phrasing_index != -1)
                throw validation_error("NA condition carries no phrasing_index");
        } else if (phrasing_index < 0 || phrasing_index >= phrasing_count) {
            throw index_out_of_range("phrasing_index " + std::to_string(phrasing_index) +
                                     " outside [0," + std::to_string(phrasing_count - 1) + "]");
        }
    }

    bool operator==(const condition&) const = default;
};

// Parses a comma-separated condition list like "ST,AST"; result keeps the
// canonical ST,AST,AT,NA order regardless of input order.
inline std::vector<condition_kind> parse_condition_set(std::string_view spec) {
    std::vector<bool> seen(4, false);
    std::size_t pos = 0;
    while (pos <= spec.size()) {
        std::size_t comma = spec.find(',', pos);
        if (comma == std::string_view::npos) comma = spec.size();
        std::string_view item = spec.substr(pos, comma - pos);
        while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
        while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
        if (!item.empty()) seen[static_cast<std::size_t>(parse_condition_kind(item))] = true;
        pos = comma + 1;
        if (comma == spec.size()) break;
    }
    std::vector<condition_kind> out;
    for (condition_kind k : all_condition_kinds)
        if (seen[static_cast<std::size_t>(k)]) out.push_back(k);
    if (out.empty()) throw empty_selection("no conditions selected");
    return out;
}

}  // namespace biasaudit
