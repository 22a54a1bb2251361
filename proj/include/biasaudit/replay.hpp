#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "biasaudit/errors.hpp"
#include "biasaudit/trial.hpp"

namespace biasaudit {

// Replay input: "stereotype,model,condition,count_a,count_b" CSV rows (header
// optional, '#' comments allowed) giving pooled decision counts per
// condition. Each row expands into that many synthetic trials under the
// scenario id "<stereotype>/pooled", so the whole analysis stage runs on
// published counts exactly as it does on a live log. Per-scenario
// correlations are genuinely absent from pooled counts and stay missing.
inline std::vector<trial_record> load_replay_counts(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open replay counts '" + path + "'");

    std::vector<trial_record> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::size_t first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;

        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) {
            std::size_t b = field.find_first_not_of(" \t");
            std::size_t e = field.find_last_not_of(" \t");
            fields.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
        }
        if (fields.size() != 5)
            throw parse_error("replay counts '" + path + "' line " + std::to_string(line_no) +
                              ": expected 5 fields, got " + std::to_string(fields.size()));
        if (line_no == 1 && fields[0] == "stereotype") continue;  // header

        const std::string& stereotype_id = fields[0];
        const std::string& model = fields[1];
        condition_kind kind;
        long long count_a, count_b;
        try {
            kind = parse_condition_kind(fields[2]);
            count_a = std::stoll(fields[3]);
            count_b = std::stoll(fields[4]);
        } catch (const std::exception& e) {
            throw parse_error("replay counts '" + path + "' line " + std::to_string(line_no) +
                              ": " + e.what());
        }
        if (stereotype_id.empty() || model.empty())
            throw parse_error("replay counts '" + path + "' line " + std::to_string(line_no) +
                              ": empty stereotype or model");
        if (count_a < 0 || count_b < 0)
            throw parse_error("replay counts '" + path + "' line " + std::to_string(line_no) +
                              ": negative count");

        long long i = 0;
        auto emit = [&](decision dec, long long count) {
            for (long long k = 0; k < count; ++k, ++i) {
                trial_record r;
                r.key.model = model;
                r.key.scenario_id = stereotype_id + "/pooled";
                r.key.cond = is_phrased(kind)
                                 ? condition::phrased(kind, static_cast<int>(i % phrasing_count))
                                 : condition::na();
                r.key.repetition =
                    static_cast<int>(is_phrased(kind) ? i / phrasing_count : i);
                r.stereotype_id = stereotype_id;
                r.prompt_hash = "replay";
                r.dec = dec;
                r.attempts = 1;
                r.ts = format_utc(0);
                records.push_back(std::move(r));
            }
        };
        emit(decision::A, count_a);
        emit(decision::B, count_b);
    }
    if (records.empty())
        throw insufficient_data("replay counts '" + path + "' contain no trials");
    return records;
}

}  // namespace biasaudit
