#pragma once

#include <cstdint>
#include <ctime>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "biasaudit/condition.hpp"
#include "biasaudit/errors.hpp"

namespace biasaudit {

enum class decision { A, B, INVALID };

constexpr std::string_view to_string(decision d) {
    switch (d) {
        case decision::A: return "A";
        case decision::B: return "B";
        case decision::INVALID: return "INVALID";
    }
    return "";
}

inline decision parse_decision_label(std::string_view s) {
    if (s == "A") return decision::A;
    if (s == "B") return decision::B;
    if (s == "INVALID") return decision::INVALID;
    throw parse_error("unknown decision label: " + std::string(s));
}

struct trial_key {
    std::string model;
    std::string scenario_id;
    condition cond;
    int repetition = 0;

    bool operator==(const trial_key&) const = default;

    // Canonical identity used for resume matching.
    std::string key_string() const {
        std::string s = model;
        s += '|';
        s += scenario_id;
        s += '|';
        s += to_string(cond.kind);
        if (is_phrased(cond.kind)) {
            s += ':';
            s += std::to_string(cond.phrasing_index);
        }
        s += '|';
        s += std::to_string(repetition);
        return s;
    }
};

struct trial_record {
    trial_key key;
    std::string stereotype_id;
    std::string prompt_hash;
    decision dec = decision::INVALID;
    std::string rationale;
    int attempts = 0;
    std::string ts;
    std::string raw_response;  // kept in memory only; not part of the log line
};

struct plan_entry {
    trial_key key;
    std::string stereotype_id;
};

struct trial_plan {
    std::vector<plan_entry> entries;
    std::string config_fingerprint;
};

inline std::string format_utc(std::int64_t unix_seconds) {
    std::time_t t = static_cast<std::time_t>(unix_seconds);
    std::tm tm{};
#if defined(_WIN32)
    gmtime_s(&tm, &t);
#else
    gmtime_r(&t, &tm);
#endif
    char buf[24];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Log lines carry exactly these fields, in this order.
inline nlohmann::ordered_json record_to_json(const trial_record& r) {
    nlohmann::ordered_json j;
    j["model"] = r.key.model;
    j["scenario_id"] = r.key.scenario_id;
    j["stereotype_id"] = r.stereotype_id;
    j["condition"] = to_string(r.key.cond.kind);
    if (is_phrased(r.key.cond.kind))
        j["phrasing_index"] = r.key.cond.phrasing_index;
    else
        j["phrasing_index"] = nullptr;
    j["repetition"] = r.key.repetition;
    j["prompt_hash"] = r.prompt_hash;
    j["decision"] = to_string(r.dec);
    j["rationale"] = r.rationale;
    j["attempts"] = r.attempts;
    j["ts"] = r.ts;
    return j;
}

inline trial_record record_from_json(const nlohmann::json& j) {
    trial_record r;
    r.key.model = j.at("model").get<std::string>();
    r.key.scenario_id = j.at("scenario_id").get<std::string>();
    r.stereotype_id = j.at("stereotype_id").get<std::string>();
    r.key.cond.kind = parse_condition_kind(j.at("condition").get<std::string>());
    const auto& pi = j.at("phrasing_index");
    r.key.cond.phrasing_index = pi.is_null() ? -1 : pi.get<int>();
    r.key.cond.check();
    r.key.repetition = j.at("repetition").get<int>();
    r.prompt_hash = j.at("prompt_hash").get<std::string>();
    r.dec = parse_decision_label(j.at("decision").get<std::string>());
    r.rationale = j.at("rationale").get<std::string>();
    r.attempts = j.at("attempts").get<int>();
    r.ts = j.at("ts").get<std::string>();
    return r;
}

struct trial_log {
    std::string fingerprint;
    std::vector<trial_record> records;
    bool exists = false;
};

// Reads an append-only trial log: a fingerprint header line followed by one
// JSON object per trial. A missing file yields an empty log.
inline trial_log read_trial_log(const std::string& path) {
    trial_log log;
    std::ifstream in(path, std::ios::binary);
    if (!in) return log;
    log.exists = true;
    std::string line;
    bool saw_header = false;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw parse_error("trial log '" + path + "' line " + std::to_string(line_no) + ": " +
                              e.what());
        }
        if (!saw_header) {
            if (!j.contains("fingerprint"))
                throw parse_error("trial log '" + path + "' missing fingerprint header line");
            log.fingerprint = j.at("fingerprint").get<std::string>();
            saw_header = true;
            continue;
        }
        try {
            log.records.push_back(record_from_json(j));
        } catch (const nlohmann::json::exception& e) {
            throw parse_error("trial log '" + path + "' line " + std::to_string(line_no) + ": " +
                              e.what());
        }
    }
    return log;
}

// Append-only writer; emits the fingerprint header when starting a fresh
// file. Callers serialize access (the runner funnels all writes through one
// sink) and every append is flushed so an interrupted run loses at most the
// line being written.
class log_writer {
  public:
    log_writer(const std::string& path, const std::string& fingerprint, bool fresh)
        : out_(path, std::ios::binary | std::ios::app) {
        if (!out_) throw io_error("cannot open trial log '" + path + "' for append");
        if (fresh) {
            nlohmann::ordered_json header;
            header["fingerprint"] = fingerprint;
            out_ << header.dump() << '\n';
            checked_flush(path);
        }
        path_ = path;
    }

    void append(const trial_record& r) {
        out_ << record_to_json(r).dump() << '\n';
        checked_flush(path_);
    }

  private:
    void checked_flush(const std::string& path) {
        out_.flush();
        if (!out_) throw io_error("failed writing trial log '" + path + "'");
    }

    std::ofstream out_;
    std::string path_;
};

}  // namespace biasaudit
