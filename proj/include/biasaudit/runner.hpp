#pragma once

#include <atomic>
#include <cctype>
#include <condition_variable>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "biasaudit/corpus.hpp"
#include "biasaudit/promptgen.hpp"
#include "biasaudit/provider.hpp"
#include "biasaudit/stats.hpp"
#include "biasaudit/trial.hpp"

namespace biasaudit {

inline constexpr int phrased_repetitions = 2;   // per phrasing; 5 phrasings -> 10 trials
inline constexpr int na_repetitions = 10;       // matches the phrased per-condition total

// Timestamp origin for all-stub runs, where a logical clock (origin + plan
// ordinal) replaces wall time so repeated runs are byte-identical.
inline constexpr std::int64_t stub_clock_origin = 1704067200;  // 2024-01-01T00:00:00Z

// ---------------------------------------------------------------------------
// Model configuration

inline model_spec model_from_json(const nlohmann::json& j) {
    model_spec m;
    m.name = j.at("name").get<std::string>();
    m.endpoint = j.value("endpoint", std::string("stub"));
    m.api_key_env = j.value("api_key_env", std::string());
    m.temperature = j.value("temperature", m.temperature);
    m.max_tokens = j.value("max_tokens", m.max_tokens);
    m.timeout_s = j.value("timeout_s", m.timeout_s);
    m.requests_per_second = j.value("requests_per_second", m.requests_per_second);
    m.retry_budget = j.value("retry_budget", m.retry_budget);
    m.backoff_base_ms = j.value("backoff_base_ms", m.backoff_base_ms);
    m.backoff_jitter = j.value("backoff_jitter", m.backoff_jitter);
    if (m.name.empty()) throw validation_error("model entry with empty name");
    return m;
}

// Accepts either a bare JSON array of model objects or {"models": [...]}.
inline std::vector<model_spec> parse_models_json(const nlohmann::json& j) {
    const nlohmann::json& arr = j.is_object() && j.contains("models") ? j.at("models") : j;
    if (!arr.is_array()) throw parse_error("models config must be a JSON array of model objects");
    std::vector<model_spec> models;
    std::set<std::string> names;
    for (const auto& e : arr) {
        models.push_back(model_from_json(e));
        if (!names.insert(models.back().name).second)
            throw validation_error("duplicate model name '" + models.back().name + "'");
    }
    if (models.empty()) throw empty_selection("models config lists no models");
    return models;
}

inline std::vector<model_spec> load_models_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open models config '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw parse_error("models config '" + path + "': " + e.what());
    }
    return parse_models_json(j);
}

inline bool all_stub(const std::vector<model_spec>& models) {
    return std::all_of(models.begin(), models.end(),
                       [](const model_spec& m) { return m.is_stub(); });
}

// Routes each model to the stub or HTTP backend; backends are shared so the
// HTTP pacer sees every request for a model.
class provider_router {
  public:
    explicit provider_router(stub_behavior behavior) : stub_(std::move(behavior)) {}

    provider& for_model(const model_spec& m) {
        if (m.is_stub()) return stub_;
        return http_;
    }

  private:
    stub_provider stub_;
    http_provider http_;
};

// ---------------------------------------------------------------------------
// Planning

// Plan order is fixed: model, then stereotype in corpus order, then scenario
// in scenarios_for() order, then condition in canonical order, phrasings
// before repetitions. Resume, logical timestamps, and the ordered log all
// key off this ordering.
inline trial_plan build_plan(const corpus& c, const std::vector<model_spec>& models,
                             const std::vector<condition_kind>& conditions, std::uint64_t seed) {
    if (models.empty()) throw empty_selection("no models selected");
    if (conditions.empty()) throw empty_selection("no conditions selected");

    trial_plan plan;
    for (const auto& m : models) {
        for (const auto& st : c.stereotypes) {
            for (const auto& scen : c.scenarios_for(st.id)) {
                for (condition_kind k : conditions) {
                    if (is_phrased(k)) {
                        for (int ph = 0; ph < phrasing_count; ++ph)
                            for (int rep = 0; rep < phrased_repetitions; ++rep)
                                plan.entries.push_back(
                                    {{m.name, scen.scenario_id, condition::phrased(k, ph), rep},
                                     st.id});
                    } else {
                        for (int rep = 0; rep < na_repetitions; ++rep)
                            plan.entries.push_back(
                                {{m.name, scen.scenario_id, condition::na(), rep}, st.id});
                    }
                }
            }
        }
    }

    detail::key_hasher h;
    h.add(c.fingerprint());
    for (const auto& m : models) {
        h.add(m.name).add(m.endpoint);
        h.add(std::to_string(m.temperature)).add(m.max_tokens);
    }
    for (condition_kind k : conditions) h.add(std::string_view(to_string(k)));
    h.add(seed);
    plan.config_fingerprint = detail::to_hex(h.digest());
    return plan;
}

// ---------------------------------------------------------------------------
// Response parsing

struct parsed_response {
    decision dec = decision::INVALID;
    std::string rationale;
};

namespace detail {

inline std::optional<decision> normalize_decision(std::string s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return std::nullopt;
    std::size_t e = s.find_last_not_of(" \t\r\n.");
    s = s.substr(b, e - b + 1);
    for (char& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (s.rfind("option ", 0) == 0) s = s.substr(7);
    if (s == "a") return decision::A;
    if (s == "b") return decision::B;
    return std::nullopt;
}

// First balanced JSON value starting at the given opener, honoring strings
// and escapes so braces inside rationales don't truncate the slice.
inline std::optional<std::string> balanced_slice(const std::string& text, char open, char close) {
    std::size_t start = text.find(open);
    if (start == std::string::npos) return std::nullopt;
    int depth = 0;
    bool in_string = false, escaped = false;
    for (std::size_t i = start; i < text.size(); ++i) {
        char ch = text[i];
        if (in_string) {
            if (escaped) escaped = false;
            else if (ch == '\\') escaped = true;
            else if (ch == '"') in_string = false;
            continue;
        }
        if (ch == '"') in_string = true;
        else if (ch == open) ++depth;
        else if (ch == close && --depth == 0) return text.substr(start, i - start + 1);
    }
    return std::nullopt;
}

inline std::optional<std::string> fenced_slice(const std::string& text) {
    std::size_t open = text.find("```");
    if (open == std::string::npos) return std::nullopt;
    std::size_t body = text.find('\n', open);
    if (body == std::string::npos) return std::nullopt;
    std::size_t close = text.find("```", body + 1);
    if (close == std::string::npos) return std::nullopt;
    return text.substr(body + 1, close - body - 1);
}

inline std::vector<std::string> json_candidates(const std::string& text, char open, char close) {
    std::vector<std::string> out;
    out.push_back(text);
    if (auto fenced = fenced_slice(text)) out.push_back(*fenced);
    if (auto balanced = balanced_slice(text, open, close)) out.push_back(*balanced);
    return out;
}

inline std::string truncate_for_log(const std::string& s, std::size_t limit = 160) {
    if (s.size() <= limit) return s;
    return s.substr(0, limit) + "...";
}

}  // namespace detail

// Extracts {"decision", "rationale"} from a model response, tolerating prose
// around the JSON and code fences. Anything unusable becomes an INVALID
// result; this never throws.
inline parsed_response parse_decision_response(const std::string& text) {
    for (const auto& candidate : detail::json_candidates(text, '{', '}')) {
        nlohmann::json j = nlohmann::json::parse(candidate, nullptr, false);
        if (!j.is_object() || !j.contains("decision")) continue;
        parsed_response out;
        if (j.contains("rationale") && j.at("rationale").is_string())
            out.rationale = j.at("rationale").get<std::string>();
        const auto& d = j.at("decision");
        if (d.is_string())
            if (auto dec = detail::normalize_decision(d.get<std::string>())) {
                out.dec = *dec;
                return out;
            }
        out.dec = decision::INVALID;
        out.rationale = "unrecognized decision value: " + detail::truncate_for_log(d.dump());
        return out;
    }
    return {decision::INVALID,
            "no decision object in response: " + detail::truncate_for_log(text)};
}

// ---------------------------------------------------------------------------
// Execution

struct run_options {
    std::string log_path;
    int concurrency = 1;
    std::size_t max_trials = 0;  // 0 = no cap; caps *new* trials this invocation
    std::int64_t clock_origin = stub_clock_origin;
};

struct run_summary {
    std::size_t planned = 0;
    std::size_t executed = 0;
    std::size_t ok = 0;
    std::size_t invalid = 0;
    std::size_t provider_failures = 0;  // subset of invalid
    std::size_t skipped_existing = 0;
    std::string fingerprint;
};

namespace detail {

struct todo_item {
    std::size_t plan_ordinal;  // index into the full plan, for logical timestamps
    const plan_entry* entry;
};

}  // namespace detail

// Runs every planned trial not already present in the log, appending results
// in plan order. Workers claim trials atomically; a bounded reorder buffer
// keeps the log ordered without serializing the provider calls. Auth errors
// abort the run; other provider errors are recorded as INVALID trials.
inline run_summary execute(const trial_plan& plan, const corpus& c,
                           const std::vector<model_spec>& models, provider_router& providers,
                           const run_options& opts) {
    if (opts.log_path.empty()) throw io_error("run requires a log path");

    std::map<std::string, const model_spec*> by_name;
    for (const auto& m : models) by_name[m.name] = &m;

    run_summary summary;
    summary.planned = plan.entries.size();
    summary.fingerprint = plan.config_fingerprint;

    trial_log existing = read_trial_log(opts.log_path);
    if (existing.exists && existing.fingerprint != plan.config_fingerprint)
        throw validation_error("log '" + opts.log_path + "' was produced under fingerprint " +
                               existing.fingerprint + " but this configuration is " +
                               plan.config_fingerprint);
    std::set<std::string> done_keys;
    for (const auto& r : existing.records) done_keys.insert(r.key.key_string());

    std::vector<detail::todo_item> todo;
    for (std::size_t i = 0; i < plan.entries.size(); ++i) {
        if (done_keys.count(plan.entries[i].key.key_string())) {
            ++summary.skipped_existing;
            continue;
        }
        todo.push_back({i, &plan.entries[i]});
    }
    if (opts.max_trials > 0 && todo.size() > opts.max_trials) todo.resize(opts.max_trials);

    log_writer writer(opts.log_path, plan.config_fingerprint, !existing.exists);
    if (todo.empty()) return summary;

    const bool logical_clock = all_stub(models);
    const std::int64_t wall_now = static_cast<std::int64_t>(std::time(nullptr));

    auto run_one = [&](const detail::todo_item& item) -> trial_record {
        const plan_entry& e = *item.entry;
        auto mit = by_name.find(e.key.model);
        if (mit == by_name.end())
            throw validation_error("plan references unknown model '" + e.key.model + "'");
        const model_spec& m = *mit->second;
        const scenario& scen = c.find_scenario(e.key.scenario_id);
        rendered_prompt prompt = render_advice_prompt(scen, e.key.cond, c);

        trial_record r;
        r.key = e.key;
        r.stereotype_id = e.stereotype_id;
        r.prompt_hash = detail::to_hex(detail::fnv1a64(prompt.text));
        r.ts = format_utc(logical_clock ? opts.clock_origin +
                                              static_cast<std::int64_t>(item.plan_ordinal)
                                        : wall_now);
        try {
            completion got = providers.for_model(m).complete(
                m, prompt.text, {e.key.scenario_id, e.key.cond, e.key.repetition});
            parsed_response parsed = parse_decision_response(got.text);
            r.dec = parsed.dec;
            r.rationale = parsed.rationale;
            r.attempts = got.attempts;
            r.raw_response = got.text;
        } catch (const auth_error&) {
            throw;  // misconfiguration; would fail every remaining trial
        } catch (const provider_error& e2) {
            r.dec = decision::INVALID;
            r.rationale = std::string("provider error (") + e2.code() + "): " + e2.what();
            r.attempts = e2.attempts();
        }
        return r;
    };

    std::mutex mu;
    std::condition_variable cv;
    std::map<std::size_t, trial_record> finished;  // todo index -> record
    std::size_t next_claim = 0, next_write = 0;
    std::exception_ptr failure;
    const int workers = std::max(1, opts.concurrency);
    const std::size_t backlog = static_cast<std::size_t>(workers) * 8 + 8;

    auto worker = [&] {
        for (;;) {
            std::size_t mine;
            {
                std::unique_lock lock(mu);
                cv.wait(lock, [&] {
                    return failure || next_claim >= todo.size() ||
                           next_claim - next_write < backlog;
                });
                if (failure || next_claim >= todo.size()) return;
                mine = next_claim++;
            }
            trial_record rec;
            try {
                rec = run_one(todo[mine]);
            } catch (...) {
                std::lock_guard lock(mu);
                if (!failure) failure = std::current_exception();
                cv.notify_all();
                return;
            }
            std::lock_guard lock(mu);
            finished.emplace(mine, std::move(rec));
            while (!failure) {
                auto it = finished.find(next_write);
                if (it == finished.end()) break;
                try {
                    writer.append(it->second);
                } catch (...) {
                    failure = std::current_exception();
                    break;
                }
                if (it->second.dec == decision::INVALID) {
                    ++summary.invalid;
                    if (it->second.rationale.rfind("provider error", 0) == 0)
                        ++summary.provider_failures;
                } else {
                    ++summary.ok;
                }
                ++summary.executed;
                finished.erase(it);
                ++next_write;
            }
            cv.notify_all();
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
    return summary;
}

// ---------------------------------------------------------------------------
// Corpus augmentation

namespace detail {

struct variant_draft {
    std::string text;
    std::string option_a;
    std::string option_b;
};

inline std::optional<std::vector<variant_draft>> variants_from_json(const std::string& text,
                                                                    const stereotype& st) {
    for (const auto& candidate : json_candidates(text, '[', ']')) {
        nlohmann::json j = nlohmann::json::parse(candidate, nullptr, false);
        if (!j.is_array()) continue;
        std::vector<variant_draft> out;
        bool usable = true;
        for (const auto& e : j) {
            if (!e.is_object()) {
                usable = false;
                break;
            }
            variant_draft v;
            if (e.contains("text") && e.at("text").is_string())
                v.text = e.at("text").get<std::string>();
            else if (e.contains("scenario") && e.at("scenario").is_string())
                v.text = e.at("scenario").get<std::string>();
            v.option_a = e.value("option_a", st.base_option_a);
            v.option_b = e.value("option_b", st.base_option_b);
            if (v.text.empty() || v.option_a.empty() || v.option_b.empty()) {
                usable = false;
                break;
            }
            out.push_back(std::move(v));
        }
        if (usable && !out.empty()) return out;
    }
    return std::nullopt;
}

// Fallback for generators that answer with "1. ..." lines instead of JSON;
// such variants inherit the base scenario's option texts.
inline std::optional<std::vector<variant_draft>> variants_from_list(const std::string& text,
                                                                    const stereotype& st) {
    std::vector<variant_draft> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::size_t i = line.find_first_not_of(" \t");
        if (i == std::string::npos) continue;
        std::size_t digits = i;
        while (digits < line.size() && std::isdigit(static_cast<unsigned char>(line[digits])))
            ++digits;
        if (digits == i || digits >= line.size()) continue;
        if (line[digits] != '.' && line[digits] != ')' && line[digits] != ':') continue;
        std::size_t body = line.find_first_not_of(" \t", digits + 1);
        if (body == std::string::npos) continue;
        out.push_back({line.substr(body), st.base_option_a, st.base_option_b});
    }
    if (out.empty()) return std::nullopt;
    return out;
}

}  // namespace detail

// Asks a generator model for 20 rewrites of a stereotype's base scenario and
// adds them to the corpus as "<stereotype>/<generator>/v<k>". Responses that
// don't yield exactly 20 variants are retried with a fresh draw.
inline std::vector<scenario> augment(corpus& c, std::string_view stereotype_id,
                                     const model_spec& generator, provider& prov,
                                     int retries = 2) {
    const stereotype& st = c.find_stereotype(stereotype_id);
    const std::string prompt = render_augmentation_prompt(st);
    const std::string id_prefix = st.id + "/" + generator.name + "/v";
    for (const auto& existing : c.scenarios)
        if (existing.scenario_id.rfind(id_prefix, 0) == 0)
            throw validation_error("corpus already holds " + generator.name +
                                   " variants for stereotype '" + st.id + "'");

    std::string last_problem = "no attempts made";
    for (int attempt = 0; attempt <= retries; ++attempt) {
        completion got;
        try {
            got = prov.complete(generator, prompt,
                                {st.id + "/base", condition::na(), attempt});
        } catch (const provider_error& e) {
            last_problem = std::string(e.code()) + ": " + e.what();
            continue;
        }
        auto drafts = detail::variants_from_json(got.text, st);
        if (!drafts) drafts = detail::variants_from_list(got.text, st);
        if (!drafts) {
            last_problem = "response contained no parseable variants";
            continue;
        }
        if (drafts->size() != max_variant_index) {
            last_problem = "expected " + std::to_string(max_variant_index) + " variants, got " +
                           std::to_string(drafts->size());
            continue;
        }
        std::vector<scenario> added;
        for (std::size_t k = 0; k < drafts->size(); ++k) {
            scenario s;
            s.scenario_id = id_prefix + std::to_string(k + 1);
            s.stereotype_id = st.id;
            s.text = (*drafts)[k].text;
            s.option_a = (*drafts)[k].option_a;
            s.option_b = (*drafts)[k].option_b;
            s.variant_index = static_cast<int>(k + 1);
            s.generator_model = generator.name;
            added.push_back(std::move(s));
        }
        c.scenarios.insert(c.scenarios.end(), added.begin(), added.end());
        c.validate();
        return added;
    }
    throw augmentation_failed("could not generate variants for stereotype '" + st.id +
                              "' with " + generator.name + ": " + last_problem);
}

// ---------------------------------------------------------------------------
// Manipulation check

struct validation_result {
    std::string model;
    std::string stereotype_id;
    double chi2 = 0;
    double p_value = 1;
    long long n = 0;
    bool passed = false;  // ST and AST answers differ at p < .05
};

// The ST-vs-AST manipulation check: a stereotype's phrasings only qualify
// for the disclosure comparison if explicit trait statements actually move
// the model's answers.
inline validation_result validate_stereotype(const std::vector<trial_record>& records,
                                             std::string_view model,
                                             std::string_view stereotype_id,
                                             double alpha = 0.05) {
    pair_counts pc = aggregate_pair(records, model, stereotype_id);
    for (condition_kind k : {condition_kind::ST, condition_kind::AST})
        if (pc.total(k) == 0)
            throw insufficient_data("no valid " + std::string(to_string(k)) + " trials for " +
                                    std::string(model) + "/" + std::string(stereotype_id));

    contingency_table t;
    t.a = pc.count_a[static_cast<std::size_t>(condition_kind::ST)];
    t.b = pc.count_b[static_cast<std::size_t>(condition_kind::ST)];
    t.c = pc.count_a[static_cast<std::size_t>(condition_kind::AST)];
    t.d = pc.count_b[static_cast<std::size_t>(condition_kind::AST)];
    chi_square_stat s = chi_square(t);

    validation_result out;
    out.model = model;
    out.stereotype_id = stereotype_id;
    out.chi2 = s.chi2;
    out.p_value = s.p_raw;
    out.n = s.n;
    out.passed = s.p_raw < alpha;
    return out;
}

}  // namespace biasaudit
