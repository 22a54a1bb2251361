#pragma once

#include <chrono>
#include <cstdlib>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "biasaudit/condition.hpp"
#include "biasaudit/detail/hash.hpp"
#include "biasaudit/errors.hpp"

namespace biasaudit {

struct model_spec {
    std::string name;
    std::string endpoint;     // base URL of an OpenAI-compatible API; "stub" for the test backend
    std::string api_key_env;  // environment variable holding the bearer token
    double temperature = 1.0;
    int max_tokens = 512;
    int timeout_s = 30;
    double requests_per_second = 0;  // 0 = unthrottled
    int retry_budget = 3;
    int backoff_base_ms = 1000;
    double backoff_jitter = 0.2;

    bool is_stub() const { return endpoint == "stub"; }
};

// Identifies the trial a completion belongs to; the stub keys its draws on
// this so results are independent of execution order.
struct call_context {
    std::string scenario_id;
    condition cond;
    int repetition = 0;
};

struct completion {
    std::string text;
    int attempts = 1;
};

class provider {
  public:
    virtual ~provider() = default;
    virtual completion complete(const model_spec& m, const std::string& prompt,
                                const call_context& ctx) = 0;
};

// ---------------------------------------------------------------------------
// Deterministic stub backend

struct stub_behavior {
    std::uint64_t seed = 0;
    std::map<std::pair<std::string, condition_kind>, double> p_a;  // (scenario_id, kind) overrides
    std::map<condition_kind, double> kind_p_a;                     // per-kind defaults
    std::optional<double> default_p_a = 0.5;
    double malformed_rate = 0.0;

    double lookup(const std::string& scenario_id, condition_kind k) const {
        double p;
        if (auto it = p_a.find({scenario_id, k}); it != p_a.end()) p = it->second;
        else if (auto it2 = kind_p_a.find(k); it2 != kind_p_a.end()) p = it2->second;
        else if (default_p_a) p = *default_p_a;
        else
            throw missing_behavior("no p_a configured for (" + scenario_id + ", " +
                                   std::string(to_string(k)) + ") and no default declared");
        if (!(p >= 0.0 && p <= 1.0)) throw domain_error("stub p_a outside [0,1]");
        if (!(malformed_rate >= 0.0 && malformed_rate <= 1.0))
            throw domain_error("stub malformed_rate outside [0,1]");
        return p;
    }
};

namespace detail {

// One uniform draw per (seed, stream, trial key); reordering or adding other
// draws never disturbs it.
inline double stub_draw(std::uint64_t seed, std::string_view stream, const call_context& ctx) {
    key_hasher h;
    h.add(seed).add(stream).add(ctx.scenario_id);
    h.add(std::string_view(to_string(ctx.cond.kind))).add(ctx.cond.phrasing_index);
    h.add(ctx.repetition);
    return u01_from_bits(h.digest());
}

inline const std::array<const char*, 20> stub_settings = {
    "over coffee",      "at the office",     "during a road trip", "after class",
    "at a family dinner", "on a video call", "at the gym",         "during lunch",
    "on the weekend",   "at a conference",   "in the group chat",  "at a party",
    "on my commute",    "late at night",     "before a deadline",  "at the library",
    "during a walk",    "on vacation",       "at a meetup",        "between meetings"};

}  // namespace detail

// Emits a well-formed decision JSON with probability 1 - malformed_rate,
// deciding "A" with the configured probability. For scenario-variation
// prompts it instead emits a JSON array of 20 rewrites derived from the
// prompt text itself.
inline completion stub_complete(const stub_behavior& behavior, const model_spec& m,
                                const std::string& prompt, const call_context& ctx) {
    double malformed_u = detail::stub_draw(behavior.seed, "malformed", ctx);
    bool augmentation = prompt.find("write 20 new versions") != std::string::npos;
    behavior.lookup(ctx.scenario_id, ctx.cond.kind);  // validates configuration up front
    if (malformed_u < behavior.malformed_rate)
        return {"I would need more context to weigh these options; it depends on the situation.",
                1};

    if (augmentation) {
        // pull the base scenario and option labels back out of the prompt
        auto slice = [&](std::string_view open, std::string_view close) -> std::string {
            auto b = prompt.find(open);
            if (b == std::string::npos) return "";
            b += open.size();
            auto e = prompt.find(close, b);
            if (e == std::string::npos) return "";
            return prompt.substr(b, e - b);
        };
        std::string base = slice("Scenario: \"", "\"\n");
        std::string theme_pair = slice("The theme of the scenario is: \"", ":");
        std::string label_a = theme_pair, label_b;
        if (auto vs = theme_pair.find(" vs "); vs != std::string::npos) {
            label_a = theme_pair.substr(0, vs);
            label_b = theme_pair.substr(vs + 4);
        }
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (int k = 1; k <= 20; ++k) {
            nlohmann::ordered_json v;
            v["text"] = base + " (As retold by " + m.name + ", " +
                        detail::stub_settings[static_cast<std::size_t>(k - 1)] + ".)";
            v["option_a"] = label_a + " (variation " + std::to_string(k) + ")";
            v["option_b"] = label_b + " (variation " + std::to_string(k) + ")";
            arr.push_back(v);
        }
        return {arr.dump(), 1};
    }

    double p = behavior.lookup(ctx.scenario_id, ctx.cond.kind);
    double u = detail::stub_draw(behavior.seed, "decision", ctx);
    nlohmann::ordered_json j;
    j["decision"] = u < p ? "A" : "B";
    j["rationale"] = "Stub rationale for " + ctx.scenario_id + " under " +
                     std::string(to_string(ctx.cond.kind)) + ".";
    return {j.dump(), 1};
}

class stub_provider : public provider {
  public:
    explicit stub_provider(stub_behavior behavior) : behavior_(std::move(behavior)) {}

    completion complete(const model_spec& m, const std::string& prompt,
                        const call_context& ctx) override {
        return stub_complete(behavior_, m, prompt, ctx);
    }

    const stub_behavior& behavior() const { return behavior_; }

  private:
    stub_behavior behavior_;
};

// ---------------------------------------------------------------------------
// HTTP chat-completions backend

namespace detail {

// Paces requests for one model: refills `rps` tokens per second, capacity one
// second's worth.
class token_bucket {
  public:
    explicit token_bucket(double rps) : rps_(rps), tokens_(rps > 0 ? rps : 0) {
        last_ = std::chrono::steady_clock::now();
    }

    void acquire() {
        if (rps_ <= 0) return;
        std::unique_lock lock(mu_);
        for (;;) {
            auto now = std::chrono::steady_clock::now();
            tokens_ = std::min(rps_, tokens_ + rps_ * std::chrono::duration<double>(now - last_).count());
            last_ = now;
            if (tokens_ >= 1.0) {
                tokens_ -= 1.0;
                return;
            }
            double wait_s = (1.0 - tokens_) / rps_;
            lock.unlock();
            std::this_thread::sleep_for(std::chrono::duration<double>(wait_s));
            lock.lock();
        }
    }

  private:
    double rps_;
    double tokens_;
    std::chrono::steady_clock::time_point last_;
    std::mutex mu_;
};

inline std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
    auto scheme_end = endpoint.find("://");
    std::size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    auto path_start = endpoint.find('/', host_start);
    if (path_start == std::string::npos) return {endpoint, ""};
    return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

}  // namespace detail

// POSTs {endpoint}/chat/completions with bounded retries and exponential
// backoff on timeouts, 429s, and 5xx responses. Never retries other 4xx.
class http_provider : public provider {
  public:
    completion complete(const model_spec& m, const std::string& prompt,
                        const call_context& ctx) override {
        std::string token;
        if (!m.api_key_env.empty()) {
            const char* v = std::getenv(m.api_key_env.c_str());
            if (!v || !*v)
                throw auth_error("environment variable " + m.api_key_env + " is not set", 0);
            token = v;
        }

        auto [origin, path_prefix] = detail::split_endpoint(m.endpoint);
        nlohmann::ordered_json body;
        body["model"] = m.name;
        body["messages"] = {{{"role", "user"}, {"content", prompt}}};
        body["temperature"] = m.temperature;
        body["max_tokens"] = m.max_tokens;
        const std::string payload = body.dump();
        const std::string path = path_prefix + "/chat/completions";

        int attempts = 0;
        std::string last_failure;
        for (int attempt = 0; attempt <= m.retry_budget; ++attempt) {
            if (attempt > 0) backoff(m, prompt, attempt);
            bucket_for(m).acquire();
            ++attempts;

            httplib::Client cli(origin);
            cli.set_connection_timeout(m.timeout_s);
            cli.set_read_timeout(m.timeout_s);
            cli.set_write_timeout(m.timeout_s);
            httplib::Headers headers;
            if (!token.empty()) headers.emplace("Authorization", "Bearer " + token);

            auto res = cli.Post(path, headers, payload, "application/json");
            if (!res) {
                last_failure = "transport: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status == 200) {
                try {
                    auto j = nlohmann::json::parse(res->body);
                    return {j.at("choices").at(0).at("message").at("content").get<std::string>(),
                            attempts};
                } catch (const nlohmann::json::exception& e) {
                    throw transport_error("malformed completion response from " + m.name + ": " +
                                              e.what(),
                                          attempts);
                }
            }
            if (res->status == 401 || res->status == 403)
                throw auth_error("authentication rejected by " + m.name + " (HTTP " +
                                     std::to_string(res->status) + ")",
                                 attempts);
            if (res->status == 429) {
                last_failure = "rate limited (HTTP 429)";
                continue;
            }
            if (res->status >= 500) {
                last_failure = "server error (HTTP " + std::to_string(res->status) + ")";
                continue;
            }
            throw transport_error("request rejected by " + m.name + " (HTTP " +
                                      std::to_string(res->status) + ")",
                                  attempts);
        }
        if (last_failure == "rate limited (HTTP 429)")
            throw rate_limit_exhausted("retries exhausted for " + m.name + ": " + last_failure,
                                       attempts);
        throw transport_error("retries exhausted for " + m.name + ": " + last_failure, attempts);
    }

  private:
    void backoff(const model_spec& m, const std::string& prompt, int attempt) {
        double base = static_cast<double>(m.backoff_base_ms) * std::ldexp(1.0, attempt - 1);
        detail::key_hasher h;
        h.add(prompt).add(attempt);
        double jitter = 1.0 + m.backoff_jitter * (2.0 * detail::u01_from_bits(h.digest()) - 1.0);
        std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(base * jitter));
    }

    detail::token_bucket& bucket_for(const model_spec& m) {
        std::lock_guard lock(buckets_mu_);
        auto it = buckets_.find(m.name);
        if (it == buckets_.end())
            it = buckets_.emplace(m.name, std::make_unique<detail::token_bucket>(m.requests_per_second))
                     .first;
        return *it->second;
    }

    std::map<std::string, std::unique_ptr<detail::token_bucket>> buckets_;
    std::mutex buckets_mu_;
};

}  // namespace biasaudit
