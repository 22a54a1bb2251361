// Runs the whole audit pipeline against the deterministic stub backend:
// plan trials over the built-in corpus, execute them, and summarize one
// (model, stereotype) pair.

#include <cstdio>
#include <iostream>

#include <biasaudit.hpp>

int main() {
    using namespace biasaudit;

    corpus c = default_corpus();
    c.validate();

    model_spec model;
    model.name = "demo-stub";
    model.endpoint = "stub";
    std::vector<model_spec> models = {model};

    stub_behavior behavior;
    behavior.seed = 7;
    behavior.kind_p_a = {{condition_kind::ST, 0.8},
                         {condition_kind::AST, 0.3},
                         {condition_kind::AT, 0.7},
                         {condition_kind::NA, 0.4}};
    provider_router router(behavior);

    trial_plan plan = build_plan(c, models, {all_condition_kinds.begin(),
                                             all_condition_kinds.end()},
                                 behavior.seed);
    std::cout << "planned trials: " << plan.entries.size() << "\n";

    const std::string log_path = "sample_trials.jsonl";
    std::remove(log_path.c_str());
    run_options ro;
    ro.log_path = log_path;
    ro.concurrency = 4;
    run_summary s = execute(plan, c, models, router, ro);
    std::cout << "executed: " << s.executed << " (invalid: " << s.invalid << ")\n";

    trial_log log = read_trial_log(log_path);
    summarize_options sopts;
    sopts.corp = &c;
    stat_bundle b = summarize_pair(log.records, model.name, "introverted", sopts);
    std::cout << "introverted AT-NA gap: " << round_half_even(b.at_na_gap.gap, 2)
              << ", chi2: " << round_half_even(b.at_na.chi2, 2) << "\n";

    std::remove(log_path.c_str());
    return 0;
}
