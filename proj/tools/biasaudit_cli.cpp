#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <biasaudit.hpp>

namespace {

namespace ba = biasaudit;
namespace fs = std::filesystem;

struct cli_options {
    std::string corpus_path;
    std::string corpus_out;
    std::string models;
    std::string models_config;
    std::string conditions = "ST,AST,AT,NA";
    std::uint64_t seed = 0;
    int concurrency = 1;
    std::string log_path;
    std::string out_dir;
    std::string p_adjust = "bh";
    std::string gap_convention = "max";
    bool dry_run = false;
    std::string replay_path;
    std::string bundles_path;
    std::size_t max_trials = 0;
    double stub_pa = 0.5;
    double stub_pa_st = -1, stub_pa_ast = -1, stub_pa_at = -1, stub_pa_na = -1;
    double stub_malformed = 0.0;
};

ba::corpus load_corpus_or_default(const cli_options& opts) {
    ba::corpus c = opts.corpus_path.empty() ? ba::default_corpus()
                                            : ba::load_corpus(opts.corpus_path);
    c.validate();
    return c;
}

std::vector<std::string> split_csv_list(const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        std::size_t comma = s.find(',', start);
        if (comma == std::string::npos) comma = s.size();
        std::string item = s.substr(start, comma - start);
        std::size_t b = item.find_first_not_of(" \t");
        if (b != std::string::npos) {
            std::size_t e = item.find_last_not_of(" \t");
            out.push_back(item.substr(b, e - b + 1));
        }
        start = comma + 1;
    }
    return out;
}

std::vector<ba::model_spec> resolve_models(const cli_options& opts) {
    if (!opts.models_config.empty()) {
        auto all = ba::load_models_file(opts.models_config);
        if (opts.models.empty()) return all;
        std::vector<ba::model_spec> picked;
        for (const auto& name : split_csv_list(opts.models)) {
            auto it = std::find_if(all.begin(), all.end(),
                                   [&](const ba::model_spec& m) { return m.name == name; });
            if (it == all.end())
                throw ba::validation_error("model '" + name + "' not in " + opts.models_config);
            picked.push_back(*it);
        }
        if (picked.empty()) throw ba::empty_selection("--models selected no models");
        return picked;
    }
    if (opts.models.empty())
        throw ba::empty_selection("no models specified; use --models or --models-config");
    std::vector<ba::model_spec> specs;
    for (const auto& name : split_csv_list(opts.models)) {
        ba::model_spec m;
        m.name = name;
        m.endpoint = "stub";
        specs.push_back(std::move(m));
    }
    if (specs.empty()) throw ba::empty_selection("--models selected no models");
    return specs;
}

ba::stub_behavior stub_behavior_from(const cli_options& opts) {
    ba::stub_behavior b;
    b.seed = opts.seed;
    b.default_p_a = opts.stub_pa;
    b.malformed_rate = opts.stub_malformed;
    auto set_kind = [&](ba::condition_kind k, double p) {
        if (p >= 0) b.kind_p_a[k] = p;
    };
    set_kind(ba::condition_kind::ST, opts.stub_pa_st);
    set_kind(ba::condition_kind::AST, opts.stub_pa_ast);
    set_kind(ba::condition_kind::AT, opts.stub_pa_at);
    set_kind(ba::condition_kind::NA, opts.stub_pa_na);
    return b;
}

std::vector<ba::trial_record> load_records(const cli_options& opts) {
    if (!opts.replay_path.empty() && !opts.log_path.empty())
        throw ba::validation_error("--log and --replay are mutually exclusive");
    if (!opts.replay_path.empty()) return ba::load_replay_counts(opts.replay_path);
    if (opts.log_path.empty())
        throw ba::empty_selection("this subcommand needs --log or --replay");
    ba::trial_log log = ba::read_trial_log(opts.log_path);
    if (!log.exists) throw ba::io_error("no trial log at '" + opts.log_path + "'");
    if (log.records.empty())
        throw ba::insufficient_data("trial log '" + opts.log_path + "' holds no trials");
    return log.records;
}

// Models by first appearance; stereotypes in corpus order where known, then
// by first appearance. Matches the published table ordering when replaying.
void collect_orders(const std::vector<ba::trial_record>& records, const ba::corpus& c,
                    std::vector<std::string>& models, std::vector<std::string>& stereotypes) {
    std::set<std::string> seen_models, seen_stereotypes;
    std::vector<std::string> appearance;
    for (const auto& r : records) {
        if (seen_models.insert(r.key.model).second) models.push_back(r.key.model);
        if (seen_stereotypes.insert(r.stereotype_id).second)
            appearance.push_back(r.stereotype_id);
    }
    for (const auto& st : c.stereotypes)
        if (seen_stereotypes.count(st.id)) stereotypes.push_back(st.id);
    for (const auto& sid : appearance)
        if (!c.has_stereotype(sid)) stereotypes.push_back(sid);
}

bool pair_present(const std::vector<ba::trial_record>& records, const std::string& model,
                  const std::string& stereotype_id) {
    return std::any_of(records.begin(), records.end(), [&](const ba::trial_record& r) {
        return r.key.model == model && r.stereotype_id == stereotype_id;
    });
}

std::string out_path(const std::string& dir, const char* name) {
    return (fs::path(dir) / name).string();
}

template <typename FreqSource>
void write_report_files(const std::vector<ba::stat_bundle>& bundles,
                        const FreqSource& freq_source,
                        const std::vector<std::string>& freq_order, const ba::corpus& c,
                        const std::string& out_dir) {
    fs::create_directories(out_dir);
    auto wrote = [](const std::string& p) { std::cout << "wrote " << p << "\n"; };

    std::string p = out_path(out_dir, "stats.md");
    ba::emit_stats_table(bundles, ba::table_format::markdown, p, &c);
    wrote(p);
    p = out_path(out_dir, "stats.csv");
    ba::emit_stats_table(bundles, ba::table_format::csv, p, &c);
    wrote(p);

    p = out_path(out_dir, "frequencies.md");
    ba::detail::write_file(
        p, ba::render_frequency_tables(freq_source, freq_order, ba::table_format::markdown, &c));
    wrote(p);
    p = out_path(out_dir, "frequencies.csv");
    ba::detail::write_file(
        p, ba::render_frequency_tables(freq_source, freq_order, ba::table_format::csv, &c));
    wrote(p);

    for (ba::heatmap_kind kind : {ba::heatmap_kind::st_ast, ba::heatmap_kind::at_na,
                                  ba::heatmap_kind::correlation}) {
        ba::heatmap_matrix m = ba::build_heatmap(bundles, kind);
        std::string base = "heatmap_" + std::string(ba::to_string(kind));
        p = out_path(out_dir, (base + ".csv").c_str());
        ba::emit_heatmap(m, ba::heatmap_format::csv, p);
        wrote(p);
        p = out_path(out_dir, (base + ".svg").c_str());
        ba::emit_heatmap(m, ba::heatmap_format::svg, p);
        wrote(p);
    }
}

int cmd_generate(const cli_options& opts) {
    if (opts.corpus_out.empty())
        throw ba::io_error("generate requires --corpus-out for the expanded corpus");
    ba::corpus c = load_corpus_or_default(opts);
    auto models = resolve_models(opts);
    ba::provider_router router(stub_behavior_from(opts));

    for (const auto& st : c.stereotypes) {
        for (const auto& m : models) {
            const std::string prefix = st.id + "/" + m.name + "/v";
            bool present = std::any_of(c.scenarios.begin(), c.scenarios.end(),
                                       [&](const ba::scenario& s) {
                                           return s.scenario_id.rfind(prefix, 0) == 0;
                                       });
            if (present) {
                std::cout << st.id << " x " << m.name << ": variants already present, skipping\n";
                continue;
            }
            auto added = ba::augment(c, st.id, m, router.for_model(m));
            std::cout << st.id << " x " << m.name << ": generated " << added.size()
                      << " scenarios\n";
        }
    }
    ba::save_corpus(c, opts.corpus_out);
    std::cout << "corpus scenarios: " << c.scenarios.size() << "\n";
    std::cout << "wrote " << opts.corpus_out << "\n";
    return 0;
}

int cmd_run(const cli_options& opts) {
    ba::corpus c = load_corpus_or_default(opts);
    auto models = resolve_models(opts);
    auto conditions = ba::parse_condition_set(opts.conditions);
    ba::trial_plan plan = ba::build_plan(c, models, conditions, opts.seed);

    std::cout << "planned trials: " << plan.entries.size() << "\n";
    std::cout << "config fingerprint: " << plan.config_fingerprint << "\n";
    if (opts.dry_run) return 0;
    if (opts.log_path.empty()) throw ba::io_error("run requires --log");

    ba::provider_router router(stub_behavior_from(opts));
    ba::run_options ro;
    ro.log_path = opts.log_path;
    ro.concurrency = opts.concurrency;
    ro.max_trials = opts.max_trials;
    ba::run_summary s = ba::execute(plan, c, models, router, ro);
    std::cout << "executed: " << s.executed << "\n";
    std::cout << "ok: " << s.ok << "\n";
    std::cout << "invalid: " << s.invalid << " (provider failures: " << s.provider_failures
              << ")\n";
    std::cout << "skipped existing: " << s.skipped_existing << "\n";
    return 0;
}

int cmd_validate(const cli_options& opts) {
    auto records = load_records(opts);
    ba::corpus c = load_corpus_or_default(opts);
    std::vector<std::string> models, stereotypes;
    collect_orders(records, c, models, stereotypes);

    std::size_t tested = 0, significant = 0;
    for (const auto& sid : stereotypes) {
        for (const auto& m : models) {
            if (!pair_present(records, m, sid)) continue;
            try {
                ba::validation_result v = ba::validate_stereotype(records, m, sid);
                ++tested;
                if (v.passed) ++significant;
                char chi_buf[32], p_buf[32];
                std::snprintf(chi_buf, sizeof chi_buf, "%.2f",
                              ba::round_half_even(v.chi2, 2));
                std::snprintf(p_buf, sizeof p_buf, "%.3f", ba::round_half_even(v.p_value, 3));
                std::cout << m << " " << sid << " chi2=" << chi_buf << " p="
                          << (v.p_value < 0.001 ? "<0.001" : p_buf)
                          << (v.passed ? " significant" : " not significant") << "\n";
            } catch (const ba::insufficient_data& e) {
                std::cout << m << " " << sid << " insufficient data: " << e.what() << "\n";
            }
        }
    }
    std::cout << significant << " of " << tested
              << " ST-AST tests significant at raw p < 0.05\n";
    return 0;
}

int cmd_analyze(const cli_options& opts) {
    if (opts.out_dir.empty()) throw ba::io_error("analyze requires --out");
    auto records = load_records(opts);
    ba::corpus c = load_corpus_or_default(opts);
    std::vector<std::string> models, stereotypes;
    collect_orders(records, c, models, stereotypes);

    ba::summarize_options sopts;
    sopts.convention = ba::parse_gap_convention(opts.gap_convention);
    sopts.corp = &c;

    std::vector<ba::stat_bundle> bundles;
    for (const auto& sid : stereotypes) {
        for (const auto& m : models) {
            if (!pair_present(records, m, sid)) continue;
            try {
                bundles.push_back(ba::summarize_pair(records, m, sid, sopts));
            } catch (const ba::insufficient_data& e) {
                std::cerr << "skipping " << m << "/" << sid << ": " << e.what() << "\n";
            }
        }
    }
    if (bundles.empty()) throw ba::insufficient_data("no (model, stereotype) pair is analyzable");
    ba::apply_family_adjustment(bundles, ba::parse_p_adjust_method(opts.p_adjust));
    std::cout << "analyzed " << bundles.size() << " (model, stereotype) pairs\n";

    write_report_files(bundles, records, stereotypes, c, opts.out_dir);

    nlohmann::ordered_json doc;
    doc["gap_convention"] = ba::to_string(sopts.convention);
    doc["p_adjust"] = opts.p_adjust;
    doc["bundles"] = ba::bundles_to_json(bundles);
    std::string p = out_path(opts.out_dir, "bundles.json");
    ba::detail::write_file(p, doc.dump(2) + "\n");
    std::cout << "wrote " << p << "\n";
    return 0;
}

int cmd_report(const cli_options& opts) {
    if (opts.out_dir.empty()) throw ba::io_error("report requires --out");
    std::string bundles_path = opts.bundles_path.empty()
                                   ? out_path(opts.out_dir, "bundles.json")
                                   : opts.bundles_path;
    std::ifstream in(bundles_path, std::ios::binary);
    if (!in) throw ba::io_error("cannot open bundles file '" + bundles_path + "'");
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ba::parse_error("bundles file '" + bundles_path + "': " + e.what());
    }
    auto bundles = ba::bundles_from_json(
        doc.is_object() && doc.contains("bundles") ? doc.at("bundles") : doc);
    if (bundles.empty()) throw ba::insufficient_data("bundles file holds no analyses");

    ba::corpus c = load_corpus_or_default(opts);
    std::vector<std::string> stereotypes;
    std::set<std::string> seen;
    for (const auto& b : bundles)
        if (seen.insert(b.stereotype_id).second) stereotypes.push_back(b.stereotype_id);

    write_report_files(bundles, bundles, stereotypes, c, opts.out_dir);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Decision-bias audit harness for chat-completion models"};
    app.require_subcommand(1);
    cli_options opts;

    auto add_corpus = [&](CLI::App* sub) {
        sub->add_option("--corpus", opts.corpus_path,
                        "Corpus file (defaults to the built-in corpus)");
    };
    auto add_models = [&](CLI::App* sub) {
        sub->add_option("--models", opts.models, "Comma-separated model names");
        sub->add_option("--models-config", opts.models_config,
                        "JSON file with model endpoints and credentials");
    };
    auto add_stub = [&](CLI::App* sub) {
        sub->add_option("--seed", opts.seed, "Seed for the stub backend");
        sub->add_option("--stub-pa", opts.stub_pa, "Stub P(option A) default");
        sub->add_option("--stub-pa-st", opts.stub_pa_st, "Stub P(option A) under ST");
        sub->add_option("--stub-pa-ast", opts.stub_pa_ast, "Stub P(option A) under AST");
        sub->add_option("--stub-pa-at", opts.stub_pa_at, "Stub P(option A) under AT");
        sub->add_option("--stub-pa-na", opts.stub_pa_na, "Stub P(option A) under NA");
        sub->add_option("--stub-malformed", opts.stub_malformed,
                        "Stub probability of a malformed response");
    };
    auto add_records_source = [&](CLI::App* sub) {
        sub->add_option("--log", opts.log_path, "Trial log to read");
        sub->add_option("--replay", opts.replay_path,
                        "Counts CSV (stereotype,model,condition,count_a,count_b) to analyze "
                        "instead of a log");
    };

    CLI::App* generate =
        app.add_subcommand("generate", "Expand base scenarios into generated variants");
    add_corpus(generate);
    add_models(generate);
    add_stub(generate);
    generate->add_option("--corpus-out", opts.corpus_out, "Where to write the expanded corpus")
        ->required();

    CLI::App* run = app.add_subcommand("run", "Execute the trial matrix against the models");
    add_corpus(run);
    add_models(run);
    add_stub(run);
    run->add_option("--conditions", opts.conditions, "Comma-separated subset of ST,AST,AT,NA");
    run->add_option("--concurrency", opts.concurrency, "Worker threads")
        ->check(CLI::PositiveNumber);
    run->add_option("--log", opts.log_path, "Append-only trial log path");
    run->add_option("--max-trials", opts.max_trials, "Stop after this many new trials");
    run->add_flag("--dry-run", opts.dry_run, "Print the planned trial count and exit");

    CLI::App* validate =
        app.add_subcommand("validate", "Check which stereotypes shift answers (ST vs AST)");
    add_corpus(validate);
    add_records_source(validate);

    CLI::App* analyze = app.add_subcommand("analyze", "Compute statistics and emit reports");
    add_corpus(analyze);
    add_records_source(analyze);
    analyze->add_option("--out", opts.out_dir, "Report output directory")->required();
    analyze->add_option("--p-adjust", opts.p_adjust, "Multiple-comparison correction")
        ->check(CLI::IsMember({"bh", "bonferroni", "holm"}));
    analyze->add_option("--gap-convention", opts.gap_convention,
                        "Per-scenario gap for correlations")
        ->check(CLI::IsMember({"max", "raw"}));

    CLI::App* report = app.add_subcommand("report", "Re-emit report files from a saved analysis");
    add_corpus(report);
    report->add_option("--bundles", opts.bundles_path,
                       "Analysis file (defaults to <out>/bundles.json)");
    report->add_option("--out", opts.out_dir, "Report output directory")->required();

    try {
        app.parse(argc, argv);
        if (generate->parsed()) return cmd_generate(opts);
        if (run->parsed()) return cmd_run(opts);
        if (validate->parsed()) return cmd_validate(opts);
        if (analyze->parsed()) return cmd_analyze(opts);
        if (report->parsed()) return cmd_report(opts);
        return 0;
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const biasaudit::error& e) {
        std::cerr << "error: " << e.code() << ": " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: unhandled: " << e.what() << "\n";
        return 1;
    }
}
