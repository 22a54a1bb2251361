#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct cli_result {
    int exit_code;
    std::string output;
};

cli_result run_cli(const std::string& args) {
    std::string cmd = std::string(BIASAUDIT_CLI_PATH) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::string out;
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, n);
    int status = pclose(pipe);
    int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return {code, out};
}

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / "biasaudit_cli_test" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string replay_fixture() {
    return std::string(BIASAUDIT_TEST_DATA_DIR) + "/reference_counts.csv";
}

}  // namespace

TEST_CASE("cli refuses to run without a subcommand") {
    cli_result r = run_cli("");
    CHECK(r.exit_code != 0);
}

TEST_CASE("cli dry run reports the planned trial matrix") {
    cli_result r = run_cli("run --models stub-a --dry-run");
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("planned trials: 480") != std::string::npos);
    CHECK(r.output.find("config fingerprint: ") != std::string::npos);

    cli_result two = run_cli("run --models stub-a,stub-b --dry-run");
    CHECK(two.output.find("planned trials: 960") != std::string::npos);

    cli_result st = run_cli("run --models stub-a --conditions ST --dry-run");
    CHECK(st.output.find("planned trials: 120") != std::string::npos);
}

TEST_CASE("cli generate expands every stereotype and feeds a bigger plan") {
    fs::path dir = fresh_dir("generate");
    fs::path corpus_out = dir / "expanded_corpus.txt";

    cli_result gen = run_cli("generate --models gen-1 --seed 5 --corpus-out " + q(corpus_out));
    CHECK(gen.exit_code == 0);
    CHECK(gen.output.find("introverted x gen-1: generated 20 scenarios") != std::string::npos);
    CHECK(gen.output.find("corpus scenarios: 252") != std::string::npos);  // 12 bases + 240
    REQUIRE(fs::exists(corpus_out));

    cli_result plan =
        run_cli("run --corpus " + q(corpus_out) + " --models stub-a --dry-run");
    CHECK(plan.output.find("planned trials: 9600") != std::string::npos);  // 240 scenarios x 40

    cli_result again = run_cli("generate --corpus " + q(corpus_out) +
                               " --models gen-1 --seed 5 --corpus-out " + q(corpus_out));
    CHECK(again.exit_code == 0);
    CHECK(again.output.find("variants already present, skipping") != std::string::npos);
    CHECK(again.output.find("corpus scenarios: 252") != std::string::npos);
}

TEST_CASE("cli run and analyze produce the full report set") {
    fs::path dir = fresh_dir("pipeline");
    fs::path log = dir / "trials.jsonl";
    fs::path out = dir / "reports";

    cli_result run = run_cli("run --models stub-a --seed 9 --concurrency 4 --stub-pa-st 0.8 "
                             "--stub-pa-ast 0.2 --stub-pa-at 0.7 --stub-pa-na 0.3 --log " +
                             q(log));
    CHECK(run.exit_code == 0);
    CHECK(run.output.find("executed: 480") != std::string::npos);
    CHECK(run.output.find("ok: 480") != std::string::npos);
    CHECK(run.output.find("invalid: 0 (provider failures: 0)") != std::string::npos);

    cli_result analyze = run_cli("analyze --log " + q(log) + " --out " + q(out));
    CHECK(analyze.exit_code == 0);
    CHECK(analyze.output.find("analyzed 12 (model, stereotype) pairs") != std::string::npos);

    for (const char* name :
         {"stats.md", "stats.csv", "frequencies.md", "frequencies.csv", "heatmap_st_ast.csv",
          "heatmap_st_ast.svg", "heatmap_at_na.csv", "heatmap_at_na.svg",
          "heatmap_correlation.csv", "heatmap_correlation.svg", "bundles.json"}) {
        INFO(name);
        CHECK(fs::exists(out / name));
    }

    std::string stats_md = slurp(out / "stats.md");
    CHECK(stats_md.find("## \"introverted\": ") != std::string::npos);
    CHECK(stats_md.find("| stub-a | ") != std::string::npos);
}

TEST_CASE("cli validate reproduces the published manipulation-check tally") {
    cli_result r = run_cli("validate --replay " + q(replay_fixture()));
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("64 of 72 ST-AST tests significant at raw p < 0.05") !=
          std::string::npos);
    CHECK(r.output.find("claude-3.5-haiku introverted chi2=735.82 p=<0.001 significant") !=
          std::string::npos);
}

TEST_CASE("cli analyze of published counts reproduces the reference table row") {
    fs::path dir = fresh_dir("replay_analyze");
    fs::path out = dir / "reports";

    cli_result analyze = run_cli("analyze --replay " + q(replay_fixture()) + " --out " + q(out));
    CHECK(analyze.exit_code == 0);
    CHECK(analyze.output.find("analyzed 72 (model, stereotype) pairs") != std::string::npos);

    std::string stats_md = slurp(out / "stats.md");
    CHECK(stats_md.find("| claude-3.5-haiku | 839.40 | <0.001 | 0.591 | (0.551, 0.631) | 735.82 "
                        "| <0.001 | 0.553 | (0.513, 0.593) |") != std::string::npos);

    std::string freq_md = slurp(out / "frequencies.md");
    CHECK(freq_md.find("| claude-3.5-haiku | 892 186 675 62 / 308 1014 525 1138 | 0 |") !=
          std::string::npos);

    SECTION("report re-emits identical tables from the saved analysis") {
        fs::path out2 = dir / "reports2";
        cli_result report = run_cli("report --bundles " + q(out / "bundles.json") + " --out " +
                                    q(out2));
        CHECK(report.exit_code == 0);
        for (const char* name : {"stats.md", "stats.csv", "frequencies.md", "frequencies.csv",
                                 "heatmap_st_ast.svg", "heatmap_at_na.csv"}) {
            INFO(name);
            CHECK(slurp(out2 / name) == slurp(out / name));
        }
    }
}

TEST_CASE("cli runs are reproducible and resumable") {
    fs::path dir = fresh_dir("determinism");
    std::string base_args = "run --models stub-a --seed 31 --conditions ST,AST --log ";

    cli_result a = run_cli(base_args + q(dir / "a.jsonl"));
    REQUIRE(a.exit_code == 0);
    cli_result b = run_cli(base_args + q(dir / "b.jsonl"));
    REQUIRE(b.exit_code == 0);
    CHECK(slurp(dir / "a.jsonl") == slurp(dir / "b.jsonl"));

    cli_result first_half = run_cli(base_args + q(dir / "c.jsonl") + " --max-trials 100");
    REQUIRE(first_half.exit_code == 0);
    CHECK(first_half.output.find("executed: 100") != std::string::npos);
    cli_result rest = run_cli(base_args + q(dir / "c.jsonl"));
    REQUIRE(rest.exit_code == 0);
    CHECK(rest.output.find("skipped existing: 100") != std::string::npos);
    CHECK(slurp(dir / "c.jsonl") == slurp(dir / "a.jsonl"));
}

TEST_CASE("cli error paths exit nonzero with a coded message") {
    cli_result no_source = run_cli("analyze --out /tmp/biasaudit_cli_test_unused");
    CHECK(no_source.exit_code == 1);
    CHECK(no_source.output.find("error: empty_selection") != std::string::npos);

    cli_result both = run_cli("analyze --log x.jsonl --replay y.csv --out /tmp/unused");
    CHECK(both.exit_code == 1);
    CHECK(both.output.find("error: validation_error") != std::string::npos);

    cli_result missing_log = run_cli("analyze --log /no/such/log.jsonl --out /tmp/unused");
    CHECK(missing_log.exit_code == 1);
    CHECK(missing_log.output.find("error: io_error") != std::string::npos);

    cli_result no_models = run_cli("run --dry-run");
    CHECK(no_models.exit_code == 1);
    CHECK(no_models.output.find("error: empty_selection") != std::string::npos);

    cli_result bad_adjust = run_cli("analyze --replay x.csv --out /tmp/unused --p-adjust fdr");
    CHECK(bad_adjust.exit_code != 0);
}
