#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <biasaudit/replay.hpp>
#include <biasaudit/stats.hpp>

#include "reference_tables.hpp"

using namespace biasaudit;

namespace {

std::string fixture_path() {
    return std::string(BIASAUDIT_TEST_DATA_DIR) + "/reference_counts.csv";
}

std::filesystem::path write_temp(const std::string& name, const std::string& content) {
    auto dir = std::filesystem::temp_directory_path() / "biasaudit_replay_test";
    std::filesystem::create_directories(dir);
    auto p = dir / name;
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << content;
    return p;
}

}  // namespace

TEST_CASE("the published counts fixture loads completely") {
    auto records = load_replay_counts(fixture_path());

    long long expected = 0;
    for (const auto& pair : refdata::kPairs)
        expected += pair.at_a + pair.at_b + pair.na_a + pair.na_b + pair.st_a + pair.st_b +
                    pair.ast_a + pair.ast_b;
    CHECK(records.size() == static_cast<std::size_t>(expected));

    std::set<std::string> models, stereotypes;
    for (const auto& r : records) {
        models.insert(r.key.model);
        stereotypes.insert(r.stereotype_id);
        CHECK(r.key.scenario_id == r.stereotype_id + "/pooled");
        CHECK(r.prompt_hash == "replay");
        CHECK(r.dec != decision::INVALID);
    }
    CHECK(models.size() == 6);
    CHECK(stereotypes.size() == 12);
}

TEST_CASE("replayed counts aggregate back to the original numbers") {
    auto records = load_replay_counts(fixture_path());
    for (const auto& pair : refdata::kPairs) {
        INFO(pair.stereotype << " / " << pair.model);
        pair_counts pc = aggregate_pair(records, pair.model, pair.stereotype);
        auto idx = [](condition_kind k) { return static_cast<std::size_t>(k); };
        CHECK(pc.count_a[idx(condition_kind::AT)] == pair.at_a);
        CHECK(pc.count_b[idx(condition_kind::AT)] == pair.at_b);
        CHECK(pc.count_a[idx(condition_kind::NA)] == pair.na_a);
        CHECK(pc.count_b[idx(condition_kind::NA)] == pair.na_b);
        CHECK(pc.count_a[idx(condition_kind::ST)] == pair.st_a);
        CHECK(pc.count_b[idx(condition_kind::ST)] == pair.st_b);
        CHECK(pc.count_a[idx(condition_kind::AST)] == pair.ast_a);
        CHECK(pc.count_b[idx(condition_kind::AST)] == pair.ast_b);
        CHECK(pc.invalid == 0);
    }
}

TEST_CASE("replayed trials spread over phrasings and repetitions with unique keys") {
    auto p = write_temp("small.csv",
                        "stereotype,model,condition,count_a,count_b\n"
                        "s1,m1,ST,7,5\n"
                        "s1,m1,NA,3,4\n");
    auto records = load_replay_counts(p.string());
    REQUIRE(records.size() == 19);

    std::set<std::string> keys;
    for (const auto& r : records) keys.insert(r.key.key_string());
    CHECK(keys.size() == records.size());

    // the 12 ST trials walk phrasings 0..4 cyclically, bumping the repetition
    CHECK(records[0].key.cond.phrasing_index == 0);
    CHECK(records[0].key.repetition == 0);
    CHECK(records[4].key.cond.phrasing_index == 4);
    CHECK(records[5].key.cond.phrasing_index == 0);
    CHECK(records[5].key.repetition == 1);
    CHECK(records[11].key.cond.phrasing_index == 1);
    CHECK(records[11].key.repetition == 2);

    // NA trials have no phrasing dimension
    CHECK(records[12].key.cond.kind == condition_kind::NA);
    CHECK(records[12].key.cond.phrasing_index == -1);
    CHECK(records[18].key.repetition == 6);
}

TEST_CASE("replay input edge cases") {
    SECTION("header is optional") {
        auto p = write_temp("noheader.csv", "s1,m1,NA,2,2\n");
        CHECK(load_replay_counts(p.string()).size() == 4);
    }
    SECTION("comments and blank lines are skipped") {
        auto p = write_temp("comments.csv",
                            "# counts exported by hand\n"
                            "\n"
                            "s1,m1,NA,1,1\n"
                            "  # indented comment\n"
                            "s1,m1,AT,1,1\n");
        CHECK(load_replay_counts(p.string()).size() == 4);
    }
    SECTION("windows line endings are tolerated") {
        auto p = write_temp("crlf.csv", "s1,m1,NA,2,3\r\n");
        CHECK(load_replay_counts(p.string()).size() == 5);
    }
    SECTION("wrong field count is an error with a line number") {
        auto p = write_temp("short.csv", "s1,m1,NA,2\n");
        CHECK_THROWS_WITH(load_replay_counts(p.string()),
                          Catch::Matchers::ContainsSubstring("line 1"));
    }
    SECTION("unknown condition is an error") {
        auto p = write_temp("badcond.csv", "s1,m1,XX,2,2\n");
        CHECK_THROWS_AS(load_replay_counts(p.string()), parse_error);
    }
    SECTION("negative counts are an error") {
        auto p = write_temp("negative.csv", "s1,m1,NA,-1,2\n");
        CHECK_THROWS_AS(load_replay_counts(p.string()), parse_error);
    }
    SECTION("non-numeric counts are an error") {
        auto p = write_temp("nan.csv", "s1,m1,NA,two,2\n");
        CHECK_THROWS_AS(load_replay_counts(p.string()), parse_error);
    }
    SECTION("empty stereotype or model is an error") {
        auto p = write_temp("empty_field.csv", ",m1,NA,2,2\n");
        CHECK_THROWS_AS(load_replay_counts(p.string()), parse_error);
    }
    SECTION("a file with no data rows is an error") {
        auto p = write_temp("empty.csv", "stereotype,model,condition,count_a,count_b\n");
        CHECK_THROWS_AS(load_replay_counts(p.string()), insufficient_data);
    }
    SECTION("a missing file is an io error") {
        CHECK_THROWS_AS(load_replay_counts("no_such_file.csv"), io_error);
    }
}
