#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cctype>
#include <string>

#include <biasaudit/corpus.hpp>
#include <biasaudit/detail/hash.hpp>
#include <biasaudit/promptgen.hpp>

using namespace biasaudit;

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    return s;
}

std::size_t count_lines_starting(const std::string& text, const std::string& prefix) {
    std::size_t n = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string::npos) nl = text.size();
        if (text.compare(pos, prefix.size(), prefix) == 0) ++n;
        if (nl == text.size()) break;
        pos = nl + 1;
    }
    return n;
}

}  // namespace

TEST_CASE("advice prompt embeds the scenario, both options, and the format contract") {
    corpus c = default_corpus();
    const stereotype& st = c.find_stereotype("introverted");
    const scenario& base = c.find_scenario("introverted/base");

    rendered_prompt p = render_advice_prompt(base, condition::na(), c);

    CHECK(p.scenario_id == "introverted/base");
    CHECK(p.attribute_text.empty());
    CHECK(p.text.find("```\n" + base.text + "\n```") != std::string::npos);
    CHECK(p.text.find("A: " + base.option_a + "\n") != std::string::npos);
    CHECK(p.text.find("B: " + base.option_b + "\n") != std::string::npos);
    CHECK(count_lines_starting(p.text, "A: ") == 1);
    CHECK(count_lines_starting(p.text, "B: ") == 1);
    CHECK(p.text.find("\"decision\": <a string, \"A\" or \"B\">") != std::string::npos);
    CHECK(p.text.find("\"rationale\":") != std::string::npos);

    // The published example pairs a decline option with a join option.
    std::string low = lower(p.text);
    CHECK(low.find("decline") != std::string::npos);
    CHECK(low.find("join") != std::string::npos);
    (void)st;
}

TEST_CASE("each condition injects its own attribute phrase") {
    corpus c = default_corpus();
    const stereotype& st = c.find_stereotype("introverted");
    const scenario& base = c.find_scenario("introverted/base");

    for (int i = 0; i < phrasing_count; ++i) {
        rendered_prompt pst = render_advice_prompt(base, condition::phrased(condition_kind::ST, i), c);
        rendered_prompt past =
            render_advice_prompt(base, condition::phrased(condition_kind::AST, i), c);
        rendered_prompt pat = render_advice_prompt(base, condition::phrased(condition_kind::AT, i), c);

        CHECK(pst.attribute_text == st.st_words[static_cast<std::size_t>(i)]);
        CHECK(past.attribute_text == st.ast_words[static_cast<std::size_t>(i)]);
        CHECK(pat.attribute_text == c.disclosure_phrasings[static_cast<std::size_t>(i)]);

        std::string marker = "I have the following attribute: " + pst.attribute_text + ".\n\n";
        CHECK(pst.text.find(marker) == 0);
        CHECK(pat.text.find("I have the following attribute: " +
                            c.disclosure_phrasings[static_cast<std::size_t>(i)] + ".") == 0);
    }
}

TEST_CASE("conditions differ only in the attribute sentence") {
    corpus c = default_corpus();
    const scenario& base = c.find_scenario("weird/base");

    rendered_prompt na = render_advice_prompt(base, condition::na(), c);
    rendered_prompt st = render_advice_prompt(base, condition::phrased(condition_kind::ST, 2), c);

    CHECK(na.text.find("I have the following attribute") == std::string::npos);
    std::string prefix = "I have the following attribute: " + st.attribute_text + ".\n\n";
    REQUIRE(st.text.size() > prefix.size());
    CHECK(st.text.substr(prefix.size()) == na.text);
}

TEST_CASE("phrasing index is range checked and NA takes none") {
    corpus c = default_corpus();
    const scenario& base = c.find_scenario("honest/base");
    CHECK_THROWS_AS(render_advice_prompt(base, condition{condition_kind::ST, 5}, c),
                    index_out_of_range);
    CHECK_THROWS_AS(render_advice_prompt(base, condition{condition_kind::AT, -1}, c),
                    index_out_of_range);
    CHECK_THROWS_AS(render_advice_prompt(base, condition{condition_kind::NA, 0}, c),
                    validation_error);
}

TEST_CASE("augmentation prompt states the task, the theme, and who suits which option") {
    corpus c = default_corpus();

    SECTION("trait aligned with option A") {
        const stereotype& st = c.find_stereotype("introverted");
        REQUIRE(st.st_option == 'A');
        std::string p = render_augmentation_prompt(st);
        CHECK(p.find("write 20 new versions") != std::string::npos);
        CHECK(p.find("Scenario: \"" + st.base_scenario + "\"") != std::string::npos);
        CHECK(p.find("The theme of the scenario is: \"" + st.option_a_label + " vs " +
                     st.option_b_label + ": " + st.theme + ".\"") != std::string::npos);
        std::string line_a = "- For somebody who " + st.st_phrase + ", " + st.option_a_label +
                             " is likely the right thing to do.";
        std::string line_b = "- For somebody who " + st.ast_phrase + ", " + st.option_b_label +
                             " is likely the right thing to do.";
        std::size_t pos_a = p.find(line_a);
        std::size_t pos_b = p.find(line_b);
        REQUIRE(pos_a != std::string::npos);
        REQUIRE(pos_b != std::string::npos);
        CHECK(pos_a < pos_b);
    }

    SECTION("trait aligned with option B swaps the phrases, not the labels") {
        const stereotype& st = c.find_stereotype("poor_social_skills");
        REQUIRE(st.st_option == 'B');
        std::string p = render_augmentation_prompt(st);
        std::string line_a = "- For somebody who " + st.ast_phrase + ", " + st.option_a_label +
                             " is likely the right thing to do.";
        std::string line_b = "- For somebody who " + st.st_phrase + ", " + st.option_b_label +
                             " is likely the right thing to do.";
        std::size_t pos_a = p.find(line_a);
        std::size_t pos_b = p.find(line_b);
        REQUIRE(pos_a != std::string::npos);
        REQUIRE(pos_b != std::string::npos);
        CHECK(pos_a < pos_b);
    }
}

TEST_CASE("prompt text is stable, so its hash is too") {
    corpus c = default_corpus();
    const scenario& base = c.find_scenario("creative/base");
    condition cond = condition::phrased(condition_kind::AT, 3);

    rendered_prompt p1 = render_advice_prompt(base, cond, c);
    rendered_prompt p2 = render_advice_prompt(base, cond, c);
    CHECK(p1.text == p2.text);
    CHECK(detail::to_hex(detail::fnv1a64(p1.text)) == detail::to_hex(detail::fnv1a64(p2.text)));

    rendered_prompt other = render_advice_prompt(base, condition::phrased(condition_kind::AT, 4), c);
    CHECK(detail::fnv1a64(other.text) != detail::fnv1a64(p1.text));
}
