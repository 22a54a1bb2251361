#pragma once

#include <algorithm>
#include <array>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "biasaudit/default_corpus.hpp"
#include "biasaudit/detail/hash.hpp"
#include "biasaudit/errors.hpp"

// Corpus file schema
// ------------------
// Line-oriented text. '#' at line start is a comment; blank lines are
// ignored. A "[section]" line opens a block; "key = value" lines fill it.
// Values run to end of line (no escapes; values cannot contain newlines).
// List-valued keys separate items with " | ".
//
//   [disclosures]            exactly 5 "phrasing = ..." lines
//   [stereotype]             one block per stereotype:
//     id, name               short identifier / display name
//     option_a_label         e.g. "Decline"
//     option_b_label         e.g. "Join"
//     st_option              A or B: which option suits the trait holder
//     st_phrase, ast_phrase  exemplar phrases ("has poor social skills")
//     theme                  the A-vs-B dilemma description
//     st_words, ast_words    exactly 5 items each
//     sources                citation keys
//     base_scenario          the hand-crafted dilemma (becomes variant 0)
//     base_option_a/b        action texts for the base scenario
//   [scenario]               one block per generated variant:
//     id, stereotype, generator, variant (1..20), text, option_a, option_b
//
// The base scenario is stored on the stereotype block and materialized as a
// variant-0 scenario with generator "human"; [scenario] blocks may not claim
// variant 0.

namespace biasaudit {

inline constexpr int max_variant_index = 20;
inline constexpr const char* human_generator = "human";

struct stereotype {
    std::string id;
    std::string name;
    std::string base_scenario;
    std::string theme;
    std::string option_a_label;
    std::string option_b_label;
    char st_option = 'A';
    std::string st_phrase;
    std::string ast_phrase;
    std::vector<std::string> st_words;
    std::vector<std::string> ast_words;
    std::vector<std::string> sources;
    std::string base_option_a;
    std::string base_option_b;

    bool operator==(const stereotype&) const = default;
};

struct scenario {
    std::string scenario_id;
    std::string stereotype_id;
    std::string text;
    std::string option_a;
    std::string option_b;
    int variant_index = 0;
    std::string generator_model = human_generator;

    bool operator==(const scenario&) const = default;
};

class corpus {
  public:
    std::vector<stereotype> stereotypes;
    std::vector<scenario> scenarios;  // includes the variant-0 bases
    std::vector<std::string> disclosure_phrasings;

    bool operator==(const corpus&) const = default;

    const stereotype& find_stereotype(std::string_view id) const {
        for (const auto& s : stereotypes)
            if (s.id == id) return s;
        throw unknown_stereotype("no stereotype with id '" + std::string(id) + "'");
    }

    bool has_stereotype(std::string_view id) const {
        return std::any_of(stereotypes.begin(), stereotypes.end(),
                           [&](const stereotype& s) { return s.id == id; });
    }

    // The scenarios the experiment runs on: generated variants when any
    // exist, otherwise the hand-crafted base. Ordered by
    // (generator_model, variant_index).
    std::vector<scenario> scenarios_for(std::string_view stereotype_id) const {
        find_stereotype(stereotype_id);
        std::vector<scenario> generated;
        std::vector<scenario> base;
        for (const auto& s : scenarios) {
            if (s.stereotype_id != stereotype_id) continue;
            (s.variant_index == 0 ? base : generated).push_back(s);
        }
        std::vector<scenario>& picked = generated.empty() ? base : generated;
        std::sort(picked.begin(), picked.end(), [](const scenario& x, const scenario& y) {
            if (x.generator_model != y.generator_model) return x.generator_model < y.generator_model;
            return x.variant_index < y.variant_index;
        });
        return picked;
    }

    const scenario& find_scenario(std::string_view scenario_id) const {
        for (const auto& s : scenarios)
            if (s.scenario_id == scenario_id) return s;
        throw validation_error("no scenario with id '" + std::string(scenario_id) + "'");
    }

    void validate() const {
        if (disclosure_phrasings.size() != 5)
            throw validation_error("disclosure_phrasings: expected exactly 5, got " +
                                   std::to_string(disclosure_phrasings.size()));
        check_distinct_nonempty(disclosure_phrasings, "disclosure_phrasings");
        if (stereotypes.empty()) throw validation_error("corpus has no stereotypes");

        std::set<std::string> ids;
        for (const auto& st : stereotypes) {
            const std::string where = "stereotype '" + st.id + "': ";
            if (st.id.empty()) throw validation_error("stereotype with empty id");
            if (!ids.insert(st.id).second)
                throw validation_error(where + "duplicate id");
            if (st.option_a_label.empty() || st.option_b_label.empty())
                throw validation_error(where + "option labels must be non-empty");
            if (st.option_a_label == st.option_b_label)
                throw validation_error(where + "option_a_label equals option_b_label");
            if (st.st_option != 'A' && st.st_option != 'B')
                throw validation_error(where + "st_option must be A or B");
            check_word_list(st.st_words, where + "st_words");
            check_word_list(st.ast_words, where + "ast_words");
            if (st.base_scenario.empty())
                throw validation_error(where + "base_scenario must be non-empty");
            if (st.base_option_a.empty() || st.base_option_b.empty())
                throw validation_error(where + "base_option_a/base_option_b must be non-empty");
            if (st.st_phrase.empty() || st.ast_phrase.empty())
                throw validation_error(where + "st_phrase/ast_phrase must be non-empty");
            if (st.theme.empty()) throw validation_error(where + "theme must be non-empty");
        }

        std::set<std::string> scenario_ids;
        std::set<std::string> base_seen;
        for (const auto& sc : scenarios) {
            const std::string where = "scenario '" + sc.scenario_id + "': ";
            if (sc.scenario_id.empty()) throw validation_error("scenario with empty id");
            if (!scenario_ids.insert(sc.scenario_id).second)
                throw validation_error(where + "duplicate scenario_id");
            if (!ids.count(sc.stereotype_id))
                throw validation_error(where + "unknown stereotype_id '" + sc.stereotype_id + "'");
            if (sc.text.empty() || sc.option_a.empty() || sc.option_b.empty())
                throw validation_error(where + "text/option_a/option_b must be non-empty");
            if (sc.variant_index < 0 || sc.variant_index > max_variant_index)
                throw validation_error(where + "variant_index outside [0," +
                                       std::to_string(max_variant_index) + "]");
            if (sc.variant_index == 0) {
                if (sc.generator_model != human_generator)
                    throw validation_error(where + "variant 0 must have generator 'human'");
                if (!base_seen.insert(sc.stereotype_id).second)
                    throw validation_error(where + "second variant-0 scenario for stereotype '" +
                                           sc.stereotype_id + "'");
            } else if (sc.generator_model.empty() || sc.generator_model == human_generator) {
                throw validation_error(where + "generated variant needs a non-'human' generator");
            }
        }
        for (const auto& st : stereotypes)
            if (!base_seen.count(st.id))
                throw validation_error("stereotype '" + st.id + "': missing variant-0 base scenario");
    }

    std::string fingerprint() const { return detail::to_hex(detail::fnv1a64(serialize())); }

    std::string serialize() const;

  private:
    static void check_word_list(const std::vector<std::string>& words, const std::string& what) {
        if (words.size() != 5)
            throw validation_error(what + " must contain exactly 5 entries, got " +
                                   std::to_string(words.size()));
        check_distinct_nonempty(words, what);
    }

    static void check_distinct_nonempty(const std::vector<std::string>& items,
                                        const std::string& what) {
        std::set<std::string> seen;
        for (const auto& s : items) {
            if (s.empty()) throw validation_error(what + " contains an empty entry");
            if (!seen.insert(s).second)
                throw validation_error(what + " contains duplicate entry '" + s + "'");
        }
    }
};

namespace detail {

inline std::string trim(std::string_view s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        std::size_t sep = value.find('|', pos);
        std::string item = trim(value.substr(pos, sep == std::string::npos ? sep : sep - pos));
        if (!item.empty()) out.push_back(item);
        if (sep == std::string::npos) break;
        pos = sep + 1;
    }
    return out;
}

inline std::string join_list(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += " | ";
        out += items[i];
    }
    return out;
}

}  // namespace detail

inline corpus parse_corpus(std::string_view text) {
    corpus c;
    enum class section { none, disclosures, stereo, scen };
    section cur = section::none;
    stereotype st;
    scenario sc;
    int line_no = 0;

    auto flush = [&] {
        if (cur == section::stereo) {
            c.stereotypes.push_back(st);
            scenario base;
            base.scenario_id = st.id + "/base";
            base.stereotype_id = st.id;
            base.text = st.base_scenario;
            base.option_a = st.base_option_a;
            base.option_b = st.base_option_b;
            base.variant_index = 0;
            base.generator_model = human_generator;
            c.scenarios.push_back(base);
            st = stereotype{};
        } else if (cur == section::scen) {
            c.scenarios.push_back(sc);
            sc = scenario{};
        }
    };

    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string line = detail::trim(text.substr(pos, nl - pos));
        pos = nl + 1;
        ++line_no;
        if (nl == text.size() && line.empty()) break;
        if (line.empty() || line[0] == '#') continue;

        if (line.front() == '[') {
            if (line.back() != ']')
                throw parse_error("line " + std::to_string(line_no) + ": unterminated section header");
            flush();
            std::string name = line.substr(1, line.size() - 2);
            if (name == "disclosures") cur = section::disclosures;
            else if (name == "stereotype") cur = section::stereo;
            else if (name == "scenario") cur = section::scen;
            else throw parse_error("line " + std::to_string(line_no) + ": unknown section [" + name + "]");
            continue;
        }

        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw parse_error("line " + std::to_string(line_no) + ": expected 'key = value'");
        std::string key = detail::trim(std::string_view(line).substr(0, eq));
        std::string value = detail::trim(std::string_view(line).substr(eq + 1));

        switch (cur) {
            case section::none:
                throw parse_error("line " + std::to_string(line_no) + ": key outside any section");
            case section::disclosures:
                if (key != "phrasing")
                    throw parse_error("line " + std::to_string(line_no) +
                                      ": [disclosures] only takes 'phrasing'");
                c.disclosure_phrasings.push_back(value);
                break;
            case section::stereo:
                if (key == "id") st.id = value;
                else if (key == "name") st.name = value;
                else if (key == "option_a_label") st.option_a_label = value;
                else if (key == "option_b_label") st.option_b_label = value;
                else if (key == "st_option") {
                    if (value != "A" && value != "B")
                        throw parse_error("line " + std::to_string(line_no) + ": st_option must be A or B");
                    st.st_option = value[0];
                } else if (key == "st_phrase") st.st_phrase = value;
                else if (key == "ast_phrase") st.ast_phrase = value;
                else if (key == "theme") st.theme = value;
                else if (key == "st_words") st.st_words = detail::split_list(value);
                else if (key == "ast_words") st.ast_words = detail::split_list(value);
                else if (key == "sources") st.sources = detail::split_list(value);
                else if (key == "base_scenario") st.base_scenario = value;
                else if (key == "base_option_a") st.base_option_a = value;
                else if (key == "base_option_b") st.base_option_b = value;
                else throw parse_error("line " + std::to_string(line_no) +
                                       ": unknown stereotype key '" + key + "'");
                break;
            case section::scen:
                if (key == "id") sc.scenario_id = value;
                else if (key == "stereotype") sc.stereotype_id = value;
                else if (key == "generator") sc.generator_model = value;
                else if (key == "variant") {
                    try {
                        sc.variant_index = std::stoi(value);
                    } catch (const std::exception&) {
                        throw parse_error("line " + std::to_string(line_no) +
                                          ": variant must be an integer");
                    }
                } else if (key == "text") sc.text = value;
                else if (key == "option_a") sc.option_a = value;
                else if (key == "option_b") sc.option_b = value;
                else throw parse_error("line " + std::to_string(line_no) +
                                       ": unknown scenario key '" + key + "'");
                break;
        }
        if (nl == text.size()) break;
    }
    flush();
    c.validate();
    return c;
}

inline std::string corpus::serialize() const {
    std::ostringstream out;
    out << "# biasaudit corpus file\n\n[disclosures]\n";
    for (const auto& p : disclosure_phrasings) out << "phrasing = " << p << "\n";
    for (const auto& st : stereotypes) {
        out << "\n[stereotype]\n";
        out << "id = " << st.id << "\n";
        out << "name = " << st.name << "\n";
        out << "option_a_label = " << st.option_a_label << "\n";
        out << "option_b_label = " << st.option_b_label << "\n";
        out << "st_option = " << st.st_option << "\n";
        out << "st_phrase = " << st.st_phrase << "\n";
        out << "ast_phrase = " << st.ast_phrase << "\n";
        out << "theme = " << st.theme << "\n";
        out << "st_words = " << detail::join_list(st.st_words) << "\n";
        out << "ast_words = " << detail::join_list(st.ast_words) << "\n";
        out << "sources = " << detail::join_list(st.sources) << "\n";
        out << "base_scenario = " << st.base_scenario << "\n";
        out << "base_option_a = " << st.base_option_a << "\n";
        out << "base_option_b = " << st.base_option_b << "\n";
    }
    for (const auto& sc : scenarios) {
        if (sc.variant_index == 0) continue;  // bases re-emerge from stereotype blocks
        out << "\n[scenario]\n";
        out << "id = " << sc.scenario_id << "\n";
        out << "stereotype = " << sc.stereotype_id << "\n";
        out << "generator = " << sc.generator_model << "\n";
        out << "variant = " << sc.variant_index << "\n";
        out << "text = " << sc.text << "\n";
        out << "option_a = " << sc.option_a << "\n";
        out << "option_b = " << sc.option_b << "\n";
    }
    return out.str();
}

inline corpus default_corpus() { return parse_corpus(default_corpus_text); }

inline corpus load_corpus(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open corpus file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_corpus(buf.str());
}

inline void save_corpus(const corpus& c, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot write corpus file '" + path + "'");
    out << c.serialize();
    if (!out) throw io_error("failed writing corpus file '" + path + "'");
}

}  // namespace biasaudit
