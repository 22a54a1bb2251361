#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/non_central_chi_squared.hpp>

#include "biasaudit/condition.hpp"
#include "biasaudit/corpus.hpp"
#include "biasaudit/errors.hpp"
#include "biasaudit/trial.hpp"

namespace biasaudit {

// 2x2 counts: rows are the two compared conditions, columns the two options.
struct contingency_table {
    long long a = 0;  // condition 1 chose option A
    long long b = 0;  // condition 1 chose option B
    long long c = 0;  // condition 2 chose option A
    long long d = 0;  // condition 2 chose option B
    std::string cond1_label, cond2_label, option_a_label, option_b_label;

    long long n() const { return a + b + c + d; }
    double p1() const { return static_cast<double>(a) / static_cast<double>(a + b); }
    double p2() const { return static_cast<double>(c) / static_cast<double>(c + d); }
};

struct gap_stat {
    double gap = 0;         // |p1 - p2| / max(p1, p2)
    double signed_gap = 0;  // (p1 - p2) / max(p1, p2), oriented on option A
    double p1 = 0;
    double p2 = 0;
};

inline gap_stat compute_gap(double p1, double p2) {
    if (!(p1 >= 0.0 && p1 <= 1.0) || !(p2 >= 0.0 && p2 <= 1.0))
        throw domain_error("proportions must lie in [0,1]");
    gap_stat g;
    g.p1 = p1;
    g.p2 = p2;
    double m = std::max(p1, p2);
    if (m == 0.0) return g;  // both zero: no difference to normalize
    g.signed_gap = (p1 - p2) / m;
    g.gap = std::abs(g.signed_gap);
    return g;
}

struct chi_square_stat {
    double chi2 = 0;
    int df = 1;
    double p_raw = 1;
    double p_adjusted = std::numeric_limits<double>::quiet_NaN();  // NaN until a family adjustment runs
    double phi = 0;  // bias-corrected
    double phi_ci_lower = 0;
    double phi_ci_upper = 0;
    long long n = 0;

    bool has_adjusted() const { return !std::isnan(p_adjusted); }
    double p_for_reporting() const { return has_adjusted() ? p_adjusted : p_raw; }
};

// Noncentrality interval for a df=1 chi-squared observation: [lambda_lo,
// lambda_hi] such that the observed statistic sits at the (1-level)/2 tail of
// each bounding noncentral distribution. Bounds floor at 0 when no root
// exists (the Steiger convention); note cdf(x=0 | lambda) = 0 for every
// lambda, so a zero statistic yields (0, 0).
inline std::pair<double, double> ncp_interval(double chi2, double level = 0.95) {
    if (!(chi2 >= 0.0)) throw domain_error("chi2 must be >= 0");
    if (!(level > 0.0 && level < 1.0)) throw domain_error("level must lie in (0,1)");
    const double alpha = 1.0 - level;

    auto cdf_at = [&](double lambda) {
        if (lambda <= 0.0) return boost::math::cdf(boost::math::chi_squared(1.0), chi2);
        return boost::math::cdf(boost::math::non_central_chi_squared(1.0, lambda), chi2);
    };

    auto solve = [&](double target) {
        // cdf_at is strictly decreasing in lambda, from cdf_at(0) toward 0.
        double hi = std::max(chi2 * 2.0, 4.0);
        int doublings = 0;
        while (cdf_at(hi) > target) {
            hi *= 2.0;
            if (++doublings > 200)
                throw convergence_error("noncentrality bracket did not close at level " +
                                        std::to_string(target));
        }
        double lo = 0.0;
        for (int i = 0; i < 200 && (hi - lo) > 1e-12 * std::max(1.0, hi); ++i) {
            double mid = 0.5 * (lo + hi);
            (cdf_at(mid) > target ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    };

    double central = cdf_at(0.0);
    double lambda_lo = central <= 1.0 - alpha / 2.0 ? 0.0 : solve(1.0 - alpha / 2.0);
    double lambda_hi = central < alpha / 2.0 ? 0.0 : solve(alpha / 2.0);
    return {lambda_lo, lambda_hi};
}

// 95% CI for the bias-corrected phi. The noncentrality bounds get the same
// bias correction as phi itself: bound = sqrt(max(0, lambda/n - 1/(n-1))).
// This transform reproduces the reference result tables cell-for-cell where
// the uncorrected sqrt(lambda/n) does not.
inline std::pair<double, double> phi_ci(double chi2, long long n, double level = 0.95) {
    if (n <= 1) throw domain_error("phi_ci requires n > 1");
    auto [lambda_lo, lambda_hi] = ncp_interval(chi2, level);
    auto corrected = [&](double lambda) {
        double nn = static_cast<double>(n);
        return std::sqrt(std::max(0.0, lambda / nn - 1.0 / (nn - 1.0)));
    };
    return {corrected(lambda_lo), corrected(lambda_hi)};
}

// Pearson chi-squared without continuity correction, df = 1, with
// bias-corrected phi = sqrt(max(0, chi2/N - 1/(N-1))). These are the
// conventions that reproduce the reference result tables from raw counts.
inline chi_square_stat chi_square(const contingency_table& t) {
    if (t.a < 0 || t.b < 0 || t.c < 0 || t.d < 0)
        throw domain_error("contingency counts must be non-negative");
    const double r1 = static_cast<double>(t.a + t.b);
    const double r2 = static_cast<double>(t.c + t.d);
    const double c1 = static_cast<double>(t.a + t.c);
    const double c2 = static_cast<double>(t.b + t.d);
    if (r1 == 0 || r2 == 0 || c1 == 0 || c2 == 0)
        throw empty_margin("contingency table has an empty margin");

    chi_square_stat s;
    s.n = t.n();
    const double nn = static_cast<double>(s.n);
    const double diff = static_cast<double>(t.a) * static_cast<double>(t.d) -
                        static_cast<double>(t.b) * static_cast<double>(t.c);
    s.chi2 = nn * diff * diff / (r1 * r2 * c1 * c2);
    s.p_raw = boost::math::cdf(boost::math::complement(boost::math::chi_squared(1.0), s.chi2));
    s.phi = std::sqrt(std::max(0.0, s.chi2 / nn - 1.0 / (nn - 1.0)));
    std::tie(s.phi_ci_lower, s.phi_ci_upper) = phi_ci(s.chi2, s.n);
    return s;
}

enum class p_adjust_method { bh, bonferroni, holm };

inline std::string_view to_string(p_adjust_method m) {
    switch (m) {
        case p_adjust_method::bh: return "bh";
        case p_adjust_method::bonferroni: return "bonferroni";
        case p_adjust_method::holm: return "holm";
    }
    return "";
}

inline p_adjust_method parse_p_adjust_method(std::string_view s) {
    if (s == "bh") return p_adjust_method::bh;
    if (s == "bonferroni") return p_adjust_method::bonferroni;
    if (s == "holm") return p_adjust_method::holm;
    throw parse_error("unknown p-adjust method: " + std::string(s));
}

inline std::vector<double> adjust_p(const std::vector<double>& ps,
                                    p_adjust_method method = p_adjust_method::bh) {
    for (double p : ps)
        if (!(p >= 0.0 && p <= 1.0)) throw domain_error("p-values must lie in [0,1]");
    const std::size_t m = ps.size();
    std::vector<double> adj(m);
    if (m == 0) return adj;

    if (method == p_adjust_method::bonferroni) {
        for (std::size_t i = 0; i < m; ++i) adj[i] = std::min(1.0, ps[i] * static_cast<double>(m));
        return adj;
    }

    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return ps[x] < ps[y]; });

    if (method == p_adjust_method::holm) {
        // step-down: running max of (m-k)*p over ascending p
        double running = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            double v = std::min(1.0, static_cast<double>(m - k) * ps[order[k]]);
            running = std::max(running, v);
            adj[order[k]] = running;
        }
        return adj;
    }

    // Benjamini-Hochberg step-up: running min of p*m/k over descending p.
    // The factor is divided first so the rank-m term is exactly p*1.0,
    // keeping adjusted values from rounding below the raw p.
    double running = 1.0;
    for (std::size_t k = m; k-- > 0;) {
        double v = std::min(
            1.0, ps[order[k]] * (static_cast<double>(m) / static_cast<double>(k + 1)));
        running = std::min(running, v);
        adj[order[k]] = running;
    }
    return adj;
}

struct correlation_stat {
    double r = 0;
    std::size_t n_scenarios = 0;
};

inline correlation_stat pearson_r(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size()) throw domain_error("series lengths differ");
    if (xs.size() < 2) throw insufficient_data("correlation needs at least 2 points");
    const std::size_t n = xs.size();
    double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(n);
    double my = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(n);
    double sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double dx = xs[i] - mx;
        double dy = ys[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw zero_variance("a series has zero variance");
    correlation_stat c;
    c.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    c.n_scenarios = n;
    return c;
}

// Per-scenario gap pairs feeding the correlation can divide by max (the gap
// formula) or use the raw proportion difference; the audit's formula is the
// former, the latter is kept selectable since the convention is ambiguous.
enum class gap_convention { max_normalized, raw_difference };

inline std::string_view to_string(gap_convention g) {
    return g == gap_convention::max_normalized ? "max_normalized" : "raw_difference";
}

inline gap_convention parse_gap_convention(std::string_view s) {
    if (s == "max" || s == "max_normalized") return gap_convention::max_normalized;
    if (s == "raw" || s == "raw_difference") return gap_convention::raw_difference;
    throw parse_error("unknown gap convention: " + std::string(s));
}

struct pair_counts {
    std::array<long long, 4> count_a{};  // indexed by condition_kind
    std::array<long long, 4> count_b{};
    long long invalid = 0;
    // per-scenario valid counts, for the correlation series
    std::map<std::string, std::array<long long, 4>> scenario_a;
    std::map<std::string, std::array<long long, 4>> scenario_b;

    long long total(condition_kind k) const {
        auto i = static_cast<std::size_t>(k);
        return count_a[i] + count_b[i];
    }
};

inline pair_counts aggregate_pair(const std::vector<trial_record>& records,
                                  std::string_view model, std::string_view stereotype_id) {
    pair_counts pc;
    for (const auto& r : records) {
        if (r.key.model != model || r.stereotype_id != stereotype_id) continue;
        if (r.dec == decision::INVALID) {
            ++pc.invalid;
            continue;
        }
        auto i = static_cast<std::size_t>(r.key.cond.kind);
        auto& scen = (r.dec == decision::A ? pc.scenario_a : pc.scenario_b)[r.key.scenario_id];
        (r.dec == decision::A ? pc.count_a : pc.count_b)[i] += 1;
        scen[i] += 1;
        pc.scenario_b.try_emplace(r.key.scenario_id);  // keep both maps keyed alike
        pc.scenario_a.try_emplace(r.key.scenario_id);
    }
    return pc;
}

struct stat_bundle {
    std::string model;
    std::string stereotype_id;
    contingency_table at_na_table, st_ast_table;
    gap_stat at_na_gap, st_ast_gap;
    chi_square_stat at_na, st_ast;
    std::optional<correlation_stat> r;  // missing when undefined
    std::string r_note;                 // why r is missing, or the gap convention used
    long long invalid_trials = 0;
};

struct summarize_options {
    gap_convention convention = gap_convention::max_normalized;
    const corpus* corp = nullptr;  // for option labels, when available
};

// Aggregates one (model, stereotype) pair's valid trials into the AT-NA and
// ST-AST tables, pooled gaps, chi-squared stats, and the per-scenario
// Pearson r (missing when fewer than 2 scenarios have complete data or a
// series is constant).
inline stat_bundle summarize_pair(const std::vector<trial_record>& records, std::string_view model,
                                  std::string_view stereotype_id,
                                  const summarize_options& opts = {}) {
    pair_counts pc = aggregate_pair(records, model, stereotype_id);
    for (condition_kind k : all_condition_kinds)
        if (pc.total(k) == 0)
            throw insufficient_data("no valid " + std::string(to_string(k)) + " trials for " +
                                    std::string(model) + "/" + std::string(stereotype_id));

    stat_bundle b;
    b.model = model;
    b.stereotype_id = stereotype_id;
    b.invalid_trials = pc.invalid;

    std::string opt_a = "A", opt_b = "B";
    if (opts.corp && opts.corp->has_stereotype(stereotype_id)) {
        const auto& st = opts.corp->find_stereotype(stereotype_id);
        opt_a = st.option_a_label;
        opt_b = st.option_b_label;
    }

    auto idx = [](condition_kind k) { return static_cast<std::size_t>(k); };
    auto make_table = [&](condition_kind k1, condition_kind k2) {
        contingency_table t;
        t.a = pc.count_a[idx(k1)];
        t.b = pc.count_b[idx(k1)];
        t.c = pc.count_a[idx(k2)];
        t.d = pc.count_b[idx(k2)];
        t.cond1_label = to_string(k1);
        t.cond2_label = to_string(k2);
        t.option_a_label = opt_a;
        t.option_b_label = opt_b;
        return t;
    };

    b.at_na_table = make_table(condition_kind::AT, condition_kind::NA);
    b.st_ast_table = make_table(condition_kind::ST, condition_kind::AST);
    b.at_na_gap = compute_gap(b.at_na_table.p1(), b.at_na_table.p2());
    b.st_ast_gap = compute_gap(b.st_ast_table.p1(), b.st_ast_table.p2());
    b.at_na = chi_square(b.at_na_table);
    b.st_ast = chi_square(b.st_ast_table);

    // correlation over per-scenario signed gaps, both oriented on option A
    std::vector<double> xs, ys;  // x: ST-AST, y: AT-NA
    for (const auto& [scen_id, a_counts] : pc.scenario_a) {
        const auto& b_counts = pc.scenario_b.at(scen_id);
        auto prop = [&](condition_kind k) -> std::optional<double> {
            long long va = a_counts[idx(k)], vb = b_counts[idx(k)];
            if (va + vb == 0) return std::nullopt;
            return static_cast<double>(va) / static_cast<double>(va + vb);
        };
        auto pst = prop(condition_kind::ST), past = prop(condition_kind::AST);
        auto pat = prop(condition_kind::AT), pna = prop(condition_kind::NA);
        if (!pst || !past || !pat || !pna) continue;
        if (opts.convention == gap_convention::max_normalized) {
            xs.push_back(compute_gap(*pst, *past).signed_gap);
            ys.push_back(compute_gap(*pat, *pna).signed_gap);
        } else {
            xs.push_back(*pst - *past);
            ys.push_back(*pat - *pna);
        }
    }
    try {
        b.r = pearson_r(xs, ys);
        b.r_note = std::string("convention=") + std::string(to_string(opts.convention));
    } catch (const insufficient_data&) {
        b.r_note = "r missing: fewer than 2 scenarios with complete per-condition data";
    } catch (const zero_variance&) {
        b.r_note = "r missing: per-scenario gap series has zero variance";
    }
    return b;
}

// Adjusts raw p-values across bundles, one family per analysis type (for a
// full six-model audit: 72 AT-NA tests and 72 ST-AST tests).
inline void apply_family_adjustment(std::vector<stat_bundle>& bundles,
                                    p_adjust_method method = p_adjust_method::bh) {
    std::vector<double> at_na_ps, st_ast_ps;
    at_na_ps.reserve(bundles.size());
    st_ast_ps.reserve(bundles.size());
    for (const auto& b : bundles) {
        at_na_ps.push_back(b.at_na.p_raw);
        st_ast_ps.push_back(b.st_ast.p_raw);
    }
    auto at_na_adj = adjust_p(at_na_ps, method);
    auto st_ast_adj = adjust_p(st_ast_ps, method);
    for (std::size_t i = 0; i < bundles.size(); ++i) {
        bundles[i].at_na.p_adjusted = at_na_adj[i];
        bundles[i].st_ast.p_adjusted = st_ast_adj[i];
    }
}

}  // namespace biasaudit
