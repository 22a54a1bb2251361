// Computes the audit statistics for one published cell: the introverted
// stereotype under autism disclosure vs. no disclosure.

#include <iostream>

#include <biasaudit.hpp>

int main() {
    biasaudit::contingency_table disclosure_vs_none;
    disclosure_vs_none.a = 892;  // disclosed, chose "Decline"
    disclosure_vs_none.b = 308;  // disclosed, chose "Join"
    disclosure_vs_none.c = 186;  // no disclosure, chose "Decline"
    disclosure_vs_none.d = 1014;

    biasaudit::chi_square_stat s = biasaudit::chi_square(disclosure_vs_none);
    biasaudit::gap_stat g =
        biasaudit::compute_gap(disclosure_vs_none.p1(), disclosure_vs_none.p2());

    std::cout << "gap:  " << biasaudit::round_half_even(g.gap, 2) << "\n";
    std::cout << "chi2: " << biasaudit::round_half_even(s.chi2, 2) << "\n";
    std::cout << "phi:  " << biasaudit::round_half_even(s.phi, 3) << " (95% CI "
              << biasaudit::round_half_even(s.phi_ci_lower, 3) << " to "
              << biasaudit::round_half_even(s.phi_ci_upper, 3) << ")\n";
    return 0;
}
