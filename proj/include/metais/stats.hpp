#ifndef METAIS_STATS_HPP
#define METAIS_STATS_HPP

#include <span>
#include <string>

/**
 * @file stats.hpp
 * @brief Significance tests used to compare meta selection with a reference.
 *
 * Verdicts read from the first sample's point of view: '+' when it is
 * significantly better (larger), '-' when significantly worse, '=' otherwise.
 */

namespace metais::eval {

enum class Verdict { better, equal, worse };

char symbol(Verdict v);

struct WelchResult {
    double t = 0.0;
    double df = 0.0;
    double p_value = 1.0;  // two-sided
    Verdict verdict = Verdict::equal;
};

/// Welch's unequal-variance t-test (two-sided). Each sample needs >= 2 values.
WelchResult welch_test(std::span<const double> a, std::span<const double> b, double alpha = 0.05);

struct WilcoxonResult {
    std::size_t n = 0;        // non-zero differences
    double r_plus = 0.0;      // rank sum of positive differences
    double r_minus = 0.0;
    double p_greater = 1.0;   // H1: a > b
    double p_less = 1.0;      // H1: a < b
    bool exact = false;
    Verdict verdict = Verdict::equal;
};

/**
 * Paired Wilcoxon signed-rank test on a - b with one-sided p-values in both
 * directions. Zero differences are dropped and tied magnitudes get midranks.
 * p-values follow the usual reference behavior (scipy's defaults):
 *   - no ties and no zeros, n <= 50: exact null distribution;
 *   - ties or zeros, at most 13 pairs: enumeration of all sign flips;
 *   - otherwise: normal approximation, tie-corrected variance, no continuity
 *     correction.
 * No non-zero difference means verdict '='.
 */
WilcoxonResult wilcoxon_test(std::span<const double> a, std::span<const double> b, double alpha = 0.05);

} // namespace metais::eval

#endif
