#include "metais/stats.hpp"

#include "metais/common.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace metais::eval {

char symbol(Verdict v) {
    switch (v) {
    case Verdict::better:
        return '+';
    case Verdict::worse:
        return '-';
    default:
        return '=';
    }
}

namespace {

double mean(std::span<const double> v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_variance(std::span<const double> v, double m) {
    double ss = 0.0;
    for (double x : v) {
        ss += (x - m) * (x - m);
    }
    return ss / static_cast<double>(v.size() - 1);
}

double normal_sf(double z) {
    return 0.5 * std::erfc(z / std::sqrt(2.0));
}

} // namespace

WelchResult welch_test(std::span<const double> a, std::span<const double> b, double alpha) {
    if (a.size() < 2 || b.size() < 2) {
        throw InvalidArgument("welch_test: each sample needs at least 2 values");
    }
    WelchResult r;
    const double ma = mean(a);
    const double mb = mean(b);
    const double va = sample_variance(a, ma) / static_cast<double>(a.size());
    const double vb = sample_variance(b, mb) / static_cast<double>(b.size());
    const double se2 = va + vb;
    if (se2 == 0.0) {
        // Two constant samples: decided by the means alone.
        r.t = ma == mb ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), ma - mb);
        r.df = static_cast<double>(a.size() + b.size() - 2);
        r.p_value = ma == mb ? 1.0 : 0.0;
    } else {
        r.t = (ma - mb) / std::sqrt(se2);
        r.df = se2 * se2 /
               (va * va / static_cast<double>(a.size() - 1) + vb * vb / static_cast<double>(b.size() - 1));
        const boost::math::students_t dist(r.df);
        r.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
        r.p_value = std::min(1.0, r.p_value);
    }
    if (r.p_value < alpha) {
        r.verdict = ma > mb ? Verdict::better : Verdict::worse;
    }
    return r;
}

WilcoxonResult wilcoxon_test(std::span<const double> a, std::span<const double> b, double alpha) {
    if (a.size() != b.size()) {
        throw InvalidArgument("wilcoxon_test: samples must be paired");
    }
    WilcoxonResult r;
    std::vector<double> d;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] - b[i] != 0.0) {
            d.push_back(a[i] - b[i]);
        }
    }
    const std::size_t zeros = a.size() - d.size();
    r.n = d.size();
    if (r.n == 0) {
        return r;
    }
    // Midranks of |d|.
    const std::size_t n = d.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) { return std::abs(d[x]) < std::abs(d[y]); });
    std::vector<double> rank(n);
    bool ties = false;
    double tie_term = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && std::abs(d[idx[j]]) == std::abs(d[idx[i]])) {
            ++j;
        }
        const double t = static_cast<double>(j - i);
        if (j - i > 1) {
            ties = true;
            tie_term += t * t * t - t;
        }
        for (std::size_t q = i; q < j; ++q) {
            rank[idx[q]] = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        }
        i = j;
    }
    for (std::size_t i = 0; i < n; ++i) {
        (d[i] > 0 ? r.r_plus : r.r_minus) += rank[i];
    }

    const double nn = static_cast<double>(n);
    if (!ties && zeros == 0 && a.size() <= 50) {
        // counts[s] = number of sign patterns with positive rank sum s.
        const std::size_t max_sum = n * (n + 1) / 2;
        std::vector<double> counts(max_sum + 1, 0.0);
        counts[0] = 1.0;
        for (std::size_t v = 1; v <= n; ++v) {
            for (std::size_t s = max_sum; s >= v; --s) {
                counts[s] += counts[s - v];
            }
        }
        const double total = std::ldexp(1.0, static_cast<int>(n));
        const auto t = static_cast<std::size_t>(std::floor(r.r_plus));
        double ge = 0.0;
        double le = 0.0;
        for (std::size_t s = 0; s <= max_sum; ++s) {
            if (s >= t) {
                ge += counts[s];
            }
            if (s <= static_cast<std::size_t>(std::ceil(r.r_plus))) {
                le += counts[s];
            }
        }
        r.p_greater = ge / total;
        r.p_less = le / total;
        r.exact = true;
    } else if (a.size() <= 13) {
        // Every sign assignment of the non-zero differences is equally likely.
        const double tol = 1e-14 * std::max(1.0, r.r_plus);
        std::size_t ge = 0;
        std::size_t le = 0;
        const std::size_t patterns = std::size_t{1} << n;
        for (std::size_t mask = 0; mask < patterns; ++mask) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (mask & (std::size_t{1} << i)) {
                    s += rank[i];
                }
            }
            ge += s >= r.r_plus - tol ? 1 : 0;
            le += s <= r.r_plus + tol ? 1 : 0;
        }
        r.p_greater = static_cast<double>(ge) / static_cast<double>(patterns);
        r.p_less = static_cast<double>(le) / static_cast<double>(patterns);
        r.exact = true;
    } else {
        const double mn = nn * (nn + 1.0) / 4.0;
        const double se = std::sqrt(nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0);
        const double z = (r.r_plus - mn) / se;
        r.p_greater = normal_sf(z);
        r.p_less = normal_sf(-z);
    }
    if (r.p_greater < alpha) {
        r.verdict = Verdict::better;
    } else if (r.p_less < alpha) {
        r.verdict = Verdict::worse;
    }
    return r;
}

} // namespace metais::eval
