#ifndef METAIS_TESTS_ORACLES_HPP
#define METAIS_TESTS_ORACLES_HPP

// Literal, quadratic re-implementations used as test oracles. They share only
// the distance definition and the (distance, index) neighbor order with the
// library; no library search structure or helper is used.

#include "metais/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <utility>
#include <vector>

namespace oracle {

using metais::data::Dataset;

inline double dist(const Dataset& d, std::size_t a, std::size_t b) {
    const std::size_t m = d.num_features();
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        const double t = d.features(a, j) - d.features(b, j);
        s += t * t;
    }
    return s / static_cast<double>(m);
}

struct Nb {
    std::size_t index;
    double distance;
};

// Every candidate j != i accepted by `ok`, ascending by (distance, index).
template <typename Ok>
std::vector<Nb> sorted_others(const Dataset& d, std::size_t i, Ok ok) {
    std::vector<Nb> out;
    for (std::size_t j = 0; j < d.size(); ++j) {
        if (j != i && ok(j)) {
            out.push_back({j, dist(d, i, j)});
        }
    }
    std::sort(out.begin(), out.end(), [](const Nb& a, const Nb& b) {
        return a.distance < b.distance || (a.distance == b.distance && a.index < b.index);
    });
    return out;
}

// Plurality over the first k entries; ties go to the class seen first.
inline int vote(const Dataset& d, const std::vector<Nb>& list, std::size_t k) {
    const std::size_t len = std::min(k, list.size());
    if (len == 0) {
        return -1;
    }
    std::map<int, std::size_t> votes;
    std::vector<int> first_seen;
    for (std::size_t p = 0; p < len; ++p) {
        const int c = d.labels[list[p].index];
        if (votes[c]++ == 0) {
            first_seen.push_back(c);
        }
    }
    int best = first_seen.front();
    for (int c : first_seen) {
        if (votes[c] > votes[best]) {
            best = c;
        }
    }
    return best;
}

inline std::vector<bool> enn(const Dataset& d, std::size_t k) {
    std::vector<bool> keep(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        keep[i] = vote(d, sorted_others(d, i, [](std::size_t) { return true; }), k) == d.labels[i];
    }
    return keep;
}

inline std::vector<Nb> first(std::vector<Nb> v, std::size_t count) {
    if (v.size() > count) {
        v.resize(count);
    }
    return v;
}

// Drop3: ENN survivors S0; visit S0 by descending nearest-enemy distance in S0
// (no enemy last, ties by index). The associates of p are all a in S0 whose
// k+1 nearest alive points (other than a) include p. p goes when at least as
// many associates are classified correctly without p as with it.
inline std::vector<bool> drop3(const Dataset& d, std::size_t k) {
    const std::size_t n = d.size();
    const auto s0 = enn(d, k);
    std::vector<bool> alive = s0;
    std::vector<double> ne(n, std::numeric_limits<double>::infinity());
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < n; ++i) {
        if (!s0[i]) {
            continue;
        }
        order.push_back(i);
        for (std::size_t j = 0; j < n; ++j) {
            if (s0[j] && d.labels[j] != d.labels[i]) {
                ne[i] = std::min(ne[i], dist(d, i, j));
            }
        }
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const bool ia = std::isinf(ne[a]);
        const bool ib = std::isinf(ne[b]);
        if (ia != ib) {
            return ib;
        }
        if (!ia && ne[a] != ne[b]) {
            return ne[a] > ne[b];
        }
        return a < b;
    });
    for (std::size_t p : order) {
        std::size_t with = 0;
        std::size_t without = 0;
        for (std::size_t a = 0; a < n; ++a) {
            if (!s0[a] || a == p) {
                continue;
            }
            const auto list = first(sorted_others(d, a, [&](std::size_t j) { return alive[j]; }), k + 1);
            const bool has_p = std::any_of(list.begin(), list.end(), [p](const Nb& nb) { return nb.index == p; });
            if (!has_p) {
                continue;
            }
            with += vote(d, list, k) == d.labels[a] ? 1 : 0;
            std::vector<Nb> minus;
            for (const auto& nb : list) {
                if (nb.index != p) {
                    minus.push_back(nb);
                }
            }
            without += vote(d, minus, k) == d.labels[a] ? 1 : 0;
        }
        if (without >= with) {
            alive[p] = false;
        }
    }
    return alive;
}

// ICF on the ENN survivors: remove, all at once, every t whose local set is
// larger than the number of local sets containing t; repeat until stable.
inline std::vector<bool> icf(const Dataset& d, std::size_t k) {
    const std::size_t n = d.size();
    auto t = enn(d, k);
    while (true) {
        std::vector<std::set<std::size_t>> ls(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (!t[i]) {
                continue;
            }
            double ne = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < n; ++j) {
                if (t[j] && d.labels[j] != d.labels[i]) {
                    ne = std::min(ne, dist(d, i, j));
                }
            }
            for (std::size_t j = 0; j < n; ++j) {
                if (t[j] && j != i && d.labels[j] == d.labels[i] && dist(d, i, j) < ne) {
                    ls[i].insert(j);
                }
            }
        }
        std::vector<bool> next = t;
        bool changed = false;
        for (std::size_t x = 0; x < n; ++x) {
            if (!t[x]) {
                continue;
            }
            std::size_t reachable = 0;
            for (std::size_t y = 0; y < n; ++y) {
                reachable += (t[y] && ls[y].count(x)) ? 1 : 0;
            }
            if (ls[x].size() > reachable) {
                next[x] = false;
                changed = true;
            }
        }
        if (!changed) {
            return t;
        }
        t = next;
    }
}

// Hit-miss network over `in`: from every member one edge to its nearest other
// member of each class.
struct Network {
    std::vector<std::size_t> hit, miss;
    std::vector<std::vector<Nb>> edges;
};

inline Network network(const Dataset& d, const std::vector<bool>& in) {
    const std::size_t n = d.size();
    Network net{std::vector<std::size_t>(n, 0), std::vector<std::size_t>(n, 0), std::vector<std::vector<Nb>>(n)};
    for (std::size_t x = 0; x < n; ++x) {
        if (!in[x]) {
            continue;
        }
        for (std::size_t c = 0; c < d.num_classes(); ++c) {
            const auto cand = sorted_others(
                d, x, [&](std::size_t j) { return in[j] && d.labels[j] == static_cast<int>(c); });
            if (cand.empty()) {
                continue;
            }
            net.edges[x].push_back(cand.front());
            if (d.labels[cand.front().index] == d.labels[x]) {
                ++net.hit[cand.front().index];
            } else {
                ++net.miss[cand.front().index];
            }
        }
    }
    return net;
}

inline Nb overall_nearest(const std::vector<Nb>& edges) {
    Nb best = edges.front();
    for (const auto& e : edges) {
        if (e.distance < best.distance || (e.distance == best.distance && e.index < best.index)) {
            best = e;
        }
    }
    return best;
}

inline std::vector<bool> hmne(const Dataset& d, const std::vector<bool>& in) {
    const std::size_t n = d.size();
    const auto net = network(d, in);
    std::vector<bool> flag(n, false);
    for (std::size_t x = 0; x < n; ++x) {
        flag[x] = in[x] && net.miss[x] > net.hit[x];
    }
    std::vector<bool> unflag(n, false);
    for (std::size_t x = 0; x < n; ++x) {
        if (!flag[x]) {
            continue;
        }
        // Nearest member of some unflagged same-class y, beating all of y's misses.
        for (std::size_t y = 0; y < n; ++y) {
            if (!in[y] || flag[y] || d.labels[y] != d.labels[x] || net.edges[y].empty()) {
                continue;
            }
            const Nb nn = overall_nearest(net.edges[y]);
            if (nn.index != x) {
                continue;
            }
            bool beats = true;
            for (const auto& e : net.edges[y]) {
                if (d.labels[e.index] != d.labels[y] && !(nn.distance < e.distance)) {
                    beats = false;
                }
            }
            unflag[x] = unflag[x] || beats;
        }
        if (net.hit[x] > 0 && !net.edges[x].empty() && d.labels[overall_nearest(net.edges[x]).index] == d.labels[x]) {
            unflag[x] = true;
        }
    }
    std::vector<bool> out(n, false);
    for (std::size_t x = 0; x < n; ++x) {
        out[x] = in[x] && (!flag[x] || unflag[x]);
    }
    for (std::size_t c = 0; c < d.num_classes(); ++c) {
        bool any = false;
        for (std::size_t x = 0; x < n; ++x) {
            any = any || (out[x] && d.labels[x] == static_cast<int>(c));
        }
        if (!any) {
            for (std::size_t x = 0; x < n; ++x) {
                if (in[x] && d.labels[x] == static_cast<int>(c)) {
                    out[x] = true;
                }
            }
        }
    }
    return out;
}

// Leave-one-out 1-NN accuracy over all of d with reference set `in`.
inline double loo_acc(const Dataset& d, const std::vector<bool>& in) {
    std::size_t ok = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        const auto nb = sorted_others(d, i, [&](std::size_t j) { return in[j]; });
        ok += (!nb.empty() && d.labels[nb.front().index] == d.labels[i]) ? 1 : 0;
    }
    return static_cast<double>(ok) / static_cast<double>(d.size());
}

inline std::vector<bool> hmnei(const Dataset& d) {
    std::vector<bool> s(d.size(), true);
    double acc = loo_acc(d, s);
    while (true) {
        const auto next = hmne(d, s);
        if (next == s) {
            return s;
        }
        const double a = loo_acc(d, next);
        if (a < acc) {
            return s;
        }
        s = next;
        acc = a;
    }
}

// In-degrees of the within-class (same label) or between-class k-NN graph on `in`.
inline std::vector<std::size_t> in_degree(const Dataset& d, const std::vector<bool>& in, std::size_t k, bool within) {
    std::vector<std::size_t> deg(d.size(), 0);
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (!in[i]) {
            continue;
        }
        const auto nb = first(sorted_others(d, i,
                                            [&](std::size_t j) {
                                                return in[j] && ((d.labels[j] == d.labels[i]) == within);
                                            }),
                              k);
        for (const auto& e : nb) {
            ++deg[e.index];
        }
    }
    return deg;
}

inline std::vector<double> ccis_scores(const Dataset& d, std::size_t k) {
    const std::vector<bool> all(d.size(), true);
    const auto w = in_degree(d, all, k, true);
    const auto b = in_degree(d, all, k, false);
    const double sw = static_cast<double>(std::accumulate(w.begin(), w.end(), std::size_t{0}));
    const double sb = static_cast<double>(std::accumulate(b.begin(), b.end(), std::size_t{0}));
    auto kdiv = [](double p, double q) { return p > 0 ? p * std::log(p / ((p + q) / 2.0)) : 0.0; };
    std::vector<double> s(d.size());
    for (std::size_t a = 0; a < d.size(); ++a) {
        const double pw = sw > 0 ? static_cast<double>(w[a]) / sw : 0.0;
        const double pb = sb > 0 ? static_cast<double>(b[a]) / sb : 0.0;
        s[a] = kdiv(pw, pb) - kdiv(pb, pw);
    }
    return s;
}

// 1-NN errors over all of d with reference set `in` (a member may match itself).
inline std::size_t errors(const Dataset& d, const std::vector<bool>& in) {
    std::size_t e = 0;
    for (std::size_t a = 0; a < d.size(); ++a) {
        std::size_t best = d.size();
        double bd = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < d.size(); ++j) {
            if (in[j]) {
                const double dj = dist(d, a, j);
                if (dj < bd) {
                    bd = dj;
                    best = j;
                }
            }
        }
        e += (best == d.size() || d.labels[best] != d.labels[a]) ? 1 : 0;
    }
    return e;
}

inline std::set<int> classes(const Dataset& d, const std::vector<bool>& in) {
    std::set<int> s;
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (in[i]) {
            s.insert(d.labels[i]);
        }
    }
    return s;
}

inline std::vector<bool> ccis(const Dataset& d, std::size_t k) {
    const std::size_t n = d.size();
    const auto score = ccis_scores(d, k);
    std::size_t loo = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto nb = sorted_others(d, i, [](std::size_t) { return true; });
        loo += d.labels[nb.front().index] != d.labels[i] ? 1 : 0;
    }
    const std::vector<bool> all(n, true);
    const auto all_classes = classes(d, all);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return score[a] > score[b] || (score[a] == score[b] && a < b); });
    std::vector<bool> s(n, false);
    for (std::size_t a : order) {
        s[a] = true;
        if (classes(d, s) == all_classes && errors(d, s) <= loo) {
            break;
        }
    }
    while (true) {
        const auto b = in_degree(d, s, k, false);
        std::vector<bool> t(n, false);
        for (std::size_t i = 0; i < n; ++i) {
            t[i] = s[i] && b[i] > 0;
        }
        if (t == s || classes(d, t) != classes(d, s) || errors(d, t) > errors(d, s)) {
            return s;
        }
        s = t;
    }
}

// k nearest others of i, self excluded.
inline std::vector<Nb> knn(const Dataset& d, std::size_t i, std::size_t k) {
    return first(sorted_others(d, i, [](std::size_t) { return true; }), k);
}

// Midpoint rule on a fine uniform grid of the piecewise-linear function
// through `pts` (sorted by x, distinct x, starting at 0), integrated from 0 to
// `limit` or to the last point, whichever comes first.
inline double riemann(const std::vector<std::pair<double, double>>& pts, double limit, std::size_t steps = 200000) {
    limit = std::min(limit, pts.back().first);
    const double h = limit / static_cast<double>(steps);
    std::size_t seg = 1;
    double s = 0.0;
    for (std::size_t i = 0; i < steps; ++i) {
        const double x = (static_cast<double>(i) + 0.5) * h;
        while (seg + 1 < pts.size() && x > pts[seg].first) {
            ++seg;
        }
        const double t = (x - pts[seg - 1].first) / (pts[seg].first - pts[seg - 1].first);
        s += pts[seg - 1].second + t * (pts[seg].second - pts[seg - 1].second);
    }
    return s * h;
}

} // namespace oracle

#endif
