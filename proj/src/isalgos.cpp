#include "metais/isalgos.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>

namespace metais::selection {

using nng::Neighbor;

std::size_t SelectionMask::kept() const {
    return static_cast<std::size_t>(std::count(keep.begin(), keep.end(), true));
}

std::vector<std::size_t> SelectionMask::kept_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < keep.size(); ++i) {
        if (keep[i]) {
            out.push_back(i);
        }
    }
    return out;
}

ReductionStats reduction_stats(const SelectionMask& mask) {
    ReductionStats s;
    s.n = mask.size();
    s.kept = mask.kept();
    s.reduction_rate = s.n == 0 ? 0.0 : static_cast<double>(s.n - s.kept) / static_cast<double>(s.n);
    return s;
}

int knn_vote(std::span<const Neighbor> neighbors, std::size_t k, std::span<const int> labels) {
    const std::size_t len = std::min(k, neighbors.size());
    if (len == 0) {
        return -1;
    }
    // (class, votes, first position); classes are few, a flat list is enough.
    struct Tally {
        int cls;
        std::size_t votes;
        std::size_t first;
    };
    std::vector<Tally> tally;
    for (std::size_t p = 0; p < len; ++p) {
        const int c = labels[neighbors[p].index];
        auto it = std::find_if(tally.begin(), tally.end(), [c](const Tally& t) { return t.cls == c; });
        if (it == tally.end()) {
            tally.push_back({c, 1, p});
        } else {
            ++it->votes;
        }
    }
    const Tally* best = &tally.front();
    for (const auto& t : tally) {
        if (t.votes > best->votes || (t.votes == best->votes && t.first < best->first)) {
            best = &t;
        }
    }
    return best->cls;
}

namespace {

void require_k(const data::Dataset& d, std::size_t k) {
    if (k < 1) {
        throw InvalidArgument("k must be at least 1");
    }
    if (d.size() <= k) {
        throw InvalidArgument("need more than k=" + std::to_string(k) + " instances, got " + std::to_string(d.size()));
    }
}

SelectionMask make_mask(std::size_t n, std::span<const std::size_t> kept, std::string name, std::size_t k) {
    SelectionMask m;
    m.keep.assign(n, false);
    for (auto i : kept) {
        m.keep[i] = true;
    }
    m.algorithm = std::move(name);
    m.k = k;
    return m;
}

std::vector<std::size_t> enn_survivors(const data::Dataset& d, std::size_t k) {
    const auto g = nng::build_graph(d, k);
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (knn_vote(g.neighbors[i], k, d.labels) == d.labels[i]) {
            kept.push_back(i);
        }
    }
    return kept;
}

// Distance from each member to its nearest member of another class (+inf if none).
std::vector<double> nearest_enemy(const data::Dataset& d, const nng::KdTree& tree,
                                  std::span<const std::size_t> members) {
    std::vector<double> ne(d.size(), std::numeric_limits<double>::infinity());
    for (auto i : members) {
        const int own = d.labels[i];
        auto hit = tree.knn(d.features.row(i), 1, [&](std::size_t j) { return d.labels[j] != own; });
        if (!hit.empty()) {
            ne[i] = hit.front().distance;
        }
    }
    return ne;
}

// Number of `a` in A whose 1-NN in the indexed set has a different label.
std::size_t one_nn_errors(const data::Dataset& d, const nng::KdTree& tree) {
    std::size_t errors = 0;
    for (std::size_t a = 0; a < d.size(); ++a) {
        auto nb = tree.knn(d.features.row(a), 1);
        if (nb.empty() || d.labels[nb.front().index] != d.labels[a]) {
            ++errors;
        }
    }
    return errors;
}

} // namespace

SelectionMask enn(const data::Dataset& d, std::size_t k) {
    require_k(d, k);
    return make_mask(d.size(), enn_survivors(d, k), "enn", k);
}

// Drop3: ENN filter, then Drop2 on the survivors. Each survivor keeps a list of
// its k+1 nearest alive survivors; a removed point is replaced in its
// associates' lists by the next nearest alive point. Associate lists are never
// pruned, so removed points keep voting on later removals.
SelectionMask drop3(const data::Dataset& d, std::size_t k) {
    require_k(d, k);
    const auto s0 = enn_survivors(d, k);
    const std::size_t n = d.size();
    if (s0.empty()) {
        return make_mask(n, {}, "drop3", k);
    }
    const nng::KdTree tree(d.features, s0);
    std::vector<bool> alive(n, false);
    for (auto i : s0) {
        alive[i] = true;
    }
    std::vector<std::vector<Neighbor>> lists(n);
    std::vector<std::vector<std::uint32_t>> associates(n);
    for (auto i : s0) {
        lists[i] = tree.knn(d.features.row(i), k + 1, [i](std::size_t j) { return j != i; });
        for (const auto& nb : lists[i]) {
            associates[nb.index].push_back(static_cast<std::uint32_t>(i));
        }
    }
    const auto ne = nearest_enemy(d, tree, s0);
    std::vector<std::size_t> order(s0);
    // Descending nearest-enemy distance; points without an enemy go last.
    auto key = [&](std::size_t i) { return std::isinf(ne[i]) ? -1.0 : ne[i]; };
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key(a) > key(b); });

    std::vector<Neighbor> without;
    for (auto p : order) {
        std::size_t with_count = 0;
        std::size_t without_count = 0;
        for (auto a : associates[p]) {
            const auto& list = lists[a];
            if (knn_vote(list, k, d.labels) == d.labels[a]) {
                ++with_count;
            }
            without.clear();
            for (const auto& nb : list) {
                if (nb.index != p) {
                    without.push_back(nb);
                }
            }
            if (knn_vote(without, k, d.labels) == d.labels[a]) {
                ++without_count;
            }
        }
        if (without_count < with_count) {
            continue;
        }
        alive[p] = false;
        for (auto a : associates[p]) {
            auto& list = lists[a];
            list.erase(std::remove_if(list.begin(), list.end(), [p](const Neighbor& nb) { return nb.index == p; }),
                       list.end());
            auto next = tree.knn(d.features.row(a), 1, [&](std::size_t j) {
                if (!alive[j] || j == a) {
                    return false;
                }
                return std::none_of(list.begin(), list.end(), [j](const Neighbor& nb) { return nb.index == j; });
            });
            if (!next.empty()) {
                list.push_back(next.front());
                associates[next.front().index].push_back(a);
            }
        }
    }
    std::vector<std::size_t> kept;
    for (auto i : s0) {
        if (alive[i]) {
            kept.push_back(i);
        }
    }
    return make_mask(n, kept, "drop3", k);
}

LocalSetInfo local_sets(const data::Dataset& d, std::span<const std::size_t> members) {
    LocalSetInfo info;
    info.local_set_members.resize(d.size());
    if (members.empty()) {
        info.nearest_enemy_distance.assign(d.size(), std::numeric_limits<double>::infinity());
        return info;
    }
    const nng::KdTree tree(d.features, members);
    info.nearest_enemy_distance = nearest_enemy(d, tree, members);
    for (auto i : members) {
        const int own = d.labels[i];
        auto& ls = info.local_set_members[i];
        tree.for_each_within(
            d.features.row(i), info.nearest_enemy_distance[i],
            [&](std::size_t j) { return j != i && d.labels[j] == own; },
            [&](const Neighbor& nb) { ls.push_back(nb.index); });
        std::sort(ls.begin(), ls.end());
    }
    return info;
}

// ICF: ENN filter, then repeatedly drop every case whose local set is larger
// than the number of local sets it belongs to, all at once, until none qualify.
SelectionMask icf(const data::Dataset& d, std::size_t k) {
    require_k(d, k);
    auto current = enn_survivors(d, k);
    const std::size_t n = d.size();
    while (!current.empty()) {
        const auto info = local_sets(d, current);
        std::vector<std::size_t> covered_by(n, 0);
        for (auto i : current) {
            for (auto j : info.local_set_members[i]) {
                ++covered_by[j];
            }
        }
        std::vector<std::size_t> next;
        for (auto i : current) {
            if (!(info.local_set_members[i].size() > covered_by[i])) {
                next.push_back(i);
            }
        }
        if (next.size() == current.size()) {
            break;
        }
        current = std::move(next);
    }
    return make_mask(n, current, "icf", k);
}

namespace {

// Hit-miss network over `members`: from every member, one edge to its nearest
// other member of each class present.
struct HitMiss {
    std::vector<std::size_t> in_hit;
    std::vector<std::size_t> in_miss;
    // out[i] = edges of i, one per reachable class.
    std::vector<std::vector<Neighbor>> out;
};

HitMiss hit_miss_network(const data::Dataset& d, std::span<const std::size_t> members) {
    const std::size_t n = d.size();
    HitMiss h;
    h.in_hit.assign(n, 0);
    h.in_miss.assign(n, 0);
    h.out.resize(n);
    std::vector<std::vector<std::size_t>> by_class(d.num_classes());
    for (auto i : members) {
        by_class[static_cast<std::size_t>(d.labels[i])].push_back(i);
    }
    for (const auto& cls : by_class) {
        if (cls.empty()) {
            continue;
        }
        const nng::KdTree tree(d.features, cls);
        for (auto i : members) {
            auto nb = tree.knn(d.features.row(i), 1, [i](std::size_t j) { return j != i; });
            if (nb.empty()) {
                continue;
            }
            const auto t = nb.front().index;
            h.out[i].push_back(nb.front());
            if (d.labels[t] == d.labels[i]) {
                ++h.in_hit[t];
            } else {
                ++h.in_miss[t];
            }
        }
    }
    return h;
}

// Overall nearest edge of a vertex (its 1-NN among the members).
const Neighbor* nearest_edge(const std::vector<Neighbor>& edges) {
    const Neighbor* best = nullptr;
    for (const auto& e : edges) {
        if (best == nullptr || nng::closer(e, *best)) {
            best = &e;
        }
    }
    return best;
}

// 1-NN accuracy over all of d using `members` as reference, self excluded.
double loo_accuracy(const data::Dataset& d, std::span<const std::size_t> members) {
    if (members.empty()) {
        return 0.0;
    }
    const nng::KdTree tree(d.features, members);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        auto nb = tree.knn(d.features.row(i), 1, [i](std::size_t j) { return j != i; });
        if (!nb.empty() && d.labels[nb.front().index] == d.labels[i]) {
            ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(d.size());
}

} // namespace

// HMN-E rules, applied to the network over `members`:
//   R1 flag x when in_miss(x) > in_hit(x);
//   R3 unflag x when some unflagged y of the same class has x as its overall
//      nearest member, strictly closer than all of y's miss edges;
//   R4 unflag x when in_hit(x) > 0 and x's own nearest member shares its class;
//   R2 unflag every flagged member of a class that would otherwise vanish.
std::vector<std::size_t> hmne_step(const data::Dataset& d, std::span<const std::size_t> members) {
    const auto h = hit_miss_network(d, members);
    const std::size_t n = d.size();
    std::vector<bool> flagged(n, false);
    for (auto x : members) {
        flagged[x] = h.in_miss[x] > h.in_hit[x];
    }
    std::vector<bool> restore(n, false);
    for (auto y : members) {
        if (flagged[y]) {
            continue;
        }
        const Neighbor* nn = nearest_edge(h.out[y]);
        if (nn == nullptr || d.labels[nn->index] != d.labels[y] || !flagged[nn->index]) {
            continue;
        }
        bool strict = true;
        for (const auto& e : h.out[y]) {
            if (d.labels[e.index] != d.labels[y] && !(nn->distance < e.distance)) {
                strict = false;
            }
        }
        if (strict) {
            restore[nn->index] = true;
        }
    }
    for (auto x : members) {
        if (flagged[x] && h.in_hit[x] > 0) {
            const Neighbor* nn = nearest_edge(h.out[x]);
            if (nn != nullptr && d.labels[nn->index] == d.labels[x]) {
                restore[x] = true;
            }
        }
    }
    std::vector<std::size_t> survivors_per_class(d.num_classes(), 0);
    for (auto x : members) {
        if (!flagged[x] || restore[x]) {
            ++survivors_per_class[static_cast<std::size_t>(d.labels[x])];
        }
    }
    std::vector<std::size_t> out;
    for (auto x : members) {
        if (!flagged[x] || restore[x] || survivors_per_class[static_cast<std::size_t>(d.labels[x])] == 0) {
            out.push_back(x);
        }
    }
    return out;
}

SelectionMask hmnei(const data::Dataset& d) {
    const auto counts = d.class_counts();
    for (std::size_t c = 0; c < counts.size(); ++c) {
        if (counts[c] == 0) {
            throw InvalidArgument("hmnei: class '" + d.class_names[c] + "' has no members");
        }
    }
    if (d.size() < counts.size() + 1) {
        throw InvalidArgument("hmnei: need at least c+1 instances");
    }
    std::vector<std::size_t> current(d.size());
    std::iota(current.begin(), current.end(), std::size_t{0});
    double acc = loo_accuracy(d, current);
    while (true) {
        auto next = hmne_step(d, current);
        if (next == current) {
            break;
        }
        const double next_acc = loo_accuracy(d, next);
        if (next_acc < acc) {
            break;
        }
        current = std::move(next);
        acc = next_acc;
    }
    return make_mask(d.size(), current, "hmnei", 0);
}

namespace {

void require_ccis(const data::Dataset& d, std::size_t k) {
    if (k < 1) {
        throw InvalidArgument("k must be at least 1");
    }
    const auto counts = d.class_counts();
    std::size_t present = 0;
    for (std::size_t c = 0; c < counts.size(); ++c) {
        if (counts[c] == 1) {
            throw InvalidArgument("ccis: class '" + d.class_names[c] + "' has fewer than 2 members");
        }
        present += counts[c] > 0 ? 1 : 0;
    }
    if (present < 2) {
        throw InvalidArgument("ccis: need at least 2 classes");
    }
}

// In-degrees of the within-class (same label) or between-class (other label)
// k-NN graph restricted to `members`.
std::vector<std::size_t> class_conditional_in_degree(const data::Dataset& d, std::span<const std::size_t> members,
                                                     std::size_t k, bool within) {
    std::vector<std::size_t> in(d.size(), 0);
    if (members.empty()) {
        return in;
    }
    const nng::KdTree tree(d.features, members);
    for (auto i : members) {
        const int own = d.labels[i];
        auto nbs = tree.knn(d.features.row(i), k, [&](std::size_t j) {
            return j != i && ((d.labels[j] == own) == within);
        });
        for (const auto& nb : nbs) {
            ++in[nb.index];
        }
    }
    return in;
}

double k_term(double p1, double p2) {
    if (p1 == 0.0) {
        return 0.0;
    }
    return p1 * std::log(p1 / (0.5 * p1 + 0.5 * p2));
}

} // namespace

std::vector<double> ccis_scores(const data::Dataset& d, std::size_t k) {
    require_ccis(d, k);
    std::vector<std::size_t> all(d.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    const auto in_w = class_conditional_in_degree(d, all, k, true);
    const auto in_b = class_conditional_in_degree(d, all, k, false);
    const double sum_w = static_cast<double>(std::accumulate(in_w.begin(), in_w.end(), std::size_t{0}));
    const double sum_b = static_cast<double>(std::accumulate(in_b.begin(), in_b.end(), std::size_t{0}));
    std::vector<double> score(d.size());
    for (std::size_t a = 0; a < d.size(); ++a) {
        const double pw = sum_w > 0 ? static_cast<double>(in_w[a]) / sum_w : 0.0;
        const double pb = sum_b > 0 ? static_cast<double>(in_b[a]) / sum_b : 0.0;
        score[a] = k_term(pw, pb) - k_term(pb, pw);
    }
    return score;
}

// CCIS: CC adds instances by decreasing score until the selection covers every
// class and its 1-NN error on the whole set is no worse than the leave-one-out
// 1-NN error of the whole set. THIN then keeps only members hit by a
// between-class edge inside the selection, while that preserves the classes and
// does not raise the error.
SelectionMask ccis(const data::Dataset& d, std::size_t k) {
    const auto score = ccis_scores(d, k);
    const std::size_t n = d.size();

    std::size_t loo_errors = 0;
    {
        const auto g = nng::build_graph(d, 1);
        for (std::size_t i = 0; i < n; ++i) {
            if (d.labels[g.neighbors[i].front().index] != d.labels[i]) {
                ++loo_errors;
            }
        }
    }
    const auto counts = d.class_counts();
    std::size_t classes_present = 0;
    for (auto c : counts) {
        classes_present += c > 0 ? 1 : 0;
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });

    // Incremental 1-NN of every instance into the growing selection.
    const Neighbor none{std::numeric_limits<std::uint32_t>::max(), std::numeric_limits<double>::infinity()};
    std::vector<Neighbor> best(n, none);
    std::size_t errors = n;
    std::vector<std::size_t> class_seen(d.num_classes(), 0);
    std::size_t classes_covered = 0;
    std::vector<std::size_t> selected;
    const std::size_t m = d.num_features();
    for (auto s : order) {
        selected.push_back(s);
        if (class_seen[static_cast<std::size_t>(d.labels[s])]++ == 0) {
            ++classes_covered;
        }
        const double* xs = d.features.row(s).data();
        for (std::size_t a = 0; a < n; ++a) {
            const Neighbor cand{static_cast<std::uint32_t>(s), nng::detail::distance(d.features.row(a).data(), xs, m)};
            if (nng::closer(cand, best[a])) {
                const bool was_right = best[a].index != none.index && d.labels[best[a].index] == d.labels[a];
                const bool now_right = d.labels[s] == d.labels[a];
                best[a] = cand;
                if (was_right != now_right) {
                    errors = now_right ? errors - 1 : errors + 1;
                }
            }
        }
        if (classes_covered == classes_present && errors <= loo_errors) {
            break;
        }
    }
    std::sort(selected.begin(), selected.end());

    auto classes_of = [&](std::span<const std::size_t> set) {
        std::vector<bool> seen(d.num_classes(), false);
        for (auto i : set) {
            seen[static_cast<std::size_t>(d.labels[i])] = true;
        }
        return seen;
    };
    std::size_t current_errors = one_nn_errors(d, nng::KdTree(d.features, selected));
    while (true) {
        const auto in_b = class_conditional_in_degree(d, selected, k, false);
        std::vector<std::size_t> thin;
        for (auto s : selected) {
            if (in_b[s] > 0) {
                thin.push_back(s);
            }
        }
        if (thin.size() == selected.size() || classes_of(thin) != classes_of(selected)) {
            break;
        }
        const std::size_t thin_errors = one_nn_errors(d, nng::KdTree(d.features, thin));
        if (thin_errors > current_errors) {
            break;
        }
        selected = std::move(thin);
        current_errors = thin_errors;
    }
    return make_mask(n, selected, "ccis", k);
}

const std::vector<std::string>& algorithm_names() {
    static const std::vector<std::string> names = {"enn", "drop3", "icf", "hmnei", "ccis"};
    return names;
}

bool is_algorithm(const std::string& name) {
    const auto& names = algorithm_names();
    return std::find(names.begin(), names.end(), name) != names.end();
}

SelectionMask run(const std::string& algorithm, const data::Dataset& d, std::size_t k) {
    if (algorithm == "enn") {
        return enn(d, k);
    }
    if (algorithm == "drop3") {
        return drop3(d, k);
    }
    if (algorithm == "icf") {
        return icf(d, k);
    }
    if (algorithm == "hmnei") {
        return hmnei(d);
    }
    if (algorithm == "ccis") {
        return ccis(d, k);
    }
    throw InvalidArgument("unknown instance selection algorithm '" + algorithm + "'");
}

void write_mask_csv(const SelectionMask& mask, std::ostream& out) {
    out << "index,keep\n";
    for (std::size_t i = 0; i < mask.size(); ++i) {
        out << i << ',' << (mask.keep[i] ? 1 : 0) << '\n';
    }
}

void write_mask_csv(const SelectionMask& mask, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write '" + path.string() + "'");
    }
    write_mask_csv(mask, out);
}

} // namespace metais::selection
