#include "metais/forest.hpp"

#include "metais/metafeatures.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <fstream>
#include <numeric>
#include <sstream>

namespace metais::forest {

using json = nlohmann::json;

double Tree::predict(std::span<const double> x) const {
    const Node* node = &nodes.front();
    while (!node->is_leaf()) {
        node = &nodes[x[static_cast<std::size_t>(node->feature)] <= node->threshold ? node->left : node->right];
    }
    const double total = static_cast<double>(node->counts[0]) + static_cast<double>(node->counts[1]);
    return static_cast<double>(node->counts[1]) / total;
}

double ForestModel::predict_proba(std::span<const double> x) const {
    if (x.size() != num_features()) {
        throw InvalidArgument("predict: expected " + std::to_string(num_features()) + " features, got " +
                              std::to_string(x.size()));
    }
    double sum = 0.0;
    for (const auto& t : trees) {
        sum += t.predict(x);
    }
    return sum / static_cast<double>(trees.size());
}

std::vector<double> ForestModel::predict_proba(const Matrix& x, unsigned jobs) const {
    if (x.cols() != num_features()) {
        throw InvalidArgument("predict: expected " + std::to_string(num_features()) + " columns, got " +
                              std::to_string(x.cols()));
    }
    // Flattened trees where leaves point at themselves, so every walk takes a
    // fixed number of branch-free steps and a block of rows advances together.
    struct Flat {
        std::vector<std::int32_t> feature;
        std::vector<double> threshold;
        std::vector<std::uint32_t> child;  // [2i] right, [2i + 1] left
        std::vector<double> value;
        std::size_t depth = 0;
    };
    std::vector<Flat> flat(trees.size());
    for (std::size_t t = 0; t < trees.size(); ++t) {
        const auto& nodes = trees[t].nodes;
        Flat& f = flat[t];
        const std::size_t n = nodes.size();
        f.feature.resize(n);
        f.threshold.resize(n);
        f.child.resize(2 * n);
        f.value.resize(n);
        std::vector<std::size_t> level(n, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const Node& node = nodes[i];
            if (node.is_leaf()) {
                f.feature[i] = 0;
                f.child[2 * i] = f.child[2 * i + 1] = static_cast<std::uint32_t>(i);
                const double total = static_cast<double>(node.counts[0]) + static_cast<double>(node.counts[1]);
                f.value[i] = static_cast<double>(node.counts[1]) / total;
                f.depth = std::max(f.depth, level[i]);
            } else {
                f.feature[i] = node.feature;
                f.threshold[i] = node.threshold;
                f.child[2 * i] = node.right;
                f.child[2 * i + 1] = node.left;
                level[node.left] = level[node.right] = level[i] + 1;
            }
        }
    }
    constexpr std::size_t kBlock = 64;
    const std::size_t blocks = (x.rows() + kBlock - 1) / kBlock;
    std::vector<double> out(x.rows(), 0.0);
    parallel_for(blocks, jobs, [&](std::size_t b) {
        const std::size_t lo = b * kBlock;
        const std::size_t hi = std::min(x.rows(), lo + kBlock);
        std::uint32_t at[kBlock];
        for (const Flat& f : flat) {
            std::fill(at, at + (hi - lo), 0U);
            for (std::size_t step = 0; step < f.depth; ++step) {
                for (std::size_t r = lo; r < hi; ++r) {
                    const std::uint32_t i = at[r - lo];
                    const bool go_left = x(r, static_cast<std::size_t>(f.feature[i])) <= f.threshold[i];
                    at[r - lo] = f.child[2 * i + static_cast<std::size_t>(go_left)];
                }
            }
            for (std::size_t r = lo; r < hi; ++r) {
                out[r] += f.value[at[r - lo]];
            }
        }
        for (std::size_t r = lo; r < hi; ++r) {
            out[r] /= static_cast<double>(trees.size());
        }
    });
    return out;
}

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

double gini(double c0, double c1) {
    const double n = c0 + c1;
    if (n <= 0.0) {
        return 0.0;
    }
    const double p0 = c0 / n;
    const double p1 = c1 / n;
    return 1.0 - p0 * p0 - p1 * p1;
}

class TreeBuilder {
public:
    TreeBuilder(const Matrix& x, std::span<const int> y, const ForestParams& params, Rng& rng)
        : x_(x), y_(y), params_(params), rng_(rng), order_(x.cols()) {
        std::iota(order_.begin(), order_.end(), std::size_t{0});
    }

    Tree build(std::vector<std::size_t> rows) {
        rows_ = std::move(rows);
        grow(0, rows_.size(), 0);
        return std::move(tree_);
    }

private:
    struct Split {
        std::size_t feature = 0;
        double lo = 0.0;
        double hi = 0.0;
        double weighted = 0.0;  // nl * G(l) + nr * G(r)
    };

    std::uint32_t grow(std::size_t begin, std::size_t end, std::size_t depth) {
        const auto id = static_cast<std::uint32_t>(tree_.nodes.size());
        tree_.nodes.emplace_back();
        std::uint32_t c[2] = {0, 0};
        for (std::size_t i = begin; i < end; ++i) {
            ++c[y_[rows_[i]]];
        }
        const std::size_t n = end - begin;
        auto make_leaf = [&] {
            tree_.nodes[id].counts[0] = c[0];
            tree_.nodes[id].counts[1] = c[1];
            return id;
        };
        if (depth >= params_.max_depth || c[0] == 0 || c[1] == 0 || n < 2 * params_.min_leaf) {
            return make_leaf();
        }
        const auto split = find_split(begin, end, c);
        const double parent = gini(c[0], c[1]);
        if (!split || !(parent - split->weighted / static_cast<double>(n) > 1e-12)) {
            return make_leaf();
        }
        double t = split->lo + (split->hi - split->lo) / 2.0;
        if (!(t < split->hi)) {
            t = split->lo;
        }
        const std::size_t f = split->feature;
        auto mid = std::stable_partition(rows_.begin() + static_cast<std::ptrdiff_t>(begin),
                                         rows_.begin() + static_cast<std::ptrdiff_t>(end),
                                         [&](std::size_t r) { return x_(r, f) <= t; });
        const auto cut = static_cast<std::size_t>(mid - rows_.begin());
        tree_.nodes[id].feature = static_cast<std::int32_t>(f);
        tree_.nodes[id].threshold = t;
        const auto left = grow(begin, cut, depth + 1);
        const auto right = grow(cut, end, depth + 1);
        tree_.nodes[id].left = left;
        tree_.nodes[id].right = right;
        return id;
    }

    // Features are tried in a fresh random order until features_per_split
    // non-constant ones have been searched.
    std::optional<Split> find_split(std::size_t begin, std::size_t end, const std::uint32_t c[2]) {
        rng_.shuffle(order_);
        const std::size_t n = end - begin;
        std::optional<Split> best;
        std::size_t searched = 0;
        for (auto f : order_) {
            if (searched == params_.features_per_split) {
                break;
            }
            vals_.clear();
            for (std::size_t i = begin; i < end; ++i) {
                vals_.emplace_back(x_(rows_[i], f), y_[rows_[i]]);
            }
            std::sort(vals_.begin(), vals_.end());
            if (vals_.front().first == vals_.back().first) {
                continue;
            }
            ++searched;
            double l[2] = {0.0, 0.0};
            for (std::size_t i = 0; i + 1 < n; ++i) {
                l[vals_[i].second] += 1.0;
                if (!(vals_[i].first < vals_[i + 1].first)) {
                    continue;
                }
                const std::size_t nl = i + 1;
                const std::size_t nr = n - nl;
                if (nl < params_.min_leaf || nr < params_.min_leaf) {
                    continue;
                }
                const double r0 = c[0] - l[0];
                const double r1 = c[1] - l[1];
                const double w = static_cast<double>(nl) * gini(l[0], l[1]) + static_cast<double>(nr) * gini(r0, r1);
                if (!best || w < best->weighted) {
                    best = Split{f, vals_[i].first, vals_[i + 1].first, w};
                }
            }
        }
        return best;
    }

    const Matrix& x_;
    std::span<const int> y_;
    const ForestParams& params_;
    Rng& rng_;
    std::vector<std::size_t> order_;
    std::vector<std::size_t> rows_;
    std::vector<std::pair<double, int>> vals_;
    Tree tree_;
};

void check_inputs(const Matrix& x, std::span<const int> y, const ForestParams& params,
                  std::vector<std::string>& names) {
    if (x.rows() != y.size()) {
        throw InvalidArgument("forest: label count differs from row count");
    }
    if (x.rows() < 1 || x.cols() < 1) {
        throw InvalidArgument("forest: empty training matrix");
    }
    if (params.n_trees < 1 || params.max_depth < 1 || params.min_leaf < 1 || params.features_per_split < 1) {
        throw InvalidArgument("forest: n_trees, max_depth, min_leaf and features_per_split must be >= 1");
    }
    for (int v : y) {
        if (v != 0 && v != 1) {
            throw InvalidArgument("forest: labels must be 0 or 1");
        }
    }
    if (names.empty()) {
        for (std::size_t j = 0; j < x.cols(); ++j) {
            names.push_back("x" + std::to_string(j));
        }
    } else if (names.size() != x.cols()) {
        throw InvalidArgument("forest: feature name count differs from column count");
    }
}

using Sampler = std::function<std::vector<std::size_t>(Rng&)>;

ForestModel train(const Matrix& x, std::span<const int> y, const ForestParams& params, std::uint64_t seed,
                  std::vector<std::string> names, unsigned jobs, const SampleHook& hook, bool balanced) {
    check_inputs(x, y, params, names);
    ForestModel model;
    model.params = params;
    model.balanced = balanced;
    model.master_seed = seed;
    model.feature_names = std::move(names);

    std::array<std::vector<std::size_t>, 2> pools;
    for (std::size_t i = 0; i < y.size(); ++i) {
        pools[static_cast<std::size_t>(y[i])].push_back(i);
    }
    if (pools[0].empty() || pools[1].empty()) {
        model.degenerate = true;
        Node leaf;
        leaf.counts[0] = static_cast<std::uint32_t>(pools[0].size());
        leaf.counts[1] = static_cast<std::uint32_t>(pools[1].size());
        model.trees.push_back(Tree{{leaf}});
        return model;
    }

    const std::size_t n = x.rows();
    Sampler sample;
    if (balanced) {
        const std::size_t minority = pools[0].size() <= pools[1].size() ? 0 : 1;
        const std::size_t n_min = pools[minority].size();
        sample = [&pools, minority, n_min](Rng& rng) {
            std::vector<std::size_t> rows;
            rows.reserve(2 * n_min);
            for (std::size_t cls : {minority, 1 - minority}) {
                const auto& pool = pools[cls];
                for (std::size_t i = 0; i < n_min; ++i) {
                    rows.push_back(pool[rng.index(pool.size())]);
                }
            }
            return rows;
        };
    } else {
        sample = [n](Rng& rng) {
            std::vector<std::size_t> rows(n);
            for (auto& r : rows) {
                r = rng.index(n);
            }
            return rows;
        };
    }

    model.trees.resize(params.n_trees);
    std::vector<std::vector<bool>> in_bag(params.n_trees);
    parallel_for(params.n_trees, jobs, [&](std::size_t t) {
        Rng rng(mix_seed(seed + kGolden * (t + 1)));
        auto rows = sample(rng);
        if (hook) {
            hook(t, rows);
        }
        in_bag[t].assign(n, false);
        for (auto r : rows) {
            in_bag[t][r] = true;
        }
        TreeBuilder builder(x, y, params, rng);
        model.trees[t] = builder.build(std::move(rows));
    });

    // Out-of-bag estimate over rows left out by at least one tree.
    std::vector<double> sum(n, 0.0);
    std::vector<std::size_t> votes(n, 0);
    for (std::size_t t = 0; t < params.n_trees; ++t) {
        for (std::size_t i = 0; i < n; ++i) {
            if (!in_bag[t][i]) {
                sum[i] += model.trees[t].predict(x.row(i));
                ++votes[i];
            }
        }
    }
    std::vector<double> scores;
    std::vector<int> labels;
    for (std::size_t i = 0; i < n; ++i) {
        if (votes[i] > 0) {
            scores.push_back(sum[i] / static_cast<double>(votes[i]));
            labels.push_back(y[i]);
        }
    }
    if (std::count(labels.begin(), labels.end(), 0) > 0 && std::count(labels.begin(), labels.end(), 1) > 0) {
        model.oob = evaluate_scores(scores, labels);
    }
    return model;
}

} // namespace

ForestModel train_random_forest(const Matrix& x, std::span<const int> y, const ForestParams& params,
                                std::uint64_t seed, std::vector<std::string> feature_names, unsigned jobs,
                                const SampleHook& hook) {
    return train(x, y, params, seed, std::move(feature_names), jobs, hook, false);
}

ForestModel train_balanced_random_forest(const Matrix& x, std::span<const int> y, const ForestParams& params,
                                         std::uint64_t seed, std::vector<std::string> feature_names, unsigned jobs,
                                         const SampleHook& hook) {
    return train(x, y, params, seed, std::move(feature_names), jobs, hook, true);
}

std::optional<double> auc(std::span<const double> scores, std::span<const int> y) {
    if (scores.size() != y.size()) {
        throw InvalidArgument("auc: score and label counts differ");
    }
    const std::size_t n = scores.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double rank_sum = 0.0;
    std::size_t n1 = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[idx[j]] == scores[idx[i]]) {
            ++j;
        }
        const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t t = i; t < j; ++t) {
            if (y[idx[t]] == 1) {
                rank_sum += midrank;
                ++n1;
            }
        }
        i = j;
    }
    const std::size_t n0 = n - n1;
    if (n1 == 0 || n0 == 0) {
        return std::nullopt;
    }
    const double d1 = static_cast<double>(n1);
    return (rank_sum - d1 * (d1 + 1.0) / 2.0) / (d1 * static_cast<double>(n0));
}

Metrics evaluate_scores(std::span<const double> scores, std::span<const int> y) {
    if (scores.size() != y.size() || y.empty()) {
        throw InvalidArgument("evaluate: need equal, non-zero numbers of scores and labels");
    }
    Metrics m;
    m.auc = auc(scores, y);
    std::size_t total[2] = {0, 0};
    std::size_t hit[2] = {0, 0};
    for (std::size_t i = 0; i < y.size(); ++i) {
        const int pred = scores[i] >= 0.5 ? 1 : 0;
        ++total[y[i]];
        hit[y[i]] += pred == y[i] ? 1 : 0;
    }
    double recall_sum = 0.0;
    int classes = 0;
    for (int c = 0; c < 2; ++c) {
        if (total[c] > 0) {
            recall_sum += static_cast<double>(hit[c]) / static_cast<double>(total[c]);
            ++classes;
        }
    }
    m.balanced_accuracy = recall_sum / classes;
    m.accuracy = static_cast<double>(hit[0] + hit[1]) / static_cast<double>(y.size());
    return m;
}

Metrics evaluate_classifier(const ForestModel& model, const Matrix& x, std::span<const int> y, unsigned jobs) {
    return evaluate_scores(model.predict_proba(x, jobs), y);
}

double ImportanceReport::total() const {
    return std::accumulate(per_feature_mdi.begin(), per_feature_mdi.end(), 0.0);
}

namespace {

// Fills counts of internal nodes (sum of their leaves) and adds decreases.
std::pair<double, double> accumulate_mdi(const Tree& tree, std::uint32_t id, double root_n, std::vector<double>& out) {
    const Node& node = tree.nodes[id];
    if (node.is_leaf()) {
        return {static_cast<double>(node.counts[0]), static_cast<double>(node.counts[1])};
    }
    const auto l = accumulate_mdi(tree, node.left, root_n, out);
    const auto r = accumulate_mdi(tree, node.right, root_n, out);
    const double nl = l.first + l.second;
    const double nr = r.first + r.second;
    const double c0 = l.first + r.first;
    const double c1 = l.second + r.second;
    const double nt = nl + nr;
    const double decrease = gini(c0, c1) - (nl / nt) * gini(l.first, l.second) - (nr / nt) * gini(r.first, r.second);
    out[static_cast<std::size_t>(node.feature)] += (nt / root_n) * decrease;
    return {c0, c1};
}

} // namespace

ImportanceReport mdi_importance(const ForestModel& model) {
    ImportanceReport rep;
    rep.feature_names = model.feature_names;
    rep.per_feature_mdi.assign(model.num_features(), 0.0);
    for (const auto& tree : model.trees) {
        double root_n = 0.0;
        for (const auto& node : tree.nodes) {
            if (node.is_leaf()) {
                root_n += static_cast<double>(node.counts[0]) + static_cast<double>(node.counts[1]);
            }
        }
        std::vector<double> per_tree(model.num_features(), 0.0);
        accumulate_mdi(tree, 0, root_n, per_tree);
        for (std::size_t j = 0; j < per_tree.size(); ++j) {
            rep.per_feature_mdi[j] += per_tree[j];
        }
    }
    for (auto& v : rep.per_feature_mdi) {
        v /= static_cast<double>(model.trees.size());
    }

    std::vector<std::pair<features::Descriptor, std::size_t>> parsed;
    try {
        for (const auto& name : model.feature_names) {
            parsed.push_back(features::parse_feature_name(name));
        }
    } catch (const InvalidArgument&) {
        return rep;  // not meta-features: no grouping
    }
    for (auto d : features::kDescriptorNames) {
        rep.type_names.emplace_back(d);
    }
    rep.grouped_by_type.assign(features::kNumDescriptors, 0.0);
    for (const auto& p : parsed) {
        rep.k_values.push_back(p.second);
    }
    std::sort(rep.k_values.begin(), rep.k_values.end());
    rep.k_values.erase(std::unique(rep.k_values.begin(), rep.k_values.end()), rep.k_values.end());
    rep.grouped_by_k.assign(rep.k_values.size(), 0.0);
    for (std::size_t j = 0; j < parsed.size(); ++j) {
        rep.grouped_by_type[parsed[j].first] += rep.per_feature_mdi[j];
        const auto pos = std::lower_bound(rep.k_values.begin(), rep.k_values.end(), parsed[j].second);
        rep.grouped_by_k[static_cast<std::size_t>(pos - rep.k_values.begin())] += rep.per_feature_mdi[j];
    }
    return rep;
}

namespace {

json node_to_json(const Tree& tree, std::uint32_t id) {
    const Node& node = tree.nodes[id];
    if (node.is_leaf()) {
        return json{{"counts", {node.counts[0], node.counts[1]}}};
    }
    return json{{"f", node.feature},
                {"t", node.threshold},
                {"l", node_to_json(tree, node.left)},
                {"r", node_to_json(tree, node.right)}};
}

std::uint32_t node_from_json(const json& j, Tree& tree, std::size_t num_features) {
    const auto id = static_cast<std::uint32_t>(tree.nodes.size());
    tree.nodes.emplace_back();
    if (j.contains("counts")) {
        const auto& c = j.at("counts");
        tree.nodes[id].counts[0] = c.at(0).get<std::uint32_t>();
        tree.nodes[id].counts[1] = c.at(1).get<std::uint32_t>();
        if (tree.nodes[id].counts[0] + tree.nodes[id].counts[1] == 0) {
            throw Error("model: leaf with no samples");
        }
        return id;
    }
    const auto f = j.at("f").get<std::int32_t>();
    if (f < 0 || static_cast<std::size_t>(f) >= num_features) {
        throw Error("model: split feature out of range");
    }
    tree.nodes[id].feature = f;
    tree.nodes[id].threshold = j.at("t").get<double>();
    const auto left = node_from_json(j.at("l"), tree, num_features);
    const auto right = node_from_json(j.at("r"), tree, num_features);
    tree.nodes[id].left = left;
    tree.nodes[id].right = right;
    return id;
}

json metrics_to_json(const Metrics& m) {
    json j;
    j["auc"] = m.auc ? json(*m.auc) : json(nullptr);
    j["balanced_accuracy"] = m.balanced_accuracy;
    j["accuracy"] = m.accuracy;
    return j;
}

} // namespace

std::string to_json(const ForestModel& model) {
    json j;
    j["format"] = "metais-forest";
    j["version"] = 1;
    j["params"] = {{"n_trees", model.params.n_trees},
                   {"max_depth", model.params.max_depth},
                   {"min_leaf", model.params.min_leaf},
                   {"features_per_split", model.params.features_per_split}};
    j["balanced"] = model.balanced;
    j["master_seed"] = model.master_seed;
    j["degenerate"] = model.degenerate;
    j["feature_names"] = model.feature_names;
    j["oob"] = model.oob ? metrics_to_json(*model.oob) : json(nullptr);
    j["trees"] = json::array();
    for (const auto& t : model.trees) {
        j["trees"].push_back(node_to_json(t, 0));
    }
    return j.dump();
}

ForestModel model_from_json(const std::string& text) {
    ForestModel model;
    try {
        const auto j = json::parse(text);
        if (j.at("format") != "metais-forest" || j.at("version") != 1) {
            throw Error("model: unsupported format or version");
        }
        const auto& p = j.at("params");
        model.params.n_trees = p.at("n_trees").get<std::size_t>();
        model.params.max_depth = p.at("max_depth").get<std::size_t>();
        model.params.min_leaf = p.at("min_leaf").get<std::size_t>();
        model.params.features_per_split = p.at("features_per_split").get<std::size_t>();
        model.balanced = j.at("balanced").get<bool>();
        model.master_seed = j.at("master_seed").get<std::uint64_t>();
        model.degenerate = j.at("degenerate").get<bool>();
        model.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        if (!j.at("oob").is_null()) {
            const auto& o = j.at("oob");
            Metrics m;
            if (!o.at("auc").is_null()) {
                m.auc = o.at("auc").get<double>();
            }
            m.balanced_accuracy = o.at("balanced_accuracy").get<double>();
            m.accuracy = o.at("accuracy").get<double>();
            model.oob = m;
        }
        for (const auto& t : j.at("trees")) {
            Tree tree;
            node_from_json(t, tree, model.feature_names.size());
            model.trees.push_back(std::move(tree));
        }
    } catch (const json::exception& e) {
        throw Error(std::string("model: malformed JSON: ") + e.what());
    }
    if (model.trees.empty()) {
        throw Error("model: no trees");
    }
    return model;
}

void save_model(const ForestModel& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write '" + path.string() + "'");
    }
    out << to_json(model) << '\n';
}

ForestModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open '" + path.string() + "'");
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return model_from_json(ss.str());
}

} // namespace metais::forest
