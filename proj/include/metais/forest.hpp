#ifndef METAIS_FOREST_HPP
#define METAIS_FOREST_HPP

#include "metais/common.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

/**
 * @file forest.hpp
 * @brief Binary random forests (classical and balanced) built on Gini CART
 * trees, with probability prediction, MDI importances and a JSON model format.
 *
 * Tree i draws all of its randomness from mix_seed(seed + 0x9E3779B97F4A7C15 * (i + 1)),
 * first for its training sample, then for the feature order at each node
 * (depth first, left child first). Results do not depend on the thread count.
 */

namespace metais::forest {

struct ForestParams {
    std::size_t n_trees = 100;
    std::size_t max_depth = 10;
    std::size_t min_leaf = 1;
    std::size_t features_per_split = 7;

    bool operator==(const ForestParams&) const = default;
};

/// Flat tree node. feature < 0 marks a leaf; leaves carry class counts of the
/// tree's training sample. Rows with x[feature] <= threshold go left.
struct Node {
    std::int32_t feature = -1;
    double threshold = 0.0;
    std::uint32_t left = 0;
    std::uint32_t right = 0;
    std::uint32_t counts[2] = {0, 0};

    bool is_leaf() const { return feature < 0; }
    bool operator==(const Node& o) const {
        return feature == o.feature && threshold == o.threshold && left == o.left && right == o.right &&
               counts[0] == o.counts[0] && counts[1] == o.counts[1];
    }
};

/// Nodes in depth-first order; nodes[0] is the root.
struct Tree {
    std::vector<Node> nodes;

    /// Probability of class 1 at the leaf reached by `x`.
    double predict(std::span<const double> x) const;
    bool operator==(const Tree&) const = default;
};

struct Metrics {
    std::optional<double> auc;  // absent when only one class is present
    double balanced_accuracy = 0.0;
    double accuracy = 0.0;

    bool operator==(const Metrics&) const = default;
};

struct ForestModel {
    std::vector<Tree> trees;
    ForestParams params;
    bool balanced = false;
    std::uint64_t master_seed = 0;
    std::vector<std::string> feature_names;
    /// Trained on a single class: one constant leaf, probability 0 or 1.
    bool degenerate = false;
    std::optional<Metrics> oob;  // out-of-bag metrics, when every class had OOB rows

    bool oob_available() const { return oob.has_value(); }
    std::size_t num_features() const { return feature_names.size(); }

    /// Mean over trees of the leaf frequency of class 1.
    double predict_proba(std::span<const double> x) const;
    std::vector<double> predict_proba(const Matrix& x, unsigned jobs = 1) const;

    bool operator==(const ForestModel&) const = default;
};

/// Called once per tree with the row indices of its training sample (may run
/// on worker threads when jobs > 1).
using SampleHook = std::function<void(std::size_t tree, std::span<const std::size_t> sample)>;

/// Bootstrap of size n per tree. Labels must be 0/1.
ForestModel train_random_forest(const Matrix& x, std::span<const int> y, const ForestParams& params,
                                std::uint64_t seed, std::vector<std::string> feature_names = {}, unsigned jobs = 1,
                                const SampleHook& hook = {});

/// Per tree: n_min draws with replacement from each class, minority first.
ForestModel train_balanced_random_forest(const Matrix& x, std::span<const int> y, const ForestParams& params,
                                         std::uint64_t seed, std::vector<std::string> feature_names = {},
                                         unsigned jobs = 1, const SampleHook& hook = {});

/// Area under the ROC curve from midranks (Mann-Whitney). Absent if a class is missing.
std::optional<double> auc(std::span<const double> scores, std::span<const int> y);

/// AUC, and balanced accuracy / accuracy of the rule score >= 0.5 -> class 1.
Metrics evaluate_scores(std::span<const double> scores, std::span<const int> y);
Metrics evaluate_classifier(const ForestModel& model, const Matrix& x, std::span<const int> y, unsigned jobs = 1);

/**
 * Mean decrease in Gini impurity. For each split node t of a tree with sample
 * size N: (N_t / N) * (G(t) - N_l/N_t G(l) - N_r/N_t G(r)), summed per feature
 * and averaged over trees. When the feature names are meta-feature names the
 * report also carries sums per descriptor type and per k.
 */
struct ImportanceReport {
    std::vector<std::string> feature_names;
    std::vector<double> per_feature_mdi;
    std::vector<std::string> type_names;
    std::vector<double> grouped_by_type;
    std::vector<std::size_t> k_values;
    std::vector<double> grouped_by_k;

    double total() const;
};

ImportanceReport mdi_importance(const ForestModel& model);

std::string to_json(const ForestModel& model);
ForestModel model_from_json(const std::string& text);
void save_model(const ForestModel& model, const std::filesystem::path& path);
ForestModel load_model(const std::filesystem::path& path);

} // namespace metais::forest

#endif
