#ifndef METAIS_PIPELINE_HPP
#define METAIS_PIPELINE_HPP

#include "metais/dataset.hpp"
#include "metais/forest.hpp"
#include "metais/isalgos.hpp"
#include "metais/metafeatures.hpp"

#include <filesystem>
#include <string>
#include <vector>

/**
 * @file pipeline.hpp
 * @brief Meta instance selection: label nearest-neighbor-graph meta-features
 * with a reference selector, train a forest on them, and prune new data by
 * thresholding the predicted keep-probability.
 *
 * Label 1 means "kept by the reference algorithm" and the forest predicts the
 * probability of that label. Instance j survives threshold theta iff p_j >= theta.
 */

namespace metais::pipeline {

inline constexpr const char* kLibraryVersion = "1.0.0";

enum class Classifier { rf, balanced_rf };
enum class QueryScaling { own, pooled };

std::string to_string(Classifier c);
Classifier parse_classifier(const std::string& s);
std::string to_string(QueryScaling s);
QueryScaling parse_query_scaling(const std::string& s);

struct MetaOptions {
    std::string reference_algorithm = "enn";
    std::size_t k = 3;
    std::vector<std::size_t> k_list = features::default_k_list();
    /// z-score the input features of each dataset before building its graph.
    bool standardize_inputs = true;
    unsigned jobs = 1;
};

/// Meta-features of one dataset before per-dataset standardization. Warnings
/// (e.g. clipped k) are appended to `warnings` when given.
features::MetaDataset raw_meta_features(const data::Dataset& d, const MetaOptions& opt,
                                        std::vector<std::string>* warnings = nullptr);

struct MetaTrainingSet {
    features::MetaDataset meta;   // standardized per source, labeled
    data::ScalingParams pooled;   // statistics of the raw merged meta-features
    std::vector<std::string> warnings;
};

/**
 * For each dataset: meta-features, reference selection labels, per-dataset
 * standardization of the meta columns; then concatenation. Datasets are
 * processed in parallel when opt.jobs > 1. A failing reference run is rethrown
 * with the dataset name.
 */
MetaTrainingSet build_meta_training_set(std::span<const data::Dataset> datasets, const MetaOptions& opt);

struct MetaSelector {
    forest::ForestModel model;
    std::string reference_algorithm;
    std::size_t k = 3;
    std::vector<std::size_t> k_list;
    std::vector<std::string> trained_on;
    std::uint64_t seed = 0;
    Classifier classifier = Classifier::balanced_rf;
    bool standardize_inputs = true;
    data::ScalingParams pooled;

    bool operator==(const MetaSelector&) const = default;
};

/// Throws InvalidArgument when the meta labels hold a single class.
MetaSelector train_meta_selector(const MetaTrainingSet& training, const MetaOptions& opt, Classifier classifier,
                                 const forest::ForestParams& params, std::uint64_t seed);

struct SelectionResult {
    std::vector<double> probabilities;  // keep-probability per instance
    std::vector<std::string> warnings;

    /// Keep-mask p_j >= theta for each theta.
    std::vector<std::vector<bool>> masks(std::span<const double> theta_grid) const;
};

SelectionResult score_instances(const MetaSelector& sel, const data::Dataset& d,
                                QueryScaling scaling = QueryScaling::own, unsigned jobs = 1);

/// keep iff p_j >= theta; theta must lie in (0, 1).
selection::SelectionMask apply_threshold(const SelectionResult& res, double theta,
                                         const std::string& algorithm = "meta");

std::vector<double> default_theta_grid();

/// Bundle directory: model.json (forest) and selector.json (metadata).
void save_selector(const MetaSelector& sel, const std::filesystem::path& dir);
MetaSelector load_selector(const std::filesystem::path& dir);

} // namespace metais::pipeline

#endif
