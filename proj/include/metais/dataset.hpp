#ifndef METAIS_DATASET_HPP
#define METAIS_DATASET_HPP

#include "metais/common.hpp"

#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

/**
 * @file dataset.hpp
 * @brief Tabular classification data: loading (Keel `.dat`, CSV), scaling and
 * stratified cross-validation splits.
 */

namespace metais::data {

/**
 * A numeric classification dataset.
 *
 * Row i of `features` is instance i and carries class id `labels[i]`, an index
 * into `class_names`. Class ids are assigned in order of first appearance.
 */
struct Dataset {
    Matrix features;
    std::vector<int> labels;
    std::vector<std::string> feature_names;
    std::vector<std::string> class_names;
    std::string name;

    std::size_t size() const { return features.rows(); }
    std::size_t num_features() const { return features.cols(); }
    std::size_t num_classes() const { return class_names.size(); }

    /// Number of members per class id.
    std::vector<std::size_t> class_counts() const;

    bool operator==(const Dataset&) const = default;
};

/// Throws InvalidArgument unless the Dataset invariants hold.
void validate(const Dataset& d);

/// Rows `indices` (in order) as a new dataset sharing names and class ids.
Dataset subset(const Dataset& d, std::span<const std::size_t> indices);

/// Rows whose mask entry is true.
Dataset subset(const Dataset& d, const std::vector<bool>& keep);

Dataset load_keel(const std::filesystem::path& path);
Dataset parse_keel(std::istream& in, const std::string& source);

/// Label column given by header name or zero-based position.
using ColumnRef = std::variant<std::string, std::size_t>;

Dataset load_csv(const std::filesystem::path& path, const ColumnRef& label_column);
Dataset parse_csv(std::istream& in, const std::string& source, const ColumnRef& label_column);

/// Picks the loader by extension: `.dat` is Keel, anything else CSV with the
/// label in the last column unless `label_column` is given.
Dataset load_any(const std::filesystem::path& path, const std::optional<ColumnRef>& label_column = {});

/// Per-column z-score parameters (population standard deviation).
struct ScalingParams {
    std::vector<double> means;
    std::vector<double> stds;

    static ScalingParams fit(const Matrix& x);

    Matrix apply(const Matrix& x) const;
    Matrix invert(const Matrix& x) const;

    bool operator==(const ScalingParams&) const = default;
};

/// Z-scores every feature column; constant columns become zero with std 1.
std::pair<Dataset, ScalingParams> standardize(const Dataset& d);

struct FoldSplit {
    std::vector<std::size_t> train_indices;
    std::vector<std::size_t> test_indices;
};

/**
 * Stratified k-fold partition. Each class is shuffled with `seed` and dealt
 * round-robin, so per-class counts differ by at most one between folds. The
 * dealing offset carries over between classes to balance total fold sizes.
 */
std::vector<FoldSplit> stratified_kfold(const Dataset& d, std::size_t folds, std::uint64_t seed);

} // namespace metais::data

#endif
