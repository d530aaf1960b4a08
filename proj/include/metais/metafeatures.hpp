#ifndef METAIS_METAFEATURES_HPP
#define METAIS_METAFEATURES_HPP

#include "metais/common.hpp"
#include "metais/nng.hpp"

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

/**
 * @file metafeatures.hpp
 * @brief Per-vertex descriptors of a nearest-neighbor graph.
 *
 * For every vertex and every k in the k list, the k-prefix of its neighbor list
 * is summarized by eight statistics. "same" and "opposite" are relative to the
 * vertex's own label. Average and minimum over an empty class-conditional
 * subset are written as -1; counts are always defined.
 *
 * Column layout is descriptor-major, then k ascending:
 *   column(d, k_i) = d * |k_list| + i
 */

namespace metais::features {

enum Descriptor : std::size_t {
    avg_dist_same = 0,
    avg_dist_opposite,
    avg_dist_any,
    min_dist_same,
    min_dist_opposite,
    min_dist_any,
    count_same,
    count_opposite,
};

inline constexpr std::size_t kNumDescriptors = 8;

inline constexpr std::array<std::string_view, kNumDescriptors> kDescriptorNames = {
    "avg_dist_same", "avg_dist_opposite", "avg_dist_any",  "min_dist_same",
    "min_dist_opposite", "min_dist_any", "count_same", "count_opposite",
};

/// Value written where a statistic has no members.
inline constexpr double kMissing = -1.0;

std::vector<std::size_t> default_k_list();

/// "<descriptor>@k=<k>" for every column, in column order.
std::vector<std::string> feature_names(std::span<const std::size_t> k_list);

inline std::size_t column(Descriptor d, std::size_t k_index, std::size_t k_count) {
    return static_cast<std::size_t>(d) * k_count + k_index;
}

/**
 * Meta-feature rows, optionally labeled (1 = keep, 0 = remove). Rows carry a
 * source id into `source_names` so merged sets keep their provenance.
 */
struct MetaDataset {
    Matrix records;
    std::vector<std::string> feature_names;
    std::optional<std::vector<int>> labels;
    std::vector<std::string> source_names;
    std::vector<std::uint32_t> source_ids;

    std::size_t size() const { return records.rows(); }
    const std::string& source_of(std::size_t row) const { return source_names[source_ids[row]]; }

    bool operator==(const MetaDataset&) const = default;
};

/// Extracts from the full graph. Requires k_list strictly ascending with
/// max(k_list) <= g.k_max.
MetaDataset extract(const nng::NeighborGraph& g, std::span<const std::size_t> k_list, const std::string& source,
                    unsigned jobs = 1);

/// Same, from explicit per-vertex neighbor lists (e.g. a truncated graph).
MetaDataset extract(std::span<const std::span<const nng::Neighbor>> lists, std::span<const int> labels,
                    std::span<const std::size_t> k_list, const std::string& source, unsigned jobs = 1);

/// Concatenates rows; feature names must agree. Source names are merged.
MetaDataset concat(std::span<const MetaDataset> parts);

/// CSV with the named columns, then `label` (if labeled), then `source`.
void write_csv(const MetaDataset& meta, std::ostream& out);
void write_csv(const MetaDataset& meta, const std::filesystem::path& path);
MetaDataset read_csv(std::istream& in, const std::string& source);
MetaDataset read_csv(const std::filesystem::path& path);

/// Parses "<descriptor>@k=<k>" back into (descriptor, k).
std::pair<Descriptor, std::size_t> parse_feature_name(std::string_view name);

} // namespace metais::features

#endif
