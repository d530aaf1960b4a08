#ifndef METAIS_ISALGOS_HPP
#define METAIS_ISALGOS_HPP

#include "metais/dataset.hpp"
#include "metais/nng.hpp"

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

/**
 * @file isalgos.hpp
 * @brief Reference instance-selection algorithms (ENN, Drop3, ICF, HMN-EI, CCIS).
 *
 * All neighbor searches use the nng distance and its order (distance, then
 * index). k-NN votes are plurality votes; a tie between classes goes to the
 * tied class whose first member appears earliest in the neighbor list. An empty
 * neighbor list predicts no class, which counts as a misclassification.
 */

namespace metais::selection {

struct SelectionMask {
    std::vector<bool> keep;
    std::string algorithm;
    std::size_t k = 0;

    std::size_t size() const { return keep.size(); }
    std::size_t kept() const;
    std::vector<std::size_t> kept_indices() const;
};

struct ReductionStats {
    std::size_t n = 0;
    std::size_t kept = 0;
    double reduction_rate = 0.0;
};

ReductionStats reduction_stats(const SelectionMask& mask);

/// Per-member nearest-enemy distance (+inf when no enemy exists) and local set
/// (same-class members strictly closer than the nearest enemy), computed inside
/// `members`. Entries for non-members are left empty.
struct LocalSetInfo {
    std::vector<double> nearest_enemy_distance;
    std::vector<std::vector<std::uint32_t>> local_set_members;
};

LocalSetInfo local_sets(const data::Dataset& d, std::span<const std::size_t> members);

/// Plurality vote over the first min(k, list size) neighbors. -1 when empty.
int knn_vote(std::span<const nng::Neighbor> neighbors, std::size_t k, std::span<const int> labels);

SelectionMask enn(const data::Dataset& d, std::size_t k = 3);
SelectionMask drop3(const data::Dataset& d, std::size_t k = 3);
SelectionMask icf(const data::Dataset& d, std::size_t k = 3);
SelectionMask hmnei(const data::Dataset& d);
SelectionMask ccis(const data::Dataset& d, std::size_t k = 3);

/// CCIS instance scores: K(p_w, p_b)(a) - K(p_b, p_w)(a), where p_w and p_b are
/// the normalized in-degrees of the within-class and between-class k-NN graphs.
std::vector<double> ccis_scores(const data::Dataset& d, std::size_t k = 3);

/// One HMN-E pass restricted to `members` (ascending). Returns the survivors.
std::vector<std::size_t> hmne_step(const data::Dataset& d, std::span<const std::size_t> members);

/// Names accepted by run(): enn, drop3, icf, hmnei, ccis.
const std::vector<std::string>& algorithm_names();
bool is_algorithm(const std::string& name);

/// Dispatch by name; hmnei ignores k. Throws InvalidArgument on an unknown name.
SelectionMask run(const std::string& algorithm, const data::Dataset& d, std::size_t k = 3);

/// `index,keep` rows with keep in {0,1}.
void write_mask_csv(const SelectionMask& mask, std::ostream& out);
void write_mask_csv(const SelectionMask& mask, const std::filesystem::path& path);

} // namespace metais::selection

#endif
