#ifndef METAIS_NNG_HPP
#define METAIS_NNG_HPP

#include "metais/common.hpp"
#include "metais/dataset.hpp"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

/**
 * @file nng.hpp
 * @brief Exact k-nearest-neighbor graphs under the squared Euclidean distance
 * normalized by the number of features.
 *
 * Neighbor order is total: ascending distance, then ascending index. Both the
 * brute-force path and the kd-tree path use the same distance routine and the
 * same order, so they produce identical graphs.
 */

namespace metais::nng {

/// (sum_j (a_j - b_j)^2) / m. Throws InvalidArgument on a size mismatch or m = 0.
double distance(std::span<const double> a, std::span<const double> b);

namespace detail {
// Unchecked kernel shared by every neighbor search.
inline double distance(const double* a, const double* b, std::size_t m) {
    double sum = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        const double d = a[j] - b[j];
        sum += d * d;
    }
    return sum / static_cast<double>(m);
}
} // namespace detail

struct Neighbor {
    std::uint32_t index = 0;
    double distance = 0.0;

    bool operator==(const Neighbor&) const = default;
};

/// The global neighbor order.
inline bool closer(const Neighbor& a, const Neighbor& b) {
    return a.distance < b.distance || (a.distance == b.distance && a.index < b.index);
}

/**
 * Exact kd-tree over a subset of the rows of a matrix. The tree copies the
 * coordinates it needs, so the source matrix may go away after construction.
 */
class KdTree {
public:
    KdTree() = default;
    explicit KdTree(const Matrix& points, std::size_t leaf_size = 12);
    KdTree(const Matrix& points, std::span<const std::size_t> subset, std::size_t leaf_size = 12);

    std::size_t size() const { return ids_.size(); }
    std::size_t dims() const { return dims_; }

    /// The `k` closest indexed points p with accept(p) true, in neighbor order.
    template <typename Accept>
    std::vector<Neighbor> knn(std::span<const double> query, std::size_t k, Accept&& accept) const {
        std::vector<Neighbor> heap;
        if (k == 0 || ids_.empty()) {
            return heap;
        }
        heap.reserve(k + 1);
        search(0, query.data(), k, accept, heap);
        std::sort_heap(heap.begin(), heap.end(), closer);
        return heap;
    }

    std::vector<Neighbor> knn(std::span<const double> query, std::size_t k) const {
        return knn(query, k, [](std::size_t) { return true; });
    }

    /// Calls fn(Neighbor) for every accepted point strictly closer than `radius`
    /// (unordered).
    template <typename Accept, typename Fn>
    void for_each_within(std::span<const double> query, double radius, Accept&& accept, Fn&& fn) const {
        if (!ids_.empty()) {
            visit_within(0, query.data(), radius, accept, fn);
        }
    }

private:
    struct Node {
        std::uint32_t begin = 0;
        std::uint32_t end = 0;
        std::uint32_t left = 0;  // 0 for leaves (root is never a child)
        std::uint32_t right = 0;
        std::uint32_t dim = 0;
        double split = 0.0;
    };

    std::uint32_t build(std::uint32_t begin, std::uint32_t end, std::vector<double>& scratch);

    const double* point(std::size_t slot) const { return coords_.data() + slot * dims_; }

    template <typename Accept>
    void search(std::uint32_t node_id, const double* q, std::size_t k, Accept& accept,
                std::vector<Neighbor>& heap) const {
        const Node& node = nodes_[node_id];
        if (node.left == 0) {
            for (std::uint32_t s = node.begin; s < node.end; ++s) {
                const std::size_t id = ids_[s];
                if (!accept(id)) {
                    continue;
                }
                const Neighbor cand{static_cast<std::uint32_t>(id), detail::distance(q, point(s), dims_)};
                if (heap.size() < k) {
                    heap.push_back(cand);
                    std::push_heap(heap.begin(), heap.end(), closer);
                } else if (closer(cand, heap.front())) {
                    std::pop_heap(heap.begin(), heap.end(), closer);
                    heap.back() = cand;
                    std::push_heap(heap.begin(), heap.end(), closer);
                }
            }
            return;
        }
        const double diff = q[node.dim] - node.split;
        const std::uint32_t near = diff <= 0.0 ? node.left : node.right;
        const std::uint32_t far = diff <= 0.0 ? node.right : node.left;
        search(near, q, k, accept, heap);
        // Equal bounds are still visited: a tie may carry a smaller index.
        const double bound = diff * diff / static_cast<double>(dims_);
        if (heap.size() < k || !(bound > heap.front().distance)) {
            search(far, q, k, accept, heap);
        }
    }

    template <typename Accept, typename Fn>
    void visit_within(std::uint32_t node_id, const double* q, double radius, Accept& accept, Fn& fn) const {
        const Node& node = nodes_[node_id];
        if (node.left == 0) {
            for (std::uint32_t s = node.begin; s < node.end; ++s) {
                const std::size_t id = ids_[s];
                if (!accept(id)) {
                    continue;
                }
                const double dist = detail::distance(q, point(s), dims_);
                if (dist < radius) {
                    fn(Neighbor{static_cast<std::uint32_t>(id), dist});
                }
            }
            return;
        }
        const double diff = q[node.dim] - node.split;
        const double bound = diff * diff / static_cast<double>(dims_);
        const std::uint32_t near = diff <= 0.0 ? node.left : node.right;
        const std::uint32_t far = diff <= 0.0 ? node.right : node.left;
        visit_within(near, q, radius, accept, fn);
        if (bound < radius) {
            visit_within(far, q, radius, accept, fn);
        }
    }

    std::size_t dims_ = 0;
    std::size_t leaf_size_ = 12;
    std::vector<double> coords_;     // tree order, dims_ values per slot
    std::vector<std::size_t> ids_;   // slot -> original row index
    std::vector<Node> nodes_;
};

/**
 * Directed k-NN graph. neighbors[i] lists min(k_max, n - 1) entries in
 * neighbor order and never contains i itself; duplicates of i may appear at
 * distance 0.
 */
struct NeighborGraph {
    std::size_t k_max = 0;
    std::vector<std::vector<Neighbor>> neighbors;
    std::vector<int> labels;
    std::vector<std::string> warnings;

    std::size_t size() const { return neighbors.size(); }

    bool operator==(const NeighborGraph& o) const {
        return k_max == o.k_max && neighbors == o.neighbors && labels == o.labels;
    }
};

enum class Method { brute, indexed };

/**
 * Builds the graph of `x` with up to `k_max` neighbors per vertex. A k_max of
 * n or more is clipped to n - 1 and recorded in `warnings`. Parallel over
 * query vertices; the output does not depend on `jobs`.
 */
NeighborGraph build_graph(const Matrix& x, std::span<const int> labels, std::size_t k_max,
                          Method method = Method::indexed, unsigned jobs = 1);

NeighborGraph build_graph(const data::Dataset& d, std::size_t k_max, Method method = Method::indexed,
                          unsigned jobs = 1);

/// Prefix views of length min(k, list length). Throws if k > g.k_max.
std::vector<std::span<const Neighbor>> truncate(const NeighborGraph& g, std::size_t k);

/**
 * Binary graph cache, little-endian:
 *   "MISNNG01" | u64 n | u64 k_max | n x i32 label |
 *   per vertex: u32 count, count x (u32 index, f64 distance)
 */
void save_graph(const NeighborGraph& g, const std::filesystem::path& path);
NeighborGraph load_graph(const std::filesystem::path& path);

} // namespace metais::nng

#endif
