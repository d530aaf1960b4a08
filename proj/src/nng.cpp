#include "metais/nng.hpp"

#include <cstring>
#include <fstream>
#include <numeric>

namespace metais::nng {

double distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw InvalidArgument("distance: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                              std::to_string(b.size()) + ")");
    }
    if (a.empty()) {
        throw InvalidArgument("distance: vectors must have at least one feature");
    }
    return detail::distance(a.data(), b.data(), a.size());
}

KdTree::KdTree(const Matrix& points, std::size_t leaf_size) {
    std::vector<std::size_t> all(points.rows());
    std::iota(all.begin(), all.end(), std::size_t{0});
    *this = KdTree(points, all, leaf_size);
}

KdTree::KdTree(const Matrix& points, std::span<const std::size_t> subset, std::size_t leaf_size)
    : dims_(points.cols()), leaf_size_(std::max<std::size_t>(leaf_size, 1)), ids_(subset.begin(), subset.end()) {
    if (ids_.empty()) {
        return;
    }
    if (dims_ == 0) {
        throw InvalidArgument("kd-tree needs at least one feature");
    }
    coords_.resize(ids_.size() * dims_);
    for (std::size_t s = 0; s < ids_.size(); ++s) {
        auto r = points.row(ids_[s]);
        std::copy(r.begin(), r.end(), coords_.begin() + static_cast<std::ptrdiff_t>(s * dims_));
    }
    nodes_.reserve(2 * ids_.size() / leaf_size_ + 1);
    std::vector<double> scratch;
    build(0, static_cast<std::uint32_t>(ids_.size()), scratch);
}

std::uint32_t KdTree::build(std::uint32_t begin, std::uint32_t end, std::vector<double>& scratch) {
    const auto id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back(Node{begin, end, 0, 0, 0, 0.0});
    if (end - begin <= leaf_size_) {
        return id;
    }
    // Split the widest dimension at its median.
    std::size_t best_dim = 0;
    double best_spread = -1.0;
    for (std::size_t j = 0; j < dims_; ++j) {
        double lo = point(begin)[j];
        double hi = lo;
        for (std::uint32_t s = begin + 1; s < end; ++s) {
            const double v = point(s)[j];
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (hi - lo > best_spread) {
            best_spread = hi - lo;
            best_dim = j;
        }
    }
    if (best_spread <= 0.0) {
        return id;  // all points identical
    }
    std::vector<std::uint32_t> order(end - begin);
    std::iota(order.begin(), order.end(), begin);
    const std::size_t mid = order.size() / 2;
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(mid), order.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return point(a)[best_dim] < point(b)[best_dim]; });
    const double split = point(order[mid])[best_dim];

    // Reorder slots [begin, end) to follow `order`.
    scratch.resize(order.size() * dims_);
    std::vector<std::size_t> new_ids(order.size());
    for (std::size_t t = 0; t < order.size(); ++t) {
        std::memcpy(scratch.data() + t * dims_, point(order[t]), dims_ * sizeof(double));
        new_ids[t] = ids_[order[t]];
    }
    std::memcpy(coords_.data() + static_cast<std::size_t>(begin) * dims_, scratch.data(),
                order.size() * dims_ * sizeof(double));
    std::copy(new_ids.begin(), new_ids.end(), ids_.begin() + begin);

    const auto cut = begin + static_cast<std::uint32_t>(mid);
    nodes_[id].dim = static_cast<std::uint32_t>(best_dim);
    nodes_[id].split = split;
    const auto left = build(begin, cut, scratch);
    const auto right = build(cut, end, scratch);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

NeighborGraph build_graph(const Matrix& x, std::span<const int> labels, std::size_t k_max, Method method,
                          unsigned jobs) {
    const std::size_t n = x.rows();
    if (k_max < 1) {
        throw InvalidArgument("build_graph: k_max must be at least 1");
    }
    if (n < 2) {
        throw InvalidArgument("build_graph: need at least 2 instances");
    }
    if (labels.size() != n) {
        throw InvalidArgument("build_graph: label count differs from row count");
    }
    NeighborGraph g;
    g.labels.assign(labels.begin(), labels.end());
    if (k_max >= n) {
        g.warnings.push_back("k_max=" + std::to_string(k_max) + " clipped to n-1=" + std::to_string(n - 1));
        k_max = n - 1;
    }
    g.k_max = k_max;
    g.neighbors.resize(n);
    const std::size_t m = x.cols();

    if (method == Method::brute) {
        parallel_for(n, jobs, [&](std::size_t i) {
            std::vector<Neighbor> all;
            all.reserve(n - 1);
            for (std::size_t j = 0; j < n; ++j) {
                if (j != i) {
                    all.push_back({static_cast<std::uint32_t>(j), detail::distance(x.row(i).data(), x.row(j).data(), m)});
                }
            }
            std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k_max), all.end(), closer);
            all.resize(k_max);
            g.neighbors[i] = std::move(all);
        });
        return g;
    }

    const KdTree tree(x);
    parallel_for(n, jobs, [&](std::size_t i) {
        g.neighbors[i] = tree.knn(x.row(i), k_max, [i](std::size_t j) { return j != i; });
    });
    return g;
}

NeighborGraph build_graph(const data::Dataset& d, std::size_t k_max, Method method, unsigned jobs) {
    return build_graph(d.features, d.labels, k_max, method, jobs);
}

std::vector<std::span<const Neighbor>> truncate(const NeighborGraph& g, std::size_t k) {
    if (k > g.k_max) {
        throw InvalidArgument("truncate: k=" + std::to_string(k) + " exceeds k_max=" + std::to_string(g.k_max));
    }
    std::vector<std::span<const Neighbor>> out;
    out.reserve(g.size());
    for (const auto& list : g.neighbors) {
        out.emplace_back(list.data(), std::min(k, list.size()));
    }
    return out;
}

namespace {

constexpr char kMagic[8] = {'M', 'I', 'S', 'N', 'N', 'G', '0', '1'};

template <typename T>
void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::string& path) {
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
        throw Error("graph cache '" + path + "' is truncated");
    }
    return v;
}

} // namespace

void save_graph(const NeighborGraph& g, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write graph cache '" + path.string() + "'");
    }
    out.write(kMagic, sizeof(kMagic));
    put<std::uint64_t>(out, g.size());
    put<std::uint64_t>(out, g.k_max);
    for (int y : g.labels) {
        put<std::int32_t>(out, y);
    }
    for (const auto& list : g.neighbors) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(list.size()));
        for (const auto& nb : list) {
            put<std::uint32_t>(out, nb.index);
            put<double>(out, nb.distance);
        }
    }
    if (!out) {
        throw Error("failed writing graph cache '" + path.string() + "'");
    }
}

NeighborGraph load_graph(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open graph cache '" + path.string() + "'");
    }
    const std::string p = path.string();
    char magic[8];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw Error("'" + p + "' is not a graph cache file");
    }
    NeighborGraph g;
    const auto n = get<std::uint64_t>(in, p);
    g.k_max = get<std::uint64_t>(in, p);
    g.labels.resize(n);
    for (auto& y : g.labels) {
        y = get<std::int32_t>(in, p);
    }
    g.neighbors.resize(n);
    for (auto& list : g.neighbors) {
        const auto count = get<std::uint32_t>(in, p);
        if (count > g.k_max) {
            throw Error("graph cache '" + p + "' has a neighbor list longer than k_max");
        }
        list.resize(count);
        for (auto& nb : list) {
            nb.index = get<std::uint32_t>(in, p);
            nb.distance = get<double>(in, p);
            if (nb.index >= n) {
                throw Error("graph cache '" + p + "' has an out-of-range neighbor index");
            }
        }
    }
    return g;
}

} // namespace metais::nng
