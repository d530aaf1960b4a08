#include "metais/metafeatures.hpp"

#include <charconv>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace metais::features {

std::vector<std::size_t> default_k_list() {
    return {3, 5, 9, 15, 23, 33};
}

std::vector<std::string> feature_names(std::span<const std::size_t> k_list) {
    std::vector<std::string> names;
    names.reserve(kNumDescriptors * k_list.size());
    for (auto d : kDescriptorNames) {
        for (auto k : k_list) {
            names.push_back(std::string(d) + "@k=" + std::to_string(k));
        }
    }
    return names;
}

std::pair<Descriptor, std::size_t> parse_feature_name(std::string_view name) {
    const auto at = name.find("@k=");
    if (at == std::string_view::npos) {
        throw InvalidArgument("not a meta-feature name: '" + std::string(name) + "'");
    }
    const auto head = name.substr(0, at);
    std::size_t k = 0;
    const auto tail = name.substr(at + 3);
    auto res = std::from_chars(tail.data(), tail.data() + tail.size(), k);
    if (res.ec != std::errc() || res.ptr != tail.data() + tail.size()) {
        throw InvalidArgument("bad k in meta-feature name: '" + std::string(name) + "'");
    }
    for (std::size_t d = 0; d < kNumDescriptors; ++d) {
        if (kDescriptorNames[d] == head) {
            return {static_cast<Descriptor>(d), k};
        }
    }
    throw InvalidArgument("unknown descriptor in '" + std::string(name) + "'");
}

namespace {

void check_k_list(std::span<const std::size_t> k_list) {
    if (k_list.empty()) {
        throw InvalidArgument("k list is empty");
    }
    for (std::size_t i = 0; i < k_list.size(); ++i) {
        if (k_list[i] == 0 || (i > 0 && k_list[i] <= k_list[i - 1])) {
            throw InvalidArgument("k list must be strictly ascending positive counts");
        }
    }
}

void extract_vertex(std::span<const nng::Neighbor> list, std::span<const int> labels, int own,
                    std::span<const std::size_t> k_list, std::span<double> out) {
    const std::size_t kc = k_list.size();
    double sum_same = 0.0;
    double sum_opp = 0.0;
    double min_same = std::numeric_limits<double>::infinity();
    double min_opp = std::numeric_limits<double>::infinity();
    std::size_t n_same = 0;
    std::size_t n_opp = 0;
    std::size_t pos = 0;
    for (std::size_t ki = 0; ki < kc; ++ki) {
        const std::size_t stop = std::min(k_list[ki], list.size());
        for (; pos < stop; ++pos) {
            const auto& nb = list[pos];
            if (labels[nb.index] == own) {
                sum_same += nb.distance;
                min_same = std::min(min_same, nb.distance);
                ++n_same;
            } else {
                sum_opp += nb.distance;
                min_opp = std::min(min_opp, nb.distance);
                ++n_opp;
            }
        }
        const std::size_t n_any = n_same + n_opp;
        // Rounding can put the mean of equal distances one ulp below their minimum.
        auto mean = [](double sum, std::size_t count, double floor) {
            return count ? std::max(sum / static_cast<double>(count), floor) : kMissing;
        };
        out[column(avg_dist_same, ki, kc)] = mean(sum_same, n_same, min_same);
        out[column(avg_dist_opposite, ki, kc)] = mean(sum_opp, n_opp, min_opp);
        out[column(avg_dist_any, ki, kc)] = mean(sum_same + sum_opp, n_any, std::min(min_same, min_opp));
        out[column(min_dist_same, ki, kc)] = n_same ? min_same : kMissing;
        out[column(min_dist_opposite, ki, kc)] = n_opp ? min_opp : kMissing;
        out[column(min_dist_any, ki, kc)] = n_any ? std::min(min_same, min_opp) : kMissing;
        out[column(count_same, ki, kc)] = static_cast<double>(n_same);
        out[column(count_opposite, ki, kc)] = static_cast<double>(n_opp);
    }
}

} // namespace

MetaDataset extract(std::span<const std::span<const nng::Neighbor>> lists, std::span<const int> labels,
                    std::span<const std::size_t> k_list, const std::string& source, unsigned jobs) {
    check_k_list(k_list);
    if (lists.size() != labels.size()) {
        throw InvalidArgument("extract: neighbor lists and labels differ in length");
    }
    MetaDataset meta;
    meta.feature_names = feature_names(k_list);
    meta.records = Matrix(lists.size(), meta.feature_names.size());
    meta.source_names = {source};
    meta.source_ids.assign(lists.size(), 0);
    parallel_for(lists.size(), jobs, [&](std::size_t i) {
        extract_vertex(lists[i], labels, labels[i], k_list, meta.records.row(i));
    });
    return meta;
}

MetaDataset extract(const nng::NeighborGraph& g, std::span<const std::size_t> k_list, const std::string& source,
                    unsigned jobs) {
    check_k_list(k_list);
    if (k_list.back() > g.k_max) {
        throw InvalidArgument("extract: k=" + std::to_string(k_list.back()) + " exceeds graph k_max=" +
                              std::to_string(g.k_max));
    }
    std::vector<std::span<const nng::Neighbor>> lists(g.neighbors.begin(), g.neighbors.end());
    return extract(lists, g.labels, k_list, source, jobs);
}

MetaDataset concat(std::span<const MetaDataset> parts) {
    MetaDataset out;
    if (parts.empty()) {
        return out;
    }
    out.feature_names = parts.front().feature_names;
    bool labeled = true;
    for (const auto& p : parts) {
        labeled = labeled && p.labels.has_value();
    }
    if (labeled) {
        out.labels.emplace();
    }
    std::map<std::string, std::uint32_t> source_index;
    for (const auto& p : parts) {
        if (p.feature_names != out.feature_names) {
            throw InvalidArgument("concat: meta-datasets have different columns");
        }
        out.records.append_rows(p.records);
        if (labeled) {
            out.labels->insert(out.labels->end(), p.labels->begin(), p.labels->end());
        }
        std::vector<std::uint32_t> remap(p.source_names.size());
        for (std::size_t s = 0; s < p.source_names.size(); ++s) {
            auto [it, inserted] = source_index.emplace(p.source_names[s], out.source_names.size());
            if (inserted) {
                out.source_names.push_back(p.source_names[s]);
            }
            remap[s] = it->second;
        }
        for (auto id : p.source_ids) {
            out.source_ids.push_back(remap[id]);
        }
    }
    return out;
}

void write_csv(const MetaDataset& meta, std::ostream& out) {
    for (const auto& n : meta.feature_names) {
        out << n << ',';
    }
    if (meta.labels) {
        out << "label,";
    }
    out << "source\n";
    for (std::size_t i = 0; i < meta.size(); ++i) {
        for (double v : meta.records.row(i)) {
            out << format_double(v) << ',';
        }
        if (meta.labels) {
            out << (*meta.labels)[i] << ',';
        }
        out << meta.source_of(i) << '\n';
    }
}

void write_csv(const MetaDataset& meta, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write '" + path.string() + "'");
    }
    write_csv(meta, out);
}

MetaDataset read_csv(std::istream& in, const std::string& source) {
    std::string line;
    if (!std::getline(in, line)) {
        throw ParseError(source, 1, "missing header row");
    }
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            header.push_back(cell);
        }
    }
    if (header.empty() || header.back() != "source") {
        throw ParseError(source, 1, "last column must be 'source'");
    }
    MetaDataset meta;
    const bool labeled = header.size() >= 2 && header[header.size() - 2] == "label";
    const std::size_t m = header.size() - (labeled ? 2 : 1);
    meta.feature_names.assign(header.begin(), header.begin() + static_cast<std::ptrdiff_t>(m));
    for (const auto& n : meta.feature_names) {
        parse_feature_name(n);
    }
    if (labeled) {
        meta.labels.emplace();
    }
    std::vector<double> values;
    std::map<std::string, std::uint32_t> source_index;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        std::vector<std::string_view> cells;
        std::size_t start = 0;
        for (std::size_t i = 0; i <= line.size(); ++i) {
            if (i == line.size() || line[i] == ',') {
                cells.emplace_back(line.data() + start, i - start);
                start = i + 1;
            }
        }
        if (cells.size() != header.size()) {
            throw ParseError(source, line_no, "wrong number of cells");
        }
        for (std::size_t j = 0; j < m; ++j) {
            double v = 0.0;
            auto res = std::from_chars(cells[j].data(), cells[j].data() + cells[j].size(), v);
            if (res.ec != std::errc() || res.ptr != cells[j].data() + cells[j].size()) {
                throw ParseError(source, line_no, "non-numeric cell '" + std::string(cells[j]) + "'");
            }
            values.push_back(v);
        }
        if (labeled) {
            const auto& c = cells[m];
            if (c != "0" && c != "1") {
                throw ParseError(source, line_no, "label must be 0 or 1");
            }
            meta.labels->push_back(c == "1" ? 1 : 0);
        }
        const std::string src(cells.back());
        auto [it, inserted] = source_index.emplace(src, meta.source_names.size());
        if (inserted) {
            meta.source_names.push_back(src);
        }
        meta.source_ids.push_back(it->second);
    }
    const std::size_t rows = meta.source_ids.size();
    meta.records = Matrix(rows, m, std::move(values));
    return meta;
}

MetaDataset read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open '" + path.string() + "'");
    }
    return read_csv(in, path.string());
}

} // namespace metais::features
