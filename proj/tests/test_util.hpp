#ifndef METAIS_TESTS_TEST_UTIL_HPP
#define METAIS_TESTS_TEST_UTIL_HPP

#include "metais/common.hpp"
#include "metais/dataset.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace testutil {

using metais::Matrix;
using metais::data::Dataset;

inline Dataset make_dataset(std::size_t m, std::vector<double> values, std::vector<int> labels,
                            std::size_t classes = 0, std::string name = "fixture") {
    Dataset d;
    const std::size_t n = labels.size();
    d.features = Matrix(n, m, std::move(values));
    d.labels = std::move(labels);
    if (classes == 0) {
        for (int y : d.labels) {
            classes = std::max(classes, static_cast<std::size_t>(y) + 1);
        }
    }
    for (std::size_t j = 0; j < m; ++j) {
        d.feature_names.push_back("x" + std::to_string(j));
    }
    for (std::size_t c = 0; c < classes; ++c) {
        d.class_names.push_back("c" + std::to_string(c));
    }
    d.name = std::move(name);
    return d;
}

/**
 * Random labeled points. With `grid` the coordinates are small integers, which
 * produces many exact distance ties. Every class gets at least two members.
 */
inline Dataset random_dataset(std::uint64_t seed, std::size_t n, std::size_t m, std::size_t c, bool grid = false,
                              double class_shift = 0.7) {
    metais::Rng rng(seed);
    std::vector<double> values;
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        labels[i] = i < 2 * c ? static_cast<int>(i % c) : static_cast<int>(rng.index(c));
    }
    rng.shuffle(labels);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            const double shift = class_shift * static_cast<double>(labels[i]) * (j == 0 ? 1.0 : 0.0);
            if (grid) {
                values.push_back(static_cast<double>(rng.index(6)) + (j == 0 ? static_cast<double>(labels[i]) : 0.0));
            } else {
                values.push_back(rng.normal() + shift);
            }
        }
    }
    return make_dataset(m, std::move(values), std::move(labels), c, "random" + std::to_string(seed));
}

/// Two well separated Gaussian blobs of `per_class` points each in 2-D.
inline Dataset two_blobs(std::uint64_t seed, std::size_t per_class, double gap = 10.0, double spread = 1.0) {
    metais::Rng rng(seed);
    std::vector<double> values;
    std::vector<int> labels;
    for (int c = 0; c < 2; ++c) {
        for (std::size_t i = 0; i < per_class; ++i) {
            values.push_back(rng.normal() * spread + gap * c);
            values.push_back(rng.normal() * spread);
            labels.push_back(c);
        }
    }
    return make_dataset(2, std::move(values), std::move(labels), 2, "blobs");
}

} // namespace testutil

#endif
