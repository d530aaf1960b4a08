#include "metais/nng.hpp"
#include "oracles/oracles.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <filesystem>

using namespace metais;
using namespace metais::nng;

TEST_CASE("distance is the mean squared difference") {
    const std::vector<double> a = {0, 0};
    const std::vector<double> b = {3, 4};
    CHECK(distance(a, b) == 12.5);
    CHECK(distance(a, a) == 0.0);
    CHECK_THROWS_AS(distance(a, std::vector<double>{1.0}), InvalidArgument);

    Rng rng(3);
    std::vector<double> x(7);
    std::vector<double> y(7);
    for (int i = 0; i < 7; ++i) {
        x[i] = rng.normal();
        y[i] = rng.normal();
    }
    double ref = 0.0;
    for (int i = 6; i >= 0; --i) {
        ref += std::pow(x[i] - y[i], 2);
    }
    CHECK(std::abs(distance(x, y) - ref / 7.0) < 1e-12);
}

TEST_CASE("collinear hand example") {
    const auto d = testutil::make_dataset(1, {0, 1, 3}, {0, 0, 1});
    const auto g = build_graph(d, 2, Method::brute);
    REQUIRE(g.neighbors[1].size() == 2);
    CHECK(g.neighbors[1][0] == Neighbor{0, 1.0});
    CHECK(g.neighbors[1][1] == Neighbor{2, 4.0});
    CHECK(build_graph(d, 2, Method::indexed) == g);
}

TEST_CASE("duplicates are mutual first neighbors at distance zero") {
    const auto d = testutil::make_dataset(2, {0, 0, 5, 5, 0, 0, 9, 1}, {0, 1, 0, 1});
    for (auto method : {Method::brute, Method::indexed}) {
        const auto g = build_graph(d, 3, method);
        CHECK(g.neighbors[0][0] == Neighbor{2, 0.0});
        CHECK(g.neighbors[2][0] == Neighbor{0, 0.0});
    }
}

TEST_CASE("graph invariants and brute oracle") {
    const auto d = testutil::random_dataset(21, 120, 3, 2, true);
    const auto g = build_graph(d, 10, Method::indexed);
    for (std::size_t i = 0; i < d.size(); ++i) {
        const auto& l = g.neighbors[i];
        REQUIRE(l.size() == 10);
        const auto ref = oracle::knn(d, i, 10);
        for (std::size_t p = 0; p < l.size(); ++p) {
            CHECK(l[p].index != i);
            CHECK(l[p].index == ref[p].index);
            CHECK(l[p].distance == ref[p].distance);
            if (p > 0) {
                CHECK(closer(l[p - 1], l[p]));
            }
        }
    }
}

TEST_CASE("indexed equals brute on 500 uniform points") {
    Rng rng(500);
    std::vector<double> v;
    std::vector<int> y;
    for (int i = 0; i < 500; ++i) {
        v.push_back(rng.uniform());
        v.push_back(rng.uniform());
        y.push_back(static_cast<int>(rng.index(2)));
    }
    const auto d = testutil::make_dataset(2, v, y, 2);
    CHECK(build_graph(d, 33, Method::indexed) == build_graph(d, 33, Method::brute));
    CHECK(build_graph(d, 33, Method::indexed, 4) == build_graph(d, 33, Method::brute));
}

TEST_CASE("truncate and prefix property") {
    const auto d = testutil::random_dataset(4, 80, 2, 3, true);
    const auto g = build_graph(d, 9);
    const auto full = truncate(g, 9);
    for (std::size_t i = 0; i < g.size(); ++i) {
        CHECK(std::equal(full[i].begin(), full[i].end(), g.neighbors[i].begin(), g.neighbors[i].end()));
    }
    const auto one = truncate(g, 1);
    for (std::size_t i = 0; i < g.size(); ++i) {
        CHECK(one[i].size() == 1);
    }
    const auto g5 = build_graph(d, 5);
    const auto t5 = truncate(g, 5);
    for (std::size_t i = 0; i < g.size(); ++i) {
        CHECK(std::equal(t5[i].begin(), t5[i].end(), g5.neighbors[i].begin(), g5.neighbors[i].end()));
    }
    CHECK_THROWS_AS(truncate(g, 10), InvalidArgument);
}

TEST_CASE("column permutation and uniform scaling") {
    const auto d = testutil::random_dataset(8, 60, 3, 2, true);
    auto perm = d;
    auto scaled = d;
    for (std::size_t i = 0; i < d.size(); ++i) {
        perm.features(i, 0) = d.features(i, 2);
        perm.features(i, 2) = d.features(i, 0);
        for (std::size_t j = 0; j < 3; ++j) {
            scaled.features(i, j) = 2.0 * d.features(i, j);
        }
    }
    const auto g = build_graph(d, 6);
    const auto gs = build_graph(scaled, 6);
    CHECK(build_graph(perm, 6) == g);
    for (std::size_t i = 0; i < g.size(); ++i) {
        for (std::size_t p = 0; p < 6; ++p) {
            CHECK(gs.neighbors[i][p].index == g.neighbors[i][p].index);
            CHECK(gs.neighbors[i][p].distance == doctest::Approx(4.0 * g.neighbors[i][p].distance));
        }
    }
}

TEST_CASE("k_max at or above n is clipped with a warning") {
    const auto d = testutil::random_dataset(2, 5, 2, 2);
    const auto g = build_graph(d, 10);
    CHECK(g.k_max == 4);
    CHECK_FALSE(g.warnings.empty());
    for (const auto& l : g.neighbors) {
        CHECK(l.size() == 4);
    }
    CHECK_THROWS_AS(build_graph(d, 0), InvalidArgument);
    const auto single = testutil::make_dataset(1, {1.0}, {0});
    CHECK_THROWS_AS(build_graph(single, 1), InvalidArgument);
}

TEST_CASE("graph cache round-trips") {
    const auto d = testutil::random_dataset(9, 70, 3, 2);
    const auto g = build_graph(d, 12);
    const auto path = std::filesystem::temp_directory_path() / "metais_graph_test.nng";
    save_graph(g, path);
    CHECK(load_graph(path) == g);
    std::filesystem::remove(path);
}
