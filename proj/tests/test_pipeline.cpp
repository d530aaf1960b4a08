#include "metais/pipeline.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <filesystem>

using namespace metais;
using namespace metais::pipeline;

namespace {

forest::ForestParams small_forest() {
    forest::ForestParams p;
    p.n_trees = 20;
    return p;
}

std::vector<data::Dataset> noisy_sets() {
    std::vector<data::Dataset> out;
    for (std::uint64_t s = 0; s < 3; ++s) {
        auto d = testutil::random_dataset(300 + s, 100, 2, 2, false, 1.5);
        d.name = "noisy" + std::to_string(s);
        out.push_back(std::move(d));
    }
    return out;
}

} // namespace

TEST_CASE("merged meta training set") {
    const auto sets = noisy_sets();
    MetaOptions opt;
    const auto t = build_meta_training_set(std::span(sets).first(2), opt);
    CHECK(t.meta.size() == 200);
    CHECK(t.meta.records.cols() == 48);
    CHECK(t.meta.source_names == std::vector<std::string>{"noisy0", "noisy1"});
    REQUIRE(t.meta.labels);
    // Per-source standardization: every column has mean 0 within a source.
    for (std::size_t j = 0; j < 48; ++j) {
        double s0 = 0.0;
        for (std::size_t r = 0; r < 100; ++r) {
            s0 += t.meta.records(r, j);
        }
        CHECK(std::abs(s0 / 100.0) < 1e-9);
    }
    CHECK_THROWS_AS(build_meta_training_set(std::span<const data::Dataset>{}, opt), InvalidArgument);
}

TEST_CASE("enn labels of a single class dataset are all keep") {
    auto d = testutil::random_dataset(1, 60, 2, 1);
    const std::vector<data::Dataset> one = {d};
    const auto t = build_meta_training_set(one, MetaOptions{});
    for (int y : *t.meta.labels) {
        CHECK(y == 1);
    }
    CHECK_THROWS_AS(train_meta_selector(t, MetaOptions{}, Classifier::balanced_rf, small_forest(), 1),
                    InvalidArgument);
}

TEST_CASE("failing reference run names the dataset") {
    auto d = testutil::make_dataset(1, {0, 1, 2, 3, 4}, {0, 0, 1, 1, 1});
    d.name = "tiny";
    const std::vector<data::Dataset> sets = {d};
    MetaOptions opt;
    opt.k = 9;
    CHECK_THROWS_WITH(build_meta_training_set(sets, opt), doctest::Contains("dataset 'tiny'"));
}

TEST_CASE("selector training, provenance and bundle round trip") {
    const auto sets = noisy_sets();
    MetaOptions opt;
    const auto t = build_meta_training_set(std::span(sets).first(2), opt);
    const auto sel = train_meta_selector(t, opt, Classifier::balanced_rf, small_forest(), 17);
    CHECK(MetaSelector{}.classifier == Classifier::balanced_rf);
    CHECK(parse_classifier("balanced_rf") == Classifier::balanced_rf);
    CHECK(sel.trained_on == std::vector<std::string>{"noisy0", "noisy1"});
    CHECK(std::find(sel.trained_on.begin(), sel.trained_on.end(), "noisy2") == sel.trained_on.end());
    const auto again = train_meta_selector(t, opt, Classifier::balanced_rf, small_forest(), 17);
    CHECK(again == sel);

    const auto dir = std::filesystem::temp_directory_path() / "metais_bundle_test";
    std::filesystem::remove_all(dir);
    save_selector(sel, dir);
    const auto back = load_selector(dir);
    CHECK(back == sel);
    CHECK(forest::to_json(back.model) == forest::to_json(sel.model));
    std::filesystem::remove_all(dir);

    const auto res = score_instances(sel, sets[2]);
    CHECK(res.probabilities.size() == 100);
    for (double p : res.probabilities) {
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
    }
    const auto pooled = score_instances(sel, sets[2], QueryScaling::pooled);
    CHECK(pooled.probabilities.size() == 100);
}

TEST_CASE("thresholds") {
    SelectionResult res;
    res.probabilities = {0.05, 0.35, 0.5, 0.72, 0.95};
    CHECK(apply_threshold(res, 0.96).kept() == 0);
    CHECK(apply_threshold(res, 0.04).kept() == 5);
    CHECK(apply_threshold(res, 0.5).keep == std::vector<bool>{false, false, true, true, true});
    CHECK_THROWS_AS(apply_threshold(res, 0.0), InvalidArgument);
    CHECK_THROWS_AS(apply_threshold(res, 1.0), InvalidArgument);
    const auto grid = default_theta_grid();
    REQUIRE(grid.size() == 9);
    const auto masks = res.masks(grid);
    for (std::size_t t = 1; t < masks.size(); ++t) {
        for (std::size_t j = 0; j < 5; ++j) {
            CHECK((!masks[t][j] || masks[t - 1][j]));
        }
    }
}

TEST_CASE("duplicates score alike and interior beats isolated points") {
    // Blobs with a few mislabeled points planted inside the other class.
    auto blobs = testutil::two_blobs(5, 150, 6.0);
    for (std::size_t i = 0; i < 10; ++i) {
        blobs.labels[i] = 1;
    }
    blobs.name = "blobs";
    auto other = testutil::two_blobs(6, 150, 6.0);
    for (std::size_t i = 150; i < 160; ++i) {
        other.labels[i] = 0;
    }
    other.name = "other";
    const std::vector<data::Dataset> train = {other};
    MetaOptions opt;
    const auto t = build_meta_training_set(train, opt);
    const auto sel = train_meta_selector(t, opt, Classifier::balanced_rf, small_forest(), 3);

    auto query = blobs;
    query.features.append_rows(blobs.features.select_rows(std::vector<std::size_t>{200}));
    query.labels.push_back(blobs.labels[200]);
    const auto res = score_instances(sel, query);
    CHECK(res.probabilities[200] == res.probabilities.back());

    double planted = 0.0;
    double interior = 0.0;
    for (std::size_t i = 0; i < 10; ++i) {
        planted += res.probabilities[i];
        interior += res.probabilities[150 + 20 + i];
    }
    CHECK(interior > planted);
}

TEST_CASE("tiny query sets clip k with a warning") {
    const auto sets = noisy_sets();
    MetaOptions opt;
    const auto t = build_meta_training_set(std::span(sets).first(1), opt);
    const auto sel = train_meta_selector(t, opt, Classifier::rf, small_forest(), 2);
    const auto tiny = testutil::random_dataset(4, 3, 2, 1);
    const auto res = score_instances(sel, tiny);
    CHECK(res.probabilities.size() == 3);
    CHECK_FALSE(res.warnings.empty());
}
