#ifndef METAIS_EVAL_HPP
#define METAIS_EVAL_HPP

#include "metais/dataset.hpp"
#include "metais/forest.hpp"
#include "metais/pipeline.hpp"
#include "metais/stats.hpp"

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

/**
 * @file eval.hpp
 * @brief 1-NN scoring, threshold sweeps, areas under the accuracy versus
 * reduction-rate curve, and the leave-one-dataset-out benchmark.
 */

namespace metais::eval {

struct Score {
    double accuracy = 0.0;
    double f1 = 0.0;  // class id 1 as positive when c = 2, macro average otherwise
};

/// Labels every test row with its nearest training row (nng distance and tie
/// order). Throws InvalidArgument when `train` is empty.
Score eval_1nn(const data::Dataset& train, const data::Dataset& test, unsigned jobs = 1);

struct CurvePoint {
    double reduction_rate = 0.0;
    double accuracy = 0.0;
    double f1 = 0.0;
    std::optional<double> theta;  // absent for the no-selection anchor

    bool operator==(const CurvePoint&) const = default;
};

struct Sweep {
    std::vector<CurvePoint> points;     // anchor first, then one per scored theta
    std::vector<double> skipped_thetas; // thetas that kept nothing
};

/// Anchor (rr 0, 1-NN on all of `train`), then 1-NN on each kept subset.
/// Thetas must be ascending in (0, 1).
Sweep theta_sweep(std::span<const double> keep_probabilities, const data::Dataset& train,
                  const data::Dataset& test, std::span<const double> thetas);

Sweep theta_sweep(const pipeline::MetaSelector& sel, const data::Dataset& train, const data::Dataset& test,
                  std::span<const double> thetas, pipeline::QueryScaling scaling = pipeline::QueryScaling::own);

using ScoreField = double CurvePoint::*;

/**
 * Trapezoidal area under score(reduction_rate) from 0 to `limit`. Points are
 * ordered by reduction rate and points sharing a rate collapse to their best
 * score. The curve is interpolated at `limit` and never extrapolated past its
 * last point.
 */
double auarr(std::span<const CurvePoint> curve, double limit, ScoreField score = &CurvePoint::accuracy);

struct RefPoint {
    double reduction_rate = 0.0;
    double score = 0.0;
};

struct Areas {
    double limited_meta = 0.0;  // meta curve up to the reference reduction rate
    double limited_ref = 0.0;   // trapezoid (0, full) -> (rr_ref, score_ref)
    double meta = 0.0;          // meta curve up to its last reduction rate
    double ref = 0.0;           // reference segment, flat past rr_ref, same extent

    bool operator==(const Areas&) const = default;
};

Areas auarr_limited(std::span<const CurvePoint> meta_curve, RefPoint ref, double full_score,
                    ScoreField score = &CurvePoint::accuracy);

/// Wall time of fn() in milliseconds (steady clock).
template <typename Fn>
double time_ms(Fn&& fn) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    const auto stop = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(stop - start).count();
}

struct BenchmarkConfig {
    pipeline::MetaOptions meta;
    pipeline::Classifier classifier = pipeline::Classifier::balanced_rf;
    forest::ForestParams forest;
    std::vector<double> thetas = pipeline::default_theta_grid();
    std::size_t folds = 5;
    std::uint64_t seed = 1;
    pipeline::QueryScaling scaling = pipeline::QueryScaling::own;
    double alpha = 0.05;
    /// Held-out datasets evaluated concurrently. Timings are only comparable
    /// with 1.
    unsigned jobs = 1;
};

struct FoldReport {
    std::size_t fold = 0;
    std::size_t train_size = 0;
    std::size_t test_size = 0;
    Score full;               // 1-NN on the whole training portion
    Score ref;                // 1-NN on the reference selection
    double ref_reduction_rate = 0.0;
    Sweep sweep;
    Areas areas;
    double ref_time_ms = 0.0;
    double meta_time_ms = 0.0;
};

struct DatasetReport {
    std::string name;
    std::vector<std::string> selector_trained_on;
    std::vector<FoldReport> folds;
    std::optional<std::string> skipped;  // reason, when the dataset could not be evaluated
    WelchResult welch_limited;           // fold areas, meta vs reference
    WelchResult welch_full;
};

struct EvalReport {
    BenchmarkConfig config;
    std::vector<DatasetReport> datasets;
    std::size_t wins_limited = 0;
    std::size_t wins_full = 0;
    double mean_diff_limited = 0.0;
    double mean_diff_full = 0.0;
    std::optional<WilcoxonResult> wilcoxon_limited;
    std::optional<WilcoxonResult> wilcoxon_full;
    forest::ImportanceReport importance;  // averaged over the per-fold-out selectors
};

/**
 * For every dataset: train a selector on all the others, then run stratified
 * k-fold CV inside it. Per fold, the training portion is z-scored with its own
 * statistics (applied to the test portion too), the reference algorithm runs
 * on it, and the selector is swept over the theta grid. Failures of one
 * dataset are recorded in `skipped` and the run continues.
 */
EvalReport leave_one_dataset_out(std::span<const data::Dataset> datasets, const BenchmarkConfig& cfg);

/**
 * Writes report.json, curves.csv (dataset x fold x point), folds.csv,
 * summary.csv, importance_by_feature.csv, importance_by_type.csv,
 * importance_by_k.csv and timing.csv into `dir`. Only timing.csv depends on
 * wall-clock measurements.
 */
void write_report(const EvalReport& report, const std::filesystem::path& dir);

/// importance_by_feature.csv, importance_by_type.csv and importance_by_k.csv.
void write_importance(const forest::ImportanceReport& imp, const std::filesystem::path& dir);

} // namespace metais::eval

#endif
