#include "metais/eval.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

namespace metais::eval {

using json = nlohmann::json;

Score eval_1nn(const data::Dataset& train, const data::Dataset& test, unsigned jobs) {
    if (train.size() == 0) {
        throw InvalidArgument("eval_1nn: empty training set");
    }
    if (test.size() == 0) {
        throw InvalidArgument("eval_1nn: empty test set");
    }
    if (train.num_features() != test.num_features()) {
        throw InvalidArgument("eval_1nn: train and test have different feature counts");
    }
    const nng::KdTree tree(train.features);
    std::vector<int> pred(test.size());
    parallel_for(test.size(), jobs, [&](std::size_t i) {
        pred[i] = train.labels[tree.knn(test.features.row(i), 1).front().index];
    });
    std::size_t correct = 0;
    std::map<int, std::array<std::size_t, 3>> per_class;  // tp, fp, fn
    for (std::size_t i = 0; i < test.size(); ++i) {
        const int y = test.labels[i];
        if (pred[i] == y) {
            ++correct;
            ++per_class[y][0];
        } else {
            ++per_class[pred[i]][1];
            ++per_class[y][2];
        }
    }
    auto f1_of = [](const std::array<std::size_t, 3>& c) {
        const std::size_t denom = 2 * c[0] + c[1] + c[2];
        return denom == 0 ? 0.0 : 2.0 * static_cast<double>(c[0]) / static_cast<double>(denom);
    };
    Score s;
    s.accuracy = static_cast<double>(correct) / static_cast<double>(test.size());
    if (std::max(train.num_classes(), test.num_classes()) == 2) {
        s.f1 = f1_of(per_class[1]);
    } else {
        double sum = 0.0;
        for (const auto& [cls, c] : per_class) {
            sum += f1_of(c);
        }
        s.f1 = sum / static_cast<double>(per_class.size());
    }
    return s;
}

Sweep theta_sweep(std::span<const double> keep_probabilities, const data::Dataset& train,
                  const data::Dataset& test, std::span<const double> thetas) {
    if (keep_probabilities.size() != train.size()) {
        throw InvalidArgument("theta_sweep: one probability per training row is required");
    }
    for (std::size_t i = 0; i < thetas.size(); ++i) {
        if (!(thetas[i] > 0.0 && thetas[i] < 1.0) || (i > 0 && !(thetas[i] > thetas[i - 1]))) {
            throw InvalidArgument("theta_sweep: thetas must be ascending in (0, 1)");
        }
    }
    Sweep sweep;
    const Score full = eval_1nn(train, test);
    sweep.points.push_back({0.0, full.accuracy, full.f1, std::nullopt});
    const double n = static_cast<double>(train.size());
    for (double theta : thetas) {
        std::vector<std::size_t> kept;
        for (std::size_t j = 0; j < keep_probabilities.size(); ++j) {
            if (keep_probabilities[j] >= theta) {
                kept.push_back(j);
            }
        }
        if (kept.empty()) {
            sweep.skipped_thetas.push_back(theta);
            continue;
        }
        const Score s = eval_1nn(data::subset(train, kept), test);
        sweep.points.push_back({(n - static_cast<double>(kept.size())) / n, s.accuracy, s.f1, theta});
    }
    return sweep;
}

Sweep theta_sweep(const pipeline::MetaSelector& sel, const data::Dataset& train, const data::Dataset& test,
                  std::span<const double> thetas, pipeline::QueryScaling scaling) {
    const auto res = pipeline::score_instances(sel, train, scaling);
    return theta_sweep(res.probabilities, train, test, thetas);
}

double auarr(std::span<const CurvePoint> curve, double limit, ScoreField score) {
    if (curve.empty()) {
        throw InvalidArgument("auarr: empty curve");
    }
    std::vector<std::pair<double, double>> pts;
    for (const auto& p : curve) {
        pts.emplace_back(p.reduction_rate, p.*score);
    }
    std::stable_sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<std::pair<double, double>> xy;
    for (const auto& p : pts) {
        if (!xy.empty() && xy.back().first == p.first) {
            xy.back().second = std::max(xy.back().second, p.second);
        } else {
            xy.push_back(p);
        }
    }
    double area = 0.0;
    for (std::size_t i = 0; i + 1 < xy.size(); ++i) {
        const auto [x0, y0] = xy[i];
        const auto [x1, y1] = xy[i + 1];
        if (!(x0 < limit)) {
            break;
        }
        if (x1 > limit) {
            const double yl = y0 + (y1 - y0) * (limit - x0) / (x1 - x0);
            area += (limit - x0) * (y0 + yl) / 2.0;
            break;
        }
        area += (x1 - x0) * (y0 + y1) / 2.0;
    }
    return area;
}

Areas auarr_limited(std::span<const CurvePoint> meta_curve, RefPoint ref, double full_score, ScoreField score) {
    if (meta_curve.empty()) {
        throw InvalidArgument("auarr: empty curve");
    }
    if (!(ref.reduction_rate >= 0.0 && ref.reduction_rate <= 1.0)) {
        throw InvalidArgument("auarr: reference reduction rate outside [0, 1]");
    }
    Areas a;
    a.limited_meta = auarr(meta_curve, ref.reduction_rate, score);
    a.limited_ref = ref.reduction_rate * (full_score + ref.score) / 2.0;
    double last = 0.0;
    for (const auto& p : meta_curve) {
        last = std::max(last, p.reduction_rate);
    }
    a.meta = auarr(meta_curve, last, score);
    std::vector<CurvePoint> ref_curve;
    CurvePoint p0;
    p0.reduction_rate = 0.0;
    p0.*score = full_score;
    CurvePoint p1;
    p1.reduction_rate = ref.reduction_rate;
    p1.*score = ref.score;
    ref_curve = {p0, p1};
    if (last > ref.reduction_rate) {
        CurvePoint p2 = p1;
        p2.reduction_rate = last;
        ref_curve.push_back(p2);
    }
    a.ref = auarr(ref_curve, last, score);
    return a;
}

namespace {

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) {
        s += x;
    }
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
    if (v.size() < 2) {
        return 0.0;
    }
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) {
        ss += (x - m) * (x - m);
    }
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

struct FoldAreas {
    std::vector<double> limited_meta, limited_ref, meta, ref;
};

FoldAreas fold_areas(const DatasetReport& r) {
    FoldAreas f;
    for (const auto& fold : r.folds) {
        f.limited_meta.push_back(fold.areas.limited_meta);
        f.limited_ref.push_back(fold.areas.limited_ref);
        f.meta.push_back(fold.areas.meta);
        f.ref.push_back(fold.areas.ref);
    }
    return f;
}

DatasetReport evaluate_held_out(std::span<const data::Dataset> datasets, std::size_t held, const BenchmarkConfig& cfg,
                                forest::ImportanceReport& importance) {
    const auto& d = datasets[held];
    DatasetReport rep;
    rep.name = d.name;
    try {
        std::vector<data::Dataset> others;
        for (std::size_t j = 0; j < datasets.size(); ++j) {
            if (j != held) {
                others.push_back(datasets[j]);
            }
        }
        auto opt = cfg.meta;
        opt.jobs = 1;
        const auto training = pipeline::build_meta_training_set(others, opt);
        const auto sel = pipeline::train_meta_selector(training, opt, cfg.classifier, cfg.forest,
                                                       mix_seed(cfg.seed + held + 1));
        rep.selector_trained_on = sel.trained_on;
        if (std::find(sel.trained_on.begin(), sel.trained_on.end(), d.name) != sel.trained_on.end()) {
            throw Error("selector for held-out dataset '" + d.name + "' was trained on it");
        }
        importance = forest::mdi_importance(sel.model);

        const auto splits = data::stratified_kfold(d, cfg.folds, cfg.seed);
        for (std::size_t f = 0; f < splits.size(); ++f) {
            FoldReport fr;
            fr.fold = f;
            auto train = data::subset(d, splits[f].train_indices);
            auto test = data::subset(d, splits[f].test_indices);
            const auto scaling = data::ScalingParams::fit(train.features);
            train.features = scaling.apply(train.features);
            test.features = scaling.apply(test.features);
            fr.train_size = train.size();
            fr.test_size = test.size();
            fr.full = eval_1nn(train, test);

            selection::SelectionMask ref_mask;
            fr.ref_time_ms = time_ms([&] { ref_mask = selection::run(cfg.meta.reference_algorithm, train, cfg.meta.k); });
            const auto ref_stats = selection::reduction_stats(ref_mask);
            if (ref_stats.kept == 0) {
                throw Error("reference selection kept no instances in fold " + std::to_string(f));
            }
            fr.ref_reduction_rate = ref_stats.reduction_rate;
            fr.ref = eval_1nn(data::subset(train, ref_mask.keep), test);

            pipeline::SelectionResult scored;
            fr.meta_time_ms = time_ms([&] { scored = pipeline::score_instances(sel, train, cfg.scaling); });
            fr.sweep = theta_sweep(scored.probabilities, train, test, cfg.thetas);
            fr.areas = auarr_limited(fr.sweep.points, {fr.ref_reduction_rate, fr.ref.accuracy}, fr.full.accuracy);
            rep.folds.push_back(std::move(fr));
        }
        if (rep.folds.size() >= 2) {
            const auto a = fold_areas(rep);
            rep.welch_limited = welch_test(a.limited_meta, a.limited_ref, cfg.alpha);
            rep.welch_full = welch_test(a.meta, a.ref, cfg.alpha);
        }
    } catch (const Error& e) {
        rep.folds.clear();
        rep.skipped = e.what();
    }
    return rep;
}

} // namespace

EvalReport leave_one_dataset_out(std::span<const data::Dataset> datasets, const BenchmarkConfig& cfg) {
    if (datasets.size() < 2) {
        throw InvalidArgument("leave-one-dataset-out needs at least 2 datasets");
    }
    std::set<std::string> names;
    for (const auto& d : datasets) {
        if (!names.insert(d.name).second) {
            throw InvalidArgument("dataset name '" + d.name + "' is used twice");
        }
    }
    EvalReport report;
    report.config = cfg;
    report.datasets.resize(datasets.size());
    std::vector<forest::ImportanceReport> imps(datasets.size());
    parallel_for(datasets.size(), cfg.jobs,
                 [&](std::size_t i) { report.datasets[i] = evaluate_held_out(datasets, i, cfg, imps[i]); });

    std::vector<double> lm, lr, fm, fr;
    for (const auto& r : report.datasets) {
        if (r.skipped) {
            continue;
        }
        const auto a = fold_areas(r);
        lm.push_back(mean_of(a.limited_meta));
        lr.push_back(mean_of(a.limited_ref));
        fm.push_back(mean_of(a.meta));
        fr.push_back(mean_of(a.ref));
        report.wins_limited += r.welch_limited.verdict == Verdict::better ? 1 : 0;
        report.wins_full += r.welch_full.verdict == Verdict::better ? 1 : 0;
    }
    if (!lm.empty()) {
        double dl = 0.0;
        double df = 0.0;
        for (std::size_t i = 0; i < lm.size(); ++i) {
            dl += lm[i] - lr[i];
            df += fm[i] - fr[i];
        }
        report.mean_diff_limited = dl / static_cast<double>(lm.size());
        report.mean_diff_full = df / static_cast<double>(lm.size());
        report.wilcoxon_limited = wilcoxon_test(lm, lr, cfg.alpha);
        report.wilcoxon_full = wilcoxon_test(fm, fr, cfg.alpha);
    }

    // Average importances over the selectors that were trained.
    std::size_t trained = 0;
    for (std::size_t i = 0; i < imps.size(); ++i) {
        if (imps[i].per_feature_mdi.empty()) {
            continue;
        }
        auto& acc = report.importance;
        if (trained == 0) {
            acc = imps[i];
        } else {
            for (std::size_t j = 0; j < acc.per_feature_mdi.size(); ++j) {
                acc.per_feature_mdi[j] += imps[i].per_feature_mdi[j];
            }
            for (std::size_t j = 0; j < acc.grouped_by_type.size(); ++j) {
                acc.grouped_by_type[j] += imps[i].grouped_by_type[j];
            }
            for (std::size_t j = 0; j < acc.grouped_by_k.size(); ++j) {
                acc.grouped_by_k[j] += imps[i].grouped_by_k[j];
            }
        }
        ++trained;
    }
    if (trained > 1) {
        auto& acc = report.importance;
        for (auto* v : {&acc.per_feature_mdi, &acc.grouped_by_type, &acc.grouped_by_k}) {
            for (auto& x : *v) {
                x /= static_cast<double>(trained);
            }
        }
    }
    return report;
}

namespace {

json welch_json(const WelchResult& w) {
    return json{{"t", w.t}, {"df", w.df}, {"p_value", w.p_value}, {"verdict", std::string(1, symbol(w.verdict))}};
}

json wilcoxon_json(const std::optional<WilcoxonResult>& w) {
    if (!w) {
        return nullptr;
    }
    return json{{"n", w->n},
                {"r_plus", w->r_plus},
                {"r_minus", w->r_minus},
                {"p_greater", w->p_greater},
                {"p_less", w->p_less},
                {"exact", w->exact},
                {"verdict", std::string(1, symbol(w->verdict))}};
}

json score_json(const Score& s) {
    return json{{"accuracy", s.accuracy}, {"f1", s.f1}};
}

std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream out(p);
    if (!out) {
        throw Error("cannot write '" + p.string() + "'");
    }
    return out;
}

std::string fd(double v) {
    return format_double(v);
}

} // namespace

void write_importance(const forest::ImportanceReport& imp, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto out = open_out(dir / "importance_by_feature.csv");
    out << "feature,mdi\n";
    for (std::size_t i = 0; i < imp.per_feature_mdi.size(); ++i) {
        out << imp.feature_names[i] << ',' << fd(imp.per_feature_mdi[i]) << '\n';
    }
    auto by_type = open_out(dir / "importance_by_type.csv");
    by_type << "type,mdi\n";
    for (std::size_t i = 0; i < imp.grouped_by_type.size(); ++i) {
        by_type << imp.type_names[i] << ',' << fd(imp.grouped_by_type[i]) << '\n';
    }
    auto by_k = open_out(dir / "importance_by_k.csv");
    by_k << "k,mdi\n";
    for (std::size_t i = 0; i < imp.grouped_by_k.size(); ++i) {
        by_k << imp.k_values[i] << ',' << fd(imp.grouped_by_k[i]) << '\n';
    }
}

void write_report(const EvalReport& report, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto& cfg = report.config;

    json j;
    j["config"] = {{"reference_algorithm", cfg.meta.reference_algorithm},
                   {"k", cfg.meta.k},
                   {"k_list", cfg.meta.k_list},
                   {"standardize_inputs", cfg.meta.standardize_inputs},
                   {"classifier", pipeline::to_string(cfg.classifier)},
                   {"n_trees", cfg.forest.n_trees},
                   {"max_depth", cfg.forest.max_depth},
                   {"min_leaf", cfg.forest.min_leaf},
                   {"features_per_split", cfg.forest.features_per_split},
                   {"thetas", cfg.thetas},
                   {"folds", cfg.folds},
                   {"seed", cfg.seed},
                   {"query_scaling", pipeline::to_string(cfg.scaling)},
                   {"alpha", cfg.alpha},
                   {"jobs", cfg.jobs}};
    j["datasets"] = json::array();
    for (const auto& r : report.datasets) {
        json dj;
        dj["name"] = r.name;
        dj["skipped"] = r.skipped ? json(*r.skipped) : json(nullptr);
        dj["selector_trained_on"] = r.selector_trained_on;
        dj["folds"] = json::array();
        for (const auto& f : r.folds) {
            json fj;
            fj["fold"] = f.fold;
            fj["train_size"] = f.train_size;
            fj["test_size"] = f.test_size;
            fj["full"] = score_json(f.full);
            fj["reference"] = score_json(f.ref);
            fj["reference"]["reduction_rate"] = f.ref_reduction_rate;
            fj["curve"] = json::array();
            for (const auto& p : f.sweep.points) {
                fj["curve"].push_back({{"theta", p.theta ? json(*p.theta) : json(nullptr)},
                                       {"reduction_rate", p.reduction_rate},
                                       {"accuracy", p.accuracy},
                                       {"f1", p.f1}});
            }
            fj["skipped_thetas"] = f.sweep.skipped_thetas;
            fj["auarr_l_meta"] = f.areas.limited_meta;
            fj["auarr_l_ref"] = f.areas.limited_ref;
            fj["auarr_meta"] = f.areas.meta;
            fj["auarr_ref"] = f.areas.ref;
            dj["folds"].push_back(std::move(fj));
        }
        if (!r.skipped) {
            dj["welch_limited"] = welch_json(r.welch_limited);
            dj["welch_full"] = welch_json(r.welch_full);
        }
        j["datasets"].push_back(std::move(dj));
    }
    j["summary"] = {{"wins_limited", report.wins_limited},
                    {"wins_full", report.wins_full},
                    {"mean_diff_limited", report.mean_diff_limited},
                    {"mean_diff_full", report.mean_diff_full},
                    {"wilcoxon_limited", wilcoxon_json(report.wilcoxon_limited)},
                    {"wilcoxon_full", wilcoxon_json(report.wilcoxon_full)}};
    open_out(dir / "report.json") << j.dump(2) << '\n';

    {
        auto out = open_out(dir / "curves.csv");
        out << "dataset,fold,theta,reduction_rate,accuracy,f1\n";
        for (const auto& r : report.datasets) {
            for (const auto& f : r.folds) {
                for (const auto& p : f.sweep.points) {
                    out << r.name << ',' << f.fold << ',' << (p.theta ? fd(*p.theta) : "") << ','
                        << fd(p.reduction_rate) << ',' << fd(p.accuracy) << ',' << fd(p.f1) << '\n';
                }
            }
        }
    }
    {
        auto out = open_out(dir / "folds.csv");
        out << "dataset,fold,train_size,test_size,full_accuracy,full_f1,ref_accuracy,ref_f1,ref_reduction_rate,"
               "auarr_l_meta,auarr_l_ref,auarr_meta,auarr_ref\n";
        for (const auto& r : report.datasets) {
            for (const auto& f : r.folds) {
                out << r.name << ',' << f.fold << ',' << f.train_size << ',' << f.test_size << ','
                    << fd(f.full.accuracy) << ',' << fd(f.full.f1) << ',' << fd(f.ref.accuracy) << ','
                    << fd(f.ref.f1) << ',' << fd(f.ref_reduction_rate) << ',' << fd(f.areas.limited_meta) << ','
                    << fd(f.areas.limited_ref) << ',' << fd(f.areas.meta) << ',' << fd(f.areas.ref) << '\n';
            }
        }
    }
    {
        auto out = open_out(dir / "summary.csv");
        out << "dataset,status,auarr_l_meta_mean,auarr_l_meta_std,auarr_l_ref_mean,auarr_l_ref_std,verdict_l,p_l,"
               "auarr_meta_mean,auarr_meta_std,auarr_ref_mean,auarr_ref_std,verdict,p\n";
        for (const auto& r : report.datasets) {
            if (r.skipped) {
                out << r.name << ",skipped,,,,,,,,,,,,\n";
                continue;
            }
            const auto a = fold_areas(r);
            out << r.name << ",ok," << fd(mean_of(a.limited_meta)) << ',' << fd(std_of(a.limited_meta)) << ','
                << fd(mean_of(a.limited_ref)) << ',' << fd(std_of(a.limited_ref)) << ','
                << symbol(r.welch_limited.verdict) << ',' << fd(r.welch_limited.p_value) << ','
                << fd(mean_of(a.meta)) << ',' << fd(std_of(a.meta)) << ',' << fd(mean_of(a.ref)) << ','
                << fd(std_of(a.ref)) << ',' << symbol(r.welch_full.verdict) << ',' << fd(r.welch_full.p_value)
                << '\n';
        }
        auto sym = [](const std::optional<WilcoxonResult>& w) { return w ? symbol(w->verdict) : '='; };
        out << "Wins,," << report.wins_limited << ",,,,,," << report.wins_full << ",,,,,\n";
        out << "Mean(MetaIS-IS),," << fd(report.mean_diff_limited) << ",,,," << sym(report.wilcoxon_limited) << ','
            << (report.wilcoxon_limited ? fd(report.wilcoxon_limited->p_greater) : "") << ','
            << fd(report.mean_diff_full) << ",,,," << sym(report.wilcoxon_full) << ','
            << (report.wilcoxon_full ? fd(report.wilcoxon_full->p_greater) : "") << '\n';
    }
    write_importance(report.importance, dir);
    {
        auto out = open_out(dir / "timing.csv");
        out << "dataset,fold,ref_time_ms,meta_time_ms,speedup\n";
        for (const auto& r : report.datasets) {
            for (const auto& f : r.folds) {
                out << r.name << ',' << f.fold << ',' << fd(f.ref_time_ms) << ',' << fd(f.meta_time_ms) << ','
                    << fd(f.meta_time_ms > 0 ? f.ref_time_ms / f.meta_time_ms : 0.0) << '\n';
            }
        }
    }
}

} // namespace metais::eval
