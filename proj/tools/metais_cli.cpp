// metais: command-line front end for instance selection and meta instance selection.
//
// Every subcommand accepts --config FILE (JSON); explicit flags override the
// file. The resolved configuration is written as config.json next to the
// outputs. Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include "metais/eval.hpp"
#include "metais/isalgos.hpp"
#include "metais/metafeatures.hpp"
#include "metais/nng.hpp"
#include "metais/pipeline.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace metais;

namespace {

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::vector<std::string> datasets;
    std::string label_column;  // empty: last column
    std::string reference_algorithm = "enn";
    std::size_t k = 3;
    std::vector<std::size_t> k_list = features::default_k_list();
    bool standardize_inputs = true;
    std::string classifier = "balanced_rf";
    forest::ForestParams forest;
    std::vector<double> thetas = pipeline::default_theta_grid();
    double theta = 0.5;
    std::size_t folds = 5;
    std::uint64_t seed = 1;
    std::string query_scaling = "own";
    double alpha = 0.05;
    std::string selector;
    std::size_t k_max = 33;
    std::string graph_method = "indexed";
    std::string output = ".";
    unsigned jobs = 1;
};

json to_json(const RunConfig& c) {
    return json{{"datasets", c.datasets},
                {"label_column", c.label_column},
                {"reference_algorithm", c.reference_algorithm},
                {"k", c.k},
                {"k_list", c.k_list},
                {"standardize_inputs", c.standardize_inputs},
                {"classifier", c.classifier},
                {"n_trees", c.forest.n_trees},
                {"max_depth", c.forest.max_depth},
                {"min_leaf", c.forest.min_leaf},
                {"features_per_split", c.forest.features_per_split},
                {"thetas", c.thetas},
                {"theta", c.theta},
                {"folds", c.folds},
                {"seed", c.seed},
                {"query_scaling", c.query_scaling},
                {"alpha", c.alpha},
                {"selector", c.selector},
                {"k_max", c.k_max},
                {"graph_method", c.graph_method},
                {"output", c.output},
                {"jobs", c.jobs}};
}

template <typename T>
void read_key(const json& j, const char* key, T& out) {
    if (j.contains(key)) {
        try {
            out = j.at(key).get<T>();
        } catch (const json::exception&) {
            throw UsageError(std::string("config key '") + key + "' has the wrong type");
        }
    }
}

void load_config_file(const std::string& path, RunConfig& c) {
    std::ifstream in(path);
    if (!in) {
        throw UsageError("cannot open config file '" + path + "'");
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw UsageError("config file '" + path + "' is not valid JSON: " + e.what());
    }
    if (!j.is_object()) {
        throw UsageError("config file '" + path + "' must hold a JSON object");
    }
    const json known = to_json(RunConfig{});
    for (const auto& [key, value] : j.items()) {
        if (!known.contains(key)) {
            throw UsageError("unknown config key '" + key + "'");
        }
    }
    read_key(j, "datasets", c.datasets);
    read_key(j, "label_column", c.label_column);
    read_key(j, "reference_algorithm", c.reference_algorithm);
    read_key(j, "k", c.k);
    read_key(j, "k_list", c.k_list);
    read_key(j, "standardize_inputs", c.standardize_inputs);
    read_key(j, "classifier", c.classifier);
    read_key(j, "n_trees", c.forest.n_trees);
    read_key(j, "max_depth", c.forest.max_depth);
    read_key(j, "min_leaf", c.forest.min_leaf);
    read_key(j, "features_per_split", c.forest.features_per_split);
    read_key(j, "thetas", c.thetas);
    read_key(j, "theta", c.theta);
    read_key(j, "folds", c.folds);
    read_key(j, "seed", c.seed);
    read_key(j, "query_scaling", c.query_scaling);
    read_key(j, "alpha", c.alpha);
    read_key(j, "selector", c.selector);
    read_key(j, "k_max", c.k_max);
    read_key(j, "graph_method", c.graph_method);
    read_key(j, "output", c.output);
    read_key(j, "jobs", c.jobs);
}

// Flags are parsed into a scratch config; only the ones given on the command
// line are copied over the file values.
struct Flags {
    std::string config_path;
    RunConfig values;
    std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> bound;

    template <typename T>
    void add(CLI::App* app, const std::string& name, T RunConfig::*field, const std::string& help) {
        auto* opt = app->add_option(name, values.*field, help);
        bound.emplace_back(opt, [this, field](RunConfig& c) { c.*field = values.*field; });
    }

    template <typename T>
    void add_forest(CLI::App* app, const std::string& name, T forest::ForestParams::*field, const std::string& help) {
        auto* opt = app->add_option(name, values.forest.*field, help);
        bound.emplace_back(opt, [this, field](RunConfig& c) { c.forest.*field = values.forest.*field; });
    }

    RunConfig resolve() const {
        RunConfig c;
        if (!config_path.empty()) {
            load_config_file(config_path, c);
        }
        for (const auto& [opt, apply] : bound) {
            if (opt->count() > 0) {
                apply(c);
            }
        }
        return c;
    }
};

void validate(const RunConfig& c) {
    if (!selection::is_algorithm(c.reference_algorithm)) {
        throw UsageError("unknown algorithm '" + c.reference_algorithm + "' (expected enn, drop3, icf, hmnei, ccis)");
    }
    if (c.k < 1) {
        throw UsageError("k must be at least 1");
    }
    if (c.k_list.empty()) {
        throw UsageError("k_list must not be empty");
    }
    for (std::size_t i = 0; i < c.k_list.size(); ++i) {
        if (c.k_list[i] < 1 || (i > 0 && c.k_list[i] <= c.k_list[i - 1])) {
            throw UsageError("k_list must be strictly ascending positive values");
        }
    }
    try {
        pipeline::parse_classifier(c.classifier);
        pipeline::parse_query_scaling(c.query_scaling);
    } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
    }
    if (c.forest.n_trees < 1 || c.forest.max_depth < 1 || c.forest.min_leaf < 1 || c.forest.features_per_split < 1) {
        throw UsageError("forest parameters must be at least 1");
    }
    for (std::size_t i = 0; i < c.thetas.size(); ++i) {
        if (!(c.thetas[i] > 0.0 && c.thetas[i] < 1.0) || (i > 0 && !(c.thetas[i] > c.thetas[i - 1]))) {
            throw UsageError("thetas must be ascending values in (0, 1)");
        }
    }
    if (!(c.theta > 0.0 && c.theta < 1.0)) {
        throw UsageError("theta must lie in (0, 1)");
    }
    if (c.folds < 2) {
        throw UsageError("folds must be at least 2");
    }
    if (!(c.alpha > 0.0 && c.alpha < 1.0)) {
        throw UsageError("alpha must lie in (0, 1)");
    }
    if (c.graph_method != "indexed" && c.graph_method != "brute") {
        throw UsageError("graph_method must be indexed or brute");
    }
    if (c.k_max < 1) {
        throw UsageError("k_max must be at least 1");
    }
    if (c.jobs < 1) {
        throw UsageError("jobs must be at least 1");
    }
}

// Relative paths that do not exist are looked up under $METAIS_DATA_DIR.
fs::path resolve_data_path(const std::string& p) {
    fs::path path(p);
    if (path.is_relative() && !fs::exists(path)) {
        if (const char* dir = std::getenv("METAIS_DATA_DIR"); dir != nullptr && *dir != '\0') {
            const fs::path alt = fs::path(dir) / path;
            if (fs::exists(alt)) {
                return alt;
            }
        }
    }
    return path;
}

data::Dataset load_dataset(const RunConfig& c, const std::string& p) {
    std::optional<data::ColumnRef> col;
    if (!c.label_column.empty()) {
        col = data::ColumnRef{c.label_column};
    }
    return data::load_any(resolve_data_path(p), col);
}

std::vector<data::Dataset> load_datasets(const RunConfig& c, std::size_t at_least) {
    if (c.datasets.size() < at_least) {
        throw UsageError("need at least " + std::to_string(at_least) + " dataset(s), got " +
                         std::to_string(c.datasets.size()));
    }
    std::vector<data::Dataset> out;
    for (const auto& p : c.datasets) {
        out.push_back(load_dataset(c, p));
    }
    return out;
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write '" + path.string() + "'");
    }
    out << j.dump(2) << '\n';
}

fs::path prepare_output(const RunConfig& c) {
    const fs::path dir(c.output);
    fs::create_directories(dir);
    write_json(dir / "config.json", to_json(c));
    return dir;
}

pipeline::MetaOptions meta_options(const RunConfig& c) {
    pipeline::MetaOptions o;
    o.reference_algorithm = c.reference_algorithm;
    o.k = c.k;
    o.k_list = c.k_list;
    o.standardize_inputs = c.standardize_inputs;
    o.jobs = c.jobs;
    return o;
}

json stats_json(const selection::SelectionMask& mask) {
    const auto s = selection::reduction_stats(mask);
    return json{{"algorithm", mask.algorithm},
                {"k", mask.k},
                {"n", s.n},
                {"n_kept", s.kept},
                {"reduction_rate", s.reduction_rate}};
}

int cmd_select(const RunConfig& c) {
    if (c.datasets.size() != 1) {
        throw UsageError("select takes exactly one dataset");
    }
    const auto d = load_dataset(c, c.datasets.front());
    const data::Dataset input = c.standardize_inputs ? data::standardize(d).first : d;
    const auto dir = prepare_output(c);
    selection::SelectionMask mask;
    const double ms = eval::time_ms([&] { mask = selection::run(c.reference_algorithm, input, c.k); });
    selection::write_mask_csv(mask, dir / "mask.csv");
    auto stats = stats_json(mask);
    stats["dataset"] = d.name;
    stats["wall_time_ms"] = ms;
    write_json(dir / "stats.json", stats);
    std::cout << d.name << ": " << c.reference_algorithm << " kept " << mask.kept() << " of " << mask.size()
              << " (reduction rate " << selection::reduction_stats(mask).reduction_rate << ")\n";
    return 0;
}

int cmd_meta_train(const RunConfig& c) {
    const auto datasets = load_datasets(c, 1);
    const auto dir = prepare_output(c);
    const auto opt = meta_options(c);
    const auto training = pipeline::build_meta_training_set(datasets, opt);
    const auto sel =
        pipeline::train_meta_selector(training, opt, pipeline::parse_classifier(c.classifier), c.forest, c.seed);
    pipeline::save_selector(sel, dir);

    const auto& y = *training.meta.labels;
    json log;
    log["rows"] = y.size();
    log["keep_fraction"] = static_cast<double>(std::count(y.begin(), y.end(), 1)) / static_cast<double>(y.size());
    log["per_dataset"] = json::array();
    for (std::size_t s = 0; s < training.meta.source_names.size(); ++s) {
        std::size_t rows = 0;
        std::size_t kept = 0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            if (training.meta.source_ids[i] == s) {
                ++rows;
                kept += static_cast<std::size_t>(y[i]);
            }
        }
        log["per_dataset"].push_back({{"name", training.meta.source_names[s]},
                                      {"rows", rows},
                                      {"keep_fraction", static_cast<double>(kept) / static_cast<double>(rows)}});
    }
    if (sel.model.oob) {
        const auto& o = *sel.model.oob;
        log["oob"] = {{"auc", o.auc ? json(*o.auc) : json(nullptr)},
                      {"balanced_accuracy", o.balanced_accuracy},
                      {"accuracy", o.accuracy}};
    } else {
        log["oob"] = nullptr;
    }
    log["warnings"] = training.warnings;
    write_json(dir / "train_log.json", log);
    std::cout << "trained " << c.classifier << " selector on " << sel.trained_on.size() << " dataset(s), "
              << y.size() << " rows, keep fraction " << log["keep_fraction"].get<double>() << "\n";
    return 0;
}

int cmd_meta_select(const RunConfig& c) {
    if (c.selector.empty()) {
        throw UsageError("meta-select needs --selector");
    }
    if (c.datasets.size() != 1) {
        throw UsageError("meta-select takes exactly one dataset");
    }
    const auto sel = pipeline::load_selector(c.selector);
    const auto d = load_dataset(c, c.datasets.front());
    const auto dir = prepare_output(c);
    pipeline::SelectionResult res;
    const double ms = eval::time_ms(
        [&] { res = pipeline::score_instances(sel, d, pipeline::parse_query_scaling(c.query_scaling), c.jobs); });
    {
        std::ofstream out(dir / "probabilities.csv");
        out << "index,keep_probability\n";
        for (std::size_t i = 0; i < res.probabilities.size(); ++i) {
            out << i << ',' << format_double(res.probabilities[i]) << '\n';
        }
    }
    const auto mask = pipeline::apply_threshold(res, c.theta, "meta-" + sel.reference_algorithm);
    selection::write_mask_csv(mask, dir / "mask.csv");
    auto stats = stats_json(mask);
    stats["k"] = sel.k;
    stats["dataset"] = d.name;
    stats["theta"] = c.theta;
    stats["wall_time_ms"] = ms;
    stats["warnings"] = res.warnings;
    write_json(dir / "stats.json", stats);
    std::cout << d.name << ": meta-" << sel.reference_algorithm << " at theta " << c.theta << " kept " << mask.kept()
              << " of " << mask.size() << "\n";
    return 0;
}

int cmd_benchmark(const RunConfig& c) {
    const auto datasets = load_datasets(c, 2);
    const auto dir = prepare_output(c);
    eval::BenchmarkConfig cfg;
    cfg.meta = meta_options(c);
    cfg.classifier = pipeline::parse_classifier(c.classifier);
    cfg.forest = c.forest;
    cfg.thetas = c.thetas;
    cfg.folds = c.folds;
    cfg.seed = c.seed;
    cfg.scaling = pipeline::parse_query_scaling(c.query_scaling);
    cfg.alpha = c.alpha;
    cfg.jobs = c.jobs;
    const auto report = eval::leave_one_dataset_out(datasets, cfg);
    eval::write_report(report, dir);
    for (const auto& r : report.datasets) {
        if (r.skipped) {
            std::cout << r.name << ": skipped (" << *r.skipped << ")\n";
        } else {
            std::cout << r.name << ": AUARR_L verdict " << eval::symbol(r.welch_limited.verdict) << ", AUARR verdict "
                      << eval::symbol(r.welch_full.verdict) << "\n";
        }
    }
    std::cout << "wins (limited / full): " << report.wins_limited << " / " << report.wins_full << "\n";
    return 0;
}

int cmd_importance(const RunConfig& c) {
    if (c.selector.empty()) {
        throw UsageError("importance needs --selector");
    }
    const auto sel = pipeline::load_selector(c.selector);
    const fs::path dir(c.output);
    fs::create_directories(dir);
    eval::write_importance(forest::mdi_importance(sel.model), dir);
    write_json(dir / "config.json", to_json(c));
    return 0;
}

int cmd_graph_cache(const RunConfig& c) {
    if (c.datasets.size() != 1) {
        throw UsageError("graph-cache takes exactly one dataset");
    }
    const auto d = load_dataset(c, c.datasets.front());
    const data::Dataset input = c.standardize_inputs ? data::standardize(d).first : d;
    const auto dir = prepare_output(c);
    const auto method = c.graph_method == "brute" ? nng::Method::brute : nng::Method::indexed;
    const auto g = nng::build_graph(input, c.k_max, method, c.jobs);
    for (const auto& w : g.warnings) {
        std::cerr << "warning: " << w << "\n";
    }
    const auto path = dir / (d.name + ".nng");
    nng::save_graph(g, path);
    std::cout << "wrote " << path.string() << " (n=" << g.size() << ", k_max=" << g.k_max << ")\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Instance selection and meta instance selection"};
    app.require_subcommand(1);

    struct Sub {
        CLI::App* app;
        Flags flags;
        std::function<int(const RunConfig&)> run;
    };
    std::vector<std::unique_ptr<Sub>> subs;
    auto make = [&](const std::string& name, const std::string& help, std::function<int(const RunConfig&)> run) {
        auto s = std::make_unique<Sub>();
        s->app = app.add_subcommand(name, help);
        s->run = std::move(run);
        s->app->add_option("--config", s->flags.config_path, "JSON config file; flags override it");
        s->flags.add(s->app, "--data", &RunConfig::datasets, "Dataset file(s): Keel .dat or CSV");
        s->flags.add(s->app, "--label-column", &RunConfig::label_column, "CSV label column name (default: last)");
        s->flags.add(s->app, "--out", &RunConfig::output, "Output directory");
        s->flags.add(s->app, "--seed", &RunConfig::seed, "Master random seed");
        s->flags.add(s->app, "--jobs", &RunConfig::jobs, "Worker threads (default 1)");
        s->flags.add(s->app, "--standardize", &RunConfig::standardize_inputs, "z-score input features (default true)");
        subs.push_back(std::move(s));
        return subs.back().get();
    };
    auto add_meta = [](Sub* s) {
        s->flags.add(s->app, "--algo", &RunConfig::reference_algorithm, "Reference algorithm: enn|drop3|icf|hmnei|ccis");
        s->flags.add(s->app, "--k", &RunConfig::k, "Neighborhood size of the reference algorithm");
        s->flags.add(s->app, "--k-list", &RunConfig::k_list, "Meta-feature k values");
    };
    auto add_forest = [](Sub* s) {
        s->flags.add(s->app, "--classifier", &RunConfig::classifier, "rf|balanced_rf");
        s->flags.add_forest(s->app, "--n-trees", &forest::ForestParams::n_trees, "Trees per forest");
        s->flags.add_forest(s->app, "--max-depth", &forest::ForestParams::max_depth, "Maximum tree depth");
        s->flags.add_forest(s->app, "--min-leaf", &forest::ForestParams::min_leaf, "Minimum rows per leaf");
        s->flags.add_forest(s->app, "--features-per-split", &forest::ForestParams::features_per_split,
                            "Features searched per split");
    };

    auto* select = make("select", "Run a reference instance selection algorithm", cmd_select);
    add_meta(select);

    auto* train = make("meta-train", "Train a meta selector bundle", cmd_meta_train);
    add_meta(train);
    add_forest(train);

    auto* mselect = make("meta-select", "Score and prune a dataset with a selector bundle", cmd_meta_select);
    mselect->flags.add(mselect->app, "--selector", &RunConfig::selector, "Selector bundle directory");
    mselect->flags.add(mselect->app, "--theta", &RunConfig::theta, "Keep threshold (default 0.5)");
    mselect->flags.add(mselect->app, "--scaling", &RunConfig::query_scaling, "Query meta-feature scaling: own|pooled");

    auto* bench = make("benchmark", "Leave-one-dataset-out evaluation", cmd_benchmark);
    add_meta(bench);
    add_forest(bench);
    bench->flags.add(bench->app, "--thetas", &RunConfig::thetas, "Theta grid");
    bench->flags.add(bench->app, "--folds", &RunConfig::folds, "Cross-validation folds");
    bench->flags.add(bench->app, "--alpha", &RunConfig::alpha, "Significance level");
    bench->flags.add(bench->app, "--scaling", &RunConfig::query_scaling, "Query meta-feature scaling: own|pooled");

    auto* imp = make("importance", "MDI importances of a selector bundle", cmd_importance);
    imp->flags.add(imp->app, "--selector", &RunConfig::selector, "Selector bundle directory");

    auto* cache = make("graph-cache", "Build and store a nearest-neighbor graph", cmd_graph_cache);
    cache->flags.add(cache->app, "--k-max", &RunConfig::k_max, "Neighbors per vertex");
    cache->flags.add(cache->app, "--method", &RunConfig::graph_method, "indexed|brute");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    for (auto& s : subs) {
        if (!s->app->parsed()) {
            continue;
        }
        try {
            const RunConfig cfg = s->flags.resolve();
            validate(cfg);
            return s->run(cfg);
        } catch (const UsageError& e) {
            std::cerr << "usage error: " << e.what() << "\n";
            return 2;
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 1;
        }
    }
    return 2;
}
