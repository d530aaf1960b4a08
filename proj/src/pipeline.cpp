#include "metais/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace metais::pipeline {

using json = nlohmann::json;

std::string to_string(Classifier c) {
    return c == Classifier::rf ? "rf" : "balanced_rf";
}

Classifier parse_classifier(const std::string& s) {
    if (s == "rf") {
        return Classifier::rf;
    }
    if (s == "balanced_rf") {
        return Classifier::balanced_rf;
    }
    throw InvalidArgument("unknown classifier '" + s + "' (expected rf or balanced_rf)");
}

std::string to_string(QueryScaling s) {
    return s == QueryScaling::own ? "own" : "pooled";
}

QueryScaling parse_query_scaling(const std::string& s) {
    if (s == "own") {
        return QueryScaling::own;
    }
    if (s == "pooled") {
        return QueryScaling::pooled;
    }
    throw InvalidArgument("unknown query scaling '" + s + "' (expected own or pooled)");
}

features::MetaDataset raw_meta_features(const data::Dataset& d, const MetaOptions& opt,
                                        std::vector<std::string>* warnings) {
    const data::Dataset scaled = opt.standardize_inputs ? data::standardize(d).first : d;
    const std::size_t k_max = opt.k_list.empty() ? 1 : *std::max_element(opt.k_list.begin(), opt.k_list.end());
    const auto g = nng::build_graph(scaled, k_max, nng::Method::indexed);
    if (warnings != nullptr) {
        for (const auto& w : g.warnings) {
            warnings->push_back(d.name + ": " + w);
        }
    }
    // Lists shorter than k (tiny datasets) are summarized over what exists.
    std::vector<std::span<const nng::Neighbor>> lists(g.neighbors.begin(), g.neighbors.end());
    return features::extract(lists, g.labels, opt.k_list, d.name);
}

MetaTrainingSet build_meta_training_set(std::span<const data::Dataset> datasets, const MetaOptions& opt) {
    if (datasets.empty()) {
        throw InvalidArgument("meta training needs at least one dataset");
    }
    if (!selection::is_algorithm(opt.reference_algorithm)) {
        throw InvalidArgument("unknown instance selection algorithm '" + opt.reference_algorithm + "'");
    }
    std::vector<features::MetaDataset> raw(datasets.size());
    std::vector<features::MetaDataset> parts(datasets.size());
    std::vector<std::vector<std::string>> warnings(datasets.size());
    std::vector<std::string> errors(datasets.size());
    parallel_for(datasets.size(), opt.jobs, [&](std::size_t i) {
        const auto& d = datasets[i];
        try {
            raw[i] = raw_meta_features(d, opt, &warnings[i]);
            const data::Dataset scaled = opt.standardize_inputs ? data::standardize(d).first : d;
            const auto mask = selection::run(opt.reference_algorithm, scaled, opt.k);
            parts[i] = raw[i];
            parts[i].labels.emplace(d.size());
            for (std::size_t r = 0; r < d.size(); ++r) {
                (*parts[i].labels)[r] = mask.keep[r] ? 1 : 0;
            }
            parts[i].records = data::ScalingParams::fit(raw[i].records).apply(raw[i].records);
        } catch (const Error& e) {
            errors[i] = "dataset '" + d.name + "': " + e.what();
        }
    });
    for (const auto& e : errors) {
        if (!e.empty()) {
            throw Error(e);
        }
    }
    MetaTrainingSet out;
    out.meta = features::concat(parts);
    out.pooled = data::ScalingParams::fit(features::concat(raw).records);
    for (auto& w : warnings) {
        out.warnings.insert(out.warnings.end(), w.begin(), w.end());
    }
    return out;
}

MetaSelector train_meta_selector(const MetaTrainingSet& training, const MetaOptions& opt, Classifier classifier,
                                 const forest::ForestParams& params, std::uint64_t seed) {
    const auto& meta = training.meta;
    if (!meta.labels) {
        throw InvalidArgument("meta training set is unlabeled");
    }
    const auto& y = *meta.labels;
    if (std::find(y.begin(), y.end(), 0) == y.end() || std::find(y.begin(), y.end(), 1) == y.end()) {
        throw InvalidArgument("meta labels contain a single class; the reference selector kept " +
                              std::string(y.empty() || y.front() == 1 ? "everything" : "nothing"));
    }
    if (meta.feature_names != features::feature_names(opt.k_list)) {
        throw InvalidArgument("meta training set columns do not match the k list");
    }
    MetaSelector sel;
    sel.model = classifier == Classifier::balanced_rf
                    ? forest::train_balanced_random_forest(meta.records, y, params, seed, meta.feature_names, opt.jobs)
                    : forest::train_random_forest(meta.records, y, params, seed, meta.feature_names, opt.jobs);
    sel.reference_algorithm = opt.reference_algorithm;
    sel.k = opt.k;
    sel.k_list = opt.k_list;
    for (std::size_t s = 0; s < meta.source_names.size(); ++s) {
        if (std::find(meta.source_ids.begin(), meta.source_ids.end(), s) != meta.source_ids.end()) {
            sel.trained_on.push_back(meta.source_names[s]);
        }
    }
    sel.seed = seed;
    sel.classifier = classifier;
    sel.standardize_inputs = opt.standardize_inputs;
    sel.pooled = training.pooled;
    return sel;
}

std::vector<std::vector<bool>> SelectionResult::masks(std::span<const double> theta_grid) const {
    std::vector<std::vector<bool>> out;
    for (double theta : theta_grid) {
        std::vector<bool> keep(probabilities.size());
        for (std::size_t j = 0; j < probabilities.size(); ++j) {
            keep[j] = probabilities[j] >= theta;
        }
        out.push_back(std::move(keep));
    }
    return out;
}

SelectionResult score_instances(const MetaSelector& sel, const data::Dataset& d, QueryScaling scaling,
                                unsigned jobs) {
    if (d.size() < 2) {
        throw InvalidArgument("scoring needs at least 2 instances");
    }
    SelectionResult res;
    MetaOptions opt;
    opt.k_list = sel.k_list;
    opt.standardize_inputs = sel.standardize_inputs;
    auto raw = raw_meta_features(d, opt, &res.warnings);
    const auto& params = scaling == QueryScaling::own ? data::ScalingParams::fit(raw.records) : sel.pooled;
    const Matrix x = params.apply(raw.records);
    res.probabilities = sel.model.predict_proba(x, jobs);
    return res;
}

selection::SelectionMask apply_threshold(const SelectionResult& res, double theta, const std::string& algorithm) {
    if (!(theta > 0.0 && theta < 1.0)) {
        throw InvalidArgument("theta must lie in (0, 1)");
    }
    selection::SelectionMask m;
    m.algorithm = algorithm;
    m.keep.resize(res.probabilities.size());
    for (std::size_t j = 0; j < res.probabilities.size(); ++j) {
        m.keep[j] = res.probabilities[j] >= theta;
    }
    return m;
}

std::vector<double> default_theta_grid() {
    return {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
}

void save_selector(const MetaSelector& sel, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    forest::save_model(sel.model, dir / "model.json");
    json j;
    j["format"] = "metais-selector";
    j["version"] = 1;
    j["library_version"] = kLibraryVersion;
    j["reference_algorithm"] = sel.reference_algorithm;
    j["k"] = sel.k;
    j["k_list"] = sel.k_list;
    j["trained_on"] = sel.trained_on;
    j["seed"] = sel.seed;
    j["classifier"] = to_string(sel.classifier);
    j["standardize_inputs"] = sel.standardize_inputs;
    j["pooled_means"] = sel.pooled.means;
    j["pooled_stds"] = sel.pooled.stds;
    std::ofstream out(dir / "selector.json");
    if (!out) {
        throw Error("cannot write '" + (dir / "selector.json").string() + "'");
    }
    out << j.dump(2) << '\n';
}

MetaSelector load_selector(const std::filesystem::path& dir) {
    MetaSelector sel;
    sel.model = forest::load_model(dir / "model.json");
    std::ifstream in(dir / "selector.json");
    if (!in) {
        throw Error("cannot open '" + (dir / "selector.json").string() + "'");
    }
    try {
        json j;
        in >> j;
        if (j.at("format") != "metais-selector" || j.at("version") != 1) {
            throw Error("selector: unsupported format or version");
        }
        sel.reference_algorithm = j.at("reference_algorithm").get<std::string>();
        sel.k = j.at("k").get<std::size_t>();
        sel.k_list = j.at("k_list").get<std::vector<std::size_t>>();
        sel.trained_on = j.at("trained_on").get<std::vector<std::string>>();
        sel.seed = j.at("seed").get<std::uint64_t>();
        sel.classifier = parse_classifier(j.at("classifier").get<std::string>());
        sel.standardize_inputs = j.at("standardize_inputs").get<bool>();
        sel.pooled.means = j.at("pooled_means").get<std::vector<double>>();
        sel.pooled.stds = j.at("pooled_stds").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw Error(std::string("selector: malformed JSON: ") + e.what());
    }
    if (sel.model.feature_names != features::feature_names(sel.k_list)) {
        throw Error("selector: model feature order does not match its k list");
    }
    return sel;
}

} // namespace metais::pipeline
