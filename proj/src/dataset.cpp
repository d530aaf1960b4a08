#include "metais/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace metais::data {

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) {
        ++b;
    }
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) {
        --e;
    }
    return std::string(s.substr(b, e - b));
}

std::string lower(std::string s) {
    for (auto& ch : s) {
        ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    }
    return s;
}

bool parse_number(const std::string& token, double& out) {
    std::string_view view = token;
    if (!view.empty() && view.front() == '+') {
        view.remove_prefix(1);
    }
    if (view.empty()) {
        return false;
    }
    auto res = std::from_chars(view.data(), view.data() + view.size(), out);
    return res.ec == std::errc() && res.ptr == view.data() + view.size() && std::isfinite(out);
}

std::vector<std::string> split_commas(std::string_view line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
            cells.push_back(trim(line.substr(start, i - start)));
            start = i + 1;
        }
    }
    return cells;
}

// Assigns class ids by first appearance.
class LabelIndex {
public:
    int id(const std::string& token) {
        auto it = ids_.find(token);
        if (it != ids_.end()) {
            return it->second;
        }
        const int next = static_cast<int>(names_.size());
        ids_.emplace(token, next);
        names_.push_back(token);
        return next;
    }
    std::vector<std::string> names() const { return names_; }

private:
    std::map<std::string, int> ids_;
    std::vector<std::string> names_;
};

struct KeelAttribute {
    std::string name;
    bool nominal = false;
    std::vector<std::string> values;
};

KeelAttribute parse_attribute(const std::string& rest, const std::string& source, std::size_t line_no) {
    KeelAttribute attr;
    std::size_t pos = 0;
    while (pos < rest.size() && std::isspace(static_cast<unsigned char>(rest[pos]))) {
        ++pos;
    }
    std::size_t name_end = pos;
    if (pos < rest.size() && (rest[pos] == '\'' || rest[pos] == '"')) {
        const char quote = rest[pos];
        name_end = rest.find(quote, pos + 1);
        if (name_end == std::string::npos) {
            throw ParseError(source, line_no, "unterminated quoted attribute name");
        }
        attr.name = rest.substr(pos + 1, name_end - pos - 1);
        ++name_end;
    } else {
        while (name_end < rest.size() && !std::isspace(static_cast<unsigned char>(rest[name_end])) &&
               rest[name_end] != '{') {
            ++name_end;
        }
        attr.name = rest.substr(pos, name_end - pos);
    }
    if (attr.name.empty()) {
        throw ParseError(source, line_no, "attribute without a name");
    }
    const std::string type = trim(rest.substr(name_end));
    if (!type.empty() && type.front() == '{') {
        const auto close = type.find('}');
        if (close == std::string::npos) {
            throw ParseError(source, line_no, "unterminated nominal value list for '" + attr.name + "'");
        }
        attr.nominal = true;
        attr.values = split_commas(std::string_view(type).substr(1, close - 1));
        return attr;
    }
    const std::string kind = lower(type.substr(0, type.find_first_of(" \t[")));
    if (kind != "real" && kind != "integer" && kind != "numeric") {
        throw ParseError(source, line_no, "unsupported type '" + type + "' for attribute '" + attr.name + "'");
    }
    return attr;
}

std::vector<std::string> parse_name_list(const std::string& rest) {
    std::vector<std::string> names;
    for (auto& n : split_commas(rest)) {
        if (!n.empty()) {
            names.push_back(n);
        }
    }
    return names;
}

// RFC-4180 record splitter; `in` is advanced past embedded newlines.
bool read_csv_record(std::istream& in, std::vector<std::string>& fields, std::size_t& line_no) {
    fields.clear();
    std::string line;
    if (!std::getline(in, line)) {
        return false;
    }
    ++line_no;
    std::string field;
    bool quoted = false;
    bool was_quoted = false;
    std::size_t i = 0;
    while (true) {
        if (i == line.size()) {
            if (quoted) {
                field.push_back('\n');
                if (!std::getline(in, line)) {
                    throw ParseError("csv", line_no, "unterminated quoted field");
                }
                ++line_no;
                i = 0;
                continue;
            }
            break;
        }
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(ch);
            }
        } else if (ch == '"') {
            quoted = true;
            was_quoted = true;
        } else if (ch == ',') {
            fields.push_back(was_quoted ? field : trim(field));
            field.clear();
            was_quoted = false;
        } else if (ch != '\r') {
            field.push_back(ch);
        }
        ++i;
    }
    fields.push_back(was_quoted ? field : trim(field));
    return true;
}

std::string stem_of(const std::string& source) {
    return std::filesystem::path(source).stem().string();
}

} // namespace

std::vector<std::size_t> Dataset::class_counts() const {
    std::vector<std::size_t> counts(num_classes(), 0);
    for (int y : labels) {
        ++counts[static_cast<std::size_t>(y)];
    }
    return counts;
}

void validate(const Dataset& d) {
    if (d.size() == 0 || d.num_features() == 0 || d.num_classes() == 0) {
        throw InvalidArgument("dataset '" + d.name + "' must have at least one row, feature and class");
    }
    if (d.labels.size() != d.size()) {
        throw InvalidArgument("dataset '" + d.name + "': label count differs from row count");
    }
    if (d.feature_names.size() != d.num_features()) {
        throw InvalidArgument("dataset '" + d.name + "': feature name count differs from column count");
    }
    for (int y : d.labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= d.num_classes()) {
            throw InvalidArgument("dataset '" + d.name + "': label out of range");
        }
    }
    for (double v : d.features.values()) {
        if (!std::isfinite(v)) {
            throw InvalidArgument("dataset '" + d.name + "': non-finite feature value");
        }
    }
}

Dataset subset(const Dataset& d, std::span<const std::size_t> indices) {
    Dataset out;
    out.features = d.features.select_rows(indices);
    out.labels.reserve(indices.size());
    for (auto i : indices) {
        out.labels.push_back(d.labels[i]);
    }
    out.feature_names = d.feature_names;
    out.class_names = d.class_names;
    out.name = d.name;
    return out;
}

Dataset subset(const Dataset& d, const std::vector<bool>& keep) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < keep.size(); ++i) {
        if (keep[i]) {
            idx.push_back(i);
        }
    }
    return subset(d, idx);
}

Dataset load_keel(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open '" + path.string() + "'");
    }
    return parse_keel(in, path.string());
}

Dataset parse_keel(std::istream& in, const std::string& source) {
    std::string relation;
    std::vector<KeelAttribute> attributes;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    bool in_data = false;
    bool saw_relation = false;

    std::vector<double> values;
    std::vector<int> labels;
    LabelIndex classes;
    std::vector<std::size_t> input_cols;
    std::size_t output_col = 0;
    std::size_t line_no = 0;

    auto resolve_columns = [&] {
        if (!saw_relation) {
            throw ParseError(source, line_no, "missing @relation before @data");
        }
        if (attributes.size() < 2) {
            throw ParseError(source, line_no, "need at least one input and one output @attribute");
        }
        auto find = [&](const std::string& name) {
            for (std::size_t j = 0; j < attributes.size(); ++j) {
                if (attributes[j].name == name) {
                    return j;
                }
            }
            throw ParseError(source, line_no, "unknown attribute '" + name + "' in @inputs/@outputs");
        };
        if (outputs.size() > 1) {
            throw ParseError(source, line_no, "only a single @outputs attribute is supported");
        }
        output_col = outputs.empty() ? attributes.size() - 1 : find(outputs.front());
        if (inputs.empty()) {
            for (std::size_t j = 0; j < attributes.size(); ++j) {
                if (j != output_col) {
                    input_cols.push_back(j);
                }
            }
        } else {
            for (const auto& n : inputs) {
                input_cols.push_back(find(n));
            }
        }
        for (auto j : input_cols) {
            if (attributes[j].nominal) {
                throw ParseError(source, line_no,
                                 "categorical input attribute '" + attributes[j].name + "' is not supported");
            }
        }
    };

    std::string raw;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string line = trim(raw);
        if (line.empty() || line.front() == '%') {
            continue;
        }
        if (!in_data) {
            if (line.front() != '@') {
                throw ParseError(source, line_no, "expected a header directive, got '" + line + "'");
            }
            const auto space = line.find_first_of(" \t");
            const std::string key = lower(line.substr(0, space));
            const std::string rest = space == std::string::npos ? "" : line.substr(space + 1);
            if (key == "@relation") {
                relation = trim(rest);
                saw_relation = true;
            } else if (key == "@attribute") {
                attributes.push_back(parse_attribute(rest, source, line_no));
            } else if (key == "@inputs") {
                inputs = parse_name_list(rest);
            } else if (key == "@outputs" || key == "@output") {
                outputs = parse_name_list(rest);
            } else if (key == "@data") {
                resolve_columns();
                in_data = true;
            } else {
                throw ParseError(source, line_no, "unknown directive '" + key + "'");
            }
            continue;
        }
        const auto cells = split_commas(line);
        if (cells.size() != attributes.size()) {
            throw ParseError(source, line_no,
                             "expected " + std::to_string(attributes.size()) + " fields, found " +
                                 std::to_string(cells.size()));
        }
        for (auto j : input_cols) {
            double v = 0.0;
            if (!parse_number(cells[j], v)) {
                throw ParseError(source, line_no,
                                 "non-numeric value '" + cells[j] + "' for attribute '" + attributes[j].name + "'");
            }
            values.push_back(v);
        }
        const auto& out_attr = attributes[output_col];
        const auto& token = cells[output_col];
        if (out_attr.nominal &&
            std::find(out_attr.values.begin(), out_attr.values.end(), token) == out_attr.values.end()) {
            throw ParseError(source, line_no, "unknown class token '" + token + "'");
        }
        labels.push_back(classes.id(token));
    }
    if (!in_data) {
        throw ParseError(source, line_no, "missing @data section");
    }
    if (labels.empty()) {
        throw ParseError(source, line_no, "empty data section");
    }

    Dataset d;
    d.features = Matrix(labels.size(), input_cols.size(), std::move(values));
    d.labels = std::move(labels);
    for (auto j : input_cols) {
        d.feature_names.push_back(attributes[j].name);
    }
    d.class_names = classes.names();
    d.name = stem_of(source);
    validate(d);
    return d;
}

Dataset load_csv(const std::filesystem::path& path, const ColumnRef& label_column) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open '" + path.string() + "'");
    }
    return parse_csv(in, path.string(), label_column);
}

Dataset parse_csv(std::istream& in, const std::string& source, const ColumnRef& label_column) {
    std::vector<std::string> header;
    std::size_t line_no = 0;
    if (!read_csv_record(in, header, line_no)) {
        throw ParseError(source, 1, "missing header row");
    }
    std::size_t label_col = 0;
    if (const auto* name = std::get_if<std::string>(&label_column)) {
        auto it = std::find(header.begin(), header.end(), *name);
        if (it == header.end()) {
            throw ParseError(source, 1, "missing label column '" + *name + "'");
        }
        label_col = static_cast<std::size_t>(it - header.begin());
    } else {
        label_col = std::get<std::size_t>(label_column);
        if (label_col >= header.size()) {
            throw ParseError(source, 1, "label column index " + std::to_string(label_col) + " out of range");
        }
    }
    if (header.size() < 2) {
        throw ParseError(source, 1, "need at least one feature column besides the label");
    }

    std::vector<double> values;
    std::vector<int> labels;
    LabelIndex classes;
    std::vector<std::string> fields;
    std::size_t row = 0;
    while (true) {
        const std::size_t record_line = line_no + 1;
        if (!read_csv_record(in, fields, line_no)) {
            break;
        }
        if (fields.size() == 1 && fields.front().empty()) {
            continue;
        }
        ++row;
        if (fields.size() != header.size()) {
            throw ParseError(source, record_line,
                             "row " + std::to_string(row) + " has " + std::to_string(fields.size()) +
                                 " cells, header has " + std::to_string(header.size()));
        }
        for (std::size_t j = 0; j < fields.size(); ++j) {
            if (j == label_col) {
                continue;
            }
            double v = 0.0;
            if (!parse_number(fields[j], v)) {
                throw ParseError(source, record_line,
                                 "row " + std::to_string(row) + ": non-numeric value '" + fields[j] +
                                     "' in column '" + header[j] + "'");
            }
            values.push_back(v);
        }
        labels.push_back(classes.id(fields[label_col]));
    }
    if (labels.empty()) {
        throw ParseError(source, line_no, "empty data section");
    }

    Dataset d;
    d.features = Matrix(labels.size(), header.size() - 1, std::move(values));
    d.labels = std::move(labels);
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (j != label_col) {
            d.feature_names.push_back(header[j]);
        }
    }
    d.class_names = classes.names();
    d.name = stem_of(source);
    validate(d);
    return d;
}

Dataset load_any(const std::filesystem::path& path, const std::optional<ColumnRef>& label_column) {
    if (lower(path.extension().string()) == ".dat") {
        return load_keel(path);
    }
    if (label_column) {
        return load_csv(path, *label_column);
    }
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open '" + path.string() + "'");
    }
    std::vector<std::string> header;
    std::size_t line_no = 0;
    if (!read_csv_record(in, header, line_no) || header.empty()) {
        throw ParseError(path.string(), 1, "missing header row");
    }
    return load_csv(path, ColumnRef{header.size() - 1});
}

ScalingParams ScalingParams::fit(const Matrix& x) {
    ScalingParams p;
    const std::size_t n = x.rows();
    const std::size_t m = x.cols();
    p.means.assign(m, 0.0);
    p.stds.assign(m, 1.0);
    if (n == 0) {
        return p;
    }
    for (std::size_t j = 0; j < m; ++j) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            sum += x(i, j);
        }
        const double mean = sum / static_cast<double>(n);
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = x(i, j) - mean;
            ss += d * d;
        }
        const double sd = std::sqrt(ss / static_cast<double>(n));
        p.means[j] = mean;
        // Columns that are constant up to rounding noise are treated as constant.
        p.stds[j] = sd > 1e-12 * std::max(1.0, std::abs(mean)) ? sd : 1.0;
    }
    return p;
}

Matrix ScalingParams::apply(const Matrix& x) const {
    if (x.cols() != means.size()) {
        throw InvalidArgument("scaling parameters do not match the column count");
    }
    Matrix out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t j = 0; j < x.cols(); ++j) {
            out(i, j) = (x(i, j) - means[j]) / stds[j];
        }
    }
    return out;
}

Matrix ScalingParams::invert(const Matrix& x) const {
    if (x.cols() != means.size()) {
        throw InvalidArgument("scaling parameters do not match the column count");
    }
    Matrix out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t j = 0; j < x.cols(); ++j) {
            out(i, j) = x(i, j) * stds[j] + means[j];
        }
    }
    return out;
}

std::pair<Dataset, ScalingParams> standardize(const Dataset& d) {
    auto params = ScalingParams::fit(d.features);
    Dataset out = d;
    out.features = params.apply(d.features);
    return {std::move(out), std::move(params)};
}

std::vector<FoldSplit> stratified_kfold(const Dataset& d, std::size_t folds, std::uint64_t seed) {
    if (folds < 2) {
        throw InvalidArgument("stratified_kfold needs at least 2 folds");
    }
    if (folds > d.size()) {
        throw InvalidArgument("stratified_kfold: " + std::to_string(folds) + " folds exceed " +
                              std::to_string(d.size()) + " instances");
    }
    std::vector<std::vector<std::size_t>> members(d.num_classes());
    for (std::size_t i = 0; i < d.size(); ++i) {
        members[static_cast<std::size_t>(d.labels[i])].push_back(i);
    }
    Rng rng(seed);
    std::vector<std::size_t> fold_of(d.size(), 0);
    std::size_t offset = 0;
    for (auto& cls : members) {
        rng.shuffle(cls);
        for (std::size_t j = 0; j < cls.size(); ++j) {
            fold_of[cls[j]] = (offset + j) % folds;
        }
        offset = (offset + cls.size()) % folds;
    }
    std::vector<FoldSplit> splits(folds);
    for (std::size_t i = 0; i < d.size(); ++i) {
        for (std::size_t f = 0; f < folds; ++f) {
            (f == fold_of[i] ? splits[f].test_indices : splits[f].train_indices).push_back(i);
        }
    }
    return splits;
}

} // namespace metais::data
