#include "anatree/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "anatree/rng.hpp"

namespace anatree {

void Schema::validate() {
    std::set<std::string> names;
    for (const auto& a : attributes) {
        if (a.name.empty()) throw SchemaError("attribute with empty name");
        if (!names.insert(a.name).second) throw SchemaError("duplicate attribute name: " + a.name);
    }
    if (sensitive.empty()) throw SchemaError("no sensitive attribute declared");
    if (index_of(sensitive) < 0) throw SchemaError("unknown sensitive attribute: " + sensitive);
    if (class_attr.empty()) throw SchemaError("no class attribute declared");
    if (index_of(class_attr) < 0) throw SchemaError("unknown class attribute: " + class_attr);
    if (identifying.empty()) throw SchemaError("identifying attribute set is empty");

    std::set<std::string> ident(identifying.begin(), identifying.end());
    if (ident.size() != identifying.size()) throw SchemaError("duplicate identifying attribute");
    for (const auto& n : identifying)
        if (index_of(n) < 0) throw SchemaError("unknown identifying attribute: " + n);
    if (ident.count(sensitive)) throw SchemaError("sensitive attribute cannot be identifying");
    if (!ident.count(class_attr))
        throw SchemaError("class attribute must be an identifying attribute");
    if (class_attr == sensitive) throw SchemaError("class attribute cannot be the sensitive attribute");

    // Normalize to attribute order so downstream index spaces are stable.
    std::vector<std::string> ordered;
    for (const auto& a : attributes)
        if (ident.count(a.name)) ordered.push_back(a.name);
    identifying = std::move(ordered);
}

int Schema::index_of(const std::string& name) const {
    for (size_t i = 0; i < attributes.size(); ++i)
        if (attributes[i].name == name) return static_cast<int>(i);
    return -1;
}

const Attribute& Schema::attribute(const std::string& name) const {
    int i = index_of(name);
    if (i < 0) throw SchemaError("unknown attribute: " + name);
    return attributes[i];
}

bool Schema::is_identifying(const std::string& name) const {
    return std::find(identifying.begin(), identifying.end(), name) != identifying.end();
}

std::vector<int> Schema::identifying_indices() const {
    std::vector<int> out;
    out.reserve(identifying.size());
    for (const auto& n : identifying) out.push_back(index_of(n));
    return out;
}

int Schema::sensitive_index() const { return index_of(sensitive); }
int Schema::class_index() const { return index_of(class_attr); }

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size();
}

std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

} // namespace

PersonDataset load_csv(const std::string& path, Schema schema) {
    schema.validate();
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);

    std::string line;
    if (!std::getline(in, line)) throw SchemaError("empty file, no header: " + path);
    auto header = split_line(line);
    if (header.size() != schema.attributes.size())
        throw SchemaError("header has " + std::to_string(header.size()) + " columns, schema has " +
                          std::to_string(schema.attributes.size()));
    for (size_t i = 0; i < header.size(); ++i)
        if (header[i] != schema.attributes[i].name)
            throw SchemaError("header column '" + header[i] + "' does not match schema attribute '" +
                              schema.attributes[i].name + "'");

    std::vector<bool> required(schema.attributes.size(), false);
    for (int i : schema.identifying_indices()) required[i] = true;
    required[schema.sensitive_index()] = true;
    required[schema.class_index()] = true;

    PersonDataset ds;
    std::vector<std::set<std::string>> observed(schema.attributes.size());
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto fields = split_line(line);
        if (fields.size() != schema.attributes.size())
            throw ParseError("row " + std::to_string(line_no) + " has " +
                             std::to_string(fields.size()) + " fields, expected " +
                             std::to_string(schema.attributes.size()));
        bool drop = false;
        for (size_t i = 0; i < fields.size(); ++i) {
            if (fields[i] == kMissing) {
                if (required[i]) drop = true;
                continue;
            }
            const Attribute& attr = schema.attributes[i];
            if (attr.kind == AttrKind::Numeric) {
                double unused;
                if (!parse_double(fields[i], unused))
                    throw ParseError("row " + std::to_string(line_no) + ": '" + fields[i] +
                                     "' is not numeric for attribute " + attr.name);
            } else if (!attr.domain.empty()) {
                if (std::find(attr.domain.begin(), attr.domain.end(), fields[i]) ==
                    attr.domain.end())
                    throw ParseError("row " + std::to_string(line_no) + ": value '" + fields[i] +
                                     "' outside declared domain of " + attr.name);
            } else {
                observed[i].insert(fields[i]);
            }
        }
        if (drop) {
            ++ds.dropped_rows;
            continue;
        }
        ds.rows.push_back(std::move(fields));
    }

    // Fill in inferred domains (sorted unique observed values).
    for (size_t i = 0; i < schema.attributes.size(); ++i) {
        Attribute& attr = schema.attributes[i];
        if (attr.kind == AttrKind::Categorical && attr.domain.empty())
            attr.domain.assign(observed[i].begin(), observed[i].end());
    }
    ds.schema = std::move(schema);
    return ds;
}

void write_csv(const PersonDataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    for (size_t i = 0; i < ds.schema.attributes.size(); ++i) {
        if (i) out << ',';
        out << ds.schema.attributes[i].name;
    }
    out << '\n';
    for (const auto& row : ds.rows) {
        for (size_t i = 0; i < row.size(); ++i) {
            if (i) out << ',';
            out << row[i];
        }
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

PersonDataset discretize(const PersonDataset& ds, const std::string& attr, int bins) {
    int idx = ds.schema.index_of(attr);
    if (idx < 0) throw SchemaError("unknown attribute: " + attr);
    if (ds.schema.attributes[idx].kind != AttrKind::Numeric)
        throw AttributeTypeError("attribute " + attr + " is not numeric");
    if (bins < 2) throw ConfigError("bins must be >= 2");

    double lo = 0, hi = 0;
    bool first = true;
    for (const auto& row : ds.rows) {
        if (row[idx] == kMissing) continue;
        double v;
        if (!parse_double(row[idx], v)) throw ParseError("non-numeric value in " + attr);
        if (first) {
            lo = hi = v;
            first = false;
        } else {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }

    PersonDataset out = ds;
    Attribute& a = out.schema.attributes[idx];
    a.kind = AttrKind::Categorical;
    a.domain.clear();

    if (first || lo == hi) {
        // Degenerate range: everything lands in one closed bin.
        std::string label = "[" + format_number(lo) + "," + format_number(hi) + "]";
        a.domain.push_back(label);
        for (auto& row : out.rows)
            if (row[idx] != kMissing) row[idx] = label;
        return out;
    }

    double width = (hi - lo) / bins;
    std::vector<std::string> labels;
    for (int b = 0; b < bins; ++b) {
        double blo = lo + width * b;
        double bhi = (b == bins - 1) ? hi : lo + width * (b + 1);
        std::string label = "[" + format_number(blo) + "," + format_number(bhi) +
                            (b == bins - 1 ? "]" : ")");
        labels.push_back(label);
    }
    a.domain = labels;
    for (auto& row : out.rows) {
        if (row[idx] == kMissing) continue;
        double v;
        parse_double(row[idx], v);
        int b = static_cast<int>((v - lo) / width);
        b = std::clamp(b, 0, bins - 1);
        row[idx] = labels[b];
    }
    return out;
}

std::vector<FoldPair> stratified_folds(const PersonDataset& ds, int k, uint64_t seed) {
    if (k < 2) throw ConfigError("fold count must be >= 2");
    if (static_cast<size_t>(k) > ds.rows.size())
        throw ConfigError("fold count exceeds dataset size");

    int class_idx = ds.schema.class_index();
    std::map<std::string, std::vector<size_t>> by_class;
    for (size_t i = 0; i < ds.rows.size(); ++i) by_class[ds.rows[i][class_idx]].push_back(i);

    Rng rng(seed);
    std::vector<std::vector<size_t>> fold_rows(k);
    int class_no = 0;
    for (auto& [label, indices] : by_class) {
        rng.shuffle(indices);
        // Rotating the dealing start keeps remainders from piling onto one fold.
        for (size_t j = 0; j < indices.size(); ++j)
            fold_rows[(j + class_no) % k].push_back(indices[j]);
        ++class_no;
    }
    for (auto& f : fold_rows) std::sort(f.begin(), f.end());

    std::vector<FoldPair> out(k);
    for (int f = 0; f < k; ++f) {
        std::vector<bool> in_test(ds.rows.size(), false);
        for (size_t i : fold_rows[f]) in_test[i] = true;
        out[f].train.schema = ds.schema;
        out[f].test.schema = ds.schema;
        for (size_t i = 0; i < ds.rows.size(); ++i)
            (in_test[i] ? out[f].test : out[f].train).rows.push_back(ds.rows[i]);
    }
    return out;
}

IndexSplit split_indices(size_t n, double fraction, uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("fraction must be in (0,1)");
    Rng rng(seed);
    auto perm = rng.permutation(n);
    size_t prune_n = static_cast<size_t>(std::llround(fraction * static_cast<double>(n)));
    IndexSplit split;
    split.prune.assign(perm.begin(), perm.begin() + prune_n);
    split.grow.assign(perm.begin() + prune_n, perm.end());
    std::sort(split.prune.begin(), split.prune.end());
    std::sort(split.grow.begin(), split.grow.end());
    return split;
}

PruneSplit split_prune_set(const PersonDataset& train, double fraction, uint64_t seed) {
    auto split = split_indices(train.rows.size(), fraction, seed);
    PruneSplit out;
    out.grow.schema = train.schema;
    out.prune.schema = train.schema;
    for (size_t i : split.grow) out.grow.rows.push_back(train.rows[i]);
    for (size_t i : split.prune) out.prune.rows.push_back(train.rows[i]);
    return out;
}

} // namespace anatree
