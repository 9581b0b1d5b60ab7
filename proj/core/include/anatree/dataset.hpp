#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "anatree/errors.hpp"

namespace anatree {

enum class AttrKind : uint8_t { Categorical, Numeric };

struct Attribute {
    std::string name;
    AttrKind kind = AttrKind::Categorical;
    // For categorical attributes: the ordered value domain. May be left empty
    // in a declared schema, in which case load_csv infers it (sorted unique
    // observed values). Multiway splits create one child per domain value in
    // this order, so the domain is part of the learning contract.
    std::vector<std::string> domain;
};

// Attribute metadata for a person-specific dataset: identifying set,
// single sensitive attribute, and the class attribute (which must be
// identifying, never sensitive).
struct Schema {
    std::vector<Attribute> attributes;
    std::vector<std::string> identifying;
    std::string sensitive;
    std::string class_attr;

    // Throws SchemaError on violated invariants. Normalizes `identifying`
    // into schema attribute order.
    void validate();

    int index_of(const std::string& name) const; // -1 if absent
    const Attribute& attribute(const std::string& name) const;
    bool is_identifying(const std::string& name) const;

    // Indices of identifying attributes, in attribute order.
    std::vector<int> identifying_indices() const;
    int sensitive_index() const;
    int class_index() const;
};

using Row = std::vector<std::string>;

constexpr const char* kMissing = "?";

struct PersonDataset {
    Schema schema;
    std::vector<Row> rows;
    // Rows discarded by load_csv because class/sensitive/identifying values
    // were missing.
    size_t dropped_rows = 0;

    size_t size() const { return rows.size(); }
};

// CSV ingestion. Header must match schema attribute names in order; "?" is
// the missing-value marker. Rows with a missing class, sensitive, or
// identifying value are dropped and counted. Fields are plain
// comma-separated (no quoting); values in this corpus never contain commas.
PersonDataset load_csv(const std::string& path, Schema schema);
void write_csv(const PersonDataset& ds, const std::string& path);

// Equal-width binning of a numeric attribute into `bins` categorical bins
// labeled "[lo,hi)" (last bin "[lo,hi]"). A degenerate all-equal column
// collapses into a single bin.
PersonDataset discretize(const PersonDataset& ds, const std::string& attr, int bins);

struct FoldPair {
    PersonDataset train;
    PersonDataset test;
};

// Stratified k-fold split. Per-class round-robin dealing keeps each fold's
// class counts within one row of the global proportions; classes with fewer
// than k rows degrade to plain round-robin. Rows inside each part keep the
// original dataset order. Deterministic for a fixed seed.
std::vector<FoldPair> stratified_folds(const PersonDataset& ds, int k, uint64_t seed);

// Deterministic index split used for the shared grow/prune partition: the
// same (n, fraction, seed) triple yields the same index sets everywhere
// (bench, server, cnl client), which is what keeps the three algorithms in
// the same model space on a fold. Both halves are returned sorted.
struct IndexSplit {
    std::vector<size_t> grow;
    std::vector<size_t> prune;
};
IndexSplit split_indices(size_t n, double fraction, uint64_t seed);

struct PruneSplit {
    PersonDataset grow;
    PersonDataset prune;
};
PruneSplit split_prune_set(const PersonDataset& train, double fraction, uint64_t seed);

} // namespace anatree
