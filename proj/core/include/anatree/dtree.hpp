#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "anatree/bytes.hpp"
#include "anatree/dataset.hpp"

namespace anatree {

// C4.5-style induction: greedy top-down by gain ratio, multiway categorical
// splits (one child per domain value), optional binary =v/!=v mode, numeric
// threshold splits, reduced-error pruning.
//
// Determinism contract: identical (rows, attrs, allowed, params) inputs
// produce identical trees and identical serializations. All tie-breaks are
// fixed (attribute order, then candidate enumeration order; majority ties by
// lexicographic label).

struct LearnParams {
    // Nodes with fewer rows than this become leaves.
    int min_leaf_size = 2;
    // Categorical tests become =v / !=v instead of multiway.
    bool binary_splits = false;
    // Optional cap on leaf size: an impure node larger than this keeps
    // splitting even at zero gain, as long as some test separates the rows.
    std::optional<int> max_leaf_size;

    bool operator==(const LearnParams&) const = default;
};

struct SplitTest {
    enum class Kind : uint8_t { Multiway = 0, BinaryEq = 1, Threshold = 2 };

    int attr = -1;
    Kind kind = Kind::Multiway;
    std::string operand; // BinaryEq: the tested value
    double threshold = 0.0;

    bool operator==(const SplitTest&) const = default;
};

struct TreeNode {
    // Engaged test => internal node. Children for Multiway follow the
    // attribute's domain order; BinaryEq and Threshold have children
    // {match, no-match} and {<=, >} respectively.
    std::optional<SplitTest> test;
    std::vector<std::unique_ptr<TreeNode>> children;

    // Leaves: class distribution and the training rows that reached the
    // leaf. Counts always sum to members.size() on learned trees; a child
    // for a domain value unseen in training is an empty leaf (prediction
    // falls back to the nearest ancestor with a distribution). Members are
    // never serialized.
    std::map<std::string, uint32_t> class_counts;
    std::vector<uint32_t> members;

    bool is_leaf() const { return !test.has_value(); }
    uint64_t training_count() const; // sum of leaf counts in this subtree
};

struct DecisionTree {
    std::vector<Attribute> attrs; // learning universe; split attr indices point here
    int class_attr = -1;
    LearnParams params;
    std::unique_ptr<TreeNode> root;
};

// Rows are full-universe value vectors; kMissing ("?") or an empty string
// marks a missing value. `allowed` lists the attribute indices available for
// splitting and must not contain class_attr.
DecisionTree learn(const std::vector<Row>& rows, const std::vector<Attribute>& attrs,
                   int class_attr, const std::vector<int>& allowed, const LearnParams& params);

// Bottom-up reduced-error pruning: a subtree collapses into a majority leaf
// whenever that does not decrease accuracy on the prune rows. Mutates the
// tree.
void prune_reduced_error(DecisionTree& tree, const std::vector<Row>& prune_rows);

// Routes a row to its unique leaf. A missing tested value follows the child
// with the largest training count.
const TreeNode& find_leaf(const DecisionTree& tree, const Row& row);

// Majority class of a leaf distribution, ties broken lexicographically.
// Throws EmptyInputError on an empty distribution.
std::string majority_label(const TreeNode& leaf);

// find_leaf + majority, falling back to the nearest ancestor distribution
// when the row lands on an empty leaf.
std::string predict_label(const DecisionTree& tree, const Row& row);

// Canonical byte form (preorder; big-endian integers; length-prefixed
// strings). Leaf members are intentionally excluded: an encrypted subtree
// blob reveals nothing about row counts beyond the distributions.
Bytes serialize(const DecisionTree& tree);
DecisionTree deserialize(std::span<const uint8_t> data, std::vector<Attribute> attrs,
                         int class_attr);

// Preorder traversal with dotted child-index paths ("" for the root).
void for_each_node(const TreeNode& root,
                   const std::function<void(const TreeNode&, const std::string&)>& fn);

size_t leaf_count(const DecisionTree& tree);

} // namespace anatree
