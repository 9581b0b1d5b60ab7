#include "anatree/dtree.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <map>

namespace anatree {

namespace {

constexpr double kMinGain = 1e-12;

bool is_missing(const std::string& v) { return v.empty() || v == kMissing; }

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size();
}

double entropy(const std::vector<uint32_t>& counts, uint32_t total) {
    if (total == 0) return 0.0;
    double h = 0.0;
    for (uint32_t c : counts) {
        if (c == 0) continue;
        double p = static_cast<double>(c) / total;
        h -= p * std::log2(p);
    }
    return h;
}

struct LearnContext {
    const std::vector<Row>& rows;
    const std::vector<Attribute>& attrs;
    int class_attr;
    const std::vector<int>& allowed;
    LearnParams params;

    std::vector<uint16_t> class_of;             // row -> class domain index
    std::vector<std::string> class_labels;      // class domain
    std::vector<std::map<std::string, int>> value_index; // per attr, value -> domain index
};

// A chosen split plus the per-child partition of the node rows.
struct Candidate {
    SplitTest test;
    double gain = 0.0;
    double ratio = 0.0;
    bool valid = false;
};

double split_info(const std::vector<uint32_t>& part_sizes, uint32_t total) {
    double si = 0.0;
    for (uint32_t s : part_sizes) {
        if (s == 0) continue;
        double p = static_cast<double>(s) / total;
        si -= p * std::log2(p);
    }
    return si;
}

// Gain and gain ratio from a per-part class count matrix.
void score_parts(const std::vector<std::vector<uint32_t>>& part_counts, double node_entropy,
                 uint32_t total, double& gain, double& ratio, bool& valid) {
    std::vector<uint32_t> sizes;
    sizes.reserve(part_counts.size());
    uint32_t nonempty = 0;
    for (const auto& pc : part_counts) {
        uint32_t s = 0;
        for (uint32_t c : pc) s += c;
        sizes.push_back(s);
        if (s > 0) ++nonempty;
    }
    if (nonempty < 2) {
        valid = false;
        return;
    }
    double cond = 0.0;
    for (size_t i = 0; i < part_counts.size(); ++i) {
        if (sizes[i] == 0) continue;
        cond += (static_cast<double>(sizes[i]) / total) * entropy(part_counts[i], sizes[i]);
    }
    gain = node_entropy - cond;
    double si = split_info(sizes, total);
    ratio = si > 0 ? gain / si : 0.0;
    valid = true;
}

class Builder {
public:
    explicit Builder(LearnContext& ctx) : ctx_(ctx) {}

    std::unique_ptr<TreeNode> build(std::vector<uint32_t> node_rows) {
        auto node = std::make_unique<TreeNode>();

        std::vector<uint32_t> counts(ctx_.class_labels.size(), 0);
        for (uint32_t r : node_rows) ++counts[ctx_.class_of[r]];
        uint32_t total = static_cast<uint32_t>(node_rows.size());
        uint32_t nonzero = 0;
        for (uint32_t c : counts) nonzero += (c > 0);

        bool pure = nonzero <= 1;
        bool too_small = node_rows.size() < static_cast<size_t>(ctx_.params.min_leaf_size);
        bool oversized = ctx_.params.max_leaf_size &&
                         node_rows.size() > static_cast<size_t>(*ctx_.params.max_leaf_size);

        Candidate best;
        if (!pure && !too_small) {
            double node_entropy = entropy(counts, total);
            best = pick_candidate(node_rows, node_entropy, total, oversized);
        }

        if (!best.valid) {
            make_leaf(*node, node_rows, counts);
            return node;
        }

        auto parts = partition(node_rows, best.test);
        node->test = best.test;
        for (auto& part : parts) {
            if (part.empty()) {
                // Domain value unseen here: an empty leaf. Prediction falls
                // back to the nearest ancestor distribution.
                node->children.push_back(std::make_unique<TreeNode>());
            } else {
                node->children.push_back(build(std::move(part)));
            }
        }
        return node;
    }

private:
    void make_leaf(TreeNode& node, std::vector<uint32_t>& node_rows,
                   const std::vector<uint32_t>& counts) {
        for (size_t c = 0; c < counts.size(); ++c)
            if (counts[c] > 0) node.class_counts[ctx_.class_labels[c]] = counts[c];
        node.members = std::move(node_rows);
    }

    // Evaluates every allowed test with counting only; the winner's row
    // partition is materialized later. When `relaxed` is set (leaf-size
    // threshold exceeded) zero-gain tests are acceptable as a last resort.
    Candidate pick_candidate(const std::vector<uint32_t>& node_rows, double node_entropy,
                             uint32_t total, bool relaxed) {
        Candidate best;
        bool best_positive = false;
        auto consider = [&](const SplitTest& test, double gain, double ratio, bool valid) {
            if (!valid) return;
            bool positive = gain > kMinGain;
            if (!positive && !relaxed) return;
            // Prefer positive gain, then the larger ratio; earlier
            // enumeration wins ties.
            if (!best.valid || (positive && !best_positive) ||
                (positive == best_positive && ratio > best.ratio)) {
                best.test = test;
                best.gain = gain;
                best.ratio = ratio;
                best.valid = true;
                best_positive = positive;
            }
        };

        size_t n_classes = ctx_.class_labels.size();
        for (int attr : ctx_.allowed) {
            const Attribute& a = ctx_.attrs[attr];
            if (a.kind == AttrKind::Categorical) {
                const auto& domain = a.domain;
                std::vector<std::vector<uint32_t>> counts(domain.size(),
                                                          std::vector<uint32_t>(n_classes, 0));
                std::vector<uint32_t> value_sizes(domain.size(), 0);
                std::vector<uint32_t> class_totals(n_classes, 0);
                for (uint32_t r : node_rows) {
                    const std::string& v = ctx_.rows[r][attr];
                    if (is_missing(v)) throw ParseError("missing value for attribute " + a.name);
                    auto it = ctx_.value_index[attr].find(v);
                    if (it == ctx_.value_index[attr].end())
                        throw ParseError("value '" + v + "' outside domain of " + a.name);
                    ++counts[it->second][ctx_.class_of[r]];
                    ++value_sizes[it->second];
                    ++class_totals[ctx_.class_of[r]];
                }
                if (!ctx_.params.binary_splits) {
                    double gain, ratio;
                    bool valid;
                    score_parts(counts, node_entropy, total, gain, ratio, valid);
                    SplitTest t;
                    t.attr = attr;
                    t.kind = SplitTest::Kind::Multiway;
                    consider(t, gain, ratio, valid);
                } else {
                    for (size_t vi = 0; vi < domain.size(); ++vi) {
                        if (value_sizes[vi] == 0 || value_sizes[vi] == total) continue;
                        std::vector<std::vector<uint32_t>> two(2,
                                                               std::vector<uint32_t>(n_classes, 0));
                        two[0] = counts[vi];
                        for (size_t c = 0; c < n_classes; ++c)
                            two[1][c] = class_totals[c] - counts[vi][c];
                        double gain, ratio;
                        bool valid;
                        score_parts(two, node_entropy, total, gain, ratio, valid);
                        SplitTest t;
                        t.attr = attr;
                        t.kind = SplitTest::Kind::BinaryEq;
                        t.operand = domain[vi];
                        consider(t, gain, ratio, valid);
                    }
                }
            } else {
                // Numeric: sort once, sweep midpoints between distinct values.
                std::vector<std::pair<double, uint16_t>> vals;
                vals.reserve(node_rows.size());
                for (uint32_t r : node_rows) {
                    const std::string& s = ctx_.rows[r][attr];
                    double v;
                    if (!parse_double(s, v))
                        throw ParseError("non-numeric value '" + s + "' for attribute " + a.name);
                    vals.emplace_back(v, ctx_.class_of[r]);
                }
                std::sort(vals.begin(), vals.end());
                std::vector<uint32_t> left(n_classes, 0), right(n_classes, 0);
                for (const auto& [v, c] : vals) ++right[c];
                uint32_t n_left = 0;
                for (size_t i = 0; i + 1 < vals.size(); ++i) {
                    ++left[vals[i].second];
                    --right[vals[i].second];
                    ++n_left;
                    if (vals[i].first == vals[i + 1].first) continue;
                    uint32_t n_right = total - n_left;
                    double cond = (double(n_left) / total) * entropy(left, n_left) +
                                  (double(n_right) / total) * entropy(right, n_right);
                    double gain = node_entropy - cond;
                    double pl = double(n_left) / total, pr = double(n_right) / total;
                    double si = -pl * std::log2(pl) - pr * std::log2(pr);
                    SplitTest t;
                    t.attr = attr;
                    t.kind = SplitTest::Kind::Threshold;
                    t.threshold = vals[i].first + (vals[i + 1].first - vals[i].first) / 2.0;
                    consider(t, gain, si > 0 ? gain / si : 0.0, true);
                }
            }
        }
        return best;
    }

    std::vector<std::vector<uint32_t>> partition(const std::vector<uint32_t>& node_rows,
                                                 const SplitTest& test) {
        std::vector<std::vector<uint32_t>> parts;
        if (test.kind == SplitTest::Kind::Multiway) {
            parts.resize(ctx_.attrs[test.attr].domain.size());
            for (uint32_t r : node_rows)
                parts[ctx_.value_index[test.attr].at(ctx_.rows[r][test.attr])].push_back(r);
        } else if (test.kind == SplitTest::Kind::BinaryEq) {
            parts.resize(2);
            for (uint32_t r : node_rows)
                parts[ctx_.rows[r][test.attr] == test.operand ? 0 : 1].push_back(r);
        } else {
            parts.resize(2);
            for (uint32_t r : node_rows) {
                double v;
                parse_double(ctx_.rows[r][test.attr], v);
                parts[v <= test.threshold ? 0 : 1].push_back(r);
            }
        }
        return parts;
    }

    LearnContext& ctx_;
};

std::map<std::string, uint32_t> aggregate_counts(const TreeNode& node) {
    if (node.is_leaf()) return node.class_counts;
    std::map<std::string, uint32_t> agg;
    for (const auto& c : node.children)
        for (const auto& [label, count] : aggregate_counts(*c)) agg[label] += count;
    return agg;
}

std::string majority_of(const std::map<std::string, uint32_t>& counts) {
    if (counts.empty()) throw EmptyInputError("empty class distribution");
    std::string best;
    uint32_t best_n = 0;
    for (const auto& [label, n] : counts) {
        if (n > best_n) { // map order makes ties lexicographic
            best = label;
            best_n = n;
        }
    }
    return best;
}

// Child index for a row at an internal node; -1 when the value is missing
// (or unparseable / outside the domain).
int route_index(const std::vector<Attribute>& attrs, const TreeNode& node, const Row& row) {
    const SplitTest& test = *node.test;
    if (static_cast<size_t>(test.attr) >= row.size()) return -1;
    const std::string& v = row[test.attr];
    if (is_missing(v)) return -1;
    if (test.kind == SplitTest::Kind::Multiway) {
        const auto& domain = attrs[test.attr].domain;
        for (size_t i = 0; i < domain.size(); ++i)
            if (domain[i] == v) return static_cast<int>(i);
        return -1;
    }
    if (test.kind == SplitTest::Kind::BinaryEq) return v == test.operand ? 0 : 1;
    double d;
    if (!parse_double(v, d)) return -1;
    return d <= test.threshold ? 0 : 1;
}

size_t largest_child(const TreeNode& node) {
    size_t best = 0;
    uint64_t best_n = 0;
    for (size_t i = 0; i < node.children.size(); ++i) {
        uint64_t n = node.children[i]->training_count();
        if (n > best_n) {
            best = i;
            best_n = n;
        }
    }
    return best;
}

} // namespace

uint64_t TreeNode::training_count() const {
    if (is_leaf()) {
        uint64_t n = 0;
        for (const auto& [label, c] : class_counts) n += c;
        return n;
    }
    uint64_t n = 0;
    for (const auto& c : children) n += c->training_count();
    return n;
}

DecisionTree learn(const std::vector<Row>& rows, const std::vector<Attribute>& attrs,
                   int class_attr, const std::vector<int>& allowed, const LearnParams& params) {
    if (rows.empty()) throw EmptyInputError("no rows to learn from");
    if (class_attr < 0 || static_cast<size_t>(class_attr) >= attrs.size())
        throw SchemaError("class attribute index out of range");
    if (attrs[class_attr].kind != AttrKind::Categorical)
        throw SchemaError("class attribute must be categorical");
    if (params.min_leaf_size < 1) throw ConfigError("min leaf size must be >= 1");
    for (int a : allowed) {
        if (a < 0 || static_cast<size_t>(a) >= attrs.size())
            throw SchemaError("allowed attribute index out of range");
        if (a == class_attr) throw SchemaError("class attribute cannot be a split attribute");
    }

    LearnContext ctx{rows, attrs, class_attr, allowed, params};
    ctx.class_labels = attrs[class_attr].domain;
    std::map<std::string, uint16_t> class_index;
    for (size_t i = 0; i < ctx.class_labels.size(); ++i)
        class_index[ctx.class_labels[i]] = static_cast<uint16_t>(i);

    ctx.class_of.resize(rows.size());
    for (size_t r = 0; r < rows.size(); ++r) {
        auto it = class_index.find(rows[r][class_attr]);
        if (it == class_index.end())
            throw ParseError("class value '" + rows[r][class_attr] + "' outside class domain");
        ctx.class_of[r] = it->second;
    }

    ctx.value_index.resize(attrs.size());
    for (int a : allowed) {
        if (attrs[a].kind != AttrKind::Categorical) continue;
        for (size_t i = 0; i < attrs[a].domain.size(); ++i)
            ctx.value_index[a][attrs[a].domain[i]] = static_cast<int>(i);
    }

    std::vector<uint32_t> all(rows.size());
    for (size_t i = 0; i < rows.size(); ++i) all[i] = static_cast<uint32_t>(i);

    DecisionTree tree;
    tree.attrs = attrs;
    tree.class_attr = class_attr;
    tree.params = params;
    tree.root = Builder(ctx).build(std::move(all));
    return tree;
}

namespace {

struct PruneResult {
    size_t errors = 0;
};

size_t leaf_errors(const std::map<std::string, uint32_t>& dist, const std::string& fallback,
                   const std::vector<const Row*>& rows, int class_attr) {
    std::string label = dist.empty() ? fallback : majority_of(dist);
    size_t e = 0;
    for (const Row* r : rows)
        if ((*r)[class_attr] != label) ++e;
    return e;
}

size_t prune_node(TreeNode& node, const DecisionTree& tree, std::vector<const Row*> rows,
                  const std::string& fallback) {
    if (node.is_leaf()) return leaf_errors(node.class_counts, fallback, rows, tree.class_attr);

    auto agg = aggregate_counts(node);
    std::string here = agg.empty() ? fallback : majority_of(agg);

    std::vector<std::vector<const Row*>> parts(node.children.size());
    for (const Row* r : rows) {
        int idx = route_index(tree.attrs, node, *r);
        if (idx < 0) idx = static_cast<int>(largest_child(node));
        parts[idx].push_back(r);
    }
    size_t subtree_errors = 0;
    for (size_t i = 0; i < node.children.size(); ++i)
        subtree_errors += prune_node(*node.children[i], tree, std::move(parts[i]), here);

    size_t as_leaf = leaf_errors(agg, fallback, rows, tree.class_attr);
    if (as_leaf <= subtree_errors) {
        // Collapse into a majority leaf carrying the merged training
        // distribution and members.
        std::vector<uint32_t> members;
        std::function<void(const TreeNode&)> collect = [&](const TreeNode& n) {
            if (n.is_leaf()) {
                members.insert(members.end(), n.members.begin(), n.members.end());
                return;
            }
            for (const auto& c : n.children) collect(*c);
        };
        collect(node);
        std::sort(members.begin(), members.end());
        node.test.reset();
        node.children.clear();
        node.class_counts = std::move(agg);
        node.members = std::move(members);
        return as_leaf;
    }
    return subtree_errors;
}

} // namespace

void prune_reduced_error(DecisionTree& tree, const std::vector<Row>& prune_rows) {
    if (!tree.root) throw EmptyInputError("tree has no root");
    if (prune_rows.empty()) throw EmptyInputError("prune set is empty");
    std::vector<const Row*> rows;
    rows.reserve(prune_rows.size());
    for (const auto& r : prune_rows) rows.push_back(&r);
    auto agg = aggregate_counts(*tree.root);
    prune_node(*tree.root, tree, std::move(rows), majority_of(agg));
}

const TreeNode& find_leaf(const DecisionTree& tree, const Row& row) {
    if (!tree.root) throw EmptyInputError("tree has no root");
    const TreeNode* node = tree.root.get();
    while (!node->is_leaf()) {
        int idx = route_index(tree.attrs, *node, row);
        if (idx < 0) idx = static_cast<int>(largest_child(*node));
        node = node->children[idx].get();
    }
    return *node;
}

std::string majority_label(const TreeNode& leaf) { return majority_of(leaf.class_counts); }

std::string predict_label(const DecisionTree& tree, const Row& row) {
    if (!tree.root) throw EmptyInputError("tree has no root");
    std::vector<const TreeNode*> path;
    const TreeNode* node = tree.root.get();
    path.push_back(node);
    while (!node->is_leaf()) {
        int idx = route_index(tree.attrs, *node, row);
        if (idx < 0) idx = static_cast<int>(largest_child(*node));
        node = node->children[idx].get();
        path.push_back(node);
    }
    if (!node->class_counts.empty()) return majority_of(node->class_counts);
    // Empty leaf (domain value unseen in training): fall back to the nearest
    // ancestor that has a distribution.
    for (auto it = path.rbegin(); it != path.rend(); ++it) {
        if ((*it)->training_count() == 0) continue;
        return majority_of(aggregate_counts(**it));
    }
    throw EmptyInputError("tree has no training distribution");
}

namespace {

void serialize_node(const TreeNode& node, ByteWriter& w) {
    if (node.is_leaf()) {
        w.u8(0);
        w.u32(static_cast<uint32_t>(node.class_counts.size()));
        for (const auto& [label, count] : node.class_counts) {
            w.str(label);
            w.u32(count);
        }
        return;
    }
    const SplitTest& t = *node.test;
    w.u8(1);
    w.u32(static_cast<uint32_t>(t.attr));
    w.u8(static_cast<uint8_t>(t.kind));
    if (t.kind == SplitTest::Kind::BinaryEq) w.str(t.operand);
    if (t.kind == SplitTest::Kind::Threshold) w.f64(t.threshold);
    w.u32(static_cast<uint32_t>(node.children.size()));
    for (const auto& c : node.children) serialize_node(*c, w);
}

std::unique_ptr<TreeNode> deserialize_node(ByteReader& r, const std::vector<Attribute>& attrs) {
    auto node = std::make_unique<TreeNode>();
    uint8_t tag = r.u8();
    if (tag == 0) {
        uint32_t k = r.u32();
        std::string prev;
        for (uint32_t i = 0; i < k; ++i) {
            std::string label = r.str();
            uint32_t count = r.u32();
            if (i > 0 && !(prev < label)) throw FormatError("leaf labels not in canonical order");
            node->class_counts.emplace(label, count);
            prev = std::move(label);
        }
        return node;
    }
    if (tag != 1) throw FormatError("unknown node tag");
    SplitTest t;
    uint32_t attr = r.u32();
    if (attr >= attrs.size()) throw FormatError("split attribute index out of range");
    t.attr = static_cast<int>(attr);
    uint8_t kind = r.u8();
    if (kind > 2) throw FormatError("unknown split kind");
    t.kind = static_cast<SplitTest::Kind>(kind);
    if (t.kind == SplitTest::Kind::BinaryEq) t.operand = r.str();
    if (t.kind == SplitTest::Kind::Threshold) t.threshold = r.f64();
    if (t.kind == SplitTest::Kind::Threshold) {
        if (attrs[attr].kind != AttrKind::Numeric)
            throw FormatError("threshold split on a categorical attribute");
    } else if (attrs[attr].kind != AttrKind::Categorical) {
        throw FormatError("categorical split on a numeric attribute");
    }
    uint32_t n_children = r.u32();
    size_t expected = t.kind == SplitTest::Kind::Multiway ? attrs[attr].domain.size() : 2;
    if (n_children != expected) throw FormatError("child count does not match the split");
    node->test = t;
    for (uint32_t i = 0; i < n_children; ++i) node->children.push_back(deserialize_node(r, attrs));
    return node;
}

} // namespace

Bytes serialize(const DecisionTree& tree) {
    if (!tree.root) throw EmptyInputError("tree has no root");
    ByteWriter w;
    serialize_node(*tree.root, w);
    return w.take();
}

DecisionTree deserialize(std::span<const uint8_t> data, std::vector<Attribute> attrs,
                         int class_attr) {
    ByteReader r(data);
    DecisionTree tree;
    tree.root = deserialize_node(r, attrs);
    r.expect_done();
    tree.attrs = std::move(attrs);
    tree.class_attr = class_attr;
    return tree;
}

void for_each_node(const TreeNode& root,
                   const std::function<void(const TreeNode&, const std::string&)>& fn) {
    std::function<void(const TreeNode&, const std::string&)> walk = [&](const TreeNode& node,
                                                                        const std::string& path) {
        fn(node, path);
        for (size_t i = 0; i < node.children.size(); ++i)
            walk(*node.children[i], path.empty() ? std::to_string(i)
                                                 : path + "." + std::to_string(i));
    };
    walk(root, "");
}

size_t leaf_count(const DecisionTree& tree) {
    size_t n = 0;
    for_each_node(*tree.root, [&](const TreeNode& node, const std::string&) {
        if (node.is_leaf()) ++n;
    });
    return n;
}

} // namespace anatree
