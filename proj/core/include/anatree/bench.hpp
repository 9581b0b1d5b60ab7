#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "anatree/client.hpp"
#include "anatree/dataset.hpp"
#include "anatree/server.hpp"

namespace anatree {

// The experimental protocol: k-fold cross validation of cdbsl, cnl, and
// cdtl against fresh server instances that share the same grow/prune split,
// with per-fold accuracy, client cost counters, execution-time savings
// (ets = cdtl client time / cnl client time) and memory savings
// (ms = biggest BDT leaf / training set; also reported against the grow
// set, since the denominator convention is ambiguous once 20% of the fold
// is held out for pruning).

struct DiscretizeStep {
    std::string attr;
    int bins = 0;
};

struct ExperimentConfig {
    std::string name;
    std::string dataset_path; // CSV; ignored when rows are passed directly
    Schema schema;
    std::vector<DiscretizeStep> discretize_steps;
    int l = 2;
    int folds = 10;
    LearnParams params;
    double prune_fraction = 0.2;
    uint64_t fold_seed = 1;
    uint64_t prune_seed = 2;
    uint64_t anatomy_seed = 3;

    static ExperimentConfig from_json_file(const std::string& path);
    static ExperimentConfig from_json_text(const std::string& text, const std::string& origin);
};

enum class Algorithm : uint8_t { Cdbsl = 0, Cnl = 1, Cdtl = 2 };
const char* algorithm_name(Algorithm a);

struct AlgoFoldResult {
    Algorithm algo = Algorithm::Cdbsl;
    double accuracy = 0.0;
    CostCounters cost;
    size_t audit_violations = 0;
};

struct FoldResult {
    int fold = 0;
    size_t train_rows = 0;
    size_t grow_rows = 0;
    size_t test_rows = 0;
    size_t bdt_leaves = 0;
    size_t biggest_leaf = 0;
    double ets = 0.0;      // cdtl client time / cnl client time
    double ms_train = 0.0; // biggest leaf / |train|
    double ms_grow = 0.0;  // biggest leaf / |grow|
    AlgoFoldResult algos[3];

    const AlgoFoldResult& result(Algorithm a) const { return algos[static_cast<int>(a)]; }
};

struct AuditReport {
    std::vector<std::string> violations;
    size_t records_checked = 0;
    size_t blobs_checked = 0;
    bool clean() const { return violations.empty(); }
};

struct MetricsReport {
    ExperimentConfig config;
    std::vector<FoldResult> folds;
    std::vector<std::string> audit_lines; // one per fold x algorithm
    size_t total_audit_violations = 0;

    double mean_accuracy(Algorithm a) const;
};

struct RunOptions {
    bool use_tcp = false; // loopback TCP instead of in-process transport
    bool run_audit = true;
};

// Runs the full protocol on an already loaded dataset.
MetricsReport run_experiment(const ExperimentConfig& cfg, const PersonDataset& ds,
                             const RunOptions& opts = {});
// Loads cfg.dataset_path (applying discretize steps) and runs.
MetricsReport run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {});

// Applies cfg.discretize_steps to a freshly loaded dataset.
PersonDataset load_experiment_dataset(const ExperimentConfig& cfg);

// Privacy audit over a server transcript plus state dump. Violations are
// report content, never exceptions.
AuditReport audit_transcript(const Transcript& transcript, const ServerStateDump& state,
                             const ClientKey& key, const Schema& schema);

// Boxplot-ready quartiles under linear interpolation.
struct Quartiles {
    double min = 0, q1 = 0, median = 0, q3 = 0, max = 0, mean = 0;
};
Quartiles quartiles(std::vector<double> values);

// Writes per_fold.csv, summary.csv, and transcript_audit.txt.
void emit_report(const MetricsReport& report, const std::string& out_dir);

} // namespace anatree
