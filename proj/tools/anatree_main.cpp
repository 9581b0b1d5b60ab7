#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "anatree/anatomy.hpp"
#include "anatree/bench.hpp"
#include "anatree/client.hpp"
#include "anatree/datagen.hpp"
#include "anatree/server.hpp"
#include "anatree/transport.hpp"

namespace {

using namespace anatree;

std::atomic<bool> g_stop{false};
void handle_signal(int) { g_stop = true; }

ClientKey load_key(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open key file " + path);
    std::string hex;
    in >> hex;
    return ClientKey::from_hex(hex);
}

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

// Prediction input: header must match the schema, but missing values are
// allowed anywhere (the class of an unlabeled tuple is simply unknown).
std::vector<Row> load_tuples(const std::string& path, const Schema& schema) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("empty file: " + path);
    auto header = split_line(line);
    if (header.size() != schema.attributes.size())
        throw SchemaError("header does not match schema in " + path);
    for (size_t i = 0; i < header.size(); ++i)
        if (header[i] != schema.attributes[i].name)
            throw SchemaError("header column '" + header[i] + "' does not match schema");
    std::vector<Row> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto fields = split_line(line);
        if (fields.size() != schema.attributes.size())
            throw ParseError("row with wrong field count in " + path);
        rows.push_back(std::move(fields));
    }
    return rows;
}

void print_counters(std::ostream& out, const CostCounters& c) {
    out << "counter,value\n"
        << "learn_ns," << c.learn_ns << "\n"
        << "infer_ns," << c.infer_ns << "\n"
        << "crypto_ns," << c.crypto_ns << "\n"
        << "network_ns," << c.network_ns << "\n"
        << "client_total_ns," << c.client_total_ns() << "\n"
        << "bytes_sent," << c.bytes_sent << "\n"
        << "bytes_received," << c.bytes_received << "\n"
        << "encrypt_ops," << c.encrypt_ops << "\n"
        << "decrypt_ops," << c.decrypt_ops << "\n"
        << "learn_calls," << c.learn_calls << "\n"
        << "learn_tuples," << c.learn_tuples << "\n"
        << "peak_payload_rows," << c.peak_payload_rows << "\n"
        << "peak_tuples_held," << c.peak_tuples_held << "\n"
        << "requests," << c.requests << "\n";
}

int cmd_gen_data(const std::string& dataset, const std::string& out, const std::string& outdir,
                 uint64_t seed, bool all) {
    if (all) {
        for (const auto& name : builtin_dataset_names()) {
            PersonDataset ds = gen_builtin(name, seed);
            std::string path = (outdir.empty() ? std::string(".") : outdir) + "/" + name + ".csv";
            write_csv(ds, path);
            std::cout << path << ": " << ds.rows.size() << " rows, "
                      << ds.schema.attributes.size() << " attributes\n";
        }
        return 0;
    }
    PersonDataset ds = gen_builtin(dataset, seed);
    write_csv(ds, out);
    std::cout << out << ": " << ds.rows.size() << " rows, " << ds.schema.attributes.size()
              << " attributes\n";
    return 0;
}

int cmd_anatomize(const std::string& config_path, const std::string& input, int l, uint64_t seed,
                  const std::string& key_out, const std::string& it_out,
                  const std::string& st_out) {
    ExperimentConfig cfg = ExperimentConfig::from_json_file(config_path);
    PersonDataset ds = load_csv(input.empty() ? cfg.dataset_path : input, cfg.schema);
    for (const auto& step : cfg.discretize_steps) ds = discretize(ds, step.attr, step.bins);

    ClientKey key = ClientKey::generate();
    Anatomy anatomy = anatomize(ds, l ? l : cfg.l, key, seed);
    write_it_csv(anatomy, it_out);
    write_st_csv(anatomy, st_out);
    std::ofstream kf(key_out);
    if (!kf) throw IoError("cannot write " + key_out);
    kf << key.to_hex() << "\n";
    std::cout << "anatomized " << ds.rows.size() << " rows into " << it_out << " / " << st_out
              << " (key: " << key_out << ")\n";
    return 0;
}

int cmd_serve(const std::string& it_path, const std::string& st_path,
              const std::string& class_attr, bool binary_splits, int leaf_threshold,
              int min_leaf, double prune_fraction, uint64_t prune_seed,
              const std::string& listen, const std::string& transcript_path) {
    Anatomy anatomy = load_anatomy_csv(it_path, st_path);

    Server::Options options;
    options.params.binary_splits = binary_splits;
    options.params.min_leaf_size = min_leaf;
    if (leaf_threshold > 0) options.params.max_leaf_size = leaf_threshold;
    options.prune_fraction = prune_fraction;
    options.prune_seed = prune_seed;

    Server server(std::move(anatomy), class_attr, options);
    size_t leaves = server.train_base();

    auto [host, port] = parse_addr(listen);
    TcpListener listener(host, port);
    std::cout << "serving on " << host << ":" << listener.port() << " (base tree: " << leaves
              << " leaves); Ctrl-C to stop\n";

    std::signal(SIGINT, handle_signal);
    std::signal(SIGTERM, handle_signal);
    listener.serve(server, g_stop);

    std::ostream* out = &std::cout;
    std::ofstream file;
    if (!transcript_path.empty()) {
        file.open(transcript_path);
        if (!file) throw IoError("cannot write " + transcript_path);
        out = &file;
    }
    for (const auto& rec : server.transcript()) {
        *out << rec.ts_ms << ',' << (rec.dir == Direction::In ? "in" : "out") << ','
             << message_type_name(rec.type) << ',' << (rec.leaf_id ? *rec.leaf_id : "-") << ','
             << rec.frame_bytes << '\n';
    }
    return 0;
}

int cmd_predict(const std::string& mode, const std::string& server_addr,
                const std::string& key_path, const std::string& input,
                const std::string& config_path, const std::string& out_path, bool train_cnl,
                double prune_fraction, uint64_t prune_seed) {
    ExperimentConfig cfg = ExperimentConfig::from_json_file(config_path);
    ClientKey key = load_key(key_path);

    // Prediction needs the experiment's view of the schema, including any
    // discretization of the class source column.
    Schema schema = cfg.schema;
    if (!cfg.discretize_steps.empty()) {
        PersonDataset ds = load_experiment_dataset(cfg);
        schema = ds.schema;
    }
    std::vector<Row> tuples = load_tuples(input, schema);

    auto [host, port] = parse_addr(server_addr);
    TcpTransport transport(host, port);
    ClientSession session(schema, key, transport, cfg.params);

    if (mode == "cnl" && train_cnl) session.train_cnl(prune_fraction, prune_seed);

    std::ostream* out = &std::cout;
    std::ofstream file;
    if (!out_path.empty()) {
        file.open(out_path);
        if (!file) throw IoError("cannot write " + out_path);
        out = &file;
    }
    *out << "index,label\n";
    for (size_t i = 0; i < tuples.size(); ++i) {
        std::string label;
        if (mode == "cdtl")
            label = session.predict_cdtl(tuples[i]);
        else if (mode == "cdbsl")
            label = session.predict_cdbsl(tuples[i]);
        else
            label = session.predict_cnl(tuples[i]);
        *out << i << ',' << label << '\n';
    }
    print_counters(std::cerr, session.counters());
    return 0;
}

int cmd_bench(const std::string& config_path, const std::string& out_dir, bool tcp) {
    ExperimentConfig cfg = ExperimentConfig::from_json_file(config_path);
    RunOptions opts;
    opts.use_tcp = tcp;
    MetricsReport report = run_experiment(cfg, opts);
    emit_report(report, out_dir);

    std::cout << "experiment " << cfg.name << ": " << cfg.folds << " folds\n";
    for (Algorithm a : {Algorithm::Cdbsl, Algorithm::Cnl, Algorithm::Cdtl})
        std::cout << "  mean accuracy " << algorithm_name(a) << ": "
                  << report.mean_accuracy(a) << "\n";
    std::vector<double> ets, ms;
    for (const auto& f : report.folds) {
        ets.push_back(f.ets);
        ms.push_back(f.ms_train);
    }
    std::cout << "  mean ets: " << quartiles(ets).mean << "\n"
              << "  mean ms (train denominator): " << quartiles(ms).mean << "\n"
              << "  audit violations: " << report.total_audit_violations << "\n"
              << "  reports in " << out_dir << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Collaborative decision tree learning over anatomized outsourced data"};
    app.require_subcommand(1);

    // gen-data
    std::string gd_dataset, gd_out = "dataset.csv", gd_outdir;
    uint64_t gd_seed = 0;
    bool gd_all = false;
    auto* gen = app.add_subcommand("gen-data", "Write synthetic benchmark datasets as CSV");
    gen->add_option("--dataset", gd_dataset, "vote|australian|autos|adult|sensdriven");
    gen->add_option("--out", gd_out, "output CSV path");
    gen->add_option("--outdir", gd_outdir, "output directory for --all");
    gen->add_option("--seed", gd_seed, "generator seed (0 = builtin default)");
    gen->add_flag("--all", gd_all, "generate every builtin dataset into --outdir");

    // anatomize
    std::string an_config, an_input, an_key_out = "key.hex", an_it = "it.csv", an_st = "st.csv";
    int an_l = 0;
    uint64_t an_seed = 3;
    auto* an = app.add_subcommand("anatomize", "Split a dataset into l-diverse IT/ST partitions");
    an->add_option("--config", an_config, "experiment config (schema source)")->required();
    an->add_option("--input", an_input, "input CSV (defaults to the config's dataset)");
    an->add_option("--l", an_l, "diversity level (defaults to the config's l)");
    an->add_option("--seed", an_seed, "grouping seed");
    an->add_option("--key-out", an_key_out, "where to write the fresh client key (hex)");
    an->add_option("--it-out", an_it, "identifier table output");
    an->add_option("--st-out", an_st, "sensitive table output");

    // serve
    std::string sv_it, sv_st, sv_class, sv_listen = "127.0.0.1:7700", sv_transcript;
    bool sv_binary = false;
    int sv_threshold = 0, sv_min_leaf = 2;
    double sv_prune_fraction = 0.2;
    uint64_t sv_prune_seed = 2;
    auto* sv = app.add_subcommand("serve", "Run the CDBS over anatomized tables");
    sv->add_option("--it", sv_it, "identifier table CSV")->required();
    sv->add_option("--st", sv_st, "sensitive table CSV")->required();
    sv->add_option("--class", sv_class, "class attribute (identifying)")->required();
    sv->add_flag("--binary-splits", sv_binary, "binary categorical tests");
    sv->add_option("--leaf-threshold", sv_threshold, "keep splitting leaves above this size");
    sv->add_option("--min-leaf", sv_min_leaf, "minimum node size for splitting");
    sv->add_option("--prune-fraction", sv_prune_fraction, "shared prune split fraction");
    sv->add_option("--prune-seed", sv_prune_seed, "shared prune split seed");
    sv->add_option("--listen", sv_listen, "host:port to listen on");
    sv->add_option("--transcript", sv_transcript, "transcript dump path (default stdout)");

    // predict
    std::string pr_mode, pr_server = "127.0.0.1:7700", pr_key, pr_input, pr_config, pr_out;
    bool pr_train = false;
    double pr_prune_fraction = 0.2;
    uint64_t pr_prune_seed = 2;
    auto* pr = app.add_subcommand("predict", "Predict labels through a running CDBS");
    pr->add_option("--mode", pr_mode, "cdtl|cdbsl|cnl")
        ->required()
        ->check(CLI::IsMember({"cdtl", "cdbsl", "cnl"}));
    pr->add_option("--server", pr_server, "server address host:port");
    pr->add_option("--key", pr_key, "client key file (hex)")->required();
    pr->add_option("--input", pr_input, "tuples to predict (CSV)")->required();
    pr->add_option("--config", pr_config, "experiment config (schema source)")->required();
    pr->add_option("--out", pr_out, "labels output (default stdout)");
    pr->add_flag("--train", pr_train, "cnl: build and store the encrypted model first");
    pr->add_option("--prune-fraction", pr_prune_fraction, "cnl training prune fraction");
    pr->add_option("--prune-seed", pr_prune_seed, "cnl training prune seed");

    // bench
    std::string be_config, be_out = "bench-out";
    bool be_tcp = false;
    auto* be = app.add_subcommand("bench", "Run the three-algorithm cross-validation benchmark");
    be->add_option("--config", be_config, "experiment config JSON")->required();
    be->add_option("--out", be_out, "output directory");
    be->add_flag("--tcp", be_tcp, "loopback TCP transport instead of in-process");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            if (!gd_all && gd_dataset.empty())
                throw ConfigError("gen-data needs --dataset or --all");
            return cmd_gen_data(gd_dataset, gd_out, gd_outdir, gd_seed, gd_all);
        }
        if (an->parsed())
            return cmd_anatomize(an_config, an_input, an_l, an_seed, an_key_out, an_it, an_st);
        if (sv->parsed())
            return cmd_serve(sv_it, sv_st, sv_class, sv_binary, sv_threshold, sv_min_leaf,
                             sv_prune_fraction, sv_prune_seed, sv_listen, sv_transcript);
        if (pr->parsed())
            return cmd_predict(pr_mode, pr_server, pr_key, pr_input, pr_config, pr_out, pr_train,
                               pr_prune_fraction, pr_prune_seed);
        if (be->parsed()) return cmd_bench(be_config, be_out, be_tcp);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
