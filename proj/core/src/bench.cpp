#include "anatree/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "anatree/datagen.hpp"
#include "anatree/transport.hpp"

namespace anatree {

using nlohmann::json;

const char* algorithm_name(Algorithm a) {
    switch (a) {
        case Algorithm::Cdbsl: return "cdbsl";
        case Algorithm::Cnl: return "cnl";
        case Algorithm::Cdtl: return "cdtl";
    }
    return "?";
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str(), path);
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text,
                                                  const std::string& origin) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(origin + ": " + e.what());
    }
    try {
        ExperimentConfig cfg;
        cfg.name = j.value("name", "experiment");
        cfg.dataset_path = j.value("dataset", "");
        cfg.l = j.value("l", 2);
        cfg.folds = j.value("folds", 10);
        cfg.prune_fraction = j.value("prune_fraction", 0.2);
        cfg.params.binary_splits = j.value("binary_splits", false);
        cfg.params.min_leaf_size = j.value("min_leaf_size", 2);
        if (j.contains("leaf_threshold") && !j["leaf_threshold"].is_null())
            cfg.params.max_leaf_size = j["leaf_threshold"].get<int>();
        if (j.contains("seeds")) {
            cfg.fold_seed = j["seeds"].value("folds", 1);
            cfg.prune_seed = j["seeds"].value("prune", 2);
            cfg.anatomy_seed = j["seeds"].value("anatomy", 3);
        }

        Schema schema;
        for (const auto& a : j.at("attributes")) {
            Attribute attr;
            attr.name = a.at("name").get<std::string>();
            std::string kind = a.value("kind", "categorical");
            if (kind == "numeric")
                attr.kind = AttrKind::Numeric;
            else if (kind == "categorical")
                attr.kind = AttrKind::Categorical;
            else
                throw ConfigError("unknown attribute kind '" + kind + "'");
            if (a.contains("domain"))
                attr.domain = a["domain"].get<std::vector<std::string>>();
            schema.attributes.push_back(std::move(attr));
        }
        schema.sensitive = j.at("sensitive_attr").get<std::string>();
        schema.class_attr = j.at("class_attr").get<std::string>();
        if (j.contains("identifying")) {
            schema.identifying = j["identifying"].get<std::vector<std::string>>();
        } else {
            for (const auto& a : schema.attributes)
                if (a.name != schema.sensitive) schema.identifying.push_back(a.name);
        }
        schema.validate();
        cfg.schema = std::move(schema);

        if (j.contains("discretize"))
            for (const auto& d : j["discretize"])
                cfg.discretize_steps.push_back(
                    {d.at("attr").get<std::string>(), d.at("bins").get<int>()});

        if (cfg.l < 1) throw ConfigError("l must be >= 1");
        if (cfg.folds < 2) throw ConfigError("folds must be >= 2");
        return cfg;
    } catch (const json::exception& e) {
        throw ConfigError(origin + ": " + e.what());
    }
}

PersonDataset load_experiment_dataset(const ExperimentConfig& cfg) {
    if (cfg.dataset_path.empty()) throw ConfigError("config has no dataset path");
    PersonDataset ds = load_csv(cfg.dataset_path, cfg.schema);
    for (const auto& step : cfg.discretize_steps) ds = discretize(ds, step.attr, step.bins);
    return ds;
}

double MetricsReport::mean_accuracy(Algorithm a) const {
    if (folds.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& f : folds) sum += f.result(a).accuracy;
    return sum / folds.size();
}

namespace {

std::string most_frequent_sensitive(const PersonDataset& ds) {
    int sidx = ds.schema.sensitive_index();
    std::map<std::string, size_t> freq;
    for (const auto& row : ds.rows) ++freq[row[sidx]];
    std::string best;
    size_t best_n = 0;
    for (const auto& [v, f] : freq)
        if (f > best_n) {
            best = v;
            best_n = f;
        }
    return best;
}

// Runs one algorithm for one fold against a fresh server, in-process or
// over loopback TCP.
struct AlgoRun {
    double accuracy = 0.0;
    CostCounters cost;
};

AlgoRun run_algorithm(Algorithm algo, Server& server, const ExperimentConfig& cfg,
                      const PersonDataset& test, const ClientKey& key, bool use_tcp) {
    std::unique_ptr<TcpListener> listener;
    std::atomic<bool> stop{false};
    std::thread server_thread;
    std::unique_ptr<Transport> transport;

    if (use_tcp) {
        listener = std::make_unique<TcpListener>("127.0.0.1", 0);
        server_thread = std::thread([&] { listener->serve(server, stop); });
        transport = std::make_unique<TcpTransport>("127.0.0.1", listener->port());
    } else {
        transport = std::make_unique<LocalTransport>(server);
    }

    AlgoRun run;
    {
        ClientSession session(test.schema, key, *transport, cfg.params);
        if (algo == Algorithm::Cnl) session.train_cnl(cfg.prune_fraction, cfg.prune_seed);

        int class_idx = test.schema.class_index();
        size_t correct = 0;
        for (const auto& row : test.rows) {
            std::string label;
            switch (algo) {
                case Algorithm::Cdbsl: label = session.predict_cdbsl(row); break;
                case Algorithm::Cnl: label = session.predict_cnl(row); break;
                case Algorithm::Cdtl: label = session.predict_cdtl(row); break;
            }
            if (label == row[class_idx]) ++correct;
        }
        run.accuracy = test.rows.empty() ? 0.0 : double(correct) / double(test.rows.size());
        run.cost = session.counters();
    }

    if (use_tcp) {
        transport.reset(); // closes the client socket
        stop = true;
        server_thread.join();
    }
    return run;
}

} // namespace

MetricsReport run_experiment(const ExperimentConfig& cfg, const PersonDataset& ds,
                             const RunOptions& opts) {
    if (!check_eligibility(ds, cfg.l))
        throw EligibilityError("dataset not eligible for l=" + std::to_string(cfg.l) +
                               ": sensitive value '" + most_frequent_sensitive(ds) +
                               "' is too frequent");

    MetricsReport report;
    report.config = cfg;

    auto folds = stratified_folds(ds, cfg.folds, cfg.fold_seed);
    for (int f = 0; f < cfg.folds; ++f) {
        const PersonDataset& train = folds[f].train;
        const PersonDataset& test = folds[f].test;

        ClientKey key = ClientKey::generate();
        Anatomy anatomy = anatomize(train, cfg.l, key, cfg.anatomy_seed + f);

        Server::Options so{cfg.params, cfg.prune_fraction, cfg.prune_seed};

        FoldResult fr;
        fr.fold = f;
        fr.train_rows = train.rows.size();
        fr.test_rows = test.rows.size();

        for (Algorithm algo : {Algorithm::Cdbsl, Algorithm::Cnl, Algorithm::Cdtl}) {
            Server server(anatomy, ds.schema.class_attr, so);
            if (algo != Algorithm::Cnl) {
                size_t leaves = server.train_base();
                if (algo == Algorithm::Cdtl) {
                    fr.bdt_leaves = leaves;
                    fr.biggest_leaf = server.biggest_leaf_size();
                    fr.grow_rows = server.grow_size();
                }
            }
            AlgoRun run = run_algorithm(algo, server, cfg, test, key, opts.use_tcp);

            AlgoFoldResult& ar = fr.algos[static_cast<int>(algo)];
            ar.algo = algo;
            ar.accuracy = run.accuracy;
            ar.cost = run.cost;

            if (opts.run_audit) {
                AuditReport audit =
                    audit_transcript(server.transcript(), server.dump_state(), key, ds.schema);
                ar.audit_violations = audit.violations.size();
                report.total_audit_violations += audit.violations.size();
                std::ostringstream line;
                line << "fold=" << f << " algo=" << algorithm_name(algo)
                     << " records=" << audit.records_checked << " blobs=" << audit.blobs_checked
                     << " violations=" << audit.violations.size();
                report.audit_lines.push_back(line.str());
                for (const auto& v : audit.violations)
                    report.audit_lines.push_back("  VIOLATION: " + v);
            }
        }

        fr.ms_train = fr.train_rows ? double(fr.biggest_leaf) / double(fr.train_rows) : 0.0;
        fr.ms_grow = fr.grow_rows ? double(fr.biggest_leaf) / double(fr.grow_rows) : 0.0;
        uint64_t cdtl_ns = fr.result(Algorithm::Cdtl).cost.client_total_ns();
        uint64_t cnl_ns = fr.result(Algorithm::Cnl).cost.client_total_ns();
        fr.ets = cnl_ns ? double(cdtl_ns) / double(cnl_ns) : 0.0;

        report.folds.push_back(std::move(fr));
    }
    return report;
}

MetricsReport run_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
    return run_experiment(cfg, load_experiment_dataset(cfg), opts);
}

AuditReport audit_transcript(const Transcript& transcript, const ServerStateDump& state,
                             const ClientKey& key, const Schema& schema) {
    AuditReport report;
    const std::string key_hex = key.to_hex();

    auto scan_string = [&](const std::string& s, const std::string& where) {
        if (!key_hex.empty() && s.find(key_hex) != std::string::npos)
            report.violations.push_back("client key material in " + where);
    };

    for (size_t i = 0; i < transcript.size(); ++i) {
        const TranscriptRecord& rec = transcript[i];
        ++report.records_checked;
        std::string where = "record " + std::to_string(i) + " (" +
                            std::string(message_type_name(rec.type)) + ")";

        std::set<uint32_t> it_gids;
        for (const auto& it : rec.view.it_rows) {
            it_gids.insert(it.gid);
            if (it.plain_seq)
                report.violations.push_back("plaintext sequence number on identifier row in " +
                                            where);
            if (it.plain_sensitive)
                report.violations.push_back("sensitive value attached to identifier row in " +
                                            where);
            for (const auto& [name, value] : it.values) {
                if (name == schema.sensitive)
                    report.violations.push_back("sensitive attribute field on identifier row in " +
                                                where);
                scan_string(value, where);
            }
        }
        for (const auto& [name, value] : rec.view.fields) {
            if (name == schema.sensitive)
                report.violations.push_back("sensitive attribute '" + name + "' in " + where);
            scan_string(value, where);
        }

        // Group-level join ambiguity: every group exposed alongside
        // identifier rows must admit at least two sensitive candidates.
        if (!rec.view.it_rows.empty() && !rec.view.st_rows.empty()) {
            std::map<uint32_t, std::set<std::string>> candidates;
            for (const auto& st : rec.view.st_rows) candidates[st.gid].insert(st.value);
            for (uint32_t gid : it_gids) {
                auto hit = candidates.find(gid);
                if (hit == candidates.end() || hit->second.size() < 2)
                    report.violations.push_back("sensitive value uniquely determined for gid " +
                                                std::to_string(gid) + " in " + where);
            }
        }
    }

    // Stored ciphertext must be opaque without the key and valid with it.
    auto check_blob = [&](const CipherBlob& blob, const std::string& where) {
        ++report.blobs_checked;
        bool parsed_raw = false;
        try {
            deserialize(blob.ciphertext, schema.attributes, schema.class_index());
            parsed_raw = true;
        } catch (const std::exception&) {
        }
        if (parsed_raw)
            report.violations.push_back("stored blob parses as a plaintext tree in " + where);

        ClientKey wrong = key;
        wrong.bytes[0] ^= 0xff;
        bool wrong_key_ok = false;
        try {
            decrypt_blob(wrong, blob);
            wrong_key_ok = true;
        } catch (const AuthenticationError&) {
        }
        if (wrong_key_ok)
            report.violations.push_back("stored blob decrypts under a different key in " + where);

        try {
            Bytes plain = decrypt_blob(key, blob);
            deserialize(plain, schema.attributes, schema.class_index());
        } catch (const std::exception& e) {
            report.violations.push_back("stored blob is not a valid encrypted model in " + where +
                                        ": " + e.what());
        }
    };

    for (const auto& rec : transcript)
        for (const auto& b : rec.view.blobs)
            if (b.blob) check_blob(*b.blob, "uploaded blob");
    for (const auto& [leaf_id, blob] : state.subtrees) check_blob(blob, "subtree store (" + leaf_id + ")");
    if (state.model_blob) check_blob(*state.model_blob, "model store");

    return report;
}

Quartiles quartiles(std::vector<double> values) {
    Quartiles q;
    if (values.empty()) return q;
    std::sort(values.begin(), values.end());
    auto interp = [&](double p) {
        double h = p * double(values.size() - 1);
        size_t lo = static_cast<size_t>(h);
        double frac = h - double(lo);
        if (lo + 1 >= values.size()) return values.back();
        return values[lo] + frac * (values[lo + 1] - values[lo]);
    };
    q.min = values.front();
    q.q1 = interp(0.25);
    q.median = interp(0.5);
    q.q3 = interp(0.75);
    q.max = values.back();
    double sum = 0;
    for (double v : values) sum += v;
    q.mean = sum / double(values.size());
    return q;
}

namespace {

void write_summary_row(std::ostream& out, const std::string& dataset, const std::string& algo,
                       const std::string& metric, const std::vector<double>& values) {
    Quartiles q = quartiles(values);
    out << dataset << ',' << algo << ',' << metric << ',' << q.min << ',' << q.q1 << ','
        << q.median << ',' << q.q3 << ',' << q.max << ',' << q.mean << '\n';
}

} // namespace

void emit_report(const MetricsReport& report, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    {
        std::ofstream out(fs::path(out_dir) / "per_fold.csv");
        if (!out) throw IoError("cannot write per_fold.csv in " + out_dir);
        out << "dataset,fold,algorithm,accuracy,client_total_ns,learn_ns,infer_ns,crypto_ns,"
               "network_ns,bytes_sent,bytes_received,peak_payload_rows,peak_tuples_held,"
               "learn_calls,learn_tuples,encrypt_ops,decrypt_ops,requests,audit_violations,"
               "ets,ms_train,ms_grow\n";
        for (const auto& f : report.folds) {
            for (Algorithm a : {Algorithm::Cdbsl, Algorithm::Cnl, Algorithm::Cdtl}) {
                const AlgoFoldResult& r = f.result(a);
                const CostCounters& c = r.cost;
                out << report.config.name << ',' << f.fold << ',' << algorithm_name(a) << ','
                    << r.accuracy << ',' << c.client_total_ns() << ',' << c.learn_ns << ','
                    << c.infer_ns << ',' << c.crypto_ns << ',' << c.network_ns << ','
                    << c.bytes_sent << ',' << c.bytes_received << ',' << c.peak_payload_rows << ','
                    << c.peak_tuples_held << ',' << c.learn_calls << ',' << c.learn_tuples << ','
                    << c.encrypt_ops << ',' << c.decrypt_ops << ',' << c.requests << ','
                    << r.audit_violations << ',' << f.ets << ',' << f.ms_train << ','
                    << f.ms_grow << '\n';
            }
        }
    }

    {
        std::ofstream out(fs::path(out_dir) / "summary.csv");
        if (!out) throw IoError("cannot write summary.csv in " + out_dir);
        out << "dataset,algorithm,metric,min,q1,median,q3,max,mean\n";
        for (Algorithm a : {Algorithm::Cdbsl, Algorithm::Cnl, Algorithm::Cdtl}) {
            auto collect = [&](auto getter) {
                std::vector<double> v;
                for (const auto& f : report.folds) v.push_back(getter(f.result(a)));
                return v;
            };
            write_summary_row(out, report.config.name, algorithm_name(a), "accuracy",
                              collect([](const AlgoFoldResult& r) { return r.accuracy; }));
            write_summary_row(out, report.config.name, algorithm_name(a), "client_total_ns",
                              collect([](const AlgoFoldResult& r) {
                                  return double(r.cost.client_total_ns());
                              }));
            write_summary_row(out, report.config.name, algorithm_name(a), "bytes_sent",
                              collect([](const AlgoFoldResult& r) {
                                  return double(r.cost.bytes_sent);
                              }));
            write_summary_row(out, report.config.name, algorithm_name(a), "bytes_received",
                              collect([](const AlgoFoldResult& r) {
                                  return double(r.cost.bytes_received);
                              }));
            write_summary_row(out, report.config.name, algorithm_name(a), "peak_tuples_held",
                              collect([](const AlgoFoldResult& r) {
                                  return double(r.cost.peak_tuples_held);
                              }));
        }
        std::vector<double> ets, ms_train, ms_grow;
        for (const auto& f : report.folds) {
            ets.push_back(f.ets);
            ms_train.push_back(f.ms_train);
            ms_grow.push_back(f.ms_grow);
        }
        write_summary_row(out, report.config.name, "fold", "ets", ets);
        write_summary_row(out, report.config.name, "fold", "ms_train", ms_train);
        write_summary_row(out, report.config.name, "fold", "ms_grow", ms_grow);
    }

    {
        std::ofstream out(fs::path(out_dir) / "transcript_audit.txt");
        if (!out) throw IoError("cannot write transcript_audit.txt in " + out_dir);
        for (const auto& line : report.audit_lines) out << line << '\n';
        out << "TOTAL violations=" << report.total_audit_violations << '\n';
    }
}

} // namespace anatree
