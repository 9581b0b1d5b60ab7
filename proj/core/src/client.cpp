#include "anatree/client.hpp"

#include <algorithm>
#include <chrono>
#include <map>

#include "anatree/anatomy.hpp"

namespace anatree {

namespace {

class PhaseTimer {
public:
    explicit PhaseTimer(uint64_t& acc)
        : acc_(acc), start_(std::chrono::steady_clock::now()) {}
    ~PhaseTimer() {
        auto end = std::chrono::steady_clock::now();
        acc_ += std::chrono::duration_cast<std::chrono::nanoseconds>(end - start_).count();
    }

private:
    uint64_t& acc_;
    std::chrono::steady_clock::time_point start_;
};

} // namespace

ClientSession::ClientSession(Schema schema, ClientKey key, Transport& transport,
                             LearnParams params)
    : schema_(std::move(schema)), key_(key), transport_(transport), params_(params) {
    schema_.validate();
    int class_idx = schema_.class_index();
    for (int i : schema_.identifying_indices())
        if (i != class_idx) subtree_allowed_.push_back(i);
    subtree_allowed_.push_back(schema_.sensitive_index());
    std::sort(subtree_allowed_.begin(), subtree_allowed_.end());
}

Instance ClientSession::outbound_instance(const Row& tuple) const {
    // Identifying attributes minus the class; the sensitive value never
    // leaves the client.
    Instance ins;
    int class_idx = schema_.class_index();
    for (int i : schema_.identifying_indices()) {
        if (i == class_idx) continue;
        if (static_cast<size_t>(i) >= tuple.size()) continue;
        const std::string& v = tuple[i];
        if (v.empty() || v == kMissing) continue;
        ins.emplace_back(schema_.attributes[i].name, v);
    }
    return ins;
}

WireMessage ClientSession::request(const WireMessage& msg) {
    WireMessage resp;
    {
        PhaseTimer t(counters_.network_ns);
        resp = transport_.round_trip(msg);
    }
    ++counters_.requests;
    counters_.bytes_sent = transport_.bytes_sent();
    counters_.bytes_received = transport_.bytes_received();
    raise_if_error(resp);
    return resp;
}

DecisionTree ClientSession::decode_tree(const CipherBlob& blob) {
    PhaseTimer t(counters_.crypto_ns);
    Bytes plain = decrypt_blob(key_, blob);
    ++counters_.decrypt_ops;
    return deserialize(plain, schema_.attributes, schema_.class_index());
}

std::vector<Row> ClientSession::true_instances(const LeafPayload& payload) {
    counters_.peak_payload_rows = std::max<uint64_t>(
        counters_.peak_payload_rows, payload.it_rows.size() + payload.st_rows.size());

    std::map<uint64_t, const STRow*> by_seq;
    for (const auto& st : payload.st_rows) by_seq[st.seq] = &st;

    auto ident = schema_.identifying_indices();
    int sidx = schema_.sensitive_index();

    std::vector<Row> rows;
    rows.reserve(payload.it_rows.size());
    {
        PhaseTimer t(counters_.crypto_ns);
        for (const auto& itr : payload.it_rows) {
            uint64_t seq = decrypt_seq(key_, itr.eseq);
            ++counters_.decrypt_ops;
            auto hit = by_seq.find(seq);
            if (hit == by_seq.end() || hit->second->gid != itr.gid)
                throw IntegrityError("no matching sequence number in group " +
                                     std::to_string(itr.gid));
            Row row(schema_.attributes.size());
            for (size_t i = 0; i < ident.size(); ++i) row[ident[i]] = itr.values[i];
            row[sidx] = hit->second->value;
            rows.push_back(std::move(row));
        }
    }
    counters_.peak_tuples_held = std::max<uint64_t>(counters_.peak_tuples_held, rows.size());
    return rows;
}

std::pair<DecisionTree, CipherBlob> ClientSession::refine_leaf(const LeafPayload& payload) {
    std::vector<Row> rows = true_instances(payload);
    ++counters_.refine_calls;

    DecisionTree subtree;
    {
        PhaseTimer t(counters_.learn_ns);
        subtree = learn(rows, schema_.attributes, schema_.class_index(), subtree_allowed_, params_);
        ++counters_.learn_calls;
        counters_.learn_tuples += rows.size();
    }
    CipherBlob blob;
    {
        PhaseTimer t(counters_.crypto_ns);
        blob = encrypt_blob(key_, serialize(subtree));
        ++counters_.encrypt_ops;
    }
    return {std::move(subtree), std::move(blob)};
}

std::string ClientSession::predict_cdtl(const Row& tuple) {
    Row local = tuple;
    local.resize(schema_.attributes.size(), kMissing);
    local[schema_.class_index()] = kMissing; // the class is what gets predicted

    WireMessage resp = request(PredictRequest{outbound_instance(local)});

    if (const auto* enc = std::get_if<RespEncrSubtree>(&resp)) {
        DecisionTree subtree = decode_tree(enc->blob);
        PhaseTimer t(counters_.infer_ns);
        return predict_label(subtree, local);
    }

    const auto* leaf = std::get_if<RespLeafInstances>(&resp);
    if (!leaf) throw ProtocolError("unexpected response to a prediction request");

    if (leaf->payload.it_rows.empty()) {
        // Degenerate leaf with no training tuples: nothing to refine; use
        // the base tree's fallback majority.
        WireMessage fallback = request(PredictServerOnly{outbound_instance(local)});
        if (const auto* lbl = std::get_if<RespLabel>(&fallback)) return lbl->label;
        throw ProtocolError("unexpected response to a fallback prediction");
    }

    auto [subtree, blob] = refine_leaf(leaf->payload);
    WireMessage ack = request(InstallSubtree{leaf->leaf_id, blob});
    if (!std::holds_alternative<Ack>(ack))
        throw ProtocolError("subtree install was not acknowledged");

    PhaseTimer t(counters_.infer_ns);
    return predict_label(subtree, local);
}

std::string ClientSession::predict_cdbsl(const Row& tuple) {
    Row local = tuple;
    local.resize(schema_.attributes.size(), kMissing);
    local[schema_.class_index()] = kMissing;
    WireMessage resp = request(PredictServerOnly{outbound_instance(local)});
    if (const auto* lbl = std::get_if<RespLabel>(&resp)) return lbl->label;
    throw ProtocolError("unexpected response to a prediction request");
}

std::string ClientSession::train_cnl(double prune_fraction, uint64_t prune_seed) {
    WireMessage resp = request(FetchAll{});
    const auto* tables = std::get_if<RespTables>(&resp);
    if (!tables) throw ProtocolError("unexpected response to a table fetch");

    counters_.peak_payload_rows = std::max<uint64_t>(counters_.peak_payload_rows,
                                                     tables->it.size() + tables->st.size());

    Anatomy anatomy;
    for (int i : schema_.identifying_indices()) anatomy.it_attrs.push_back(schema_.attributes[i]);
    anatomy.sensitive_name = schema_.sensitive;
    anatomy.it = tables->it;
    anatomy.st = tables->st;

    PersonDataset ds;
    {
        PhaseTimer t(counters_.crypto_ns);
        ds = reconstruct(anatomy, key_, schema_);
        counters_.decrypt_ops += anatomy.it.size();
    }
    counters_.peak_tuples_held = std::max<uint64_t>(counters_.peak_tuples_held, ds.rows.size());

    auto split = split_prune_set(ds, prune_fraction, prune_seed);

    std::vector<int> allowed;
    for (size_t i = 0; i < schema_.attributes.size(); ++i)
        if (static_cast<int>(i) != schema_.class_index()) allowed.push_back(static_cast<int>(i));

    DecisionTree tree;
    {
        PhaseTimer t(counters_.learn_ns);
        tree = learn(split.grow.rows, schema_.attributes, schema_.class_index(), allowed, params_);
        ++counters_.learn_calls;
        counters_.learn_tuples += split.grow.rows.size();
        if (!split.prune.rows.empty()) prune_reduced_error(tree, split.prune.rows);
    }

    CipherBlob blob;
    {
        PhaseTimer t(counters_.crypto_ns);
        blob = encrypt_blob(key_, serialize(tree));
        ++counters_.encrypt_ops;
    }
    WireMessage ack = request(StoreEncrTree{blob});
    const auto* a = std::get_if<Ack>(&ack);
    if (!a) throw ProtocolError("model store was not acknowledged");
    // The plaintext model goes out of scope here; every later prediction
    // re-fetches the encrypted copy.
    return a->info;
}

std::string ClientSession::predict_cnl(const Row& tuple) {
    Row local = tuple;
    local.resize(schema_.attributes.size(), kMissing);
    local[schema_.class_index()] = kMissing;

    WireMessage resp = request(FetchEncrTree{});
    const auto* enc = std::get_if<RespEncrTree>(&resp);
    if (!enc) throw ProtocolError("unexpected response to a model fetch");

    DecisionTree tree = decode_tree(enc->blob);
    PhaseTimer t(counters_.infer_ns);
    return predict_label(tree, local);
}

} // namespace anatree
