#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "anatree/crypto.hpp"
#include "anatree/dataset.hpp"
#include "anatree/dtree.hpp"
#include "anatree/protocol.hpp"
#include "anatree/transport.hpp"

namespace anatree {

// Per-session cost accounting. Wall-clock phases are measured around
// client-side work only; network time is the transport round trip.
struct CostCounters {
    uint64_t learn_ns = 0;
    uint64_t infer_ns = 0;
    uint64_t crypto_ns = 0;
    uint64_t network_ns = 0;

    uint64_t bytes_sent = 0;
    uint64_t bytes_received = 0;

    uint64_t encrypt_ops = 0;
    uint64_t decrypt_ops = 0;
    uint64_t learn_calls = 0;
    uint64_t learn_tuples = 0;      // rows handed to learn()
    uint64_t refine_calls = 0;
    uint64_t peak_payload_rows = 0; // max IT+ST rows held from one payload
    uint64_t peak_tuples_held = 0;  // max reconstructed person tuples held

    uint64_t requests = 0;

    uint64_t client_total_ns() const { return learn_ns + infer_ns + crypto_ns + network_ns; }
};

// The data owner: issues predictions, reconstructs true leaf tuples from
// group-level joins, learns and encrypts subtree refinements, and implements
// the client-naive baseline. Holds the only copy of the key.
class ClientSession {
public:
    ClientSession(Schema schema, ClientKey key, Transport& transport, LearnParams params);

    // Collaborative path: one request per prediction; an unrefined leaf
    // triggers reconstruction, subtree learning, and exactly one
    // InstallSubtree. The tuple's sensitive value never leaves the client;
    // it is only used to route through the decrypted subtree locally.
    std::string predict_cdtl(const Row& tuple);

    // Server-only path: strip the sensitive value, let the CDBS run its base
    // tree. No learning, no decryption.
    std::string predict_cdbsl(const Row& tuple);

    // Client-naive training: fetch both tables, rejoin, learn on the grow
    // part of the shared split, prune, encrypt, store at the server. The
    // plaintext model is discarded. Returns the stored model id.
    std::string train_cnl(double prune_fraction, uint64_t prune_seed);

    // Client-naive inference: fetch and decrypt the stored model on every
    // call (limited client storage: nothing is cached).
    std::string predict_cnl(const Row& tuple);

    const CostCounters& counters() const { return counters_; }
    void reset_counters() { counters_ = CostCounters{}; }

    // Reconstructs the true rows of a leaf payload and learns the refinement
    // subtree over identifying attributes plus the sensitive attribute.
    // Exposed for tests; predict_cdtl drives it.
    std::pair<DecisionTree, CipherBlob> refine_leaf(const LeafPayload& payload);

private:
    Instance outbound_instance(const Row& tuple) const;
    WireMessage request(const WireMessage& msg);
    std::vector<Row> true_instances(const LeafPayload& payload);
    DecisionTree decode_tree(const CipherBlob& blob);

    Schema schema_;
    ClientKey key_;
    Transport& transport_;
    LearnParams params_;
    std::vector<int> subtree_allowed_; // identifying minus class, plus sensitive
    CostCounters counters_;
};

} // namespace anatree
