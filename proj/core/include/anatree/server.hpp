#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "anatree/anatomy.hpp"
#include "anatree/dtree.hpp"
#include "anatree/protocol.hpp"

namespace anatree {

// Structured, audit-oriented rendering of what the server saw in one
// message. The privacy audit scans these views, so they keep exactly the
// plaintext the server could observe: identifying values, gids, sensitive
// values at group granularity, opaque ciphertext sizes. A well-formed
// message never has plain_seq or a sensitive field on an IT row; the fields
// exist so that the audit detector scans for real content rather than
// trusting the type system.
struct ItRowView {
    std::vector<std::pair<std::string, std::string>> values; // (attr, value)
    uint32_t gid = 0;
    size_t eseq_bytes = 0;
    std::optional<uint64_t> plain_seq;
    std::optional<std::string> plain_sensitive;
};

struct StRowView {
    uint64_t seq = 0;
    uint32_t gid = 0;
    std::string value;
};

struct BlobView {
    size_t size = 0;
    // Ciphertext-bearing uploads (InstallSubtree, StoreEncrTree) keep the
    // blob so the audit can attempt to parse it without the key. Download
    // echoes record size only.
    std::optional<CipherBlob> blob;
};

struct AuditView {
    std::vector<ItRowView> it_rows;
    std::vector<StRowView> st_rows;
    std::vector<std::pair<std::string, std::string>> fields; // labels, instance values
    std::vector<BlobView> blobs;
};

enum class Direction : uint8_t { In, Out };

struct TranscriptRecord {
    int64_t ts_ms = 0;
    Direction dir = Direction::In;
    MsgType type = MsgType::Ack;
    std::optional<std::string> leaf_id;
    size_t frame_bytes = 0;
    AuditView view;
};

using Transcript = std::vector<TranscriptRecord>;

AuditView build_audit_view(const WireMessage& msg);

// Snapshot of server-held material for the audit: every stored ciphertext.
struct ServerStateDump {
    std::vector<std::pair<std::string, CipherBlob>> subtrees; // leaf_id -> blob
    std::optional<CipherBlob> model_blob;                     // stored cnl tree
};

// The CDBS. Holds the anatomized partitions, learns and serves the base
// decision tree over identifying attributes, answers the group-level join
// for unrefined leaves, and stores client-encrypted subtree refinements and
// models. Requests are serialized at the handling boundary.
class Server {
public:
    struct Options {
        LearnParams params;
        double prune_fraction = 0.2;
        uint64_t prune_seed = 0;
    };

    Server(Anatomy anatomy, std::string class_attr, Options options);

    // Learns the base tree on the grow portion of the IT rows and prunes it
    // with the shared prune portion (both derived from split_indices on the
    // stored row order). Assigns stable leaf ids. Returns the leaf count.
    size_t train_base();

    // Protocol entry point; records the request and the response in the
    // transcript.
    WireMessage handle(const WireMessage& request);

    // Operations behind handle(), also callable directly.
    WireMessage find_bdt_leaf(const Instance& instance);
    LeafPayload join_tables(const std::string& leaf_id) const;
    void install_subtree(const std::string& leaf_id, CipherBlob blob);
    std::string predict_server_only(const Instance& instance) const;
    RespTables export_all() const;

    bool trained() const { return tree_.root != nullptr; }
    const DecisionTree& base_tree() const { return tree_; }
    size_t biggest_leaf_size() const;
    size_t grow_size() const { return grow_indices_.size(); }
    size_t train_size() const { return anatomy_.it.size(); }

    const Transcript& transcript() const { return transcript_; }
    ServerStateDump dump_state() const;

private:
    WireMessage dispatch(const WireMessage& request);
    Row instance_to_row(const Instance& instance) const;
    void record(Direction dir, const WireMessage& msg, size_t frame_bytes);

    Anatomy anatomy_;
    std::string class_attr_;
    Options options_;

    DecisionTree tree_;
    std::vector<size_t> grow_indices_; // IT indices the tree was grown from
    std::map<std::string, const TreeNode*> leaf_by_id_;
    std::map<const TreeNode*, std::string> id_by_leaf_;
    std::map<std::string, CipherBlob> subtree_store_;
    std::optional<CipherBlob> model_blob_;

    Transcript transcript_;
    mutable std::mutex mutex_;
};

} // namespace anatree
