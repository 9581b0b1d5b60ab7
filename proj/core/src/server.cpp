#include "anatree/server.hpp"

#include <algorithm>
#include <chrono>
#include <set>

namespace anatree {

namespace {

int64_t now_ms() {
    using namespace std::chrono;
    return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

std::optional<std::string> leaf_id_of(const WireMessage& msg) {
    if (const auto* m = std::get_if<RespEncrSubtree>(&msg)) return m->leaf_id;
    if (const auto* m = std::get_if<RespLeafInstances>(&msg)) return m->leaf_id;
    if (const auto* m = std::get_if<InstallSubtree>(&msg)) return m->leaf_id;
    return std::nullopt;
}

ItRowView make_it_view(const ITRow& row, const std::vector<std::string>& names) {
    ItRowView v;
    for (size_t i = 0; i < row.values.size(); ++i) {
        std::string name = i < names.size() ? names[i] : "col" + std::to_string(i);
        v.values.emplace_back(std::move(name), row.values[i]);
    }
    v.gid = row.gid;
    v.eseq_bytes = row.eseq.encode().size();
    return v;
}

AuditView view_of(const WireMessage& msg, const std::vector<std::string>& it_names) {
    AuditView view;
    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, PredictRequest> ||
                          std::is_same_v<T, PredictServerOnly>) {
                view.fields = m.instance;
            } else if constexpr (std::is_same_v<T, RespEncrSubtree>) {
                view.blobs.push_back({m.blob.encode().size(), std::nullopt});
            } else if constexpr (std::is_same_v<T, RespLeafInstances>) {
                for (const auto& r : m.payload.it_rows) view.it_rows.push_back(make_it_view(r, it_names));
                for (const auto& r : m.payload.st_rows) view.st_rows.push_back({r.seq, r.gid, r.value});
            } else if constexpr (std::is_same_v<T, InstallSubtree> ||
                                 std::is_same_v<T, StoreEncrTree>) {
                view.blobs.push_back({m.blob.encode().size(), m.blob});
            } else if constexpr (std::is_same_v<T, Ack>) {
                if (!m.info.empty()) view.fields.emplace_back("info", m.info);
            } else if constexpr (std::is_same_v<T, RespLabel>) {
                view.fields.emplace_back("label", m.label);
            } else if constexpr (std::is_same_v<T, RespTables>) {
                for (const auto& r : m.it) view.it_rows.push_back(make_it_view(r, it_names));
                for (const auto& r : m.st) view.st_rows.push_back({r.seq, r.gid, r.value});
            } else if constexpr (std::is_same_v<T, RespEncrTree>) {
                view.blobs.push_back({m.blob.encode().size(), std::nullopt});
            } else if constexpr (std::is_same_v<T, WireError>) {
                view.fields.emplace_back("error", m.what);
            }
        },
        msg);
    return view;
}

} // namespace

AuditView build_audit_view(const WireMessage& msg) { return view_of(msg, {}); }

Server::Server(Anatomy anatomy, std::string class_attr, Options options)
    : anatomy_(std::move(anatomy)), class_attr_(std::move(class_attr)), options_(options) {
    bool found = false;
    for (const auto& a : anatomy_.it_attrs) found |= (a.name == class_attr_);
    if (!found)
        throw SchemaError("class attribute '" + class_attr_ +
                          "' is not an identifier table attribute");
    if (class_attr_ == anatomy_.sensitive_name)
        throw SchemaError("class attribute cannot be the sensitive attribute");
}

size_t Server::train_base() {
    std::lock_guard lock(mutex_);
    if (anatomy_.it.empty()) throw EmptyInputError("identifier table is empty");

    auto split = split_indices(anatomy_.it.size(), options_.prune_fraction, options_.prune_seed);
    grow_indices_ = split.grow;

    std::vector<Row> grow_rows, prune_rows;
    grow_rows.reserve(split.grow.size());
    for (size_t i : split.grow) grow_rows.push_back(anatomy_.it[i].values);
    prune_rows.reserve(split.prune.size());
    for (size_t i : split.prune) prune_rows.push_back(anatomy_.it[i].values);

    int class_idx = -1;
    std::vector<int> allowed;
    for (size_t i = 0; i < anatomy_.it_attrs.size(); ++i) {
        if (anatomy_.it_attrs[i].name == class_attr_)
            class_idx = static_cast<int>(i);
        else
            allowed.push_back(static_cast<int>(i));
    }

    // GID and ESEQ are not part of the learning rows at all; the base tree
    // sees identifying values only.
    tree_ = learn(grow_rows, anatomy_.it_attrs, class_idx, allowed, options_.params);
    if (!prune_rows.empty()) prune_reduced_error(tree_, prune_rows);

    leaf_by_id_.clear();
    id_by_leaf_.clear();
    size_t leaves = 0;
    for_each_node(*tree_.root, [&](const TreeNode& node, const std::string& path) {
        if (!node.is_leaf()) return;
        std::string id = path.empty() ? "root" : path;
        leaf_by_id_[id] = &node;
        id_by_leaf_[&node] = id;
        ++leaves;
    });
    return leaves;
}

Row Server::instance_to_row(const Instance& instance) const {
    Row row(anatomy_.it_attrs.size(), kMissing);
    for (const auto& [name, value] : instance) {
        bool found = false;
        for (size_t i = 0; i < anatomy_.it_attrs.size(); ++i) {
            if (anatomy_.it_attrs[i].name == name) {
                row[i] = value;
                found = true;
                break;
            }
        }
        if (!found) throw ProtocolError("instance carries unknown attribute '" + name + "'");
    }
    return row;
}

WireMessage Server::find_bdt_leaf(const Instance& instance) {
    if (!trained()) throw ProtocolError("base tree not trained");
    const TreeNode& leaf = find_leaf(tree_, instance_to_row(instance));
    const std::string& id = id_by_leaf_.at(&leaf);
    auto stored = subtree_store_.find(id);
    if (stored != subtree_store_.end()) return RespEncrSubtree{id, stored->second};
    return RespLeafInstances{id, join_tables(id)};
}

LeafPayload Server::join_tables(const std::string& leaf_id) const {
    auto it = leaf_by_id_.find(leaf_id);
    if (it == leaf_by_id_.end()) throw ProtocolError("unknown leaf id '" + leaf_id + "'");
    const TreeNode* leaf = it->second;

    LeafPayload payload;
    std::set<uint32_t> gids;
    for (uint32_t member : leaf->members) {
        const ITRow& row = anatomy_.it[grow_indices_[member]];
        payload.it_rows.push_back(row);
        gids.insert(row.gid);
    }
    for (const auto& st : anatomy_.st)
        if (gids.count(st.gid)) payload.st_rows.push_back(st);
    return payload;
}

void Server::install_subtree(const std::string& leaf_id, CipherBlob blob) {
    if (!leaf_by_id_.count(leaf_id)) throw ProtocolError("unknown leaf id '" + leaf_id + "'");
    subtree_store_[leaf_id] = std::move(blob); // last writer wins
}

std::string Server::predict_server_only(const Instance& instance) const {
    if (!trained()) throw ProtocolError("base tree not trained");
    return predict_label(tree_, instance_to_row(instance));
}

RespTables Server::export_all() const { return RespTables{anatomy_.it, anatomy_.st}; }

size_t Server::biggest_leaf_size() const {
    size_t biggest = 0;
    if (!tree_.root) return 0;
    for_each_node(*tree_.root, [&](const TreeNode& node, const std::string&) {
        if (node.is_leaf()) biggest = std::max(biggest, node.members.size());
    });
    return biggest;
}

void Server::record(Direction dir, const WireMessage& msg, size_t frame_bytes) {
    TranscriptRecord rec;
    rec.ts_ms = now_ms();
    rec.dir = dir;
    rec.type = message_type(msg);
    rec.leaf_id = leaf_id_of(msg);
    rec.frame_bytes = frame_bytes;
    std::vector<std::string> names;
    for (const auto& a : anatomy_.it_attrs) names.push_back(a.name);
    rec.view = view_of(msg, names);
    transcript_.push_back(std::move(rec));
}

WireMessage Server::dispatch(const WireMessage& request) {
    return std::visit(
        [&](const auto& m) -> WireMessage {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, PredictRequest>) {
                return find_bdt_leaf(m.instance);
            } else if constexpr (std::is_same_v<T, InstallSubtree>) {
                install_subtree(m.leaf_id, m.blob);
                return Ack{m.leaf_id};
            } else if constexpr (std::is_same_v<T, PredictServerOnly>) {
                return RespLabel{predict_server_only(m.instance)};
            } else if constexpr (std::is_same_v<T, FetchAll>) {
                return export_all();
            } else if constexpr (std::is_same_v<T, FetchEncrTree>) {
                if (!model_blob_) throw ProtocolError("no stored model");
                return RespEncrTree{*model_blob_};
            } else if constexpr (std::is_same_v<T, StoreEncrTree>) {
                model_blob_ = m.blob;
                return Ack{"model-0"};
            } else {
                throw ProtocolError(std::string("unexpected message type ") +
                                    message_type_name(message_type(request)));
            }
        },
        request);
}

WireMessage Server::handle(const WireMessage& request) {
    std::lock_guard lock(mutex_);
    record(Direction::In, request, frame(request).size());
    WireMessage response;
    try {
        response = dispatch(request);
    } catch (const ProtocolError& e) {
        response = WireError{static_cast<uint8_t>(WireErrorCode::Protocol), e.what()};
    } catch (const EmptyInputError& e) {
        response = WireError{static_cast<uint8_t>(WireErrorCode::EmptyInput), e.what()};
    } catch (const std::exception& e) {
        response = WireError{static_cast<uint8_t>(WireErrorCode::Internal), e.what()};
    }
    record(Direction::Out, response, frame(response).size());
    return response;
}

ServerStateDump Server::dump_state() const {
    std::lock_guard lock(mutex_);
    ServerStateDump dump;
    for (const auto& [id, blob] : subtree_store_) dump.subtrees.emplace_back(id, blob);
    dump.model_blob = model_blob_;
    return dump;
}

} // namespace anatree
