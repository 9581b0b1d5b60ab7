#include "anatree/protocol.hpp"

#include "anatree/errors.hpp"

namespace anatree {

namespace {

void put_instance(ByteWriter& w, const Instance& ins) {
    w.u32(static_cast<uint32_t>(ins.size()));
    for (const auto& [name, value] : ins) {
        w.str(name);
        w.str(value);
    }
}

Instance get_instance(ByteReader& r) {
    uint32_t n = r.u32();
    Instance ins;
    ins.reserve(n);
    for (uint32_t i = 0; i < n; ++i) {
        std::string name = r.str();
        std::string value = r.str();
        ins.emplace_back(std::move(name), std::move(value));
    }
    return ins;
}

void put_it_row(ByteWriter& w, const ITRow& row) {
    w.u32(static_cast<uint32_t>(row.values.size()));
    for (const auto& v : row.values) w.str(v);
    w.u32(row.gid);
    w.raw_prefixed(row.eseq.encode());
}

ITRow get_it_row(ByteReader& r) {
    ITRow row;
    uint32_t d = r.u32();
    row.values.reserve(d);
    for (uint32_t i = 0; i < d; ++i) row.values.push_back(r.str());
    row.gid = r.u32();
    row.eseq = CipherBlob::decode(r.raw_prefixed());
    return row;
}

void put_st_row(ByteWriter& w, const STRow& row) {
    w.u64(row.seq);
    w.u32(row.gid);
    w.str(row.value);
}

STRow get_st_row(ByteReader& r) {
    STRow row;
    row.seq = r.u64();
    row.gid = r.u32();
    row.value = r.str();
    return row;
}

void put_tables(ByteWriter& w, const std::vector<ITRow>& it, const std::vector<STRow>& st) {
    w.u32(static_cast<uint32_t>(it.size()));
    for (const auto& r : it) put_it_row(w, r);
    w.u32(static_cast<uint32_t>(st.size()));
    for (const auto& r : st) put_st_row(w, r);
}

void get_tables(ByteReader& r, std::vector<ITRow>& it, std::vector<STRow>& st) {
    uint32_t n_it = r.u32();
    it.reserve(n_it);
    for (uint32_t i = 0; i < n_it; ++i) it.push_back(get_it_row(r));
    uint32_t n_st = r.u32();
    st.reserve(n_st);
    for (uint32_t i = 0; i < n_st; ++i) st.push_back(get_st_row(r));
}

void put_body(ByteWriter& w, const WireMessage& msg) {
    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, PredictRequest>) {
                put_instance(w, m.instance);
            } else if constexpr (std::is_same_v<T, RespEncrSubtree>) {
                w.str(m.leaf_id);
                w.raw_prefixed(m.blob.encode());
            } else if constexpr (std::is_same_v<T, RespLeafInstances>) {
                w.str(m.leaf_id);
                put_tables(w, m.payload.it_rows, m.payload.st_rows);
            } else if constexpr (std::is_same_v<T, InstallSubtree>) {
                w.str(m.leaf_id);
                w.raw_prefixed(m.blob.encode());
            } else if constexpr (std::is_same_v<T, Ack>) {
                w.str(m.info);
            } else if constexpr (std::is_same_v<T, PredictServerOnly>) {
                put_instance(w, m.instance);
            } else if constexpr (std::is_same_v<T, RespLabel>) {
                w.str(m.label);
            } else if constexpr (std::is_same_v<T, FetchAll>) {
                // no body
            } else if constexpr (std::is_same_v<T, RespTables>) {
                put_tables(w, m.it, m.st);
            } else if constexpr (std::is_same_v<T, FetchEncrTree>) {
                // no body
            } else if constexpr (std::is_same_v<T, RespEncrTree>) {
                w.raw_prefixed(m.blob.encode());
            } else if constexpr (std::is_same_v<T, StoreEncrTree>) {
                w.raw_prefixed(m.blob.encode());
            } else if constexpr (std::is_same_v<T, WireError>) {
                w.u8(m.code);
                w.str(m.what);
            }
        },
        msg);
}

WireMessage get_body(MsgType type, ByteReader& r) {
    switch (type) {
        case MsgType::PredictRequest:
            return PredictRequest{get_instance(r)};
        case MsgType::RespEncrSubtree: {
            RespEncrSubtree m;
            m.leaf_id = r.str();
            m.blob = CipherBlob::decode(r.raw_prefixed());
            return m;
        }
        case MsgType::RespLeafInstances: {
            RespLeafInstances m;
            m.leaf_id = r.str();
            get_tables(r, m.payload.it_rows, m.payload.st_rows);
            return m;
        }
        case MsgType::InstallSubtree: {
            InstallSubtree m;
            m.leaf_id = r.str();
            m.blob = CipherBlob::decode(r.raw_prefixed());
            return m;
        }
        case MsgType::Ack:
            return Ack{r.str()};
        case MsgType::PredictServerOnly:
            return PredictServerOnly{get_instance(r)};
        case MsgType::RespLabel:
            return RespLabel{r.str()};
        case MsgType::FetchAll:
            return FetchAll{};
        case MsgType::RespTables: {
            RespTables m;
            get_tables(r, m.it, m.st);
            return m;
        }
        case MsgType::FetchEncrTree:
            return FetchEncrTree{};
        case MsgType::RespEncrTree: {
            RespEncrTree m;
            m.blob = CipherBlob::decode(r.raw_prefixed());
            return m;
        }
        case MsgType::StoreEncrTree: {
            StoreEncrTree m;
            m.blob = CipherBlob::decode(r.raw_prefixed());
            return m;
        }
        case MsgType::WireError: {
            WireError m;
            m.code = r.u8();
            m.what = r.str();
            return m;
        }
    }
    throw ProtocolError("unknown message tag");
}

} // namespace

MsgType message_type(const WireMessage& msg) {
    return std::visit(
        [](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, PredictRequest>) return MsgType::PredictRequest;
            else if constexpr (std::is_same_v<T, RespEncrSubtree>) return MsgType::RespEncrSubtree;
            else if constexpr (std::is_same_v<T, RespLeafInstances>)
                return MsgType::RespLeafInstances;
            else if constexpr (std::is_same_v<T, InstallSubtree>) return MsgType::InstallSubtree;
            else if constexpr (std::is_same_v<T, Ack>) return MsgType::Ack;
            else if constexpr (std::is_same_v<T, PredictServerOnly>)
                return MsgType::PredictServerOnly;
            else if constexpr (std::is_same_v<T, RespLabel>) return MsgType::RespLabel;
            else if constexpr (std::is_same_v<T, FetchAll>) return MsgType::FetchAll;
            else if constexpr (std::is_same_v<T, RespTables>) return MsgType::RespTables;
            else if constexpr (std::is_same_v<T, FetchEncrTree>) return MsgType::FetchEncrTree;
            else if constexpr (std::is_same_v<T, RespEncrTree>) return MsgType::RespEncrTree;
            else if constexpr (std::is_same_v<T, StoreEncrTree>) return MsgType::StoreEncrTree;
            else return MsgType::WireError;
        },
        msg);
}

const char* message_type_name(MsgType t) {
    switch (t) {
        case MsgType::PredictRequest: return "PredictRequest";
        case MsgType::RespEncrSubtree: return "RespEncrSubtree";
        case MsgType::RespLeafInstances: return "RespLeafInstances";
        case MsgType::InstallSubtree: return "InstallSubtree";
        case MsgType::Ack: return "Ack";
        case MsgType::PredictServerOnly: return "PredictServerOnly";
        case MsgType::RespLabel: return "RespLabel";
        case MsgType::FetchAll: return "FetchAll";
        case MsgType::RespTables: return "RespTables";
        case MsgType::FetchEncrTree: return "FetchEncrTree";
        case MsgType::RespEncrTree: return "RespEncrTree";
        case MsgType::StoreEncrTree: return "StoreEncrTree";
        case MsgType::WireError: return "WireError";
    }
    return "Unknown";
}

Bytes frame(const WireMessage& msg) {
    ByteWriter body;
    body.u8(static_cast<uint8_t>(message_type(msg)));
    put_body(body, msg);

    ByteWriter out;
    out.u32(static_cast<uint32_t>(body.bytes().size()));
    out.raw(body.bytes());
    return out.take();
}

WireMessage unframe(std::span<const uint8_t> data) {
    if (data.size() < 5) throw ProtocolError("frame too short");
    uint32_t declared = (uint32_t(data[0]) << 24) | (uint32_t(data[1]) << 16) |
                        (uint32_t(data[2]) << 8) | uint32_t(data[3]);
    if (declared != data.size() - 4)
        throw ProtocolError("frame length mismatch: declared " + std::to_string(declared) +
                            ", got " + std::to_string(data.size() - 4));
    uint8_t tag = data[4];
    switch (tag) {
        case 1: case 2: case 3: case 4: case 5: case 6: case 7:
        case 8: case 9: case 10: case 11: case 12: case 15:
            break;
        default:
            throw ProtocolError("unknown message tag " + std::to_string(int(tag)));
    }
    ByteReader r(data.subspan(5));
    try {
        WireMessage msg = get_body(static_cast<MsgType>(tag), r);
        r.expect_done();
        return msg;
    } catch (const FormatError& e) {
        throw ProtocolError(std::string("malformed message body: ") + e.what());
    }
}

const WireMessage& raise_if_error(const WireMessage& msg) {
    if (const auto* err = std::get_if<WireError>(&msg)) {
        switch (static_cast<WireErrorCode>(err->code)) {
            case WireErrorCode::EmptyInput:
                throw EmptyInputError(err->what);
            case WireErrorCode::Protocol:
            case WireErrorCode::Internal:
                break;
        }
        throw ProtocolError(err->what);
    }
    return msg;
}

} // namespace anatree
