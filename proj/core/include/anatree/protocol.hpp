#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "anatree/anatomy.hpp"
#include "anatree/bytes.hpp"
#include "anatree/crypto.hpp"

namespace anatree {

// Typed, length-framed client/server messages. Frame layout:
// 4-byte big-endian length (covering tag + body) | 1-byte type tag | body.
// Field encodings reuse the tree codec conventions; CipherBlob bytes are
// embedded verbatim (length-prefixed).

// Attribute name/value pairs; the sensitive attribute is never present and
// the class attribute is absent because it is what gets predicted.
using Instance = std::vector<std::pair<std::string, std::string>>;

// A leaf's IT rows plus every ST row whose gid occurs among them. Sending
// each group's ST rows once is equivalent to the row-by-row cross product
// with all l candidate values, at a fraction of the size; the client
// reconstitutes the pairing locally.
struct LeafPayload {
    std::vector<ITRow> it_rows;
    std::vector<STRow> st_rows;
};

struct PredictRequest { Instance instance; };
struct RespEncrSubtree { std::string leaf_id; CipherBlob blob; };
struct RespLeafInstances { std::string leaf_id; LeafPayload payload; };
struct InstallSubtree { std::string leaf_id; CipherBlob blob; };
struct Ack { std::string info; };
struct PredictServerOnly { Instance instance; };
struct RespLabel { std::string label; };
struct FetchAll {};
struct RespTables { std::vector<ITRow> it; std::vector<STRow> st; };
struct FetchEncrTree {};
struct RespEncrTree { CipherBlob blob; };
struct StoreEncrTree { CipherBlob blob; };
struct WireError { uint8_t code = 0; std::string what; };

using WireMessage = std::variant<PredictRequest, RespEncrSubtree, RespLeafInstances,
                                 InstallSubtree, Ack, PredictServerOnly, RespLabel, FetchAll,
                                 RespTables, FetchEncrTree, RespEncrTree, StoreEncrTree,
                                 WireError>;

enum class MsgType : uint8_t {
    PredictRequest = 1,
    RespEncrSubtree = 2,
    RespLeafInstances = 3,
    InstallSubtree = 4,
    Ack = 5,
    PredictServerOnly = 6,
    RespLabel = 7,
    FetchAll = 8,
    RespTables = 9,
    FetchEncrTree = 10,
    RespEncrTree = 11,
    StoreEncrTree = 12,
    WireError = 15,
};

// Error codes carried by WireError so typed exceptions survive the wire.
enum class WireErrorCode : uint8_t { Protocol = 0, EmptyInput = 1, Internal = 2 };

MsgType message_type(const WireMessage& msg);
const char* message_type_name(MsgType t);

Bytes frame(const WireMessage& msg);
// Parses one complete frame. Throws ProtocolError on an unknown tag, a
// declared length that disagrees with the supplied bytes, or a malformed
// body.
WireMessage unframe(std::span<const uint8_t> data);

// Rethrows a WireError as the matching typed exception; returns msg
// otherwise.
const WireMessage& raise_if_error(const WireMessage& msg);

} // namespace anatree
