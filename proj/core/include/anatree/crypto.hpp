#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>

#include "anatree/bytes.hpp"
#include "anatree/errors.hpp"

namespace anatree {

// AES-128-GCM wrapper. The key never leaves the client side; the server only
// ever handles CipherBlob values it cannot open or undetectably modify.

struct ClientKey {
    std::array<uint8_t, 16> bytes{};

    static ClientKey generate(); // OS entropy
    static ClientKey from_hex(const std::string& hex);
    std::string to_hex() const;

    bool operator==(const ClientKey&) const = default;
};

// Wire/file layout: 1-byte version | 12-byte nonce | ciphertext | 16-byte tag.
struct CipherBlob {
    uint8_t version = 1;
    std::array<uint8_t, 12> nonce{};
    Bytes ciphertext;
    std::array<uint8_t, 16> tag{};

    Bytes encode() const;
    static CipherBlob decode(std::span<const uint8_t> data);

    bool operator==(const CipherBlob&) const = default;
};

std::array<uint8_t, 16> random_salt();

// Encrypts (salt || seq-as-8-byte-big-endian). Fresh salts make repeated
// encryptions of the same seq unlinkable.
CipherBlob encrypt_seq(const ClientKey& key, const std::array<uint8_t, 16>& salt, uint64_t seq);

// Returns the seq, discarding the salt. Throws AuthenticationError on a
// wrong key or tampered blob.
uint64_t decrypt_seq(const ClientKey& key, const CipherBlob& blob);

CipherBlob encrypt_blob(const ClientKey& key, std::span<const uint8_t> plaintext);
Bytes decrypt_blob(const ClientKey& key, const CipherBlob& blob);

} // namespace anatree
