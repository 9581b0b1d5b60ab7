#include "anatree/crypto.hpp"

#include <atomic>
#include <cstring>

#include <openssl/evp.h>
#include <openssl/rand.h>

namespace anatree {

namespace {

struct CipherCtx {
    EVP_CIPHER_CTX* ctx;
    CipherCtx() : ctx(EVP_CIPHER_CTX_new()) {
        if (!ctx) throw std::bad_alloc();
    }
    ~CipherCtx() { EVP_CIPHER_CTX_free(ctx); }
    CipherCtx(const CipherCtx&) = delete;
    CipherCtx& operator=(const CipherCtx&) = delete;
};

// 96-bit nonce: 4 random prefix bytes fixed per process, 8-byte counter.
// Never repeats within a run.
std::array<uint8_t, 12> next_nonce() {
    static std::array<uint8_t, 4> prefix = [] {
        std::array<uint8_t, 4> p;
        if (RAND_bytes(p.data(), p.size()) != 1)
            throw AuthenticationError("OS entropy unavailable");
        return p;
    }();
    static std::atomic<uint64_t> counter{0};
    uint64_t c = counter.fetch_add(1, std::memory_order_relaxed);
    std::array<uint8_t, 12> nonce;
    std::memcpy(nonce.data(), prefix.data(), 4);
    for (int i = 0; i < 8; ++i) nonce[4 + i] = uint8_t(c >> (56 - 8 * i));
    return nonce;
}

CipherBlob gcm_encrypt(const ClientKey& key, std::span<const uint8_t> plaintext) {
    CipherBlob blob;
    blob.nonce = next_nonce();
    blob.ciphertext.resize(plaintext.size());

    CipherCtx c;
    int len = 0;
    if (EVP_EncryptInit_ex(c.ctx, EVP_aes_128_gcm(), nullptr, key.bytes.data(),
                           blob.nonce.data()) != 1)
        throw AuthenticationError("cipher init failed");
    if (!plaintext.empty() &&
        EVP_EncryptUpdate(c.ctx, blob.ciphertext.data(), &len, plaintext.data(),
                          static_cast<int>(plaintext.size())) != 1)
        throw AuthenticationError("encrypt failed");
    int fin = 0;
    if (EVP_EncryptFinal_ex(c.ctx, blob.ciphertext.data() + len, &fin) != 1)
        throw AuthenticationError("encrypt finalize failed");
    if (EVP_CIPHER_CTX_ctrl(c.ctx, EVP_CTRL_GCM_GET_TAG, blob.tag.size(), blob.tag.data()) != 1)
        throw AuthenticationError("tag retrieval failed");
    return blob;
}

Bytes gcm_decrypt(const ClientKey& key, const CipherBlob& blob) {
    if (blob.version != 1) throw FormatError("unknown blob version");
    CipherCtx c;
    Bytes out(blob.ciphertext.size());
    int len = 0;
    if (EVP_DecryptInit_ex(c.ctx, EVP_aes_128_gcm(), nullptr, key.bytes.data(),
                           blob.nonce.data()) != 1)
        throw AuthenticationError("cipher init failed");
    if (!blob.ciphertext.empty() &&
        EVP_DecryptUpdate(c.ctx, out.data(), &len, blob.ciphertext.data(),
                          static_cast<int>(blob.ciphertext.size())) != 1)
        throw AuthenticationError("decrypt failed");
    if (EVP_CIPHER_CTX_ctrl(c.ctx, EVP_CTRL_GCM_SET_TAG, blob.tag.size(),
                            const_cast<uint8_t*>(blob.tag.data())) != 1)
        throw AuthenticationError("tag set failed");
    int fin = 0;
    if (EVP_DecryptFinal_ex(c.ctx, out.data() + len, &fin) != 1)
        throw AuthenticationError("authentication failed: wrong key or tampered data");
    return out;
}

} // namespace

ClientKey ClientKey::generate() {
    ClientKey k;
    if (RAND_bytes(k.bytes.data(), k.bytes.size()) != 1)
        throw AuthenticationError("OS entropy unavailable");
    return k;
}

ClientKey ClientKey::from_hex(const std::string& hex) {
    Bytes raw = hex_decode(hex);
    if (raw.size() != 16) throw FormatError("key must be 16 bytes (32 hex digits)");
    ClientKey k;
    std::memcpy(k.bytes.data(), raw.data(), 16);
    return k;
}

std::string ClientKey::to_hex() const { return hex_encode(bytes); }

Bytes CipherBlob::encode() const {
    ByteWriter w;
    w.u8(version);
    w.raw(nonce);
    w.raw(ciphertext);
    w.raw(tag);
    return w.take();
}

CipherBlob CipherBlob::decode(std::span<const uint8_t> data) {
    if (data.size() < 1 + 12 + 16) throw FormatError("cipher blob too short");
    CipherBlob b;
    b.version = data[0];
    if (b.version != 1) throw FormatError("unknown blob version");
    std::memcpy(b.nonce.data(), data.data() + 1, 12);
    size_t ct_len = data.size() - 1 - 12 - 16;
    b.ciphertext.assign(data.begin() + 13, data.begin() + 13 + ct_len);
    std::memcpy(b.tag.data(), data.data() + 13 + ct_len, 16);
    return b;
}

std::array<uint8_t, 16> random_salt() {
    std::array<uint8_t, 16> salt;
    if (RAND_bytes(salt.data(), salt.size()) != 1)
        throw AuthenticationError("OS entropy unavailable");
    return salt;
}

CipherBlob encrypt_seq(const ClientKey& key, const std::array<uint8_t, 16>& salt, uint64_t seq) {
    std::array<uint8_t, 24> plain;
    std::memcpy(plain.data(), salt.data(), 16);
    for (int i = 0; i < 8; ++i) plain[16 + i] = uint8_t(seq >> (56 - 8 * i));
    return gcm_encrypt(key, plain);
}

uint64_t decrypt_seq(const ClientKey& key, const CipherBlob& blob) {
    Bytes plain = gcm_decrypt(key, blob);
    if (plain.size() != 24) throw FormatError("sequence plaintext has wrong size");
    uint64_t seq = 0;
    for (int i = 0; i < 8; ++i) seq = (seq << 8) | plain[16 + i];
    return seq;
}

CipherBlob encrypt_blob(const ClientKey& key, std::span<const uint8_t> plaintext) {
    return gcm_encrypt(key, plaintext);
}

Bytes decrypt_blob(const ClientKey& key, const CipherBlob& blob) {
    return gcm_decrypt(key, blob);
}

} // namespace anatree
