#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "anatree/crypto.hpp"
#include "anatree/dataset.hpp"

namespace anatree {

// Anatomized partitions. The identifier table keeps the identifying values
// plus a group id and the encrypted sequence number; the sensitive table
// keeps (seq, gid, sensitive value). GID is the only plaintext link.

struct ITRow {
    Row values; // identifying values, schema identifying order
    uint32_t gid = 0;
    CipherBlob eseq;
};

struct STRow {
    uint64_t seq = 0;
    uint32_t gid = 0;
    std::string value;
};

struct Anatomy {
    std::vector<Attribute> it_attrs; // identifying attribute metadata
    std::string sensitive_name;
    std::vector<ITRow> it; // input dataset order
    std::vector<STRow> st; // sorted by seq
};

// Necessary global condition for an l-diverse grouping to exist:
// no sensitive value may hold more than a 1/l share of the dataset.
bool check_eligibility(const PersonDataset& ds, int l);

// Randomized bucketization: groups of l rows drawn from the l currently
// most frequent residual sensitive values (ties broken by shuffled order);
// leftover rows are absorbed into existing groups wherever the 1/l cap
// stays satisfied. Sequence numbers are a fresh random permutation of 1..n,
// encrypted per row with a fresh salt. IT rows keep the input order; ST rows
// are emitted sorted by seq.
Anatomy anatomize(const PersonDataset& ds, int l, const ClientKey& key, uint64_t seed);

// Checks the per-group 1/l frequency cap and that IT and ST agree on group
// sizes.
bool verify_l_diverse(const std::vector<ITRow>& it, const std::vector<STRow>& st, int l);

// Client-side rejoin: decrypt each IT row's eseq and equi-join on seq.
// Output rows are in IT order with the sensitive value restored to its
// schema position. Throws AuthenticationError on a wrong key and
// IntegrityError when a decrypted seq has no ST match.
PersonDataset reconstruct(const Anatomy& anatomy, const ClientKey& key, const Schema& schema);

// CSV forms: IT as (A_1..A_d, GID, ESEQ) with ESEQ base64-encoded,
// ST as (SEQ, GID, A_s).
void write_it_csv(const Anatomy& anatomy, const std::string& path);
void write_st_csv(const Anatomy& anatomy, const std::string& path);
Anatomy load_anatomy_csv(const std::string& it_path, const std::string& st_path);

} // namespace anatree
