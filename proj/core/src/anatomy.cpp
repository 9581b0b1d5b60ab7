#include "anatree/anatomy.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "anatree/rng.hpp"

namespace anatree {

bool check_eligibility(const PersonDataset& ds, int l) {
    if (l < 1) throw ConfigError("diversity level must be >= 1");
    int sidx = ds.schema.sensitive_index();
    std::map<std::string, size_t> freq;
    for (const auto& row : ds.rows) ++freq[row[sidx]];
    size_t max_freq = 0;
    for (const auto& [v, f] : freq) max_freq = std::max(max_freq, f);
    // max_v freq(v) <= n / l, in integer arithmetic
    return max_freq * static_cast<size_t>(l) <= ds.rows.size();
}

namespace {

// Offending-value lookup for error messages.
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

} // namespace

Anatomy anatomize(const PersonDataset& ds, int l, const ClientKey& key, uint64_t seed) {
    const Schema& schema = ds.schema;
    if (schema.attributes.size() != schema.identifying.size() + 1)
        throw SchemaError("anatomize requires attributes = identifying set + sensitive attribute");
    if (!check_eligibility(ds, l))
        throw EligibilityError("sensitive value '" + most_frequent_sensitive(ds) +
                               "' exceeds the 1/" + std::to_string(l) + " share");

    const size_t n = ds.rows.size();
    const int sidx = schema.sensitive_index();
    Rng rng(seed);

    // Buckets of row indices per sensitive value, rows in shuffled order.
    auto shuffled = rng.permutation(n);
    std::map<std::string, std::vector<size_t>> bucket_map;
    for (size_t pos : shuffled) bucket_map[ds.rows[pos][sidx]].push_back(pos);

    struct Bucket {
        std::string value;
        std::vector<size_t> rows; // consumed front to back
        size_t next = 0;
        size_t remaining() const { return rows.size() - next; }
    };
    std::vector<Bucket> buckets;
    for (auto& [v, rows] : bucket_map) buckets.push_back({v, std::move(rows), 0});

    // Shuffle positions break frequency ties deterministically.
    std::vector<size_t> shuffle_pos(n);
    for (size_t p = 0; p < n; ++p) shuffle_pos[shuffled[p]] = p;

    std::vector<std::vector<size_t>> groups;
    std::vector<uint32_t> gid_of(n, 0);

    for (;;) {
        std::vector<size_t> nonempty;
        for (size_t b = 0; b < buckets.size(); ++b)
            if (buckets[b].remaining() > 0) nonempty.push_back(b);
        if (nonempty.size() < static_cast<size_t>(l)) break;
        std::sort(nonempty.begin(), nonempty.end(), [&](size_t a, size_t b) {
            if (buckets[a].remaining() != buckets[b].remaining())
                return buckets[a].remaining() > buckets[b].remaining();
            return shuffle_pos[buckets[a].rows[buckets[a].next]] <
                   shuffle_pos[buckets[b].rows[buckets[b].next]];
        });
        std::vector<size_t> group;
        for (int j = 0; j < l; ++j) {
            Bucket& bk = buckets[nonempty[j]];
            group.push_back(bk.rows[bk.next++]);
        }
        uint32_t gid = static_cast<uint32_t>(groups.size() + 1);
        for (size_t r : group) gid_of[r] = gid;
        groups.push_back(std::move(group));
    }

    // Residual rows: fewer than l distinct values remain. Absorb each into
    // an existing group that keeps the 1/l cap, preferring groups where the
    // value is rarest, then the smallest group.
    std::vector<std::map<std::string, size_t>> group_freq(groups.size());
    for (size_t g = 0; g < groups.size(); ++g)
        for (size_t r : groups[g]) ++group_freq[g][ds.rows[r][sidx]];

    std::vector<size_t> residual;
    for (const auto& bk : buckets)
        for (size_t i = bk.next; i < bk.rows.size(); ++i) residual.push_back(bk.rows[i]);
    std::sort(residual.begin(), residual.end(),
              [&](size_t a, size_t b) { return shuffle_pos[a] < shuffle_pos[b]; });

    for (size_t r : residual) {
        const std::string& v = ds.rows[r][sidx];
        size_t best = groups.size();
        for (size_t g = 0; g < groups.size(); ++g) {
            size_t f = group_freq[g].count(v) ? group_freq[g][v] : 0;
            if ((f + 1) * static_cast<size_t>(l) > groups[g].size() + 1) continue;
            if (best == groups.size()) {
                best = g;
                continue;
            }
            size_t bf = group_freq[best].count(v) ? group_freq[best][v] : 0;
            if (f < bf || (f == bf && groups[g].size() < groups[best].size())) best = g;
        }
        if (best == groups.size())
            throw AnatomyError("cannot place residual row with sensitive value '" + v + "'");
        groups[best].push_back(r);
        ++group_freq[best][v];
        gid_of[r] = static_cast<uint32_t>(best + 1);
    }

    // Fresh random sequence numbers 1..n.
    auto seq_perm = rng.permutation(n);

    Anatomy out;
    for (int i : schema.identifying_indices()) out.it_attrs.push_back(schema.attributes[i]);
    out.sensitive_name = schema.sensitive;

    auto ident = schema.identifying_indices();
    out.it.reserve(n);
    out.st.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        uint64_t seq = seq_perm[i] + 1;
        ITRow itr;
        itr.values.reserve(ident.size());
        for (int idx : ident) itr.values.push_back(ds.rows[i][idx]);
        itr.gid = gid_of[i];
        itr.eseq = encrypt_seq(key, random_salt(), seq);
        out.it.push_back(std::move(itr));
        out.st.push_back({seq, gid_of[i], ds.rows[i][sidx]});
    }
    std::sort(out.st.begin(), out.st.end(),
              [](const STRow& a, const STRow& b) { return a.seq < b.seq; });

    if (!verify_l_diverse(out.it, out.st, l))
        throw AnatomyError("internal error: grouping failed the diversity check");
    return out;
}

bool verify_l_diverse(const std::vector<ITRow>& it, const std::vector<STRow>& st, int l) {
    if (l < 1) return false;
    std::map<uint32_t, size_t> it_sizes;
    for (const auto& r : it) ++it_sizes[r.gid];
    std::map<uint32_t, size_t> st_sizes;
    std::map<uint32_t, std::map<std::string, size_t>> st_freq;
    for (const auto& r : st) {
        ++st_sizes[r.gid];
        ++st_freq[r.gid][r.value];
    }
    if (it_sizes != st_sizes) return false;
    for (const auto& [gid, freqs] : st_freq) {
        size_t size = st_sizes[gid];
        for (const auto& [v, f] : freqs)
            if (f * static_cast<size_t>(l) > size) return false;
    }
    return true;
}

PersonDataset reconstruct(const Anatomy& anatomy, const ClientKey& key, const Schema& schema) {
    if (schema.attributes.size() != schema.identifying.size() + 1)
        throw SchemaError("reconstruct requires attributes = identifying set + sensitive attribute");
    if (anatomy.it_attrs.size() != schema.identifying.size())
        throw SchemaError("identifier table does not match schema identifying set");
    for (size_t i = 0; i < anatomy.it_attrs.size(); ++i)
        if (anatomy.it_attrs[i].name != schema.identifying[i])
            throw SchemaError("identifier table attribute order does not match schema");

    std::map<uint64_t, const STRow*> by_seq;
    for (const auto& r : anatomy.st)
        if (!by_seq.emplace(r.seq, &r).second)
            throw IntegrityError("duplicate sequence number " + std::to_string(r.seq));

    auto ident = schema.identifying_indices();
    int sidx = schema.sensitive_index();

    PersonDataset out;
    out.schema = schema;
    out.rows.reserve(anatomy.it.size());
    for (const auto& itr : anatomy.it) {
        uint64_t seq = decrypt_seq(key, itr.eseq);
        auto hit = by_seq.find(seq);
        if (hit == by_seq.end())
            throw IntegrityError("no sensitive row for decrypted sequence number (gid " +
                                 std::to_string(itr.gid) + ")");
        const STRow* str = hit->second;
        if (str->gid != itr.gid)
            throw IntegrityError("sequence number crosses groups (gid " + std::to_string(itr.gid) +
                                 " vs " + std::to_string(str->gid) + ")");
        Row row(schema.attributes.size());
        for (size_t i = 0; i < ident.size(); ++i) row[ident[i]] = itr.values[i];
        row[sidx] = str->value;
        out.rows.push_back(std::move(row));
    }
    return out;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

bool all_numeric(const std::set<std::string>& values) {
    if (values.empty()) return false;
    for (const auto& v : values) {
        char* end = nullptr;
        std::strtod(v.c_str(), &end);
        if (end != v.c_str() + v.size() || v.empty()) return false;
    }
    return true;
}

} // namespace

void write_it_csv(const Anatomy& anatomy, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    for (const auto& a : anatomy.it_attrs) out << a.name << ',';
    out << "GID,ESEQ\n";
    for (const auto& r : anatomy.it) {
        for (const auto& v : r.values) out << v << ',';
        out << r.gid << ',' << base64_encode(r.eseq.encode()) << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

void write_st_csv(const Anatomy& anatomy, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "SEQ,GID," << anatomy.sensitive_name << '\n';
    for (const auto& r : anatomy.st) out << r.seq << ',' << r.gid << ',' << r.value << '\n';
    if (!out) throw IoError("write failed: " + path);
}

Anatomy load_anatomy_csv(const std::string& it_path, const std::string& st_path) {
    Anatomy out;

    std::ifstream it_in(it_path);
    if (!it_in) throw IoError("cannot open " + it_path);
    std::string line;
    if (!std::getline(it_in, line)) throw FormatError("empty identifier table: " + it_path);
    auto header = split_line(line);
    if (header.size() < 3 || header[header.size() - 2] != "GID" || header.back() != "ESEQ")
        throw FormatError("identifier table header must end with GID,ESEQ");
    size_t d = header.size() - 2;
    std::vector<std::set<std::string>> observed(d);
    while (std::getline(it_in, line)) {
        if (line.empty()) continue;
        auto fields = split_line(line);
        if (fields.size() != header.size())
            throw FormatError("identifier table row has wrong field count");
        ITRow r;
        r.values.assign(fields.begin(), fields.begin() + d);
        for (size_t i = 0; i < d; ++i) observed[i].insert(fields[i]);
        r.gid = static_cast<uint32_t>(std::stoul(fields[d]));
        r.eseq = CipherBlob::decode(base64_decode(fields[d + 1]));
        out.it.push_back(std::move(r));
    }
    // Attribute kinds are not stored in the CSV; infer them from the values.
    for (size_t i = 0; i < d; ++i) {
        Attribute a;
        a.name = header[i];
        if (all_numeric(observed[i])) {
            a.kind = AttrKind::Numeric;
        } else {
            a.kind = AttrKind::Categorical;
            a.domain.assign(observed[i].begin(), observed[i].end());
        }
        out.it_attrs.push_back(std::move(a));
    }

    std::ifstream st_in(st_path);
    if (!st_in) throw IoError("cannot open " + st_path);
    if (!std::getline(st_in, line)) throw FormatError("empty sensitive table: " + st_path);
    auto st_header = split_line(line);
    if (st_header.size() != 3 || st_header[0] != "SEQ" || st_header[1] != "GID")
        throw FormatError("sensitive table header must be SEQ,GID,<attribute>");
    out.sensitive_name = st_header[2];
    while (std::getline(st_in, line)) {
        if (line.empty()) continue;
        auto fields = split_line(line);
        if (fields.size() != 3) throw FormatError("sensitive table row has wrong field count");
        out.st.push_back({std::stoull(fields[0]), static_cast<uint32_t>(std::stoul(fields[1])),
                          fields[2]});
    }
    return out;
}

} // namespace anatree
