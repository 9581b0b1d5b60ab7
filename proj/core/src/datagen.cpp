#include "anatree/datagen.hpp"

#include <algorithm>
#include <cstdio>

#include "anatree/rng.hpp"

namespace anatree {

namespace {

// A shuffled pool of values with exact counts. Exact quotas keep the
// sensitive columns eligibility-safe by construction instead of by luck.
std::vector<std::string> quota_pool(Rng& rng,
                                    std::vector<std::pair<std::string, size_t>> parts) {
    std::vector<std::string> pool;
    for (auto& [value, count] : parts)
        for (size_t i = 0; i < count; ++i) pool.push_back(value);
    rng.shuffle(pool);
    return pool;
}

// Weighted pick with per-mille weights.
const std::string& pick(Rng& rng, const std::vector<std::pair<std::string, int>>& weighted) {
    int total = 0;
    for (const auto& [v, w] : weighted) total += w;
    int roll = static_cast<int>(rng.below(total));
    for (const auto& [v, w] : weighted) {
        roll -= w;
        if (roll < 0) return v;
    }
    return weighted.back().first;
}

bool chance(Rng& rng, int per_mille) { return rng.below(1000) < static_cast<uint64_t>(per_mille); }

std::string num(int v) { return std::to_string(v); }

std::string num2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

Attribute cat(std::string name) { return {std::move(name), AttrKind::Categorical, {}}; }
Attribute numeric(std::string name) { return {std::move(name), AttrKind::Numeric, {}}; }

Schema make_schema(std::vector<Attribute> attrs, std::string sensitive, std::string class_attr) {
    Schema s;
    s.attributes = std::move(attrs);
    s.sensitive = std::move(sensitive);
    s.class_attr = std::move(class_attr);
    for (const auto& a : s.attributes)
        if (a.name != s.sensitive) s.identifying.push_back(a.name);
    s.validate();
    return s;
}

void infer_domains(PersonDataset& ds) {
    for (size_t i = 0; i < ds.schema.attributes.size(); ++i) {
        Attribute& a = ds.schema.attributes[i];
        if (a.kind != AttrKind::Categorical || !a.domain.empty()) continue;
        std::vector<std::string> values;
        for (const auto& row : ds.rows) values.push_back(row[i]);
        std::sort(values.begin(), values.end());
        values.erase(std::unique(values.begin(), values.end()), values.end());
        a.domain = std::move(values);
    }
}

} // namespace

PersonDataset gen_vote(uint64_t seed) {
    constexpr size_t kRows = 485, kDem = 267, kRep = 218;
    Rng rng(seed);

    // Roll-call outcomes for the sensitive vote, dealt with exact per-party
    // quotas. Every global share stays at or below 161/485 < 1/3, so the
    // dataset is eligible for l = 3 as well as l = 2.
    auto dem_fee = quota_pool(rng, {{"y", 32}, {"n", 134}, {"present", 51}, {"notvoting", 50}});
    auto rep_fee = quota_pool(rng, {{"y", 113}, {"n", 26}, {"present", 39}, {"notvoting", 40}});
    auto party_pool = quota_pool(rng, {{"democrat", kDem}, {"republican", kRep}});

    // (name, P(y|democrat), P(y|republican)) in per-mille.
    const std::vector<std::tuple<std::string, int, int>> votes = {
        {"handicapped-infants", 520, 460},
        {"water-project-cost-sharing", 500, 480},
        {"adoption-of-the-budget-resolution", 580, 360},
        {"el-salvador-aid", 400, 620},
        {"religious-groups-in-schools", 460, 520},
        {"anti-satellite-test-ban", 540, 480},
        {"aid-to-nicaraguan-contras", 550, 450},
        {"mx-missile", 560, 380},
        {"immigration", 500, 500},
        {"synfuels-corporation-cutback", 550, 420},
        {"education-spending", 420, 600},
        {"superfund-right-to-sue", 440, 580},
        {"crime", 380, 580},
        {"duty-free-exports", 520, 480},
    };

    std::vector<Attribute> attrs;
    attrs.push_back(cat("party"));
    attrs.push_back(cat("physician-fee-freeze"));
    for (const auto& [name, pd, pr] : votes) attrs.push_back(cat(name));

    PersonDataset ds;
    ds.schema = make_schema(std::move(attrs), "physician-fee-freeze", "party");

    size_t dem_i = 0, rep_i = 0;
    for (size_t r = 0; r < kRows; ++r) {
        bool dem = party_pool[r] == "democrat";
        Row row;
        row.push_back(party_pool[r]);
        row.push_back(dem ? dem_fee[dem_i++] : rep_fee[rep_i++]);
        for (const auto& [name, pd, pr] : votes)
            row.push_back(chance(rng, dem ? pd : pr) ? "y" : "n");
        ds.rows.push_back(std::move(row));
    }
    infer_domains(ds);
    return ds;
}

PersonDataset gen_australian(uint64_t seed) {
    constexpr size_t kRows = 690, kPlus = 307, kMinus = 383;
    Rng rng(seed);

    auto class_pool = quota_pool(rng, {{"+", kPlus}, {"-", kMinus}});
    // A9 is the strong predictor. A two-value attribute could only be
    // 2-diverse at an exact 50/50 split (impossible on odd folds), so A9
    // carries a third "u" state; t and f stay at 303/690 each.
    auto plus_a9 = quota_pool(rng, {{"t", 246}, {"f", 31}, {"u", 30}});
    auto minus_a9 = quota_pool(rng, {{"t", 57}, {"f", 272}, {"u", 54}});

    std::vector<Attribute> attrs = {
        cat("A1"),     numeric("A2"), numeric("A3"), cat("A4"),     cat("A5"),
        cat("A6"),     numeric("A7"), cat("A8"),     cat("A9"),     cat("A10"),
        cat("A11"),    cat("A12"),    numeric("A13"), numeric("A14"), cat("class"),
    };

    PersonDataset ds;
    ds.schema = make_schema(std::move(attrs), "A9", "class");

    const std::vector<std::string> a5 = {"w", "q", "m", "r", "cc", "k", "c", "d", "x"};
    const std::vector<std::string> a6 = {"v", "h", "bb", "ff", "z"};

    size_t plus_i = 0, minus_i = 0;
    for (size_t r = 0; r < kRows; ++r) {
        bool approved = class_pool[r] == "+";
        Row row(15);
        row[14] = class_pool[r];
        row[8] = approved ? plus_a9[plus_i++] : minus_a9[minus_i++];
        row[0] = chance(rng, approved ? 620 : 480) ? "a" : "b";
        row[1] = num(static_cast<int>(approved ? 25 + rng.below(36) : 18 + rng.below(33)));
        row[2] = num2(rng.below(2800) / 100.0);
        row[3] = pick(rng, {{"p", approved ? 200 : 380}, {"g", approved ? 700 : 520}, {"gg", 100}});
        row[4] = a5[rng.below(a5.size())];
        row[5] = pick(rng, {{"v", approved ? 420 : 300},
                            {"h", approved ? 260 : 200},
                            {"bb", 160},
                            {"ff", approved ? 60 : 240},
                            {"z", 100}});
        row[6] = num2((approved ? 200 + rng.below(1300) : rng.below(900)) / 100.0);
        row[7] = chance(rng, approved ? 700 : 320) ? "t" : "f";
        row[9] = chance(rng, approved ? 640 : 330) ? "t" : "f";
        row[10] = chance(rng, approved ? 520 : 470) ? "t" : "f";
        row[11] = pick(rng, {{"s", 450}, {"g", 450}, {"p", 100}});
        row[12] = num(static_cast<int>(80 + rng.below(321)));
        row[13] = num(static_cast<int>(approved ? 100 + rng.below(1900) : 1 + rng.below(1200)));
        ds.rows.push_back(std::move(row));
    }
    infer_domains(ds);
    return ds;
}

PersonDataset gen_autos(uint64_t seed) {
    constexpr size_t kRows = 205;
    Rng rng(seed);

    // Risk rating quota: max share 66/205 keeps l=2 eligibility comfortable.
    auto symboling_pool = quota_pool(
        rng, {{"0", 66}, {"1", 53}, {"2", 33}, {"3", 24}, {"-1", 18}, {"-2", 11}});

    std::vector<Attribute> attrs = {
        cat("symboling"),          numeric("normalized-losses"), cat("make"),
        cat("fuel-type"),          cat("aspiration"),            cat("num-of-doors"),
        cat("body-style"),         cat("drive-wheels"),          cat("engine-location"),
        numeric("wheel-base"),     numeric("length"),            numeric("width"),
        numeric("height"),         numeric("curb-weight"),       cat("engine-type"),
        cat("num-of-cylinders"),   numeric("engine-size"),       cat("fuel-system"),
        numeric("bore"),           numeric("stroke"),            numeric("compression-ratio"),
        numeric("horsepower"),     numeric("peak-rpm"),          numeric("city-mpg"),
        numeric("highway-mpg"),    numeric("price"),
    };

    PersonDataset ds;
    ds.schema = make_schema(std::move(attrs), "symboling", "price");

    // (make, weight, price tier 0..2)
    const std::vector<std::tuple<std::string, int, int>> makes = {
        {"toyota", 160, 0}, {"honda", 130, 0},   {"nissan", 120, 0},  {"mazda", 110, 0},
        {"subaru", 90, 0},  {"volkswagen", 90, 1}, {"peugot", 70, 1},  {"volvo", 80, 1},
        {"bmw", 80, 2},     {"mercedes", 70, 2},
    };

    for (size_t r = 0; r < kRows; ++r) {
        int make_roll = static_cast<int>(rng.below(1000));
        size_t mi = 0;
        for (size_t i = 0; i < makes.size(); ++i) {
            make_roll -= std::get<1>(makes[i]);
            if (make_roll < 0) {
                mi = i;
                break;
            }
        }
        int tier = std::get<2>(makes[mi]);
        bool turbo = chance(rng, 180 + 120 * tier);
        int cylinders = tier == 2 ? (chance(rng, 500) ? 6 : 8)
                                  : (chance(rng, 750) ? 4 : (chance(rng, 600) ? 6 : 5));
        int engine_size = 60 + cylinders * 18 + static_cast<int>(rng.below(60));
        int curb = 1500 + engine_size * 5 + static_cast<int>(rng.below(500));
        int hp = static_cast<int>(engine_size * 0.7 + (turbo ? 40 : 0) + rng.below(30));
        int price = 4000 + tier * 9000 + engine_size * 40 + (turbo ? 2500 : 0) +
                    static_cast<int>(rng.below(3500));
        int mpg = std::max(13, 52 - engine_size / 6 - (turbo ? 3 : 0)) +
                  static_cast<int>(rng.below(5));

        Row row(26);
        row[0] = symboling_pool[r];
        row[1] = num(static_cast<int>(65 + rng.below(192)));
        row[2] = std::get<0>(makes[mi]);
        row[3] = chance(rng, 900) ? "gas" : "diesel";
        row[4] = turbo ? "turbo" : "std";
        row[5] = chance(rng, 560) ? "four" : "two";
        row[6] = pick(rng, {{"sedan", 400}, {"hatchback", 340}, {"wagon", 120},
                            {"hardtop", 80}, {"convertible", 60}});
        row[7] = tier == 2 ? (chance(rng, 850) ? "rwd" : "4wd")
                           : pick(rng, {{"fwd", 700}, {"rwd", 220}, {"4wd", 80}});
        row[8] = chance(rng, 985) ? "front" : "rear";
        row[9] = num2(86.6 + rng.below(340) / 10.0);
        row[10] = num2(141.1 + curb / 60.0 + rng.below(200) / 10.0);
        row[11] = num2(60.3 + rng.below(120) / 10.0);
        row[12] = num2(47.8 + rng.below(120) / 10.0);
        row[13] = num(curb);
        row[14] = pick(rng, {{"ohc", 720}, {"dohc", 120}, {"ohcv", 100}, {"l", 60}});
        row[15] = cylinders == 4 ? "four" : (cylinders == 5 ? "five" : (cylinders == 6 ? "six" : "eight"));
        row[16] = num(engine_size);
        row[17] = pick(rng, {{"mpfi", 450}, {"2bbl", 330}, {"idi", 100}, {"1bbl", 120}});
        row[18] = num2(2.54 + rng.below(140) / 100.0);
        row[19] = num2(2.07 + rng.below(200) / 100.0);
        row[20] = num2(7.0 + rng.below(160) / 10.0);
        row[21] = num(hp);
        row[22] = num(static_cast<int>(4150 + 50 * rng.below(50)));
        row[23] = num(mpg);
        row[24] = num(mpg + 5 + static_cast<int>(rng.below(4)));
        row[25] = num(price);
        ds.rows.push_back(std::move(row));
    }
    infer_domains(ds);
    return ds;
}

PersonDataset gen_adult(uint64_t seed) {
    constexpr size_t kRows = 14936;
    Rng rng(seed);

    auto relationship_pool = quota_pool(rng, {{"Husband", 5078},
                                              {"Not-in-family", 3883},
                                              {"Own-child", 2240},
                                              {"Unmarried", 1643},
                                              {"Wife", 1344},
                                              {"Other-relative", 748}});

    std::vector<Attribute> attrs = {
        numeric("age"),       cat("workclass"),     numeric("fnlwgt"),
        cat("education"),     numeric("education-num"), cat("marital-status"),
        cat("occupation"),    cat("relationship"),  cat("race"),
        cat("sex"),           numeric("capital-gain"), numeric("capital-loss"),
        numeric("hours-per-week"), cat("native-country"), cat("income"),
    };

    PersonDataset ds;
    ds.schema = make_schema(std::move(attrs), "relationship", "income");

    const std::vector<std::pair<std::string, int>> education = {
        {"HS-grad", 300},   {"Some-college", 220}, {"Bachelors", 190}, {"Masters", 80},
        {"Assoc-voc", 70},  {"11th", 50},          {"Assoc-acdm", 50}, {"Doctorate", 40},
    };
    const std::vector<std::pair<std::string, int>> edu_num = {
        {"HS-grad", 9},   {"Some-college", 10}, {"Bachelors", 13}, {"Masters", 14},
        {"Assoc-voc", 11}, {"11th", 7},         {"Assoc-acdm", 12}, {"Doctorate", 16},
    };

    for (size_t r = 0; r < kRows; ++r) {
        const std::string& rel = relationship_pool[r];
        bool married = rel == "Husband" || rel == "Wife";
        bool young = rel == "Own-child";

        int age = young ? 17 + static_cast<int>(rng.below(14))
                        : (married ? 24 + static_cast<int>(rng.below(45))
                                   : 18 + static_cast<int>(rng.below(52)));
        std::string edu = pick(rng, education);
        int edu_n = 9;
        for (const auto& [name, n] : edu_num)
            if (name == edu) edu_n = n;
        int hours = 20 + static_cast<int>(rng.below(51));

        // Income odds rise with marriage, education, age, and hours.
        int p = 60;
        if (married) p += 330;
        p += (edu_n - 9) * 45;
        if (age > 32) p += 90;
        if (hours > 44) p += 90;
        if (young) p -= 60;
        p = std::clamp(p, 10, 850);
        bool high = chance(rng, p);

        Row row(15);
        row[0] = num(age);
        row[1] = pick(rng, {{"Self-emp-not-inc", 330}, {"Local-gov", 250}, {"State-gov", 180},
                            {"Self-emp-inc", 130}, {"Federal-gov", 110}});
        row[2] = num(static_cast<int>(20000 + rng.below(380001)));
        row[3] = edu;
        row[4] = num(edu_n);
        row[5] = married ? "Married-civ-spouse"
                         : pick(rng, {{"Never-married", young ? 800 : 450},
                                      {"Divorced", 280},
                                      {"Widowed", 120},
                                      {"Separated", 150}});
        row[6] = pick(rng, {{"Prof-specialty", 200}, {"Craft-repair", 160},
                            {"Exec-managerial", 150}, {"Adm-clerical", 130}, {"Sales", 120},
                            {"Other-service", 120}, {"Transport-moving", 70},
                            {"Farming-fishing", 50}});
        row[7] = rel;
        row[8] = pick(rng, {{"White", 830}, {"Black", 90}, {"Asian-Pac-Islander", 50},
                            {"Amer-Indian-Eskimo", 20}, {"Other", 10}});
        row[9] = rel == "Husband" ? "Male"
                                  : (rel == "Wife" ? "Female" : (chance(rng, 520) ? "Male" : "Female"));
        row[10] = num(chance(rng, high ? 180 : 40)
                          ? static_cast<int>(2000 + rng.below(13001))
                          : 0);
        row[11] = num(chance(rng, 45) ? static_cast<int>(1300 + rng.below(1200)) : 0);
        row[12] = num(hours);
        row[13] = pick(rng, {{"United-States", 900}, {"Mexico", 30}, {"Philippines", 20},
                             {"Germany", 20}, {"Canada", 15}, {"India", 15}});
        row[14] = high ? ">50K" : "<=50K";
        ds.rows.push_back(std::move(row));
    }
    infer_domains(ds);
    return ds;
}

PersonDataset gen_sensitive_driven(size_t n, double fidelity, uint64_t seed) {
    Rng rng(seed);
    std::vector<Attribute> attrs = {cat("x1"), cat("x2"), cat("x3"), cat("x4"),
                                    cat("s"),  cat("label")};
    PersonDataset ds;
    ds.schema = make_schema(std::move(attrs), "s", "label");

    const std::vector<std::string> svals = {"s0", "s1", "s2", "s3"};
    const std::vector<std::string> noise = {"a", "b", "c"};
    int fid = static_cast<int>(fidelity * 1000);
    for (size_t r = 0; r < n; ++r) {
        Row row(6);
        for (int i = 0; i < 4; ++i) row[i] = noise[rng.below(3)];
        const std::string& s = svals[rng.below(4)];
        row[4] = s;
        bool c0 = (s == "s0" || s == "s1");
        if (!chance(rng, fid)) c0 = !c0;
        row[5] = c0 ? "c0" : "c1";
        ds.rows.push_back(std::move(row));
    }
    infer_domains(ds);
    return ds;
}

PersonDataset gen_random_eligible(int l, uint64_t seed) {
    Rng rng(seed);
    size_t n = static_cast<size_t>(l) * (static_cast<size_t>(l) + 1) + 10 + rng.below(80);
    size_t k = static_cast<size_t>(l) + 1 + rng.below(3); // distinct sensitive values
    size_t cap = n / static_cast<size_t>(l);

    // Fill value counts round-robin with random skips, never past the cap.
    std::vector<size_t> counts(k, 0);
    size_t placed = 0;
    while (placed < n) {
        for (size_t v = 0; v < k && placed < n; ++v) {
            if (counts[v] >= cap) continue;
            if (chance(rng, 700)) {
                ++counts[v];
                ++placed;
            }
        }
    }

    std::vector<std::pair<std::string, size_t>> parts;
    for (size_t v = 0; v < k; ++v) parts.emplace_back("v" + std::to_string(v), counts[v]);
    auto pool = quota_pool(rng, parts);

    std::vector<Attribute> attrs = {cat("c"), cat("f1"), cat("f2"), cat("s")};
    PersonDataset ds;
    ds.schema = make_schema(std::move(attrs), "s", "c");
    for (size_t r = 0; r < n; ++r) {
        Row row(4);
        row[0] = chance(rng, 500) ? "p" : "q";
        row[1] = std::string(1, static_cast<char>('a' + rng.below(3)));
        row[2] = std::string(1, static_cast<char>('a' + rng.below(4)));
        row[3] = pool[r];
        ds.rows.push_back(std::move(row));
    }
    infer_domains(ds);
    return ds;
}

PersonDataset gen_random_balanced(int l, uint64_t seed) {
    Rng rng(seed);
    size_t groups = 4 + rng.below(20);
    size_t n = groups * static_cast<size_t>(l);
    std::vector<std::pair<std::string, size_t>> parts;
    for (int v = 0; v < l; ++v) parts.emplace_back("v" + std::to_string(v), groups);
    auto pool = quota_pool(rng, parts);

    std::vector<Attribute> attrs = {cat("c"), cat("f1"), cat("s")};
    PersonDataset ds;
    ds.schema = make_schema(std::move(attrs), "s", "c");
    for (size_t r = 0; r < n; ++r) {
        Row row(3);
        row[0] = chance(rng, 500) ? "p" : "q";
        row[1] = std::string(1, static_cast<char>('a' + rng.below(3)));
        row[2] = pool[r];
        ds.rows.push_back(std::move(row));
    }
    infer_domains(ds);
    return ds;
}

const std::vector<std::string>& builtin_dataset_names() {
    static const std::vector<std::string> names = {"vote", "australian", "autos", "adult",
                                                   "sensdriven"};
    return names;
}

PersonDataset gen_builtin(const std::string& name, uint64_t seed) {
    if (name == "vote") return gen_vote(seed ? seed : 11);
    if (name == "australian") return gen_australian(seed ? seed : 12);
    if (name == "autos") return gen_autos(seed ? seed : 13);
    if (name == "adult") return gen_adult(seed ? seed : 14);
    if (name == "sensdriven") return gen_sensitive_driven(2000, 0.9, seed ? seed : 15);
    throw ConfigError("unknown builtin dataset '" + name + "'");
}

} // namespace anatree
