#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "anatree/dataset.hpp"

namespace anatree {

// Deterministic synthetic datasets shaped like the UCI benchmark corpus
// (row counts, attribute mix, predictor strengths). Same seed, same bytes.
//
//   vote        485 rows, 16 attributes: party (class) plus 15 roll-call
//               votes; physician-fee-freeze (sensitive) takes the four real
//               roll-call outcomes and is the strongest single predictor,
//               with every value share kept under 1/3.
//   australian  690 rows, A1..A14 plus binary class; A9 (sensitive) is a
//               strong binary predictor; numeric columns exercise threshold
//               splits.
//   autos       205 rows, 26 attributes; numeric price is the class source
//               (binned to two labels by the experiment config); symboling
//               is the sensitive attribute.
//   adult       14936 rows, 15 attributes; income class, relationship
//               sensitive; mixed categorical/numeric.
//   sensdriven  n rows where the sensitive attribute determines the class
//               with the given fidelity and the identifying attributes are
//               noise.

PersonDataset gen_vote(uint64_t seed = 11);
PersonDataset gen_australian(uint64_t seed = 12);
PersonDataset gen_autos(uint64_t seed = 13);
PersonDataset gen_adult(uint64_t seed = 14);
PersonDataset gen_sensitive_driven(size_t n, double fidelity, uint64_t seed = 15);

// Small random person datasets with an eligibility-respecting sensitive
// column; used by property tests and the l-diversity acceptance sweep.
PersonDataset gen_random_eligible(int l, uint64_t seed);
// Variant whose sensitive multiset splits into groups of exactly l (row
// count divisible by l, balanced values), so no residual absorption occurs.
PersonDataset gen_random_balanced(int l, uint64_t seed);

const std::vector<std::string>& builtin_dataset_names();
PersonDataset gen_builtin(const std::string& name, uint64_t seed);

} // namespace anatree
