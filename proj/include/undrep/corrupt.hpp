#pragma once

#include <utility>

#include "undrep/types.hpp"

namespace undrep::corrupt {

// Masks the configured feature column to 0 with group-dependent Bernoulli
// probabilities. The pre-corruption values land in Z (promoting X when Z is
// absent) and the draw indicators in xi_mask; X = Z .* xi_mask afterwards.
// Draws are keyed per (seed, row, column), so corruption of distinct columns
// composes and results do not depend on row order.
Dataset inject_underreporting(const Dataset& ds, const UnderReportingConfig& cfg);

// Disjoint row partition via seeded uniform shuffle. Train gets
// ceil(n*(1-test_frac)) rows, test the remainder; all parallel arrays split
// together. Row order within each part follows the original dataset.
std::pair<Dataset, Dataset> split_train_test(const Dataset& ds, double test_frac,
                                             std::uint64_t seed);

}  // namespace undrep::corrupt
