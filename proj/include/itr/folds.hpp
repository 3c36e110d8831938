#pragma once

#include <cstdint>
#include <vector>

namespace itr {

/// A partition of {0,...,n-1} into k validation folds of sizes differing by
/// at most one. Deterministic in (n, k, seed).
struct FoldPlan {
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<int> assignment;  // subject index -> fold id in {0,...,k-1}

  int n() const { return static_cast<int>(assignment.size()); }
  std::vector<int> validation(int fold) const;
  std::vector<int> training(int fold) const;
  std::vector<int> fold_sizes() const;
};

FoldPlan make_folds(int n, int k, std::uint64_t seed);

/// Same contract, but members of each stratum are spread across folds as
/// evenly as possible. Used by the pipeline with strata = (arm, event).
FoldPlan make_stratified_folds(const std::vector<int>& strata, int k, std::uint64_t seed);

}  // namespace itr
