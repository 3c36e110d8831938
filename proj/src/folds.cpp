#include "itr/folds.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <stdexcept>

#include "itr/rng.hpp"

namespace itr {

std::vector<int> FoldPlan::validation(int fold) const {
  std::vector<int> out;
  for (int i = 0; i < n(); ++i) {
    if (assignment[static_cast<std::size_t>(i)] == fold) out.push_back(i);
  }
  return out;
}

std::vector<int> FoldPlan::training(int fold) const {
  std::vector<int> out;
  for (int i = 0; i < n(); ++i) {
    if (assignment[static_cast<std::size_t>(i)] != fold) out.push_back(i);
  }
  return out;
}

std::vector<int> FoldPlan::fold_sizes() const {
  std::vector<int> sizes(static_cast<std::size_t>(k), 0);
  for (int f : assignment) ++sizes[static_cast<std::size_t>(f)];
  return sizes;
}

namespace {

void check_fold_args(int n, int k) {
  if (k < 2) throw std::invalid_argument("fold count must be >= 2");
  if (k > n) {
    throw std::invalid_argument("fold count " + std::to_string(k) + " exceeds sample size " +
                                std::to_string(n));
  }
}

}  // namespace

FoldPlan make_folds(int n, int k, std::uint64_t seed) {
  check_fold_args(n, k);
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  rng.shuffle(perm);

  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.assignment.resize(static_cast<std::size_t>(n));
  for (int pos = 0; pos < n; ++pos) {
    plan.assignment[static_cast<std::size_t>(perm[static_cast<std::size_t>(pos)])] = pos % k;
  }
  return plan;
}

FoldPlan make_stratified_folds(const std::vector<int>& strata, int k, std::uint64_t seed) {
  const int n = static_cast<int>(strata.size());
  check_fold_args(n, k);

  std::map<int, std::vector<int>> groups;
  for (int i = 0; i < n; ++i) groups[strata[static_cast<std::size_t>(i)]].push_back(i);

  Rng rng(seed);
  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.assignment.resize(static_cast<std::size_t>(n));
  // One global counter across strata keeps fold sizes within one of each
  // other while spreading every stratum.
  int counter = 0;
  for (auto& [label, members] : groups) {
    rng.shuffle(members);
    for (int i : members) {
      plan.assignment[static_cast<std::size_t>(i)] = counter % k;
      ++counter;
    }
  }
  return plan;
}

}  // namespace itr
