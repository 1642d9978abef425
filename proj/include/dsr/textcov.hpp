#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace dsr {

using TokenSeq = std::vector<std::string>;

struct CoverageWeights {
  std::vector<int> orders = {1, 2};
  std::vector<double> weights = {0.5, 0.5};  // normalized to sum 1 internally
};

struct CoverageReport {
  std::map<int, double> per_order;              // order -> ratio in [0,1]
  double combined = 0.0;                        // sum of normalized-weighted ratios
  std::map<int, std::size_t> target_ngram_count;
};

/// Type coverage of the target's distinct n-grams by the pool. An order whose
/// target n-gram set is empty counts as fully covered.
CoverageReport ngram_coverage(const std::vector<TokenSeq>& pool,
                              const std::vector<TokenSeq>& target,
                              const CoverageWeights& cw = {});

/// Greedy budgeted selection maximizing combined coverage of the target.
/// Ties go to the lower candidate index; selection stops early once no
/// candidate adds coverage. Returned indices are in selection order.
std::vector<std::size_t> select_covering_set(const std::vector<TokenSeq>& candidates,
                                             const std::vector<TokenSeq>& target,
                                             std::size_t budget,
                                             const CoverageWeights& cw = {});

}  // namespace dsr
