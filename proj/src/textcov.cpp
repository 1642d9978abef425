#include "dsr/textcov.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

#include "dsr/errors.hpp"

namespace dsr {

namespace {

void validate_weights(const CoverageWeights& cw) {
  if (cw.orders.empty()) {
    throw DsrError(ErrorCode::InvalidConfig, "coverage orders must be non-empty");
  }
  if (cw.weights.size() != cw.orders.size()) {
    throw DsrError(ErrorCode::InvalidConfig,
                   "coverage weights must match orders in length");
  }
  for (int n : cw.orders) {
    if (n < 1) throw DsrError(ErrorCode::InvalidConfig, "coverage order must be >= 1");
  }
  for (double w : cw.weights) {
    if (w <= 0) throw DsrError(ErrorCode::InvalidConfig, "coverage weights must be positive");
  }
}

std::vector<double> normalized_weights(const CoverageWeights& cw) {
  double sum = 0;
  for (double w : cw.weights) sum += w;
  std::vector<double> out;
  out.reserve(cw.weights.size());
  for (double w : cw.weights) out.push_back(w / sum);
  return out;
}

// n-gram key: tokens joined by 0x1f (tokens never contain whitespace, and the
// unit separator cannot appear in tokenized text).
std::string ngram_key(const TokenSeq& seq, std::size_t start, int n) {
  std::string key;
  for (int j = 0; j < n; ++j) {
    if (j > 0) key.push_back('\x1f');
    key += seq[start + j];
  }
  return key;
}

void collect_ngrams(const TokenSeq& seq, int n,
                    std::unordered_set<std::string>& into) {
  if (seq.size() < static_cast<std::size_t>(n)) return;
  for (std::size_t i = 0; i + n <= seq.size(); ++i) {
    into.insert(ngram_key(seq, i, n));
  }
}

// Per order: target n-grams get dense indices; each text maps to the sorted
// list of target indices it touches. Greedy gains then reduce to counting
// uncovered indices.
struct CoverageIndex {
  std::vector<int> orders;
  std::vector<double> weights;                       // normalized
  std::vector<std::size_t> target_sizes;             // per order
  std::vector<std::vector<std::vector<std::size_t>>> hits;  // [order][text] -> indices
};

CoverageIndex build_index(const std::vector<TokenSeq>& texts,
                          const std::vector<TokenSeq>& target,
                          const CoverageWeights& cw) {
  validate_weights(cw);
  CoverageIndex idx;
  idx.orders = cw.orders;
  idx.weights = normalized_weights(cw);
  idx.hits.resize(cw.orders.size());
  idx.target_sizes.resize(cw.orders.size());
  for (std::size_t oi = 0; oi < cw.orders.size(); ++oi) {
    int n = cw.orders[oi];
    std::unordered_set<std::string> target_set;
    for (const auto& t : target) collect_ngrams(t, n, target_set);
    std::unordered_map<std::string, std::size_t> index_of;
    index_of.reserve(target_set.size());
    for (const auto& g : target_set) index_of.emplace(g, index_of.size());
    idx.target_sizes[oi] = target_set.size();
    idx.hits[oi].resize(texts.size());
    for (std::size_t ti = 0; ti < texts.size(); ++ti) {
      std::unordered_set<std::string> own;
      collect_ngrams(texts[ti], n, own);
      for (const auto& g : own) {
        auto it = index_of.find(g);
        if (it != index_of.end()) idx.hits[oi][ti].push_back(it->second);
      }
    }
  }
  return idx;
}

}  // namespace

CoverageReport ngram_coverage(const std::vector<TokenSeq>& pool,
                              const std::vector<TokenSeq>& target,
                              const CoverageWeights& cw) {
  validate_weights(cw);
  if (target.empty()) {
    throw DsrError(ErrorCode::EmptyTarget, "coverage target is empty");
  }
  auto weights = normalized_weights(cw);
  CoverageReport report;
  for (std::size_t oi = 0; oi < cw.orders.size(); ++oi) {
    int n = cw.orders[oi];
    std::unordered_set<std::string> target_set, pool_set;
    for (const auto& t : target) collect_ngrams(t, n, target_set);
    for (const auto& t : pool) collect_ngrams(t, n, pool_set);
    std::size_t hit = 0;
    for (const auto& g : target_set) hit += pool_set.count(g);
    double ratio = target_set.empty()
                       ? 1.0
                       : static_cast<double>(hit) / static_cast<double>(target_set.size());
    report.per_order[n] = ratio;
    report.target_ngram_count[n] = target_set.size();
    report.combined += weights[oi] * ratio;
  }
  return report;
}

std::vector<std::size_t> select_covering_set(const std::vector<TokenSeq>& candidates,
                                             const std::vector<TokenSeq>& target,
                                             std::size_t budget,
                                             const CoverageWeights& cw) {
  if (candidates.empty()) {
    throw DsrError(ErrorCode::EmptyPool, "no candidate texts to select from");
  }
  if (target.empty()) {
    throw DsrError(ErrorCode::EmptyTarget, "coverage target is empty");
  }
  if (budget < 1) {
    throw DsrError(ErrorCode::InvalidConfig, "selection budget must be >= 1");
  }

  CoverageIndex idx = build_index(candidates, target, cw);
  std::vector<std::vector<char>> covered(idx.orders.size());
  for (std::size_t oi = 0; oi < idx.orders.size(); ++oi) {
    covered[oi].assign(idx.target_sizes[oi], 0);
  }
  std::vector<char> taken(candidates.size(), 0);
  std::vector<std::size_t> selection;

  while (selection.size() < budget && selection.size() < candidates.size()) {
    double best_gain = 0;
    std::size_t best = candidates.size();
    for (std::size_t ci = 0; ci < candidates.size(); ++ci) {
      if (taken[ci]) continue;
      double gain = 0;
      for (std::size_t oi = 0; oi < idx.orders.size(); ++oi) {
        if (idx.target_sizes[oi] == 0) continue;
        std::size_t fresh = 0;
        for (std::size_t g : idx.hits[oi][ci]) fresh += !covered[oi][g];
        gain += idx.weights[oi] * static_cast<double>(fresh) /
                static_cast<double>(idx.target_sizes[oi]);
      }
      if (gain > best_gain) {  // strict: ties keep the lower index
        best_gain = gain;
        best = ci;
      }
    }
    if (best == candidates.size() || best_gain <= 0) break;
    taken[best] = 1;
    selection.push_back(best);
    for (std::size_t oi = 0; oi < idx.orders.size(); ++oi) {
      for (std::size_t g : idx.hits[oi][best]) covered[oi][g] = 1;
    }
  }
  return selection;
}

}  // namespace dsr
