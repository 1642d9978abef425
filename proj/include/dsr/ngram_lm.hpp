#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "dsr/textcov.hpp"  // TokenSeq

namespace dsr {

/// Additive-smoothed n-gram language model over a closed vocabulary.
///
/// The scorable event set at every step is {real tokens} ∪ {<unk>, </s>};
/// <s> is a context marker only and is never predicted. With context count
/// C(ctx), event count c(ctx, t), smoothing constant k and V scorable events:
///
///   p(t | ctx) = (c(ctx, t) + k) / (C(ctx) + k·V)
///
/// so every conditional distribution sums to exactly 1 and every probability
/// is positive. Out-of-vocabulary tokens map to <unk> for both contexts and
/// predictions; a literal "<s>" asked as a prediction maps to <unk> too.
class NGramLM {
 public:
  static constexpr const char* kUnk = "<unk>";
  static constexpr const char* kBos = "<s>";
  static constexpr const char* kEos = "</s>";

  static NGramLM train(const std::vector<TokenSeq>& texts, int order = 3,
                       double smoothing_k = 0.5);

  /// log p(token | last order-1 context tokens), <s>-padded on the left.
  double score_step(const TokenSeq& context, const std::string& token) const;

  /// Sum of score_step over the sequence plus the terminal </s> event.
  /// Computed stepwise, so it is bit-identical to the incremental sum.
  double logprob(const TokenSeq& tokens) const;

  int order() const { return order_; }
  double smoothing_k() const { return smoothing_k_; }
  /// Sorted real tokens (reserved markers excluded).
  const std::vector<std::string>& vocabulary() const { return vocab_; }
  /// Number of scorable events V = |vocabulary| + 2 (<unk> and </s>).
  std::size_t event_count() const { return vocab_.size() + 2; }

  /// Versioned JSON document with sorted keys; byte-stable for a given model.
  std::string to_json() const;
  static NGramLM from_json(const std::string& text);

 private:
  NGramLM() = default;

  const std::string& map_token(const std::string& token) const;
  std::string context_key(const TokenSeq& context) const;

  int order_ = 3;
  double smoothing_k_ = 0.5;
  std::vector<std::string> vocab_;
  std::unordered_set<std::string> vocab_set_;
  // context key -> token -> count; std::map keeps serialization sorted.
  std::map<std::string, std::map<std::string, std::uint64_t>> counts_;
  std::unordered_map<std::string, std::uint64_t> context_totals_;
};

}  // namespace dsr
