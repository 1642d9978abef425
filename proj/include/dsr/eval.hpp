#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dsr/corpus.hpp"
#include "dsr/textcov.hpp"  // TokenSeq

namespace dsr {

enum class EditOp { Match, Substitute, Delete, Insert };

std::string to_string(EditOp op);

/// One backtraced alignment column. `ref` is empty for Insert, `hyp` for
/// Delete.
struct AlignedPair {
  EditOp op = EditOp::Match;
  std::string ref;
  std::string hyp;
};

struct AlignmentResult {
  std::vector<AlignedPair> ops;
  std::size_t matches = 0;
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t ref_len = 0;

  std::size_t distance() const {
    return substitutions + deletions + insertions;
  }
};

/// Minimal-cost alignment (unit costs) with a deterministic backtrace:
/// at equal cost, Match > Substitute > Delete > Insert. Empty sequences
/// allowed. Guarantees matches + substitutions + deletions == ref_len.
AlignmentResult align(const TokenSeq& ref, const TokenSeq& hyp);

/// (S+D+I) / N, uncapped, so insertion-heavy hypotheses may exceed 1.
/// N is floored at 1 when the reference is empty; that degenerate case
/// records a warning when a sink is given.
double error_rate(const AlignmentResult& alignment,
                  std::vector<std::string>* warnings = nullptr);

struct UtteranceScore {
  std::string utterance_id;
  std::string speaker_id;
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t ref_len = 0;
  double rate = 0.0;
};

UtteranceScore score_utterance(const std::string& utterance_id,
                               const std::string& speaker_id,
                               const AlignmentResult& alignment,
                               std::vector<std::string>* warnings = nullptr);

/// Micro-aggregated within the speaker: error and token totals, not a mean
/// of per-utterance rates.
struct SpeakerScore {
  std::string speaker_id;
  Severity severity = Severity::Unknown;
  std::uint64_t errors = 0;
  std::uint64_t ref_tokens = 0;

  double rate() const {
    return static_cast<double>(errors) /
           static_cast<double>(ref_tokens == 0 ? 1 : ref_tokens);
  }
};

/// All rates are fractions; rendering to percentages happens in the report
/// layer. speaker_avg weights each non-control speaker once; micro pools
/// non-control error and token totals (the utterance-weighted view).
struct AggregateReport {
  std::vector<SpeakerScore> speakers;        // sorted by speaker id
  std::map<Severity, double> severity_mean;  // unweighted over member speakers
  double speaker_avg = 0.0;
  double micro = 0.0;
};

/// Throws UnknownSpeaker when a score references an absent speaker and
/// EmptyGroup when there are no scores or no non-control speakers.
AggregateReport aggregate(const std::vector<UtteranceScore>& scores,
                          const std::map<std::string, Speaker>& speakers);

struct SignificanceResult {
  double p_value = 1.0;    // (r+1)/(B+1), two-sided
  double statistic = 0.0;  // mean paired difference a-b
  std::size_t n_pairs = 0;
  std::size_t resamples = 0;
  std::uint64_t seed = 0;
};

/// Paired sign-flip permutation test on per-utterance rates. Both vectors
/// must list the same utterances in the same order (length >= 2), else
/// PairingError. Deterministic given the seed.
SignificanceResult paired_permutation_test(const std::vector<double>& a,
                                           const std::vector<double>& b,
                                           std::size_t resamples,
                                           std::uint64_t seed);

}  // namespace dsr
