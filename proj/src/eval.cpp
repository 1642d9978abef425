#include "dsr/eval.hpp"

#include <algorithm>
#include <cmath>

#include "dsr/errors.hpp"
#include "dsr/rng.hpp"

namespace dsr {

std::string to_string(EditOp op) {
  switch (op) {
    case EditOp::Match: return "match";
    case EditOp::Substitute: return "substitute";
    case EditOp::Delete: return "delete";
    case EditOp::Insert: return "insert";
  }
  throw DsrError(ErrorCode::InternalInvariant, "unreachable edit op");
}

AlignmentResult align(const TokenSeq& ref, const TokenSeq& hyp) {
  const std::size_t n = ref.size();
  const std::size_t m = hyp.size();
  // dp[i][j] = minimal cost aligning ref[0,i) to hyp[0,j), flattened.
  std::vector<std::size_t> dp((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& {
    return dp[i * (m + 1) + j];
  };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t diag =
          at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      const std::size_t del = at(i - 1, j) + 1;
      const std::size_t ins = at(i, j - 1) + 1;
      at(i, j) = std::min({diag, del, ins});
    }
  }

  AlignmentResult result;
  result.ref_len = n;
  std::size_t i = n;
  std::size_t j = m;
  // Backtrace preference at equal cost: Match > Substitute > Delete > Insert.
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && ref[i - 1] == hyp[j - 1] &&
        at(i, j) == at(i - 1, j - 1)) {
      result.ops.push_back({EditOp::Match, ref[i - 1], hyp[j - 1]});
      --i, --j;
    } else if (i > 0 && j > 0 && ref[i - 1] != hyp[j - 1] &&
               at(i, j) == at(i - 1, j - 1) + 1) {
      result.ops.push_back({EditOp::Substitute, ref[i - 1], hyp[j - 1]});
      --i, --j;
    } else if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      result.ops.push_back({EditOp::Delete, ref[i - 1], ""});
      --i;
    } else {
      result.ops.push_back({EditOp::Insert, "", hyp[j - 1]});
      --j;
    }
  }
  std::reverse(result.ops.begin(), result.ops.end());
  for (const auto& pair : result.ops) {
    switch (pair.op) {
      case EditOp::Match: ++result.matches; break;
      case EditOp::Substitute: ++result.substitutions; break;
      case EditOp::Delete: ++result.deletions; break;
      case EditOp::Insert: ++result.insertions; break;
    }
  }
  return result;
}

double error_rate(const AlignmentResult& alignment,
                  std::vector<std::string>* warnings) {
  std::size_t n = alignment.ref_len;
  if (n == 0) {
    n = 1;
    if (alignment.distance() > 0 && warnings != nullptr) {
      warnings->push_back(
          "empty reference scored against a non-empty hypothesis; "
          "reference length floored at 1");
    }
  }
  return static_cast<double>(alignment.distance()) / static_cast<double>(n);
}

UtteranceScore score_utterance(const std::string& utterance_id,
                               const std::string& speaker_id,
                               const AlignmentResult& alignment,
                               std::vector<std::string>* warnings) {
  UtteranceScore score;
  score.utterance_id = utterance_id;
  score.speaker_id = speaker_id;
  score.substitutions = alignment.substitutions;
  score.deletions = alignment.deletions;
  score.insertions = alignment.insertions;
  score.ref_len = alignment.ref_len;
  score.rate = error_rate(alignment, warnings);
  return score;
}

AggregateReport aggregate(const std::vector<UtteranceScore>& scores,
                          const std::map<std::string, Speaker>& speakers) {
  if (scores.empty()) {
    throw DsrError(ErrorCode::EmptyGroup, "no utterance scores to aggregate");
  }
  std::map<std::string, SpeakerScore> by_speaker;
  for (const auto& score : scores) {
    auto it = speakers.find(score.speaker_id);
    if (it == speakers.end()) {
      throw DsrError(ErrorCode::UnknownSpeaker,
                     "utterance '" + score.utterance_id +
                         "' references unknown speaker '" + score.speaker_id +
                         "'");
    }
    auto& entry = by_speaker[score.speaker_id];
    entry.speaker_id = score.speaker_id;
    entry.severity = it->second.severity;
    entry.errors +=
        score.substitutions + score.deletions + score.insertions;
    entry.ref_tokens += score.ref_len;
  }

  AggregateReport report;
  std::map<Severity, std::pair<double, std::size_t>> sums;
  double avg_sum = 0.0;
  std::size_t avg_n = 0;
  std::uint64_t micro_errors = 0;
  std::uint64_t micro_tokens = 0;
  for (const auto& [id, speaker] : by_speaker) {
    report.speakers.push_back(speaker);
    auto& [sum, count] = sums[speaker.severity];
    sum += speaker.rate();
    count += 1;
    if (speaker.severity != Severity::Control) {
      avg_sum += speaker.rate();
      avg_n += 1;
      micro_errors += speaker.errors;
      micro_tokens += speaker.ref_tokens;
    }
  }
  for (const auto& [severity, pair] : sums) {
    report.severity_mean[severity] =
        pair.first / static_cast<double>(pair.second);
  }
  if (avg_n == 0) {
    throw DsrError(ErrorCode::EmptyGroup,
                   "no non-control speakers to average");
  }
  report.speaker_avg = avg_sum / static_cast<double>(avg_n);
  report.micro = static_cast<double>(micro_errors) /
                 static_cast<double>(micro_tokens == 0 ? 1 : micro_tokens);
  return report;
}

SignificanceResult paired_permutation_test(const std::vector<double>& a,
                                           const std::vector<double>& b,
                                           std::size_t resamples,
                                           std::uint64_t seed) {
  if (a.size() != b.size()) {
    throw DsrError(ErrorCode::PairingError,
                   "paired samples differ in length");
  }
  if (a.size() < 2) {
    throw DsrError(ErrorCode::PairingError,
                   "paired test needs at least 2 pairs");
  }
  if (resamples == 0) {
    throw DsrError(ErrorCode::InvalidConfig, "resamples must be >= 1");
  }
  const std::size_t n = a.size();
  std::vector<double> diff(n);
  for (std::size_t i = 0; i < n; ++i) diff[i] = a[i] - b[i];

  double observed = 0.0;
  for (double d : diff) observed += d;
  observed /= static_cast<double>(n);
  const double threshold = std::fabs(observed);

  SplitMix64 rng(seed);
  std::size_t hits = 0;
  for (std::size_t trial = 0; trial < resamples; ++trial) {
    double sum = 0.0;
    for (double d : diff) {
      sum += (rng.next() & 1u) != 0 ? -d : d;
    }
    const double stat = sum / static_cast<double>(n);
    if (std::fabs(stat) >= threshold) ++hits;
  }

  SignificanceResult result;
  result.p_value = static_cast<double>(hits + 1) /
                   static_cast<double>(resamples + 1);
  result.statistic = observed;
  result.n_pairs = n;
  result.resamples = resamples;
  result.seed = seed;
  return result;
}

}  // namespace dsr
