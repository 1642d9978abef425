#include "dsr/fusion_decoder.hpp"

#include <algorithm>

#include "dsr/errors.hpp"
#include "dsr/eval.hpp"

namespace dsr {
namespace {

// total desc, then shorter token sequence, then lexicographic tokens.
bool better(const Hypothesis& lhs, const Hypothesis& rhs) {
  if (lhs.total != rhs.total) return lhs.total > rhs.total;
  if (lhs.tokens.size() != rhs.tokens.size()) {
    return lhs.tokens.size() < rhs.tokens.size();
  }
  return lhs.tokens < rhs.tokens;
}

}  // namespace

Hypothesis decode(const Lattice& lattice, const NGramLM* lm,
                  const FusionConfig& config) {
  if (lattice.steps.empty()) {
    throw DsrError(ErrorCode::EmptyLattice,
                   "lattice '" + lattice.utterance_id + "' has no steps");
  }
  if (config.lambda < 0.0) {
    throw DsrError(ErrorCode::InvalidConfig, "lambda must be >= 0");
  }
  if (config.beam_width && *config.beam_width == 0) {
    throw DsrError(ErrorCode::InvalidConfig, "beam width must be >= 1");
  }
  if (lm == nullptr && config.lambda != 0.0) {
    throw DsrError(ErrorCode::InvalidConfig,
                   "nonzero lambda requires a language model");
  }

  std::vector<Hypothesis> beam(1);
  for (const auto& step : lattice.steps) {
    if (step.candidates.empty()) {
      throw DsrError(ErrorCode::EmptyLattice,
                     "lattice '" + lattice.utterance_id +
                         "' has a step with no candidates");
    }
    std::vector<Hypothesis> extended;
    extended.reserve(beam.size() * step.candidates.size());
    for (const auto& hyp : beam) {
      for (const auto& candidate : step.candidates) {
        Hypothesis next = hyp;
        next.acoustic_score += candidate.logp;
        if (candidate.token != kEpsilon) {
          if (lm != nullptr) {
            next.lm_score += lm->score_step(next.tokens, candidate.token);
          }
          next.tokens.push_back(candidate.token);
        }
        next.total = next.acoustic_score + config.lambda * next.lm_score;
        extended.push_back(std::move(next));
      }
    }
    // stable_sort keeps extension order on full ties, so the beam content
    // never depends on anything but the inputs.
    std::stable_sort(extended.begin(), extended.end(), better);
    if (config.beam_width && extended.size() > *config.beam_width) {
      extended.resize(*config.beam_width);
    }
    beam = std::move(extended);
  }

  for (auto& hyp : beam) {
    if (lm != nullptr) {
      hyp.lm_score += lm->score_step(hyp.tokens, NGramLM::kEos);
    }
    hyp.total = hyp.acoustic_score + config.lambda * hyp.lm_score;
  }
  std::stable_sort(beam.begin(), beam.end(), better);
  return beam.front();
}

Hypothesis rescore_nbest(const std::vector<NBestEntry>& entries,
                         const NGramLM* lm, double lambda) {
  if (entries.empty()) {
    throw DsrError(ErrorCode::EmptyLattice, "n-best list is empty");
  }
  if (lambda < 0.0) {
    throw DsrError(ErrorCode::InvalidConfig, "lambda must be >= 0");
  }
  if (lm == nullptr && lambda != 0.0) {
    throw DsrError(ErrorCode::InvalidConfig,
                   "nonzero lambda requires a language model");
  }
  std::vector<Hypothesis> scored;
  scored.reserve(entries.size());
  for (const auto& entry : entries) {
    Hypothesis hyp;
    hyp.tokens = entry.tokens;
    hyp.acoustic_score = entry.score;
    hyp.lm_score = lm != nullptr ? lm->logprob(entry.tokens) : 0.0;
    hyp.total = hyp.acoustic_score + lambda * hyp.lm_score;
    scored.push_back(std::move(hyp));
  }
  std::stable_sort(scored.begin(), scored.end(), better);
  return scored.front();
}

std::vector<std::pair<double, double>> lambda_sweep(
    const std::vector<Lattice>& lattices,
    const std::vector<std::vector<std::string>>& references,
    const NGramLM& lm, const std::vector<double>& lambdas,
    std::optional<std::size_t> beam_width,
    std::vector<std::string>* warnings) {
  if (lambdas.empty()) {
    throw DsrError(ErrorCode::InvalidConfig, "lambda sweep needs >= 1 value");
  }
  if (lattices.size() != references.size()) {
    throw DsrError(ErrorCode::PairingError,
                   "lattice and reference counts differ");
  }

  std::vector<double> distinct;
  for (double lambda : lambdas) {
    if (std::find(distinct.begin(), distinct.end(), lambda) !=
        distinct.end()) {
      if (warnings != nullptr) {
        warnings->push_back("duplicate lambda " + std::to_string(lambda) +
                            " dropped from sweep");
      }
      continue;
    }
    distinct.push_back(lambda);
  }

  std::vector<std::pair<double, double>> out;
  out.reserve(distinct.size());
  for (double lambda : distinct) {
    FusionConfig config{lambda, beam_width};
    std::uint64_t errors = 0;
    std::uint64_t tokens = 0;
    for (std::size_t i = 0; i < lattices.size(); ++i) {
      const Hypothesis hyp = decode(lattices[i], &lm, config);
      const AlignmentResult alignment = align(references[i], hyp.tokens);
      errors += alignment.distance();
      std::size_t n = alignment.ref_len;
      tokens += n == 0 ? 1 : n;
    }
    out.emplace_back(lambda,
                     static_cast<double>(errors) /
                         static_cast<double>(tokens == 0 ? 1 : tokens));
  }
  return out;
}

}  // namespace dsr
