#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dsr/lattice.hpp"
#include "dsr/ngram_lm.hpp"

namespace dsr {

/// Decoding recipe: total = acoustic + lambda * lm, no length handling.
struct FusionConfig {
  double lambda = 0.0;
  std::optional<std::size_t> beam_width = 8;  // nullopt searches exhaustively
};

struct Hypothesis {
  std::vector<std::string> tokens;
  double acoustic_score = 0.0;
  double lm_score = 0.0;
  double total = 0.0;  // acoustic_score + lambda * lm_score, kept incrementally
};

/// Left-to-right beam search over the lattice. Every step contributes one
/// candidate's acoustic log-prob; skip candidates emit nothing and trigger
/// no LM event; emitted tokens add an LM step, and a terminal </s> event
/// closes every surviving hypothesis. Pruning and the returned argmax order
/// by (total desc, fewer tokens, lexicographic tokens), so decoding is a
/// pure function of its inputs.
///
/// `lm` may be null only when lambda is 0; LM scores then read 0.
/// Throws EmptyLattice when the lattice has no steps, InvalidConfig for a
/// zero beam, negative lambda, or missing LM with nonzero lambda.
Hypothesis decode(const Lattice& lattice, const NGramLM* lm,
                  const FusionConfig& config);

/// Rescores an n-best list: total = entry score + lambda * lm logprob of
/// its tokens. Same argmax ordering as decode. `lm` may be null only when
/// lambda is 0. Throws EmptyLattice for an empty list.
Hypothesis rescore_nbest(const std::vector<NBestEntry>& entries,
                         const NGramLM* lm, double lambda);

/// One decode+score pass per distinct lambda over the same lattices.
/// Returns (lambda, corpus error rate) pairs in first-appearance order;
/// rate is the micro rate of decoded hypotheses against the paired
/// references. Duplicate lambdas are dropped with a warning. Throws
/// InvalidConfig when lambdas is empty, PairingError when lattice and
/// reference counts differ.
std::vector<std::pair<double, double>> lambda_sweep(
    const std::vector<Lattice>& lattices,
    const std::vector<std::vector<std::string>>& references,
    const NGramLM& lm, const std::vector<double>& lambdas,
    std::optional<std::size_t> beam_width,
    std::vector<std::string>* warnings = nullptr);

}  // namespace dsr
