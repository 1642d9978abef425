#pragma once

#include <string>
#include <vector>

namespace dsr {

/// The empty string marks a skip candidate: taking it consumes the step
/// without emitting a token.
inline constexpr const char* kEpsilon = "";

struct LatticeCandidate {
  std::string token;
  double logp = 0.0;  // log acoustic posterior, candidates in a step sum to 1
};

/// Per-step candidates in a confusion-network layout. A hypothesis picks
/// exactly one candidate per step, in order.
struct LatticeStep {
  std::vector<LatticeCandidate> candidates;
};

struct Lattice {
  std::string utterance_id;
  std::size_t reference_length = 0;  // tokens in the reference transcript
  std::vector<LatticeStep> steps;
};

/// One n-best list entry from a backend. `score` is the acoustic log
/// probability only; fusion adds the weighted LM term on top.
struct NBestEntry {
  std::vector<std::string> tokens;
  double score = 0.0;
};

}  // namespace dsr
