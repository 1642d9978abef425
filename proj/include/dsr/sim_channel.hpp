#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dsr/corpus.hpp"
#include "dsr/lattice.hpp"
#include "dsr/rng.hpp"

namespace dsr {

/// Augmentation settings, ordered weakest to strongest.
enum class Setting { Baseline, ZeroShotV, OneShotF1, OneShotF2, AllTestF3 };

/// Wire names: "baseline", "v", "f1", "f2", "f3".
std::string to_string(Setting setting);
Setting setting_from_string(const std::string& text);

struct SeverityRates {
  double sub = 0.0;
  double ins = 0.0;
  double del = 0.0;
};

using SeverityRateTable = std::map<Severity, SeverityRates>;

/// Moderate (.30, .10, .08), Low (.15, .05, .04), VeryLow (.05, .02, .01),
/// Control (0, 0, 0). Chosen so simulated baseline error ordering is
/// Moderate > Low > VeryLow; Unknown has no entry.
SeverityRateTable default_severity_rates();

/// Per-setting coverage gains plus the rate floor that keeps an adapted
/// channel imperfect.
struct AdaptationGains {
  double v = 0.35;
  double f1 = 0.45;
  double f2 = 0.55;
  double f3 = 0.65;
  double floor = 0.005;
};

/// 0 for Baseline; strictly increasing along V -> F1 -> F2 -> F3 by default.
double gain_for(const AdaptationGains& gains, Setting setting);

struct AdaptationState {
  Setting setting = Setting::Baseline;
  double coverage = 0.0;  // combined adaptation-vs-test text coverage, [0,1]
  double gain = 0.0;      // resolved per-setting gain, [0,1]
};

AdaptationState make_adaptation_state(Setting setting, double coverage,
                                      const AdaptationGains& gains);

struct SpeakerChannelProfile {
  std::string speaker_id;
  Severity severity = Severity::Unknown;
  double base_sub_rate = 0.0;
  double base_ins_rate = 0.0;
  double base_del_rate = 0.0;
  std::uint64_t confusion_seed = 0;
};

/// Pure function of (speaker, rate table, master_seed).
/// Throws MissingSeverityRates when the table lacks the speaker's severity;
/// InvalidConfig when rates leave [0,1) or sub+del reach 1.
SpeakerChannelProfile make_profile(const Speaker& speaker,
                                   const SeverityRateTable& rates,
                                   std::uint64_t master_seed);

/// Each rate becomes max(min(base, floor), base * (1 - gain * coverage)).
/// The inner min keeps rates already at or under the floor (Control's zeros
/// included) untouched, so coverage 0 always returns the base rates and
/// effective rates never increase with coverage or setting strength.
SpeakerChannelProfile apply_adaptation(const SpeakerChannelProfile& profile,
                                       const AdaptationState& state,
                                       const AdaptationGains& gains);

/// mix64(mix64(master_seed, fnv1a64(speaker_id)), fnv1a64(utterance_id)).
/// Every utterance gets its own stream, so parallel schedule cannot leak
/// into results.
inline std::uint64_t utterance_stream_seed(std::uint64_t master_seed,
                                           const std::string& speaker_id,
                                           const std::string& utterance_id) {
  return mix64(mix64(master_seed, fnv1a64(speaker_id)),
               fnv1a64(utterance_id));
}

struct ChannelConfig {
  std::size_t max_confusables = 4;      // substitution candidates per step
  std::size_t insertion_candidates = 5; // uniform sample size, no skip arc
  double evidence_mass = 0.7;           // weight of the sampled outcome
};

/// Severity-parameterized noisy channel over a closed vocabulary.
///
/// Per reference token the channel builds a nominal outcome distribution
/// (true token 1-sub-del, skip del, confusables sub/m), samples one outcome
/// as the acoustic evidence, and emits a step mixing evidence with the
/// nominal distribution:
///
///   p(candidate) = (1 - evidence_mass) * nominal + evidence_mass * [chosen]
///
/// so the greedy path reads off the sampled errors while losing candidates
/// keep enough mass for fusion to overturn. Zero-probability candidates are
/// dropped. After each step an insertion step of uniformly sampled tokens
/// appears with probability ins.
class SimChannel {
 public:
  explicit SimChannel(std::vector<std::string> vocabulary,
                      ChannelConfig config = {});

  /// Deterministic given (profile, utterance.id, stream_seed); callable
  /// concurrently. Throws EmptyVocabulary when no tokens exist to sample.
  Lattice recognize(const SpeakerChannelProfile& profile,
                    const Utterance& utterance,
                    std::uint64_t stream_seed) const;

  /// Distinct tokens drawn from the vocabulary (true token excluded) by a
  /// generator seeded from (confusion_seed, token); stable across
  /// utterances so a token keeps its confusion set.
  std::vector<std::string> confusables_for(const std::string& token,
                                           std::uint64_t confusion_seed) const;

  const std::vector<std::string>& vocabulary() const { return vocab_; }

 private:
  std::vector<std::string> vocab_;  // sorted distinct real tokens
  ChannelConfig config_;
};

}  // namespace dsr
