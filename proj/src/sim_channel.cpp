#include "dsr/sim_channel.hpp"

#include <algorithm>
#include <cmath>

#include "dsr/errors.hpp"

namespace dsr {

std::string to_string(Setting setting) {
  switch (setting) {
    case Setting::Baseline: return "baseline";
    case Setting::ZeroShotV: return "v";
    case Setting::OneShotF1: return "f1";
    case Setting::OneShotF2: return "f2";
    case Setting::AllTestF3: return "f3";
  }
  throw DsrError(ErrorCode::InternalInvariant, "unreachable setting");
}

Setting setting_from_string(const std::string& text) {
  if (text == "baseline") return Setting::Baseline;
  if (text == "v") return Setting::ZeroShotV;
  if (text == "f1") return Setting::OneShotF1;
  if (text == "f2") return Setting::OneShotF2;
  if (text == "f3") return Setting::AllTestF3;
  throw DsrError(ErrorCode::InvalidConfig, "unknown setting: " + text);
}

SeverityRateTable default_severity_rates() {
  return {
      {Severity::Moderate, {0.30, 0.10, 0.08}},
      {Severity::Low, {0.15, 0.05, 0.04}},
      {Severity::VeryLow, {0.05, 0.02, 0.01}},
      {Severity::Control, {0.0, 0.0, 0.0}},
  };
}

double gain_for(const AdaptationGains& gains, Setting setting) {
  switch (setting) {
    case Setting::Baseline: return 0.0;
    case Setting::ZeroShotV: return gains.v;
    case Setting::OneShotF1: return gains.f1;
    case Setting::OneShotF2: return gains.f2;
    case Setting::AllTestF3: return gains.f3;
  }
  throw DsrError(ErrorCode::InternalInvariant, "unreachable setting");
}

AdaptationState make_adaptation_state(Setting setting, double coverage,
                                      const AdaptationGains& gains) {
  if (!(coverage >= 0.0 && coverage <= 1.0)) {
    throw DsrError(ErrorCode::InvalidConfig, "coverage must be in [0,1]");
  }
  return {setting, coverage, gain_for(gains, setting)};
}

SpeakerChannelProfile make_profile(const Speaker& speaker,
                                   const SeverityRateTable& rates,
                                   std::uint64_t master_seed) {
  auto it = rates.find(speaker.severity);
  if (it == rates.end()) {
    throw DsrError(ErrorCode::MissingSeverityRates,
                   "no severity rates for speaker '" + speaker.id + "' (" +
                       to_string(speaker.severity) + ")");
  }
  const SeverityRates& r = it->second;
  for (double rate : {r.sub, r.ins, r.del}) {
    if (!(rate >= 0.0 && rate < 1.0)) {
      throw DsrError(ErrorCode::InvalidConfig,
                     "channel rates must lie in [0,1)");
    }
  }
  if (!(r.sub + r.del < 1.0)) {
    throw DsrError(ErrorCode::InvalidConfig, "sub + del must stay below 1");
  }
  SpeakerChannelProfile profile;
  profile.speaker_id = speaker.id;
  profile.severity = speaker.severity;
  profile.base_sub_rate = r.sub;
  profile.base_ins_rate = r.ins;
  profile.base_del_rate = r.del;
  profile.confusion_seed = mix64(master_seed, fnv1a64(speaker.id));
  return profile;
}

namespace {

double adapt_rate(double base, double gain, double coverage, double floor) {
  const double scaled = base * (1.0 - gain * coverage);
  return std::max(std::min(base, floor), scaled);
}

}  // namespace

SpeakerChannelProfile apply_adaptation(const SpeakerChannelProfile& profile,
                                       const AdaptationState& state,
                                       const AdaptationGains& gains) {
  if (!(state.coverage >= 0.0 && state.coverage <= 1.0)) {
    throw DsrError(ErrorCode::InvalidConfig, "coverage must be in [0,1]");
  }
  const double expected = gain_for(gains, state.setting);
  if (state.gain != expected) {
    throw DsrError(ErrorCode::InvalidConfig,
                   "adaptation gain does not match its setting");
  }
  SpeakerChannelProfile adapted = profile;
  adapted.base_sub_rate = adapt_rate(profile.base_sub_rate, state.gain,
                                     state.coverage, gains.floor);
  adapted.base_ins_rate = adapt_rate(profile.base_ins_rate, state.gain,
                                     state.coverage, gains.floor);
  adapted.base_del_rate = adapt_rate(profile.base_del_rate, state.gain,
                                     state.coverage, gains.floor);
  return adapted;
}

SimChannel::SimChannel(std::vector<std::string> vocabulary,
                       ChannelConfig config)
    : vocab_(std::move(vocabulary)), config_(config) {
  std::sort(vocab_.begin(), vocab_.end());
  vocab_.erase(std::unique(vocab_.begin(), vocab_.end()), vocab_.end());
  if (!(config_.evidence_mass > 0.0 && config_.evidence_mass < 1.0)) {
    throw DsrError(ErrorCode::InvalidConfig,
                   "evidence_mass must lie in (0,1)");
  }
  if (config_.insertion_candidates == 0) {
    throw DsrError(ErrorCode::InvalidConfig,
                   "insertion_candidates must be >= 1");
  }
}

std::vector<std::string> SimChannel::confusables_for(
    const std::string& token, std::uint64_t confusion_seed) const {
  std::vector<std::string> out;
  const bool token_in_vocab =
      std::binary_search(vocab_.begin(), vocab_.end(), token);
  const std::size_t others = vocab_.size() - (token_in_vocab ? 1 : 0);
  const std::size_t want = std::min(config_.max_confusables, others);
  if (want == 0) return out;
  SplitMix64 rng(mix64(confusion_seed, fnv1a64(token)));
  std::size_t attempts = 8 * config_.max_confusables + 16;
  while (out.size() < want && attempts-- > 0) {
    const std::string& pick = vocab_[rng.next_below(vocab_.size())];
    if (pick == token) continue;
    if (std::find(out.begin(), out.end(), pick) != out.end()) continue;
    out.push_back(pick);
  }
  return out;
}

Lattice SimChannel::recognize(const SpeakerChannelProfile& profile,
                              const Utterance& utterance,
                              std::uint64_t stream_seed) const {
  if (vocab_.empty()) {
    throw DsrError(ErrorCode::EmptyVocabulary,
                   "simulated channel has no vocabulary to sample");
  }
  const double sub = profile.base_sub_rate;
  const double ins = profile.base_ins_rate;
  const double del = profile.base_del_rate;
  for (double rate : {sub, ins, del}) {
    if (!(rate >= 0.0 && rate <= 1.0)) {
      throw DsrError(ErrorCode::InvalidConfig,
                     "channel rates must lie in [0,1]");
    }
  }
  if (sub + del > 1.0) {
    throw DsrError(ErrorCode::InvalidConfig, "sub + del must not exceed 1");
  }

  Lattice lattice;
  lattice.utterance_id = utterance.id;
  lattice.reference_length = utterance.tokens.size();

  SplitMix64 rng(stream_seed);
  const double nominal_mass = 1.0 - config_.evidence_mass;

  for (const auto& token : utterance.tokens) {
    // Candidate order is fixed: true token, skip, confusables as drawn.
    std::vector<std::string> names;
    std::vector<double> nominal;
    const auto confusables = confusables_for(token, profile.confusion_seed);
    if (confusables.empty()) {
      // No substitution target exists; its mass folds into the true token.
      names = {token, kEpsilon};
      nominal = {1.0 - del, del};
    } else {
      names.push_back(token);
      nominal.push_back(1.0 - sub - del);
      names.push_back(kEpsilon);
      nominal.push_back(del);
      const double share = sub / static_cast<double>(confusables.size());
      for (const auto& c : confusables) {
        names.push_back(c);
        nominal.push_back(share);
      }
    }

    // Sample the acoustic evidence from the nominal distribution.
    const double u = rng.next_unit();
    std::size_t chosen = 0;
    double cum = 0.0;
    bool found = false;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < nominal.size(); ++i) {
      if (nominal[i] <= 0.0) continue;
      last_positive = i;
      cum += nominal[i];
      if (!found && u < cum) {
        chosen = i;
        found = true;
      }
    }
    if (!found) chosen = last_positive;  // guards u landing on the fp edge

    LatticeStep step;
    for (std::size_t i = 0; i < names.size(); ++i) {
      const double p = nominal_mass * nominal[i] +
                       (i == chosen ? config_.evidence_mass : 0.0);
      if (p <= 0.0) continue;
      step.candidates.push_back({names[i], std::log(p)});
    }
    lattice.steps.push_back(std::move(step));

    if (rng.next_unit() < ins) {
      // Uniform sample with replacement; duplicates merge their mass.
      std::vector<std::string> draws;
      for (std::size_t i = 0; i < config_.insertion_candidates; ++i) {
        draws.push_back(vocab_[rng.next_below(vocab_.size())]);
      }
      LatticeStep extra;
      const double unit = 1.0 / static_cast<double>(draws.size());
      for (std::size_t i = 0; i < draws.size(); ++i) {
        const auto first = std::find(draws.begin(), draws.end(), draws[i]);
        if (first != draws.begin() + static_cast<std::ptrdiff_t>(i)) continue;
        const auto copies =
            std::count(draws.begin(), draws.end(), draws[i]);
        extra.candidates.push_back(
            {draws[i], std::log(unit * static_cast<double>(copies))});
      }
      lattice.steps.push_back(std::move(extra));
    }
  }
  return lattice;
}

}  // namespace dsr
