#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dsr/backend.hpp"
#include "dsr/corpus.hpp"
#include "dsr/sim_channel.hpp"
#include "dsr/textcov.hpp"

namespace dsr {

/// Pipeline-facing recognizer: one utterance under one adaptation state.
/// Implementations must tolerate concurrent calls (pure or self-locking).
class RecognitionBackend {
 public:
  virtual ~RecognitionBackend() = default;
  virtual BackendResponse recognize(const Utterance& utterance,
                                    const Speaker& speaker,
                                    const AdaptationState& state,
                                    std::vector<std::string>* warnings) = 0;
};

/// Noisy-channel recognizer over the corpus vocabulary; a pure function of
/// (speaker, utterance id, adaptation state, master seed).
class SimulatedBackend : public RecognitionBackend {
 public:
  SimulatedBackend(const Corpus& corpus, SeverityRateTable rates,
                   AdaptationGains gains, std::uint64_t master_seed,
                   ChannelConfig channel_config = {});

  BackendResponse recognize(const Utterance& utterance,
                            const Speaker& speaker,
                            const AdaptationState& state,
                            std::vector<std::string>* warnings) override;

 private:
  SimChannel channel_;
  SeverityRateTable rates_;
  AdaptationGains gains_;
  std::uint64_t master_seed_;
};

/// Bridges the pipeline to a wire-protocol backend. Adaptation is the
/// backend's concern; only the setting travels in the request.
class ExternalRecognitionBackend : public RecognitionBackend {
 public:
  ExternalRecognitionBackend(std::unique_ptr<Transport> transport,
                             int timeout_ms = 5000);

  BackendResponse recognize(const Utterance& utterance,
                            const Speaker& speaker,
                            const AdaptationState& state,
                            std::vector<std::string>* warnings) override;

 private:
  ExternalBackend client_;
};

struct PipelineConfig {
  double threshold = 0.25;  // stop once a stage rate drops below this
  std::vector<Setting> stage_order = {Setting::Baseline, Setting::ZeroShotV,
                                      Setting::OneShotF2,
                                      Setting::AllTestF3};
  Setting headline_cap = Setting::OneShotF2;  // final metric caps here
  double lambda = 0.0;  // fusion weight; 0 decodes acoustic-only
  std::uint64_t master_seed = 0;
  CoverageWeights coverage;
  // With a budget, each stage synthesizes only a greedy-selected subset of
  // the test texts, giving partial coverage; without one, the full test
  // text set is used and coverage is 1.
  std::optional<std::size_t> coverage_budget;
  SeverityRateTable severity_rates = default_severity_rates();
  AdaptationGains gains;
  std::size_t parallelism = 1;
  int lm_order = 3;            // used when lambda > 0
  double lm_smoothing_k = 0.5;
  std::string lm_domain = "source";  // train split ("source") or test texts
  std::optional<std::size_t> beam_width = 8;
};

void validate_pipeline_config(const PipelineConfig& config);

/// Strict JSON parsing: unknown keys are rejected, absent keys keep their
/// defaults. See README for the schema.
PipelineConfig parse_pipeline_config(const std::string& json_text);

struct StageRecord {
  Setting setting = Setting::Baseline;
  double rate = 0.0;  // speaker micro error rate at this stage, fraction
  std::size_t n_utterances = 0;
  double coverage = 0.0;
  // One-shot stages record which sample the cloning would use
  // (lexicographically first test utterance).
  std::optional<std::string> one_shot_sample;
};

struct SpeakerTrajectory {
  std::string speaker_id;
  Severity severity = Severity::Unknown;
  std::vector<StageRecord> stages;  // a prefix of stage_order
  std::optional<Setting> stopped_at;  // stage that fell under the threshold
  std::optional<double> final_rate;   // stop stage, else headline cap stage
  std::vector<Setting> skipped;       // stage_order entries never run
  std::optional<std::string> error;   // abort reason; stages are partial
};

/// One LOSO split per non-control speaker, each run through the stage
/// state machine: stages execute in order until one rate drops under the
/// threshold; later stages are skipped. Backend failures abort that
/// speaker's remaining stages (error recorded, partial stages kept) without
/// disturbing other speakers. Results are ordered by speaker id and are
/// independent of parallelism.
std::vector<SpeakerTrajectory> run_stepwise(
    const Corpus& corpus, RecognitionBackend& backend,
    const PipelineConfig& config,
    std::vector<std::string>* warnings = nullptr);

struct PipelineSummary {
  std::vector<std::pair<std::string, double>> finals;  // speaker -> fraction
  double average_final = 0.0;
};

/// Per-speaker final = rate at the stop stage, else at `cap`; trajectories
/// that never reached `cap` fall back to their last stage with a warning,
/// and stage-less trajectories are skipped with a warning. Throws
/// EmptyGroup when nothing is summarizable.
PipelineSummary summarize(const std::vector<SpeakerTrajectory>& trajectories,
                          Setting cap,
                          std::vector<std::string>* warnings = nullptr);

/// One sorted-key JSON object per line, ordered by speaker id; byte-stable
/// for identical inputs.
std::string trajectories_to_jsonl(
    const std::vector<SpeakerTrajectory>& trajectories);

}  // namespace dsr
