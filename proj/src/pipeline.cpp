#include "dsr/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "dsr/errors.hpp"
#include "dsr/eval.hpp"
#include "dsr/fusion_decoder.hpp"
#include "dsr/ngram_lm.hpp"
#include "json.hpp"

namespace dsr {

SimulatedBackend::SimulatedBackend(const Corpus& corpus,
                                   SeverityRateTable rates,
                                   AdaptationGains gains,
                                   std::uint64_t master_seed,
                                   ChannelConfig channel_config)
    : channel_(corpus.vocabulary(), channel_config),
      rates_(std::move(rates)),
      gains_(gains),
      master_seed_(master_seed) {}

BackendResponse SimulatedBackend::recognize(const Utterance& utterance,
                                            const Speaker& speaker,
                                            const AdaptationState& state,
                                            std::vector<std::string>*) {
  const SpeakerChannelProfile profile =
      make_profile(speaker, rates_, master_seed_);
  const SpeakerChannelProfile adapted =
      apply_adaptation(profile, state, gains_);
  BackendResponse response;
  response.lattice = channel_.recognize(
      adapted, utterance,
      utterance_stream_seed(master_seed_, speaker.id, utterance.id));
  return response;
}

ExternalRecognitionBackend::ExternalRecognitionBackend(
    std::unique_ptr<Transport> transport, int timeout_ms)
    : client_(std::move(transport), timeout_ms) {}

BackendResponse ExternalRecognitionBackend::recognize(
    const Utterance& utterance, const Speaker&, const AdaptationState& state,
    std::vector<std::string>* warnings) {
  BackendResponse response =
      client_.recognize(utterance.id, utterance.text, state.setting, warnings);
  if (response.lattice) {
    response.lattice->reference_length = utterance.tokens.size();
  }
  return response;
}

void validate_pipeline_config(const PipelineConfig& config) {
  if (!(config.threshold > 0.0 && config.threshold <= 1.0)) {
    throw DsrError(ErrorCode::InvalidConfig,
                   "threshold must lie in (0,1]");
  }
  if (config.stage_order.empty() ||
      config.stage_order.front() != Setting::Baseline) {
    throw DsrError(ErrorCode::InvalidConfig,
                   "stage order must begin with baseline");
  }
  for (std::size_t i = 1; i < config.stage_order.size(); ++i) {
    if (!(static_cast<int>(config.stage_order[i - 1]) <
          static_cast<int>(config.stage_order[i]))) {
      throw DsrError(ErrorCode::InvalidConfig,
                     "stage order must be strictly increasing");
    }
  }
  if (std::find(config.stage_order.begin(), config.stage_order.end(),
                config.headline_cap) == config.stage_order.end()) {
    throw DsrError(ErrorCode::InvalidConfig,
                   "headline cap must be one of the configured stages");
  }
  if (config.lambda < 0.0) {
    throw DsrError(ErrorCode::InvalidConfig, "lambda must be >= 0");
  }
  if (config.parallelism == 0) {
    throw DsrError(ErrorCode::InvalidConfig, "parallelism must be >= 1");
  }
  if (config.lm_order < 1) {
    throw DsrError(ErrorCode::InvalidConfig, "lm_order must be >= 1");
  }
  if (!(config.lm_smoothing_k > 0.0)) {
    throw DsrError(ErrorCode::InvalidConfig, "lm_smoothing_k must be > 0");
  }
  if (config.lm_domain != "source" && config.lm_domain != "target") {
    throw DsrError(ErrorCode::InvalidConfig,
                   "lm_domain must be 'source' or 'target'");
  }
  if (config.beam_width && *config.beam_width == 0) {
    throw DsrError(ErrorCode::InvalidConfig, "beam_width must be >= 1");
  }
  if (config.coverage_budget && *config.coverage_budget == 0) {
    throw DsrError(ErrorCode::InvalidConfig, "coverage budget must be >= 1");
  }
  if (config.coverage.orders.empty() ||
      config.coverage.orders.size() != config.coverage.weights.size()) {
    throw DsrError(ErrorCode::InvalidConfig,
                   "coverage orders and weights must pair up");
  }
}

namespace {

SeverityRates parse_rates(const nlohmann::json& doc) {
  if (!doc.is_object() || doc.size() != 3 || !doc.contains("sub") ||
      !doc.contains("ins") || !doc.contains("del")) {
    throw DsrError(ErrorCode::InvalidConfig,
                   "severity rates need exactly sub, ins, del");
  }
  return {doc["sub"].get<double>(), doc["ins"].get<double>(),
          doc["del"].get<double>()};
}

}  // namespace

PipelineConfig parse_pipeline_config(const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw DsrError(ErrorCode::InvalidConfig,
                   std::string("config is not valid json: ") + e.what());
  }
  if (!doc.is_object()) {
    throw DsrError(ErrorCode::InvalidConfig, "config must be a json object");
  }

  PipelineConfig config;
  try {
    for (const auto& [key, value] : doc.items()) {
      if (key == "threshold") {
        config.threshold = value.get<double>();
      } else if (key == "stages") {
        config.stage_order.clear();
        for (const auto& name : value) {
          config.stage_order.push_back(
              setting_from_string(name.get<std::string>()));
        }
      } else if (key == "headline_cap") {
        config.headline_cap = setting_from_string(value.get<std::string>());
      } else if (key == "lambda") {
        config.lambda = value.get<double>();
      } else if (key == "seed") {
        config.master_seed = value.get<std::uint64_t>();
      } else if (key == "severity_rates") {
        config.severity_rates.clear();
        for (const auto& [name, rates] : value.items()) {
          const auto severity = severity_from_string(name);
          if (!severity) {
            throw DsrError(ErrorCode::InvalidConfig,
                           "unknown severity '" + name + "'");
          }
          config.severity_rates[*severity] = parse_rates(rates);
        }
      } else if (key == "adaptation_gains") {
        for (const auto& [name, gain] : value.items()) {
          if (name == "v") config.gains.v = gain.get<double>();
          else if (name == "f1") config.gains.f1 = gain.get<double>();
          else if (name == "f2") config.gains.f2 = gain.get<double>();
          else if (name == "f3") config.gains.f3 = gain.get<double>();
          else if (name == "floor") config.gains.floor = gain.get<double>();
          else {
            throw DsrError(ErrorCode::InvalidConfig,
                           "unknown adaptation gain '" + name + "'");
          }
        }
      } else if (key == "coverage") {
        for (const auto& [name, field] : value.items()) {
          if (name == "orders") {
            config.coverage.orders = field.get<std::vector<int>>();
          } else if (name == "weights") {
            config.coverage.weights = field.get<std::vector<double>>();
          } else if (name == "budget") {
            config.coverage_budget = field.get<std::size_t>();
          } else {
            throw DsrError(ErrorCode::InvalidConfig,
                           "unknown coverage field '" + name + "'");
          }
        }
      } else if (key == "parallelism") {
        config.parallelism = value.get<std::size_t>();
      } else if (key == "lm_order") {
        config.lm_order = value.get<int>();
      } else if (key == "lm_smoothing_k") {
        config.lm_smoothing_k = value.get<double>();
      } else if (key == "lm_domain") {
        config.lm_domain = value.get<std::string>();
      } else if (key == "beam_width") {
        if (value.is_null()) {
          config.beam_width.reset();  // exhaustive search
        } else {
          config.beam_width = value.get<std::size_t>();
        }
      } else {
        throw DsrError(ErrorCode::InvalidConfig,
                       "unknown config key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw DsrError(ErrorCode::InvalidConfig,
                   std::string("config field has the wrong type: ") +
                       e.what());
  }
  validate_pipeline_config(config);
  return config;
}

namespace {

bool is_one_shot(Setting setting) {
  return setting == Setting::OneShotF1 || setting == Setting::OneShotF2;
}

bool is_backend_failure(ErrorCode code) {
  return code == ErrorCode::ProtocolError ||
         code == ErrorCode::BackendTimeout || code == ErrorCode::BackendError;
}

struct StageEval {
  double rate = 0.0;
  std::size_t n_utterances = 0;
};

StageEval evaluate_stage(const std::vector<const Utterance*>& test,
                         const Speaker& speaker, const AdaptationState& state,
                         RecognitionBackend& backend, const NGramLM* lm,
                         const PipelineConfig& config,
                         std::vector<std::string>* warnings) {
  std::uint64_t errors = 0;
  std::uint64_t tokens = 0;
  for (const Utterance* utterance : test) {
    const BackendResponse response =
        backend.recognize(*utterance, speaker, state, warnings);
    Hypothesis hyp;
    if (response.lattice) {
      hyp = decode(*response.lattice, lm,
                   FusionConfig{config.lambda, config.beam_width});
    } else {
      hyp = rescore_nbest(response.nbest, lm, config.lambda);
    }
    const AlignmentResult alignment = align(utterance->tokens, hyp.tokens);
    errors += alignment.distance();
    tokens += alignment.ref_len == 0 ? 1 : alignment.ref_len;
  }
  StageEval eval;
  eval.n_utterances = test.size();
  eval.rate = static_cast<double>(errors) /
              static_cast<double>(tokens == 0 ? 1 : tokens);
  return eval;
}

std::vector<const Utterance*> resolve(const Corpus& corpus,
                                      const std::vector<std::string>& ids) {
  std::vector<const Utterance*> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    const Utterance* utterance = corpus.find_utterance(id);
    if (utterance == nullptr) {
      throw DsrError(ErrorCode::InternalInvariant,
                     "split references unknown utterance '" + id + "'");
    }
    out.push_back(utterance);
  }
  return out;
}

SpeakerTrajectory run_speaker(const Corpus& corpus, const LosoSplit& split,
                              RecognitionBackend& backend,
                              const PipelineConfig& config,
                              std::vector<std::string>& warnings) {
  const Speaker& speaker = corpus.speakers.at(split.held_out_speaker);
  SpeakerTrajectory trajectory;
  trajectory.speaker_id = speaker.id;
  trajectory.severity = speaker.severity;

  const std::vector<const Utterance*> test =
      resolve(corpus, split.test_utterances);
  std::vector<TokenSeq> test_texts;
  test_texts.reserve(test.size());
  for (const Utterance* utterance : test) {
    test_texts.push_back(utterance->tokens);
  }

  std::optional<NGramLM> lm;
  if (config.lambda > 0.0) {
    std::vector<TokenSeq> lm_texts;
    if (config.lm_domain == "target") {
      lm_texts = test_texts;
    } else {
      const std::vector<const Utterance*> train =
          resolve(corpus, split.train_utterances);
      lm_texts.reserve(train.size());
      for (const Utterance* utterance : train) {
        lm_texts.push_back(utterance->tokens);
      }
    }
    lm = NGramLM::train(lm_texts, config.lm_order, config.lm_smoothing_k);
  }

  std::optional<std::string> one_shot_sample;
  for (const Utterance* utterance : test) {
    if (!one_shot_sample || utterance->id < *one_shot_sample) {
      one_shot_sample = utterance->id;
    }
  }

  for (Setting setting : config.stage_order) {
    double coverage = 0.0;
    if (setting != Setting::Baseline) {
      std::vector<TokenSeq> synthesis;
      if (config.coverage_budget) {
        const auto chosen =
            select_covering_set(test_texts, test_texts,
                                *config.coverage_budget, config.coverage);
        synthesis.reserve(chosen.size());
        for (std::size_t index : chosen) synthesis.push_back(test_texts[index]);
      } else {
        synthesis = test_texts;
      }
      coverage =
          ngram_coverage(synthesis, test_texts, config.coverage).combined;
    }
    const AdaptationState state =
        make_adaptation_state(setting, coverage, config.gains);

    StageRecord record;
    record.setting = setting;
    record.coverage = coverage;
    if (is_one_shot(setting)) record.one_shot_sample = one_shot_sample;
    try {
      const StageEval eval = evaluate_stage(test, speaker, state, backend,
                                            lm ? &*lm : nullptr, config,
                                            &warnings);
      record.rate = eval.rate;
      record.n_utterances = eval.n_utterances;
    } catch (const DsrError& e) {
      if (!is_backend_failure(e.code())) throw;
      trajectory.error = std::string("stage '") + to_string(setting) +
                         "' aborted: " + e.what();
      break;
    }
    trajectory.stages.push_back(record);
    if (record.rate < config.threshold) {
      trajectory.stopped_at = setting;
      break;
    }
  }

  for (Setting setting : config.stage_order) {
    const bool ran =
        std::any_of(trajectory.stages.begin(), trajectory.stages.end(),
                    [&](const StageRecord& r) { return r.setting == setting; });
    if (!ran) trajectory.skipped.push_back(setting);
  }

  if (trajectory.stopped_at) {
    trajectory.final_rate = trajectory.stages.back().rate;
  } else {
    for (const auto& record : trajectory.stages) {
      if (record.setting == config.headline_cap) {
        trajectory.final_rate = record.rate;
      }
    }
    if (!trajectory.final_rate && !trajectory.stages.empty()) {
      trajectory.final_rate = trajectory.stages.back().rate;
      warnings.push_back("speaker '" + speaker.id +
                         "' never reached the headline cap; final rate "
                         "taken from its last completed stage");
    }
  }
  return trajectory;
}

}  // namespace

std::vector<SpeakerTrajectory> run_stepwise(
    const Corpus& corpus, RecognitionBackend& backend,
    const PipelineConfig& config, std::vector<std::string>* warnings) {
  validate_pipeline_config(config);
  const std::vector<LosoSplit> splits = generate_loso_splits(corpus);

  std::vector<SpeakerTrajectory> trajectories(splits.size());
  std::vector<std::vector<std::string>> local_warnings(splits.size());

  const std::size_t workers =
      std::min(config.parallelism, splits.size() == 0 ? 1 : splits.size());
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> failures(workers);

  auto work = [&](std::size_t worker_index) {
    try {
      for (;;) {
        const std::size_t index = next.fetch_add(1);
        if (index >= splits.size()) return;
        trajectories[index] = run_speaker(corpus, splits[index], backend,
                                          config, local_warnings[index]);
      }
    } catch (...) {
      failures[worker_index] = std::current_exception();
    }
  };

  if (workers <= 1) {
    work(0);
  } else {
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(work, w);
    for (auto& thread : threads) thread.join();
  }
  for (const auto& failure : failures) {
    if (failure) std::rethrow_exception(failure);
  }

  if (warnings != nullptr) {
    for (const auto& batch : local_warnings) {
      warnings->insert(warnings->end(), batch.begin(), batch.end());
    }
  }
  return trajectories;
}

PipelineSummary summarize(const std::vector<SpeakerTrajectory>& trajectories,
                          Setting cap, std::vector<std::string>* warnings) {
  if (trajectories.empty()) {
    throw DsrError(ErrorCode::EmptyGroup, "no trajectories to summarize");
  }
  PipelineSummary summary;
  double sum = 0.0;
  for (const auto& trajectory : trajectories) {
    if (trajectory.stages.empty()) {
      if (warnings != nullptr) {
        warnings->push_back("speaker '" + trajectory.speaker_id +
                            "' completed no stages; left out of the summary");
      }
      continue;
    }
    double final_rate;
    if (trajectory.stopped_at) {
      final_rate = trajectory.stages.back().rate;
    } else {
      const StageRecord* at_cap = nullptr;
      for (const auto& record : trajectory.stages) {
        if (record.setting == cap) at_cap = &record;
      }
      if (at_cap == nullptr && warnings != nullptr) {
        warnings->push_back("speaker '" + trajectory.speaker_id +
                            "' lacks the cap stage; using its last stage");
      }
      final_rate =
          at_cap != nullptr ? at_cap->rate : trajectory.stages.back().rate;
    }
    summary.finals.emplace_back(trajectory.speaker_id, final_rate);
    sum += final_rate;
  }
  if (summary.finals.empty()) {
    throw DsrError(ErrorCode::EmptyGroup,
                   "every trajectory was empty; nothing to summarize");
  }
  std::sort(summary.finals.begin(), summary.finals.end());
  summary.average_final = sum / static_cast<double>(summary.finals.size());
  return summary;
}

std::string trajectories_to_jsonl(
    const std::vector<SpeakerTrajectory>& trajectories) {
  std::string out;
  for (const auto& trajectory : trajectories) {
    nlohmann::json doc;
    doc["error"] =
        trajectory.error ? nlohmann::json(*trajectory.error) : nullptr;
    doc["final_rate"] = trajectory.final_rate
                            ? nlohmann::json(*trajectory.final_rate)
                            : nullptr;
    doc["severity"] = to_string(trajectory.severity);
    nlohmann::json skipped = nlohmann::json::array();
    for (Setting setting : trajectory.skipped) {
      skipped.push_back(to_string(setting));
    }
    doc["skipped"] = std::move(skipped);
    doc["speaker_id"] = trajectory.speaker_id;
    nlohmann::json stages = nlohmann::json::array();
    for (const auto& record : trajectory.stages) {
      nlohmann::json stage;
      stage["coverage"] = record.coverage;
      stage["n_utterances"] = record.n_utterances;
      stage["one_shot_sample"] = record.one_shot_sample
                                     ? nlohmann::json(*record.one_shot_sample)
                                     : nullptr;
      stage["rate"] = record.rate;
      stage["setting"] = to_string(record.setting);
      stages.push_back(std::move(stage));
    }
    doc["stages"] = std::move(stages);
    doc["stopped_at"] = trajectory.stopped_at
                            ? nlohmann::json(to_string(*trajectory.stopped_at))
                            : nullptr;
    out += doc.dump();
    out += '\n';
  }
  return out;
}

}  // namespace dsr
