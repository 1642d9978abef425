#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dsr/backend.hpp"
#include "dsr/corpus.hpp"
#include "dsr/errors.hpp"
#include "dsr/eval.hpp"
#include "dsr/fusion_decoder.hpp"
#include "dsr/ngram_lm.hpp"
#include "dsr/pipeline.hpp"
#include "dsr/report.hpp"
#include "dsr/sim_channel.hpp"
#include "dsr/textcov.hpp"
#include "json.hpp"

namespace {

using dsr::DsrError;
using dsr::ErrorCode;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DsrError(ErrorCode::InvalidConfig, "cannot open '" + path + "'");
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DsrError(ErrorCode::InvalidConfig, "cannot open '" + path + "'");
  }
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

void write_output(const std::string& out_path, const std::string& content) {
  if (out_path.empty()) {
    std::cout << content;
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) {
    throw DsrError(ErrorCode::InvalidConfig,
                   "cannot write to '" + out_path + "'");
  }
  out << content;
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& warning : warnings) {
    std::cerr << "warning: " << warning << "\n";
  }
}

dsr::LanguageUnit unit_from_string(const std::string& name) {
  if (name == "word") return dsr::LanguageUnit::Word;
  if (name == "character") return dsr::LanguageUnit::Character;
  throw DsrError(ErrorCode::InvalidConfig,
                 "unit must be 'word' or 'character', got '" + name + "'");
}

dsr::ManifestFormat manifest_format_for(const std::string& path,
                                        const std::string& explicit_format) {
  if (explicit_format == "jsonl") return dsr::ManifestFormat::Jsonl;
  if (explicit_format == "csv") return dsr::ManifestFormat::Csv;
  if (!explicit_format.empty()) {
    throw DsrError(ErrorCode::InvalidConfig,
                   "manifest format must be 'jsonl' or 'csv'");
  }
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv") {
    return dsr::ManifestFormat::Csv;
  }
  return dsr::ManifestFormat::Jsonl;
}

dsr::Corpus load_corpus(const std::string& path, const std::string& format,
                        const std::string& unit) {
  dsr::LoadOptions options;
  options.format = manifest_format_for(path, format);
  options.unit = unit_from_string(unit);
  return dsr::load_manifest(path, options);
}

// Normalized, tokenized non-empty lines of a plain text file.
std::vector<dsr::TokenSeq> load_texts(const std::string& path,
                                      const std::string& unit) {
  const dsr::LanguageUnit lang_unit = unit_from_string(unit);
  std::vector<dsr::TokenSeq> texts;
  for (const auto& line : read_lines(path)) {
    const std::string normalized = dsr::normalize_text(line, {});
    auto tokens = dsr::tokenize(normalized, lang_unit, /*allow_empty=*/true);
    if (!tokens.empty()) texts.push_back(std::move(tokens));
  }
  return texts;
}

struct GlobalArgs {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
  std::string format = "markdown";
};

dsr::PipelineConfig effective_config(const GlobalArgs& globals) {
  dsr::PipelineConfig config;
  if (!globals.config_path.empty()) {
    config = dsr::parse_pipeline_config(read_file(globals.config_path));
  }
  if (globals.seed_set) config.master_seed = globals.seed;
  return config;
}

int run_load_check(const GlobalArgs& globals, const std::string& manifest,
                   const std::string& format, const std::string& unit) {
  const dsr::Corpus corpus = load_corpus(manifest, format, unit);
  nlohmann::json severities = nlohmann::json::object();
  for (const auto& [id, speaker] : corpus.speakers) {
    const std::string name = dsr::to_string(speaker.severity);
    severities[name] = severities.value(name, 0) + 1;
  }
  nlohmann::json splits;
  std::size_t train = 0;
  for (const auto& utterance : corpus.utterances) {
    if (utterance.split == dsr::SplitTag::Train) ++train;
  }
  splits["test"] = corpus.utterances.size() - train;
  splits["train"] = train;
  nlohmann::json doc;
  doc["n_speakers"] = corpus.speakers.size();
  doc["n_utterances"] = corpus.utterances.size();
  doc["severities"] = std::move(severities);
  doc["splits"] = std::move(splits);
  doc["unit"] = dsr::to_string(corpus.unit);
  doc["vocabulary_size"] = corpus.vocabulary().size();
  write_output(globals.out, doc.dump() + "\n");
  return 0;
}

int run_coverage(const GlobalArgs& globals, const std::string& pool_path,
                 const std::string& target_path, const std::string& unit) {
  const dsr::PipelineConfig config = effective_config(globals);
  const auto pool = load_texts(pool_path, unit);
  const auto target = load_texts(target_path, unit);
  const dsr::CoverageReport report =
      dsr::ngram_coverage(pool, target, config.coverage);
  nlohmann::json per_order;
  for (const auto& [order, ratio] : report.per_order) {
    per_order[std::to_string(order)] = ratio;
  }
  nlohmann::json doc;
  doc["combined"] = report.combined;
  doc["per_order"] = std::move(per_order);
  write_output(globals.out, doc.dump() + "\n");
  return 0;
}

int run_select(const GlobalArgs& globals, const std::string& pool_path,
               const std::string& target_path, std::size_t budget,
               const std::string& unit) {
  const dsr::PipelineConfig config = effective_config(globals);
  const auto pool = load_texts(pool_path, unit);
  const auto target = load_texts(target_path, unit);
  const auto chosen =
      dsr::select_covering_set(pool, target, budget, config.coverage);
  std::vector<dsr::TokenSeq> selected;
  selected.reserve(chosen.size());
  for (std::size_t index : chosen) selected.push_back(pool[index]);
  const double combined =
      dsr::ngram_coverage(selected, target, config.coverage).combined;
  nlohmann::json doc;
  doc["budget"] = budget;
  doc["chosen"] = chosen;
  doc["combined"] = combined;
  write_output(globals.out, doc.dump() + "\n");
  return 0;
}

int run_lm_train(const GlobalArgs& globals, const std::string& texts_path,
                 int order, double smoothing_k, const std::string& unit) {
  const auto texts = load_texts(texts_path, unit);
  const dsr::NGramLM lm = dsr::NGramLM::train(texts, order, smoothing_k);
  write_output(globals.out, lm.to_json() + "\n");
  return 0;
}

int run_decode(const GlobalArgs& globals, const std::string& lattices_path,
               const std::string& lm_path, double lambda,
               std::size_t beam_width, bool unbounded_beam) {
  std::optional<dsr::NGramLM> lm;
  if (!lm_path.empty()) {
    lm = dsr::NGramLM::from_json(read_file(lm_path));
  }
  dsr::FusionConfig config;
  config.lambda = lambda;
  if (unbounded_beam) {
    config.beam_width.reset();
  } else {
    config.beam_width = beam_width;
  }

  std::vector<std::string> warnings;
  std::string out;
  for (const auto& line : read_lines(lattices_path)) {
    if (line.empty()) continue;
    const dsr::BackendResponse response =
        dsr::parse_backend_response(line, std::nullopt, &warnings);
    dsr::Hypothesis hyp;
    std::string utterance_id;
    if (response.lattice) {
      utterance_id = response.lattice->utterance_id;
      hyp = dsr::decode(*response.lattice, lm ? &*lm : nullptr, config);
    } else {
      // n-best lines carry no id in the parsed struct; re-read it.
      utterance_id =
          nlohmann::json::parse(line)["utterance_id"].get<std::string>();
      hyp = dsr::rescore_nbest(response.nbest, lm ? &*lm : nullptr,
                               config.lambda);
    }
    nlohmann::json doc;
    doc["acoustic"] = hyp.acoustic_score;
    doc["hyp_tokens"] = hyp.tokens;
    doc["lambda"] = config.lambda;
    doc["lm"] = hyp.lm_score;
    doc["total"] = hyp.total;
    doc["utterance_id"] = utterance_id;
    out += doc.dump();
    out += '\n';
  }
  print_warnings(warnings);
  write_output(globals.out, out);
  return 0;
}

int run_simulate(const GlobalArgs& globals, const std::string& manifest,
                 const std::string& format, const std::string& unit,
                 const std::string& setting_name, double coverage) {
  const dsr::PipelineConfig config = effective_config(globals);
  const dsr::Corpus corpus = load_corpus(manifest, format, unit);
  const dsr::Setting setting = dsr::setting_from_string(setting_name);
  const dsr::AdaptationState state =
      dsr::make_adaptation_state(setting, coverage, config.gains);
  const dsr::SimChannel channel(corpus.vocabulary());

  std::string out;
  for (const auto& utterance : corpus.utterances) {
    const dsr::Speaker& speaker = corpus.speakers.at(utterance.speaker_id);
    const dsr::SpeakerChannelProfile profile = dsr::apply_adaptation(
        dsr::make_profile(speaker, config.severity_rates, config.master_seed),
        state, config.gains);
    const dsr::Lattice lattice = channel.recognize(
        profile, utterance,
        dsr::utterance_stream_seed(config.master_seed, speaker.id,
                                   utterance.id));
    out += dsr::build_result_response(lattice);
    out += '\n';
  }
  write_output(globals.out, out);
  return 0;
}

dsr::UtteranceScore scored_line(const std::string& utterance_id,
                                const std::string& speaker_id,
                                const dsr::TokenSeq& ref,
                                const dsr::TokenSeq& hyp,
                                std::vector<std::string>* warnings) {
  return dsr::score_utterance(utterance_id, speaker_id, dsr::align(ref, hyp),
                              warnings);
}

std::string score_to_line(const dsr::UtteranceScore& score) {
  nlohmann::json doc;
  doc["D"] = score.deletions;
  doc["I"] = score.insertions;
  doc["N"] = score.ref_len;
  doc["S"] = score.substitutions;
  doc["rate"] = score.rate;
  doc["utterance_id"] = score.utterance_id;
  return doc.dump();
}

int run_align(const GlobalArgs& globals, const std::string& ref_path,
              const std::string& manifest, const std::string& format,
              const std::string& hyp_path, const std::string& unit) {
  const dsr::LanguageUnit lang_unit = unit_from_string(unit);
  const auto hyp_lines = read_lines(hyp_path);
  std::vector<std::string> warnings;
  std::string out;

  auto tokenize_lenient = [&](const std::string& line) {
    return dsr::tokenize(dsr::normalize_text(line, {}), lang_unit,
                         /*allow_empty=*/true);
  };

  if (!manifest.empty()) {
    const dsr::Corpus corpus = load_corpus(manifest, format, unit);
    if (corpus.utterances.size() != hyp_lines.size()) {
      throw DsrError(ErrorCode::PairingError,
                     "manifest has " +
                         std::to_string(corpus.utterances.size()) +
                         " utterances but " +
                         std::to_string(hyp_lines.size()) + " hypotheses");
    }
    for (std::size_t i = 0; i < hyp_lines.size(); ++i) {
      const auto& utterance = corpus.utterances[i];
      const auto score =
          scored_line(utterance.id, utterance.speaker_id, utterance.tokens,
                      tokenize_lenient(hyp_lines[i]), &warnings);
      out += score_to_line(score);
      out += '\n';
    }
  } else {
    const auto ref_lines = read_lines(ref_path);
    if (ref_lines.size() != hyp_lines.size()) {
      throw DsrError(ErrorCode::PairingError,
                     "reference has " + std::to_string(ref_lines.size()) +
                         " lines but hypothesis has " +
                         std::to_string(hyp_lines.size()));
    }
    for (std::size_t i = 0; i < ref_lines.size(); ++i) {
      const auto score = scored_line(std::to_string(i + 1), "",
                                     tokenize_lenient(ref_lines[i]),
                                     tokenize_lenient(hyp_lines[i]), &warnings);
      out += score_to_line(score);
      out += '\n';
    }
  }
  print_warnings(warnings);
  write_output(globals.out, out);
  return 0;
}

std::vector<dsr::UtteranceScore> read_scores(const std::string& path) {
  std::vector<dsr::UtteranceScore> scores;
  for (const auto& line : read_lines(path)) {
    if (line.empty()) continue;
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DsrError(ErrorCode::InvalidConfig,
                     std::string("score line is not valid json: ") + e.what());
    }
    dsr::UtteranceScore score;
    try {
      score.utterance_id = doc.at("utterance_id").get<std::string>();
      score.substitutions = doc.at("S").get<std::size_t>();
      score.deletions = doc.at("D").get<std::size_t>();
      score.insertions = doc.at("I").get<std::size_t>();
      score.ref_len = doc.at("N").get<std::size_t>();
      score.rate = doc.at("rate").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw DsrError(ErrorCode::InvalidConfig,
                     std::string("score line misses a field: ") + e.what());
    }
    scores.push_back(std::move(score));
  }
  return scores;
}

int run_stats_aggregate(const GlobalArgs& globals,
                        const std::string& scores_path,
                        const std::string& manifest,
                        const std::string& format, const std::string& unit) {
  const dsr::Corpus corpus = load_corpus(manifest, format, unit);
  std::vector<dsr::UtteranceScore> scores = read_scores(scores_path);
  for (auto& score : scores) {
    const dsr::Utterance* utterance = corpus.find_utterance(score.utterance_id);
    if (utterance == nullptr) {
      throw DsrError(ErrorCode::UnknownSpeaker,
                     "score references utterance '" + score.utterance_id +
                         "' absent from the manifest");
    }
    score.speaker_id = utterance->speaker_id;
  }
  const dsr::AggregateReport report = dsr::aggregate(scores, corpus.speakers);
  nlohmann::json severity_mean;
  for (const auto& [severity, mean] : report.severity_mean) {
    severity_mean[dsr::to_string(severity)] = mean;
  }
  nlohmann::json speakers = nlohmann::json::array();
  for (const auto& speaker : report.speakers) {
    nlohmann::json entry;
    entry["errors"] = speaker.errors;
    entry["rate"] = speaker.rate();
    entry["ref_tokens"] = speaker.ref_tokens;
    entry["severity"] = dsr::to_string(speaker.severity);
    entry["speaker_id"] = speaker.speaker_id;
    speakers.push_back(std::move(entry));
  }
  nlohmann::json doc;
  doc["micro"] = report.micro;
  doc["severity_mean"] = std::move(severity_mean);
  doc["speaker_avg"] = report.speaker_avg;
  doc["speakers"] = std::move(speakers);
  write_output(globals.out, doc.dump() + "\n");
  return 0;
}

int run_stats_significance(const GlobalArgs& globals, const std::string& a_path,
                           const std::string& b_path, std::size_t resamples) {
  const auto a_scores = read_scores(a_path);
  const auto b_scores = read_scores(b_path);
  if (a_scores.size() != b_scores.size()) {
    throw DsrError(ErrorCode::PairingError,
                   "score files differ in length");
  }
  std::vector<double> a;
  std::vector<double> b;
  for (std::size_t i = 0; i < a_scores.size(); ++i) {
    if (a_scores[i].utterance_id != b_scores[i].utterance_id) {
      throw DsrError(ErrorCode::PairingError,
                     "score files disagree at line " + std::to_string(i + 1) +
                         ": '" + a_scores[i].utterance_id + "' vs '" +
                         b_scores[i].utterance_id + "'");
    }
    a.push_back(a_scores[i].rate);
    b.push_back(b_scores[i].rate);
  }
  const dsr::SignificanceResult result =
      dsr::paired_permutation_test(a, b, resamples, globals.seed);
  nlohmann::json doc;
  doc["n_pairs"] = result.n_pairs;
  doc["p_value"] = result.p_value;
  doc["resamples"] = result.resamples;
  doc["seed"] = result.seed;
  doc["statistic"] = result.statistic;
  write_output(globals.out, doc.dump() + "\n");
  return 0;
}

std::vector<std::string> split_command(const std::string& command) {
  std::vector<std::string> parts;
  std::istringstream in(command);
  std::string part;
  while (in >> part) parts.push_back(part);
  return parts;
}

int run_pipeline_cmd(const GlobalArgs& globals, const std::string& manifest,
                     const std::string& format, const std::string& unit,
                     std::size_t parallelism, bool parallelism_set,
                     const std::string& backend_cmd,
                     const std::string& backend_tcp, int timeout_ms) {
  dsr::PipelineConfig config = effective_config(globals);
  if (parallelism_set) config.parallelism = parallelism;

  const dsr::Corpus corpus = load_corpus(manifest, format, unit);

  std::unique_ptr<dsr::RecognitionBackend> backend;
  if (!backend_cmd.empty() && !backend_tcp.empty()) {
    throw DsrError(ErrorCode::InvalidConfig,
                   "choose one of --backend-cmd and --backend-tcp");
  }
  if (!backend_cmd.empty()) {
    backend = std::make_unique<dsr::ExternalRecognitionBackend>(
        std::make_unique<dsr::SubprocessTransport>(split_command(backend_cmd)),
        timeout_ms);
  } else if (!backend_tcp.empty()) {
    const auto colon = backend_tcp.rfind(':');
    if (colon == std::string::npos) {
      throw DsrError(ErrorCode::InvalidConfig,
                     "--backend-tcp expects HOST:PORT");
    }
    const std::string host = backend_tcp.substr(0, colon);
    const int port = std::stoi(backend_tcp.substr(colon + 1));
    if (port < 1 || port > 65535) {
      throw DsrError(ErrorCode::InvalidConfig, "backend port out of range");
    }
    backend = std::make_unique<dsr::ExternalRecognitionBackend>(
        std::make_unique<dsr::TcpTransport>(host,
                                            static_cast<std::uint16_t>(port)),
        timeout_ms);
  } else {
    backend = std::make_unique<dsr::SimulatedBackend>(
        corpus, config.severity_rates, config.gains, config.master_seed);
  }

  std::vector<std::string> warnings;
  const auto trajectories =
      dsr::run_stepwise(corpus, *backend, config, &warnings);
  print_warnings(warnings);
  write_output(globals.out, dsr::trajectories_to_jsonl(trajectories));

  // Aborted speakers keep their partial trajectories in the output, but the
  // exit code still has to say the backend misbehaved.
  bool any_aborted = false;
  for (const auto& trajectory : trajectories) {
    if (trajectory.error) {
      std::cerr << "error: " << trajectory.speaker_id << ": "
                << *trajectory.error << "\n";
      any_aborted = true;
    }
  }
  return any_aborted ? dsr::exit_code_for(dsr::ErrorCode::StageAborted) : 0;
}

std::vector<dsr::SpeakerTrajectory> read_trajectories(
    const std::string& path) {
  std::vector<dsr::SpeakerTrajectory> trajectories;
  for (const auto& line : read_lines(path)) {
    if (line.empty()) continue;
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DsrError(ErrorCode::InvalidConfig,
                     std::string("trajectory line is not valid json: ") +
                         e.what());
    }
    dsr::SpeakerTrajectory trajectory;
    try {
      trajectory.speaker_id = doc.at("speaker_id").get<std::string>();
      const auto severity =
          dsr::severity_from_string(doc.at("severity").get<std::string>());
      if (!severity) {
        throw DsrError(ErrorCode::InvalidConfig,
                       "trajectory severity is unknown");
      }
      trajectory.severity = *severity;
      for (const auto& stage_doc : doc.at("stages")) {
        dsr::StageRecord record;
        record.setting = dsr::setting_from_string(
            stage_doc.at("setting").get<std::string>());
        record.rate = stage_doc.at("rate").get<double>();
        record.n_utterances = stage_doc.at("n_utterances").get<std::size_t>();
        record.coverage = stage_doc.at("coverage").get<double>();
        if (stage_doc.contains("one_shot_sample") &&
            !stage_doc.at("one_shot_sample").is_null()) {
          record.one_shot_sample =
              stage_doc.at("one_shot_sample").get<std::string>();
        }
        trajectory.stages.push_back(std::move(record));
      }
      if (!doc.at("stopped_at").is_null()) {
        trajectory.stopped_at =
            dsr::setting_from_string(doc.at("stopped_at").get<std::string>());
      }
      if (!doc.at("final_rate").is_null()) {
        trajectory.final_rate = doc.at("final_rate").get<double>();
      }
      for (const auto& name : doc.at("skipped")) {
        trajectory.skipped.push_back(
            dsr::setting_from_string(name.get<std::string>()));
      }
      if (!doc.at("error").is_null()) {
        trajectory.error = doc.at("error").get<std::string>();
      }
    } catch (const nlohmann::json::exception& e) {
      throw DsrError(ErrorCode::InvalidConfig,
                     std::string("trajectory line misses a field: ") +
                         e.what());
    }
    trajectories.push_back(std::move(trajectory));
  }
  return trajectories;
}

std::vector<dsr::Setting> stages_in_data(
    const std::vector<dsr::SpeakerTrajectory>& trajectories) {
  std::vector<dsr::Setting> stages;
  for (dsr::Setting setting :
       {dsr::Setting::Baseline, dsr::Setting::ZeroShotV,
        dsr::Setting::OneShotF1, dsr::Setting::OneShotF2,
        dsr::Setting::AllTestF3}) {
    bool present = false;
    for (const auto& trajectory : trajectories) {
      for (const auto& record : trajectory.stages) {
        present = present || record.setting == setting;
      }
      for (dsr::Setting skipped : trajectory.skipped) {
        present = present || skipped == setting;
      }
    }
    if (present) stages.push_back(setting);
  }
  return stages;
}

int run_report(const GlobalArgs& globals, const std::string& trajectories_path,
               const std::string& style, int precision,
               const std::string& cap_name) {
  const auto trajectories = read_trajectories(trajectories_path);
  if (style == "summary") {
    std::vector<std::string> warnings;
    const dsr::PipelineSummary summary = dsr::summarize(
        trajectories, dsr::setting_from_string(cap_name), &warnings);
    print_warnings(warnings);
    nlohmann::json finals;
    for (const auto& [speaker, rate] : summary.finals) finals[speaker] = rate;
    nlohmann::json doc;
    doc["average_final"] = summary.average_final;
    doc["average_final_pct"] =
        dsr::format_fixed(100.0 * summary.average_final, 3);
    doc["finals"] = std::move(finals);
    write_output(globals.out, doc.dump() + "\n");
    return 0;
  }

  const dsr::TableFormat table_format =
      dsr::table_format_from_string(globals.format);
  const auto stages = stages_in_data(trajectories);
  dsr::ResultsTable table;
  if (style == "severity") {
    table = dsr::severity_stage_table(trajectories, stages, precision);
    try {
      table = dsr::compute_deltas(table, dsr::to_string(dsr::Setting::Baseline));
    } catch (const DsrError& e) {
      if (e.code() != ErrorCode::IncompleteRow) throw;
      std::cerr << "warning: deltas unavailable: " << e.what() << "\n";
    }
  } else if (style == "speaker") {
    table = dsr::speaker_stage_table(trajectories, stages, precision);
  } else {
    throw DsrError(ErrorCode::InvalidConfig,
                   "style must be severity, speaker, or summary");
  }
  write_output(globals.out, dsr::render(table, table_format));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Experiment harness for sentence-level augmentation studies "
               "on simulated or external recognizers"};
  app.require_subcommand(1);

  GlobalArgs globals;
  app.add_option("--config", globals.config_path,
                 "JSON config file (pipeline schema)");
  auto* seed_opt =
      app.add_option("--seed", globals.seed, "Master seed (overrides config)");
  app.add_option("--out", globals.out, "Output file (default stdout)");
  app.add_option("--format", globals.format,
                 "Table format: markdown|csv|json (report command)");

  std::string manifest;
  std::string manifest_format;
  std::string unit = "word";

  auto add_manifest_opts = [&](CLI::App* cmd, bool required) {
    auto* opt = cmd->add_option("--manifest", manifest, "Corpus manifest");
    if (required) opt->required();
    cmd->add_option("--manifest-format", manifest_format,
                    "jsonl|csv (default: by extension)");
    cmd->add_option("--unit", unit, "word|character (default word)");
  };

  auto* load_check = app.add_subcommand(
      "load-check", "Validate a manifest and print corpus facts");
  load_check->fallthrough();
  add_manifest_opts(load_check, true);

  std::string pool_path;
  std::string target_path;
  auto* coverage = app.add_subcommand(
      "coverage", "N-gram coverage of a target text set by a pool");
  coverage->fallthrough();
  coverage->add_option("--pool", pool_path, "Pool text file, one per line")
      ->required();
  coverage->add_option("--target", target_path, "Target text file")
      ->required();
  coverage->add_option("--unit", unit, "word|character");

  std::size_t budget = 1;
  auto* select = app.add_subcommand(
      "select", "Greedy budgeted selection of covering texts");
  select->fallthrough();
  select->add_option("--pool", pool_path, "Candidate text file")->required();
  select->add_option("--target", target_path, "Target text file")->required();
  select->add_option("--budget", budget, "Selection budget")->required();
  select->add_option("--unit", unit, "word|character");

  std::string texts_path;
  int lm_order = 3;
  double smoothing_k = 0.5;
  auto* lm_train =
      app.add_subcommand("lm-train", "Train an additive-smoothed n-gram LM");
  lm_train->fallthrough();
  lm_train->add_option("--texts", texts_path, "Training text file")
      ->required();
  lm_train->add_option("--order", lm_order, "Model order (default 3)");
  lm_train->add_option("--smoothing-k", smoothing_k,
                       "Additive constant (default 0.5)");
  lm_train->add_option("--unit", unit, "word|character");

  std::string lattices_path;
  std::string lm_path;
  double lambda = 0.0;
  std::size_t beam_width = 8;
  bool unbounded_beam = false;
  auto* decode = app.add_subcommand(
      "decode", "Fusion-decode lattice or n-best lines (wire format)");
  decode->fallthrough();
  decode->add_option("--lattices", lattices_path, "Result/nbest JSONL file")
      ->required();
  decode->add_option("--lm", lm_path, "LM JSON (required when lambda > 0)");
  decode->add_option("--lambda", lambda, "Fusion weight (default 0)");
  decode->add_option("--beam", beam_width, "Beam width (default 8)");
  decode->add_flag("--unbounded-beam", unbounded_beam,
                   "Search all paths exactly");

  std::string setting_name = "baseline";
  double sim_coverage = 1.0;
  auto* simulate = app.add_subcommand(
      "simulate", "Emit simulated lattices for a manifest (wire format)");
  simulate->fallthrough();
  add_manifest_opts(simulate, true);
  simulate->add_option("--setting", setting_name,
                       "baseline|v|f1|f2|f3 (default baseline)");
  simulate->add_option("--coverage", sim_coverage,
                       "Adaptation coverage in [0,1] (default 1)");

  std::string ref_path;
  std::string hyp_path;
  auto* align_cmd = app.add_subcommand(
      "align", "Score hypotheses against references (edit distance)");
  align_cmd->fallthrough();
  align_cmd->add_option("--ref", ref_path,
                        "Reference text file (or use --manifest)");
  align_cmd->add_option("--manifest", manifest,
                        "Manifest supplying references and utterance ids");
  align_cmd->add_option("--manifest-format", manifest_format, "jsonl|csv");
  align_cmd->add_option("--hyp", hyp_path, "Hypothesis text file")->required();
  align_cmd->add_option("--unit", unit, "word|character");

  auto* stats = app.add_subcommand("stats", "Aggregate scores or test them");
  stats->fallthrough();
  stats->require_subcommand(1);
  std::string scores_path;
  auto* stats_aggregate = stats->add_subcommand(
      "aggregate", "Speaker/severity/overall aggregation of score lines");
  stats_aggregate->fallthrough();
  stats_aggregate->add_option("--scores", scores_path, "Score JSONL file")
      ->required();
  add_manifest_opts(stats_aggregate, true);

  std::string a_path;
  std::string b_path;
  std::size_t resamples = 10000;
  auto* stats_significance = stats->add_subcommand(
      "significance", "Paired sign-flip permutation test on two score files");
  stats_significance->fallthrough();
  stats_significance->add_option("--a", a_path, "Score JSONL file A")
      ->required();
  stats_significance->add_option("--b", b_path, "Score JSONL file B")
      ->required();
  stats_significance->add_option("--resamples", resamples,
                                 "Permutation count (default 10000)");

  std::size_t parallelism = 1;
  std::string backend_cmd;
  std::string backend_tcp;
  int timeout_ms = 5000;
  auto* run_pipeline = app.add_subcommand(
      "run-pipeline", "Stepwise LOSO experiment over all speakers");
  run_pipeline->fallthrough();
  add_manifest_opts(run_pipeline, true);
  auto* par_opt = run_pipeline->add_option(
      "--parallelism", parallelism, "Worker threads (overrides config)");
  run_pipeline->add_option("--backend-cmd", backend_cmd,
                           "External backend command (space-separated argv)");
  run_pipeline->add_option("--backend-tcp", backend_tcp,
                           "External backend at HOST:PORT");
  run_pipeline->add_option("--timeout-ms", timeout_ms,
                           "Backend response timeout (default 5000)");

  std::string trajectories_path;
  std::string style = "severity";
  int precision = 2;
  std::string cap_name = "f2";
  auto* report = app.add_subcommand(
      "report", "Render trajectory JSONL as tables or a summary");
  report->fallthrough();
  report->add_option("--trajectories", trajectories_path, "Trajectory JSONL")
      ->required();
  report->add_option("--style", style, "severity|speaker|summary");
  report->add_option("--precision", precision,
                     "Cell decimals (default 2; deltas always 2)");
  report->add_option("--cap", cap_name,
                     "Headline cap stage for summaries (default f2)");

  try {
    app.parse(argc, argv);
    globals.seed_set = seed_opt->count() > 0;

    if (*load_check) {
      return run_load_check(globals, manifest, manifest_format, unit);
    }
    if (*coverage) {
      return run_coverage(globals, pool_path, target_path, unit);
    }
    if (*select) {
      return run_select(globals, pool_path, target_path, budget, unit);
    }
    if (*lm_train) {
      return run_lm_train(globals, texts_path, lm_order, smoothing_k, unit);
    }
    if (*decode) {
      return run_decode(globals, lattices_path, lm_path, lambda, beam_width,
                        unbounded_beam);
    }
    if (*simulate) {
      return run_simulate(globals, manifest, manifest_format, unit,
                          setting_name, sim_coverage);
    }
    if (*align_cmd) {
      if (manifest.empty() == ref_path.empty()) {
        throw DsrError(ErrorCode::InvalidConfig,
                       "align needs exactly one of --ref and --manifest");
      }
      return run_align(globals, ref_path, manifest, manifest_format, hyp_path,
                       unit);
    }
    if (*stats_aggregate) {
      return run_stats_aggregate(globals, scores_path, manifest,
                                 manifest_format, unit);
    }
    if (*stats_significance) {
      return run_stats_significance(globals, a_path, b_path, resamples);
    }
    if (*run_pipeline) {
      return run_pipeline_cmd(globals, manifest, manifest_format, unit,
                              parallelism, par_opt->count() > 0, backend_cmd,
                              backend_tcp, timeout_ms);
    }
    if (*report) {
      return run_report(globals, trajectories_path, style, precision,
                        cap_name);
    }
    std::cerr << "error: no subcommand selected\n";
    return 2;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const DsrError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return dsr::exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 4;
  }
}
