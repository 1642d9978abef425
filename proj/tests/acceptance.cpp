// End-to-end acceptance gate. Each criterion prints exactly one PASS/FAIL
// line; the process exits nonzero when any criterion fails. Library-level
// criteria run in process; the last two drive the installed command line
// tools as real subprocesses.
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dsr/backend.hpp"
#include "dsr/corpus.hpp"
#include "dsr/errors.hpp"
#include "dsr/eval.hpp"
#include "dsr/fusion_decoder.hpp"
#include "dsr/ngram_lm.hpp"
#include "dsr/pipeline.hpp"
#include "dsr/report.hpp"
#include "dsr/rng.hpp"
#include "dsr/textcov.hpp"
#include "json.hpp"
#include "test_util.hpp"

using namespace dsr;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;
};

void fail(Outcome& outcome, const std::string& detail) {
  if (outcome.ok) {
    outcome.ok = false;
    outcome.detail = detail;
  }
}

std::vector<testutil::ManifestRow> synth_rows(int moderate, int low,
                                              int very_low, int controls,
                                              int utts_per_speaker) {
  static const std::vector<std::string> kWords = {
      "the",  "wind", "rose",  "over",  "quiet", "hills", "a",
      "boat", "sail", "past",  "stone", "walls", "light", "rain",
      "fall", "on",   "green", "field", "every", "morning"};
  std::vector<testutil::ManifestRow> rows;
  std::size_t cursor = 0;
  auto add_speaker = [&](const std::string& id, const char* severity) {
    for (int j = 0; j < utts_per_speaker; ++j) {
      const int len = 4 + static_cast<int>(cursor % 5);
      std::string text;
      for (int k = 0; k < len; ++k) {
        if (k != 0) text += ' ';
        text += kWords[(cursor + 7 * static_cast<std::size_t>(k)) %
                       kWords.size()];
      }
      cursor += static_cast<std::size_t>(len) + 1;
      char utt[24];
      std::snprintf(utt, sizeof(utt), "%s-%02d", id.c_str(), j);
      rows.push_back({utt, id, text, severity, j % 2 == 0 ? "test" : "train"});
    }
  };
  char id[16];
  for (int i = 0; i < moderate; ++i) {
    std::snprintf(id, sizeof(id), "m%02d", i);
    add_speaker(id, "moderate");
  }
  for (int i = 0; i < low; ++i) {
    std::snprintf(id, sizeof(id), "l%02d", i);
    add_speaker(id, "low");
  }
  for (int i = 0; i < very_low; ++i) {
    std::snprintf(id, sizeof(id), "v%02d", i);
    add_speaker(id, "very_low");
  }
  for (int i = 0; i < controls; ++i) {
    std::snprintf(id, sizeof(id), "c%02d", i);
    add_speaker(id, "control");
  }
  return rows;
}

// ---- criterion 1 -------------------------------------------------------

Outcome golden_arithmetic() {
  Outcome outcome;
  ResultsTable table;
  table.corner_label = "setting";
  table.columns = {"M", "L", "VL", "AVG"};
  table.add_row("loso", {39.56, 24.60, 6.30, 29.38});
  table.add_row("v", {34.38, 24.40, 6.20, 26.09});
  table.add_row("f1", {33.36, 21.50, 5.85, 25.00});
  table.add_row("f2", {31.06, 20.90, 5.50, 23.40});
  const ResultsTable with = compute_deltas(table, "loso");
  if (format_fixed(with.deltas.at("v"), 2) != "3.29") {
    fail(outcome, "delta for row v rendered as " +
                      format_fixed(with.deltas.at("v"), 2));
  }
  if (format_fixed(with.deltas.at("f2"), 2) != "5.98") {
    fail(outcome, "delta for row f2 rendered as " +
                      format_fixed(with.deltas.at("f2"), 2));
  }
  const std::vector<double> finals = {3.0,  7.1,  7.7,  18.8, 2.8,  1.5,
                                      3.0,  15.3, 14.5, 11.8, 9.6,  18.2,
                                      20.9, 8.7,  13.3, 17.6, 14.6, 17.8,
                                      22.2, 15.5, 63.5, 38.2, 90.9, 32.1};
  const std::string mean = format_fixed(average_final(finals), 3);
  if (mean != "19.525") fail(outcome, "summary mean rendered as " + mean);
  return outcome;
}

// ---- criterion 2 -------------------------------------------------------

Outcome alignment_oracle() {
  Outcome outcome;
  const std::vector<std::string> vocab = {"a", "b", "c"};
  std::vector<TokenSeq> sequences;
  for (std::size_t len = 0; len <= 6; ++len) {
    std::size_t count = 1;
    for (std::size_t i = 0; i < len; ++i) count *= vocab.size();
    for (std::size_t code = 0; code < count; ++code) {
      TokenSeq seq;
      std::size_t rest = code;
      for (std::size_t i = 0; i < len; ++i) {
        seq.push_back(vocab[rest % vocab.size()]);
        rest /= vocab.size();
      }
      sequences.push_back(std::move(seq));
    }
  }

  // The full cross product slightly exceeds the pair cap. Edit distance is
  // symmetric, so among the longest pairs only one orientation is checked.
  std::size_t pairs = 0;
  for (const auto& ref : sequences) {
    for (const auto& hyp : sequences) {
      if (ref.size() == 6 && hyp.size() == 6 && ref > hyp) continue;
      ++pairs;
      const std::size_t got = align(ref, hyp).distance();
      const std::size_t want = testutil::oracle_edit_distance(ref, hyp);
      if (got != want) {
        fail(outcome, "distance mismatch: got " + std::to_string(got) +
                          ", oracle " + std::to_string(want));
        return outcome;
      }
    }
  }
  if (pairs > 1'000'000) {
    fail(outcome, "checked " + std::to_string(pairs) + " pairs, cap 1000000");
  }
  return outcome;
}

// ---- criterion 3 -------------------------------------------------------

Outcome decoder_oracle() {
  Outcome outcome;
  SplitMix64 rng(7);
  const std::vector<std::string> vocab = {"a", "b", "c", "d"};
  const std::vector<double> lambdas = {0.0, 0.3, 0.6, 0.8};
  for (int trial = 0; trial < 1000 && outcome.ok; ++trial) {
    std::vector<TokenSeq> corpus(3 + rng.next_below(6));
    for (auto& sentence : corpus) {
      sentence.resize(1 + rng.next_below(6));
      for (auto& token : sentence) token = vocab[rng.next_below(vocab.size())];
    }
    const NGramLM lm = NGramLM::train(corpus, 3, 0.5);

    Lattice lattice;
    lattice.utterance_id = "t" + std::to_string(trial);
    const std::size_t n_steps = 1 + rng.next_below(5);
    for (std::size_t s = 0; s < n_steps; ++s) {
      LatticeStep step;
      const std::size_t n_cands = 1 + rng.next_below(4);
      std::vector<double> weights(n_cands);
      double sum = 0.0;
      for (auto& w : weights) {
        w = 0.1 + rng.next_unit();
        sum += w;
      }
      for (std::size_t c = 0; c < n_cands; ++c) {
        const bool epsilon = rng.next_below(5) == 0;
        step.candidates.push_back(
            {epsilon ? kEpsilon : vocab[rng.next_below(vocab.size())],
             std::log(weights[c] / sum)});
      }
      lattice.steps.push_back(std::move(step));
    }

    for (double lambda : lambdas) {
      const Hypothesis got =
          decode(lattice, &lm, FusionConfig{lambda, std::nullopt});
      const Hypothesis want = testutil::oracle_decode(lattice, &lm, lambda);
      if (got.total != want.total || got.tokens != want.tokens) {
        fail(outcome, "trial " + std::to_string(trial) + " lambda " +
                          std::to_string(lambda) + ": decoder disagrees with "
                          "exhaustive search");
        break;
      }
    }
  }
  return outcome;
}

// ---- criterion 4 -------------------------------------------------------

Outcome lm_normalization() {
  Outcome outcome;
  SplitMix64 rng(11);
  for (int model = 0; model < 100 && outcome.ok; ++model) {
    const std::size_t vocab_size = 2 + rng.next_below(7);
    std::vector<std::string> vocab(vocab_size);
    for (std::size_t i = 0; i < vocab_size; ++i) {
      vocab[i] = "w" + std::to_string(i);
    }
    std::vector<TokenSeq> corpus(2 + rng.next_below(5));
    for (auto& sentence : corpus) {
      sentence.resize(1 + rng.next_below(6));
      for (auto& token : sentence) token = vocab[rng.next_below(vocab_size)];
    }
    const int order = 1 + static_cast<int>(rng.next_below(4));
    const double k = 0.1 + rng.next_unit();
    const NGramLM lm = NGramLM::train(corpus, order, k);

    std::vector<std::string> events = lm.vocabulary();
    events.push_back(NGramLM::kUnk);
    events.push_back(NGramLM::kEos);

    for (int c = 0; c < 1000; ++c) {
      TokenSeq context(rng.next_below(5));
      for (auto& token : context) {
        token = rng.next_below(4) == 0 ? "zz-oov"
                                       : vocab[rng.next_below(vocab_size)];
      }
      double sum = 0.0;
      for (const auto& event : events) {
        sum += std::exp(lm.score_step(context, event));
      }
      if (std::fabs(sum - 1.0) > 1e-9) {
        fail(outcome, "model " + std::to_string(model) + " context " +
                          std::to_string(c) + " sums to " +
                          std::to_string(sum));
        break;
      }
    }
  }
  return outcome;
}

// ---- criterion 5 -------------------------------------------------------

Outcome stepwise_invariants() {
  Outcome outcome;
  const Corpus corpus =
      testutil::corpus_from_rows(synth_rows(2, 2, 4, 1, 12));
  SimulatedBackend backend(corpus, default_severity_rates(), AdaptationGains{},
                           0);
  PipelineConfig config;  // threshold 0.25, seed 0
  const auto trajectories = run_stepwise(corpus, backend, config);
  if (trajectories.size() != 8) {
    fail(outcome, "expected 8 trajectories, got " +
                      std::to_string(trajectories.size()));
  }

  bool saw_quiet_baseline = false;
  for (const auto& t : trajectories) {
    for (std::size_t i = 0; i < t.stages.size(); ++i) {
      if (t.stages[i].setting != config.stage_order[i]) {
        fail(outcome, t.speaker_id + ": stages are not a prefix of the plan");
      }
    }
    for (std::size_t i = 0; i + 1 < t.stages.size(); ++i) {
      if (t.stages[i].rate < config.threshold) {
        fail(outcome, t.speaker_id + ": continued past a sub-threshold stage");
      }
    }
    if (t.stopped_at) {
      if (t.stages.empty() || *t.stopped_at != t.stages.back().setting ||
          t.stages.back().rate >= config.threshold) {
        fail(outcome, t.speaker_id + ": stop marker contradicts its stages");
      }
    } else if (!t.error && t.stages.size() != config.stage_order.size()) {
      fail(outcome, t.speaker_id + ": unstopped but incomplete");
    }
    if (t.skipped.size() != config.stage_order.size() - t.stages.size()) {
      fail(outcome, t.speaker_id + ": skipped list is not the complement");
    }
    if (!t.stages.empty() && t.stages.front().rate < config.threshold) {
      saw_quiet_baseline = true;
      if (t.stages.size() != 1) {
        fail(outcome,
             t.speaker_id + ": sub-threshold first stage did not stop the run");
      }
    }
  }
  if (!saw_quiet_baseline) {
    fail(outcome, "no speaker finished below threshold at the first stage; "
                  "the stop rule went unexercised");
  }

  const ResultsTable table =
      severity_stage_table(trajectories, config.stage_order);
  const std::string markdown = render(table, TableFormat::Markdown);
  if (markdown.find("---") == std::string::npos ||
      markdown.find("| --- | --- |") == std::string::npos) {
    fail(outcome, "skipped stages did not render as --- placeholders");
  }
  return outcome;
}

// ---- criterion 6 -------------------------------------------------------

Outcome simulated_ordering() {
  Outcome outcome;
  const Corpus corpus =
      testutil::corpus_from_rows(synth_rows(8, 8, 8, 0, 50));
  SimulatedBackend backend(corpus, default_severity_rates(), AdaptationGains{},
                           0);
  PipelineConfig config;
  config.threshold = 0.001;  // practically no early stop, every stage runs
  const auto trajectories = run_stepwise(corpus, backend, config);
  if (trajectories.size() != 24) {
    fail(outcome, "expected 24 trajectories, got " +
                      std::to_string(trajectories.size()));
    return outcome;
  }

  std::map<Severity, std::pair<double, int>> baseline_by_severity;
  std::map<Setting, std::pair<double, int>> rate_by_stage;
  for (const auto& t : trajectories) {
    for (const auto& record : t.stages) {
      if (record.n_utterances < 50) {
        fail(outcome, t.speaker_id + ": only " +
                          std::to_string(record.n_utterances) +
                          " test utterances");
      }
      if (record.setting == Setting::Baseline) {
        auto& [sum, n] = baseline_by_severity[t.severity];
        sum += record.rate;
        n += 1;
      }
      auto& [sum, n] = rate_by_stage[record.setting];
      sum += record.rate;
      n += 1;
    }
  }

  auto mean_of = [](const std::pair<double, int>& cell) {
    return cell.second == 0 ? -1.0 : cell.first / cell.second;
  };
  const double m = mean_of(baseline_by_severity[Severity::Moderate]);
  const double l = mean_of(baseline_by_severity[Severity::Low]);
  const double vl = mean_of(baseline_by_severity[Severity::VeryLow]);
  if (!(m > l && l > vl && vl > 0.0)) {
    fail(outcome, "baseline severity means not strictly ordered: " +
                      std::to_string(m) + " / " + std::to_string(l) + " / " +
                      std::to_string(vl));
  }

  const double s0 = mean_of(rate_by_stage[Setting::Baseline]);
  const double s1 = mean_of(rate_by_stage[Setting::ZeroShotV]);
  const double s2 = mean_of(rate_by_stage[Setting::OneShotF2]);
  const double s3 = mean_of(rate_by_stage[Setting::AllTestF3]);
  if (!(s0 > s1 && s1 > s2 && s2 > s3 && s3 > 0.0)) {
    fail(outcome, "stage means not strictly ordered: " + std::to_string(s0) +
                      " / " + std::to_string(s1) + " / " + std::to_string(s2) +
                      " / " + std::to_string(s3));
  }
  return outcome;
}

// ---- criterion 7 -------------------------------------------------------

Outcome significance_calibration() {
  Outcome outcome;
  SplitMix64 rng(0);
  const std::size_t trials = 1000;
  const std::size_t n_pairs = 20;
  const std::size_t resamples = 2000;
  std::size_t low = 0;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    std::vector<double> a(n_pairs);
    std::vector<double> b(n_pairs);
    for (std::size_t i = 0; i < n_pairs; ++i) {
      a[i] = rng.next_unit();
      b[i] = rng.next_unit();
    }
    const SignificanceResult result =
        paired_permutation_test(a, b, resamples, mix64(0, trial));
    if (result.p_value < 0.05) ++low;
  }
  const double fraction =
      static_cast<double>(low) / static_cast<double>(trials);
  if (fraction < 0.03 || fraction > 0.07) {
    fail(outcome, "null rejection fraction " + std::to_string(fraction) +
                      " outside [0.03, 0.07]");
  }

  std::vector<double> shifted_a(n_pairs);
  std::vector<double> shifted_b(n_pairs);
  for (std::size_t i = 0; i < n_pairs; ++i) {
    shifted_b[i] = rng.next_unit();
    shifted_a[i] = shifted_b[i] + 0.5;
  }
  const SignificanceResult shifted =
      paired_permutation_test(shifted_a, shifted_b, resamples, 0);
  if (!(shifted.p_value <= 0.001)) {
    fail(outcome, "constant shift yielded p = " +
                      std::to_string(shifted.p_value));
  }
  return outcome;
}

// ---- criterion 8 -------------------------------------------------------

Outcome coverage_bound() {
  Outcome outcome;
  SplitMix64 rng(21);
  const std::vector<std::string> vocab = {"a", "b", "c", "d", "e"};
  const double bound = 1.0 - 1.0 / std::exp(1.0);
  for (int instance = 0; instance < 200 && outcome.ok; ++instance) {
    std::vector<TokenSeq> candidates(1 + rng.next_below(10));
    for (auto& sentence : candidates) {
      sentence.resize(1 + rng.next_below(5));
      for (auto& token : sentence) token = vocab[rng.next_below(vocab.size())];
    }
    std::vector<TokenSeq> target(1 + rng.next_below(3));
    for (auto& sentence : target) {
      sentence.resize(1 + rng.next_below(5));
      for (auto& token : sentence) token = vocab[rng.next_below(vocab.size())];
    }
    const std::size_t budget = 1 + rng.next_below(4);

    const auto chosen = select_covering_set(candidates, target, budget, {});
    std::vector<TokenSeq> subset;
    for (std::size_t index : chosen) subset.push_back(candidates[index]);
    const double greedy = ngram_coverage(subset, target, {}).combined;
    const double optimal =
        testutil::oracle_best_subset_coverage(candidates, target, budget, {});
    if (greedy > optimal + 1e-12) {
      fail(outcome, "greedy exceeded the exhaustive optimum");
    }
    if (greedy < bound * optimal - 1e-12) {
      fail(outcome, "instance " + std::to_string(instance) + ": greedy " +
                        std::to_string(greedy) + " under bound of optimal " +
                        std::to_string(optimal));
    }
  }

  // Selecting from the target texts themselves must reach full coverage.
  const std::vector<TokenSeq> target = {{"go", "home", "now"},
                                        {"come", "back", "soon"}};
  const auto chosen =
      select_covering_set(target, target, target.size(), {});
  std::vector<TokenSeq> subset;
  for (std::size_t index : chosen) subset.push_back(target[index]);
  if (ngram_coverage(subset, target, {}).combined != 1.0) {
    fail(outcome, "self-selection fell short of full coverage");
  }
  return outcome;
}

// ---- criteria 9 and 10: the real tools ---------------------------------

#ifndef DSRHARNESS_PATH
#define DSRHARNESS_PATH ""
#endif
#ifndef ECHO_BACKEND_PATH
#define ECHO_BACKEND_PATH ""
#endif

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void spit(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

int run_cli(const std::string& command, const std::string& log_path) {
  const std::string full = command + " >" + log_path + " 2>&1";
  const int status = std::system(full.c_str());
  if (status < 0) return -1;
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  return -2;
}

std::string make_temp_dir() {
  char tmpl[] = "/tmp/dsr-accept-XXXXXX";
  const char* dir = ::mkdtemp(tmpl);
  return dir == nullptr ? std::string() : std::string(dir);
}

Outcome parallel_reproducibility() {
  Outcome outcome;
  const std::string harness = DSRHARNESS_PATH;
  if (harness.empty()) {
    fail(outcome, "harness path was not compiled in");
    return outcome;
  }
  const std::string dir = make_temp_dir();
  if (dir.empty()) {
    fail(outcome, "could not create a temp directory");
    return outcome;
  }
  spit(dir + "/manifest.jsonl",
       testutil::manifest_jsonl(synth_rows(2, 2, 2, 1, 10)));

  const std::string base = harness + " run-pipeline --manifest " + dir +
                           "/manifest.jsonl";
  const int rc1 = run_cli(base + " --parallelism 1 --out " + dir + "/t1.jsonl",
                          dir + "/log1.txt");
  const int rc8 = run_cli(base + " --parallelism 8 --out " + dir + "/t8.jsonl",
                          dir + "/log8.txt");
  if (rc1 != 0 || rc8 != 0) {
    fail(outcome, "pipeline runs exited " + std::to_string(rc1) + " and " +
                      std::to_string(rc8));
    return outcome;
  }
  const std::string serial = slurp(dir + "/t1.jsonl");
  const std::string parallel = slurp(dir + "/t8.jsonl");
  if (serial.empty()) fail(outcome, "serial run produced no trajectories");
  if (serial != parallel) {
    fail(outcome, "parallelism changed the trajectory bytes");
  }
  return outcome;
}

Outcome wire_roundtrip() {
  Outcome outcome;
  const std::string harness = DSRHARNESS_PATH;
  const std::string echo = ECHO_BACKEND_PATH;
  if (harness.empty() || echo.empty()) {
    fail(outcome, "tool paths were not compiled in");
    return outcome;
  }
  const std::string dir = make_temp_dir();
  if (dir.empty()) {
    fail(outcome, "could not create a temp directory");
    return outcome;
  }
  // 5 speakers, 20 utterances each: 100 wire roundtrips in the clean run.
  spit(dir + "/manifest.jsonl",
       testutil::manifest_jsonl(synth_rows(3, 1, 1, 0, 20)));
  const std::string base = harness + " run-pipeline --manifest " + dir +
                           "/manifest.jsonl";

  const int clean_rc =
      run_cli(base + " --backend-cmd '" + echo + "' --out " + dir +
                  "/clean.jsonl",
              dir + "/clean-log.txt");
  if (clean_rc != 0) {
    fail(outcome, "clean echo run exited " + std::to_string(clean_rc));
    return outcome;
  }
  std::istringstream clean(slurp(dir + "/clean.jsonl"));
  std::size_t lines = 0;
  std::size_t utterances = 0;
  for (std::string line; std::getline(clean, line);) {
    ++lines;
    const nlohmann::json doc = nlohmann::json::parse(line);
    if (!doc["error"].is_null()) {
      fail(outcome, "clean run recorded an error for " +
                        doc["speaker_id"].get<std::string>());
    }
    for (const auto& stage : doc["stages"]) {
      if (stage["rate"].get<double>() != 0.0) {
        fail(outcome, "echoed recognition was not error free");
      }
      utterances += stage["n_utterances"].get<std::size_t>();
    }
  }
  if (lines != 5) {
    fail(outcome, "expected 5 trajectories, got " + std::to_string(lines));
  }
  if (utterances != 100) {
    fail(outcome, "expected 100 echoed utterances, saw " +
                      std::to_string(utterances));
  }

  // One deliberately broken response line: that speaker aborts, the other
  // four finish untouched, and the exit code names an aborted stage.
  const int fault_rc =
      run_cli(base + " --backend-cmd '" + echo + " --malform-id m01-07' " +
                  "--out " + dir + "/fault.jsonl",
              dir + "/fault-log.txt");
  if (fault_rc != 3) {
    fail(outcome, "faulted run exited " + std::to_string(fault_rc) +
                      ", expected 3");
  }
  std::istringstream fault(slurp(dir + "/fault.jsonl"));
  std::size_t healthy = 0;
  bool saw_fault = false;
  for (std::string line; std::getline(fault, line);) {
    const nlohmann::json doc = nlohmann::json::parse(line);
    if (doc["speaker_id"] == "m01") {
      saw_fault = true;
      if (doc["error"].is_null() ||
          doc["error"].get<std::string>().find("ProtocolError") ==
              std::string::npos) {
        fail(outcome, "malformed response did not surface a protocol error");
      }
    } else {
      if (!doc["error"].is_null()) {
        fail(outcome, "fault leaked into speaker " +
                          doc["speaker_id"].get<std::string>());
      }
      if (doc["stages"].empty() ||
          doc["stages"][0]["rate"].get<double>() != 0.0) {
        fail(outcome, "healthy speakers no longer echo cleanly");
      }
      ++healthy;
    }
  }
  if (!saw_fault) fail(outcome, "faulted speaker missing from output");
  if (healthy != 4) {
    fail(outcome, "expected 4 healthy speakers, got " +
                      std::to_string(healthy));
  }
  return outcome;
}

struct Criterion {
  int number;
  const char* label;
  std::function<Outcome()> run;
  double budget_seconds;  // 0 means no limit
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "reported deltas and summary mean reproduce exactly",
       golden_arithmetic, 1.0},
      {2, "alignment matches the recursive oracle", alignment_oracle, 60.0},
      {3, "fused decoding matches exhaustive search", decoder_oracle, 30.0},
      {4, "language model rows sum to one", lm_normalization, 0.0},
      {5, "stepwise stopping invariants hold", stepwise_invariants, 0.0},
      {6, "simulated severities and stages order correctly",
       simulated_ordering, 120.0},
      {7, "significance test is calibrated", significance_calibration, 0.0},
      {8, "greedy selection meets its approximation bound", coverage_bound,
       0.0},
      {9, "pipeline output is parallelism-invariant",
       parallel_reproducibility, 0.0},
      {10, "wire backends round-trip and faults stay contained",
       wire_roundtrip, 0.0},
  };

  bool all_ok = true;
  for (const auto& criterion : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = criterion.run();
    } catch (const std::exception& e) {
      fail(outcome, std::string("unexpected exception: ") + e.what());
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    if (outcome.ok && criterion.budget_seconds > 0.0 &&
        elapsed > criterion.budget_seconds) {
      fail(outcome, "took " + std::to_string(elapsed) + "s, budget " +
                        std::to_string(criterion.budget_seconds) + "s");
    }
    if (outcome.ok) {
      std::printf("PASS criterion %d: %s [%.2fs]\n", criterion.number,
                  criterion.label, elapsed);
    } else {
      all_ok = false;
      std::printf("FAIL criterion %d: %s [%.2fs] - %s\n", criterion.number,
                  criterion.label, elapsed, outcome.detail.c_str());
    }
    std::fflush(stdout);
  }
  return all_ok ? 0 : 1;
}
