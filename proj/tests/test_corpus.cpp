#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <functional>
#include <sstream>

#include "doctest.h"
#include "dsr/corpus.hpp"
#include "dsr/errors.hpp"
#include "test_util.hpp"

using dsr::ErrorCode;
using testutil::ManifestRow;
using testutil::throws_code;

TEST_CASE("normalize_text folds case and strips ascii punctuation") {
  CHECK(dsr::normalize_text("Hello, World!", {}) == "hello  world ");
  CHECK(dsr::normalize_text("a-b_c", {}) == "a b c");
  dsr::NormalizeOptions keep;
  keep.lowercase = false;
  keep.strip_punctuation = false;
  CHECK(dsr::normalize_text("Hello, World!", keep) == "Hello, World!");
}

TEST_CASE("normalize_text leaves multibyte sequences alone") {
  const std::string cjk = "\xe4\xbd\xa0\xe5\xa5\xbd";  // two CJK code points
  CHECK(dsr::normalize_text(cjk, {}) == cjk);
}

TEST_CASE("word tokenization splits on whitespace runs") {
  const auto tokens = dsr::tokenize("  open \t the\ndoor ", dsr::LanguageUnit::Word);
  CHECK(tokens == std::vector<std::string>{"open", "the", "door"});
}

TEST_CASE("character tokenization emits one token per code point") {
  const auto tokens =
      dsr::tokenize("\xe4\xbd\xa0 \xe5\xa5\xbd ok", dsr::LanguageUnit::Character);
  REQUIRE(tokens.size() == 4);
  CHECK(tokens[0] == "\xe4\xbd\xa0");
  CHECK(tokens[1] == "\xe5\xa5\xbd");
  CHECK(tokens[2] == "o");
  CHECK(tokens[3] == "k");
}

TEST_CASE("tokenize rejects empty text unless allowed") {
  CHECK(throws_code(ErrorCode::EmptyUtterance,
                    [] { dsr::tokenize("   ", dsr::LanguageUnit::Word); }));
  CHECK(dsr::tokenize("   ", dsr::LanguageUnit::Word, true).empty());
}

TEST_CASE("jsonl manifest loads utterances in file order") {
  const auto corpus = testutil::corpus_from_rows({
      {"u2", "S1", "Open The Door", "moderate", "train"},
      {"u1", "S1", "close it", "moderate", "test"},
      {"u3", "S2", "good day", "control", "test"},
  });
  REQUIRE(corpus.utterances.size() == 3);
  CHECK(corpus.utterances[0].id == "u2");
  CHECK(corpus.utterances[0].tokens ==
        std::vector<std::string>{"open", "the", "door"});
  CHECK(corpus.utterances[0].split == dsr::SplitTag::Train);
  CHECK(corpus.utterances[1].split == dsr::SplitTag::Test);
  REQUIRE(corpus.speakers.size() == 2);
  CHECK(corpus.speakers.at("S1").severity == dsr::Severity::Moderate);
  CHECK(corpus.speakers.at("S2").severity == dsr::Severity::Control);
}

TEST_CASE("csv manifest with quoting matches the jsonl loader") {
  const std::string csv =
      "id,speaker_id,text,severity,split\r\n"
      "u1,S1,\"open, the door\",moderate,test\r\n"
      "u2,S1,\"say \"\"hi\"\"\",moderate,test\r\n";
  std::istringstream in(csv);
  dsr::LoadOptions opts;
  opts.format = dsr::ManifestFormat::Csv;
  const auto corpus = dsr::load_manifest_stream(in, opts);
  REQUIRE(corpus.utterances.size() == 2);
  CHECK(corpus.utterances[0].tokens ==
        std::vector<std::string>{"open", "the", "door"});
  CHECK(corpus.utterances[1].tokens ==
        std::vector<std::string>{"say", "hi"});
}

TEST_CASE("manifest errors carry specific codes") {
  CHECK(throws_code(ErrorCode::DuplicateId, [] {
    testutil::corpus_from_rows({{"u1", "S1", "a", "moderate", "test"},
                                {"u1", "S1", "b", "moderate", "test"}});
  }));
  CHECK(throws_code(ErrorCode::InvalidManifest, [] {
    testutil::corpus_from_rows({{"u1", "S1", "a", "severe", "test"}});
  }));
  CHECK(throws_code(ErrorCode::InvalidManifest, [] {
    testutil::corpus_from_rows({{"u1", "S1", "a", "moderate", "dev"}});
  }));
  CHECK(throws_code(ErrorCode::EmptyUtterance, [] {
    testutil::corpus_from_rows({{"u1", "S1", "...", "moderate", "test"}});
  }));
  CHECK(throws_code(ErrorCode::InvalidManifest, [] {
    // same speaker listed with two severities
    testutil::corpus_from_rows({{"u1", "S1", "a", "moderate", "test"},
                                {"u2", "S1", "b", "low", "test"}});
  }));
  CHECK(throws_code(ErrorCode::InvalidManifest, [] {
    std::istringstream in("{\"id\":\"u1\"}\n");
    dsr::load_manifest_stream(in, {});
  }));
  CHECK(throws_code(ErrorCode::InvalidManifest, [] {
    std::istringstream in("not json\n");
    dsr::load_manifest_stream(in, {});
  }));
}

TEST_CASE("vocabulary is sorted and distinct") {
  const auto corpus = testutil::corpus_from_rows({
      {"u1", "S1", "b a b", "moderate", "test"},
      {"u2", "S2", "c a", "low", "test"},
  });
  CHECK(corpus.vocabulary() == std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("non-control speakers listed sorted, controls excluded") {
  const auto corpus = testutil::corpus_from_rows({
      {"u1", "S3", "a", "control", "test"},
      {"u2", "S1", "b", "low", "test"},
      {"u3", "S2", "c", "moderate", "test"},
  });
  CHECK(corpus.non_control_speaker_ids() ==
        std::vector<std::string>{"S1", "S2"});
}

TEST_CASE("loso splits hold out each non-control speaker once") {
  const auto corpus = testutil::corpus_from_rows({
      {"u1", "S1", "a b", "moderate", "test"},
      {"u2", "S2", "c d", "low", "test"},
      {"u3", "S2", "e", "low", "train"},
      {"u4", "CT", "f", "control", "train"},
  });
  const auto splits = dsr::generate_loso_splits(corpus);
  REQUIRE(splits.size() == 2);
  CHECK(splits[0].held_out_speaker == "S1");
  CHECK(splits[0].test_utterances == std::vector<std::string>{"u1"});
  CHECK(splits[0].train_utterances ==
        std::vector<std::string>{"u2", "u3", "u4"});
  CHECK(splits[1].held_out_speaker == "S2");
  // every utterance of the held-out speaker is test data, split tag or not
  CHECK(splits[1].test_utterances == std::vector<std::string>{"u2", "u3"});
  CHECK(splits[1].train_utterances == std::vector<std::string>{"u1", "u4"});
}

TEST_CASE("loso requires two non-control speakers") {
  const auto corpus = testutil::corpus_from_rows({
      {"u1", "S1", "a", "moderate", "test"},
      {"u2", "CT", "b", "control", "test"},
  });
  CHECK(throws_code(ErrorCode::InsufficientSpeakers,
                    [&] { dsr::generate_loso_splits(corpus); }));
}

TEST_CASE("24-speaker manifest with gapped ids yields 24 splits") {
  std::vector<ManifestRow> rows;
  for (int speaker = 1; speaker <= 26; ++speaker) {
    if (speaker == 22 || speaker == 24) continue;  // ids absent upstream
    char id[3];
    std::snprintf(id, sizeof(id), "%02d", speaker);
    rows.push_back({std::string(id) + "-u1", id, "hello there", "moderate",
                    "test"});
  }
  const auto corpus = testutil::corpus_from_rows(rows);
  CHECK(corpus.speakers.size() == 24);
  CHECK(dsr::generate_loso_splits(corpus).size() == 24);
}

TEST_CASE("find_utterance and utterances_of") {
  const auto corpus = testutil::corpus_from_rows({
      {"u1", "S1", "a", "moderate", "test"},
      {"u2", "S2", "b", "low", "test"},
      {"u3", "S1", "c", "moderate", "test"},
  });
  REQUIRE(corpus.find_utterance("u2") != nullptr);
  CHECK(corpus.find_utterance("u2")->speaker_id == "S2");
  CHECK(corpus.find_utterance("nope") == nullptr);
  const auto of_s1 = corpus.utterances_of("S1");
  REQUIRE(of_s1.size() == 2);
  CHECK(of_s1[0]->id == "u1");
  CHECK(of_s1[1]->id == "u3");
}
