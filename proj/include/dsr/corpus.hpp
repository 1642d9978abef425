#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dsr {

enum class Severity { Moderate, Low, VeryLow, Control, Unknown };
enum class LanguageUnit { Word, Character };
enum class SplitTag { Train, Test };
enum class ManifestFormat { Jsonl, Csv };

// Manifest wire strings: "moderate" | "low" | "very_low" | "control" | "unknown".
const char* to_string(Severity s);
std::optional<Severity> severity_from_string(std::string_view s);
const char* to_string(SplitTag t);
std::optional<SplitTag> split_tag_from_string(std::string_view s);
const char* to_string(LanguageUnit u);

struct Utterance {
  std::string id;
  std::string speaker_id;
  std::string text;  // normalized form
  std::vector<std::string> tokens;
  SplitTag split = SplitTag::Train;
};

struct Speaker {
  std::string id;
  Severity severity = Severity::Unknown;
  LanguageUnit language_unit = LanguageUnit::Word;
};

struct Corpus {
  std::vector<Utterance> utterances;  // manifest order
  std::map<std::string, Speaker> speakers;
  LanguageUnit unit = LanguageUnit::Word;

  const Utterance* find_utterance(const std::string& id) const;
  std::vector<const Utterance*> utterances_of(const std::string& speaker_id) const;
  /// Sorted distinct tokens over the whole corpus.
  std::vector<std::string> vocabulary() const;
  /// Speaker ids with severity != Control, sorted.
  std::vector<std::string> non_control_speaker_ids() const;
};

struct LosoSplit {
  std::string held_out_speaker;
  std::vector<std::string> train_utterances;  // manifest order
  std::vector<std::string> test_utterances;   // manifest order
};

struct NormalizeOptions {
  bool lowercase = true;          // ASCII case folding
  bool strip_punctuation = true;  // ASCII punctuation replaced by a space
};

struct LoadOptions {
  ManifestFormat format = ManifestFormat::Jsonl;
  LanguageUnit unit = LanguageUnit::Word;
  NormalizeOptions normalize;
};

std::string normalize_text(std::string_view text, const NormalizeOptions& opts);

/// Word unit splits on whitespace and drops empties. Character unit emits one
/// token per non-whitespace UTF-8 code point. Throws EmptyUtterance when no
/// token survives, unless allow_empty permits an empty result (alignment
/// references may legitimately be empty).
std::vector<std::string> tokenize(std::string_view text, LanguageUnit unit,
                                  bool allow_empty = false);

Corpus load_manifest(const std::string& path, const LoadOptions& opts);
Corpus load_manifest_stream(std::istream& in, const LoadOptions& opts);

/// One split per non-control speaker, ordered by held-out speaker id. Control
/// speakers contribute to every train side and are never held out.
std::vector<LosoSplit> generate_loso_splits(const Corpus& corpus);

}  // namespace dsr
