#include "dsr/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "dsr/errors.hpp"
#include "json.hpp"

namespace dsr {

const char* to_string(Severity s) {
  switch (s) {
    case Severity::Moderate: return "moderate";
    case Severity::Low: return "low";
    case Severity::VeryLow: return "very_low";
    case Severity::Control: return "control";
    case Severity::Unknown: return "unknown";
  }
  return "unknown";
}

std::optional<Severity> severity_from_string(std::string_view s) {
  if (s == "moderate") return Severity::Moderate;
  if (s == "low") return Severity::Low;
  if (s == "very_low") return Severity::VeryLow;
  if (s == "control") return Severity::Control;
  if (s == "unknown") return Severity::Unknown;
  return std::nullopt;
}

const char* to_string(SplitTag t) {
  return t == SplitTag::Train ? "train" : "test";
}

std::optional<SplitTag> split_tag_from_string(std::string_view s) {
  if (s == "train") return SplitTag::Train;
  if (s == "test") return SplitTag::Test;
  return std::nullopt;
}

const char* to_string(LanguageUnit u) {
  return u == LanguageUnit::Word ? "word" : "character";
}

const Utterance* Corpus::find_utterance(const std::string& id) const {
  for (const auto& u : utterances) {
    if (u.id == id) return &u;
  }
  return nullptr;
}

std::vector<const Utterance*> Corpus::utterances_of(const std::string& speaker_id) const {
  std::vector<const Utterance*> out;
  for (const auto& u : utterances) {
    if (u.speaker_id == speaker_id) out.push_back(&u);
  }
  return out;
}

std::vector<std::string> Corpus::vocabulary() const {
  std::set<std::string> types;
  for (const auto& u : utterances) {
    types.insert(u.tokens.begin(), u.tokens.end());
  }
  return {types.begin(), types.end()};
}

std::vector<std::string> Corpus::non_control_speaker_ids() const {
  std::vector<std::string> ids;
  for (const auto& [id, spk] : speakers) {
    if (spk.severity != Severity::Control) ids.push_back(id);
  }
  return ids;  // map iteration is already sorted
}

std::string normalize_text(std::string_view text, const NormalizeOptions& opts) {
  std::string out;
  out.reserve(text.size());
  for (unsigned char c : text) {
    if (opts.strip_punctuation && c < 0x80 && std::ispunct(c)) {
      out.push_back(' ');
    } else if (opts.lowercase && c < 0x80) {
      out.push_back(static_cast<char>(std::tolower(c)));
    } else {
      out.push_back(static_cast<char>(c));
    }
  }
  return out;
}

namespace {

bool is_ascii_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// Length in bytes of the UTF-8 sequence starting at text[i].
std::size_t utf8_len(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xe) return 3;
  if ((lead >> 3) == 0x1e) return 4;
  return 1;  // invalid byte, consume singly
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text, LanguageUnit unit,
                                  bool allow_empty) {
  std::vector<std::string> tokens;
  if (unit == LanguageUnit::Word) {
    std::size_t i = 0;
    while (i < text.size()) {
      while (i < text.size() && is_ascii_space(text[i])) ++i;
      std::size_t start = i;
      while (i < text.size() && !is_ascii_space(text[i])) ++i;
      if (i > start) tokens.emplace_back(text.substr(start, i - start));
    }
  } else {
    std::size_t i = 0;
    while (i < text.size()) {
      if (is_ascii_space(text[i])) {
        ++i;
        continue;
      }
      std::size_t n = std::min(utf8_len(static_cast<unsigned char>(text[i])),
                               text.size() - i);
      tokens.emplace_back(text.substr(i, n));
      i += n;
    }
  }
  if (tokens.empty() && !allow_empty) {
    throw DsrError(ErrorCode::EmptyUtterance, "text tokenizes to nothing");
  }
  return tokens;
}

namespace {

struct ManifestRecord {
  std::string id, speaker_id, text, severity, split;
};

void append_record(Corpus& corpus, const ManifestRecord& rec, const LoadOptions& opts,
                   std::set<std::string>& seen_ids, std::size_t line_no) {
  const std::string where = "record " + std::to_string(line_no);
  if (rec.id.empty()) {
    throw DsrError(ErrorCode::InvalidManifest, where + ": empty \"id\"");
  }
  if (!seen_ids.insert(rec.id).second) {
    throw DsrError(ErrorCode::DuplicateId, where + ": repeated id \"" + rec.id + "\"");
  }
  if (rec.speaker_id.empty()) {
    throw DsrError(ErrorCode::UnknownSpeaker, where + ": empty \"speaker_id\"");
  }
  auto severity = severity_from_string(rec.severity);
  if (!severity) {
    throw DsrError(ErrorCode::InvalidManifest,
                   where + ": bad severity \"" + rec.severity + "\"");
  }
  auto split = split_tag_from_string(rec.split);
  if (!split) {
    throw DsrError(ErrorCode::InvalidManifest, where + ": bad split \"" + rec.split + "\"");
  }

  Utterance utt;
  utt.id = rec.id;
  utt.speaker_id = rec.speaker_id;
  utt.text = normalize_text(rec.text, opts.normalize);
  utt.split = *split;
  try {
    utt.tokens = tokenize(utt.text, opts.unit);
  } catch (const DsrError&) {
    throw DsrError(ErrorCode::EmptyUtterance,
                   where + ": utterance \"" + rec.id + "\" has no tokens");
  }

  auto it = corpus.speakers.find(rec.speaker_id);
  if (it == corpus.speakers.end()) {
    corpus.speakers.emplace(rec.speaker_id,
                            Speaker{rec.speaker_id, *severity, opts.unit});
  } else if (it->second.severity != *severity) {
    throw DsrError(ErrorCode::InvalidManifest,
                   where + ": speaker \"" + rec.speaker_id +
                       "\" listed with conflicting severities");
  }
  corpus.utterances.push_back(std::move(utt));
}

Corpus load_jsonl(std::istream& in, const LoadOptions& opts) {
  Corpus corpus;
  corpus.unit = opts.unit;
  std::set<std::string> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DsrError(ErrorCode::InvalidManifest,
                     "line " + std::to_string(line_no) + ": " + e.what());
    }
    ManifestRecord r;
    for (const char* field : {"id", "speaker_id", "text", "severity", "split"}) {
      if (!rec.contains(field) || !rec[field].is_string()) {
        throw DsrError(ErrorCode::InvalidManifest,
                       "line " + std::to_string(line_no) + ": missing field \"" +
                           field + "\"");
      }
    }
    r.id = rec["id"];
    r.speaker_id = rec["speaker_id"];
    r.text = rec["text"];
    r.severity = rec["severity"];
    r.split = rec["split"];
    append_record(corpus, r, opts, seen_ids, line_no);
  }
  return corpus;
}

// RFC 4180 row reader; handles quoted fields, doubled quotes and embedded
// newlines. Returns false at end of input.
bool read_csv_row(std::istream& in, std::vector<std::string>& fields) {
  fields.clear();
  int c = in.get();
  if (c == EOF) return false;
  std::string field;
  bool quoted = false;
  while (true) {
    if (quoted) {
      if (c == EOF) break;
      if (c == '"') {
        int peek = in.get();
        if (peek == '"') {
          field.push_back('"');
        } else {
          quoted = false;
          c = peek;
          continue;
        }
      } else {
        field.push_back(static_cast<char>(c));
      }
    } else {
      if (c == EOF || c == '\n') break;
      if (c == '\r') {
        int peek = in.peek();
        if (peek == '\n') in.get();
        break;
      }
      if (c == ',') {
        fields.push_back(std::move(field));
        field.clear();
      } else if (c == '"' && field.empty()) {
        quoted = true;
      } else {
        field.push_back(static_cast<char>(c));
      }
    }
    c = in.get();
  }
  fields.push_back(std::move(field));
  return true;
}

Corpus load_csv(std::istream& in, const LoadOptions& opts) {
  Corpus corpus;
  corpus.unit = opts.unit;
  std::vector<std::string> header;
  if (!read_csv_row(in, header)) {
    throw DsrError(ErrorCode::InvalidManifest, "empty CSV manifest");
  }
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const char* field : {"id", "speaker_id", "text", "severity", "split"}) {
    if (!col.count(field)) {
      throw DsrError(ErrorCode::InvalidManifest,
                     std::string("CSV header missing column \"") + field + "\"");
    }
  }
  std::vector<std::string> row;
  std::set<std::string> seen_ids;
  std::size_t line_no = 1;
  while (read_csv_row(in, row)) {
    ++line_no;
    if (row.size() == 1 && row[0].empty()) continue;  // blank line
    if (row.size() != header.size()) {
      throw DsrError(ErrorCode::InvalidManifest,
                     "row " + std::to_string(line_no) + ": expected " +
                         std::to_string(header.size()) + " fields, got " +
                         std::to_string(row.size()));
    }
    ManifestRecord r;
    r.id = row[col["id"]];
    r.speaker_id = row[col["speaker_id"]];
    r.text = row[col["text"]];
    r.severity = row[col["severity"]];
    r.split = row[col["split"]];
    append_record(corpus, r, opts, seen_ids, line_no);
  }
  return corpus;
}

}  // namespace

Corpus load_manifest_stream(std::istream& in, const LoadOptions& opts) {
  return opts.format == ManifestFormat::Jsonl ? load_jsonl(in, opts)
                                              : load_csv(in, opts);
}

Corpus load_manifest(const std::string& path, const LoadOptions& opts) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DsrError(ErrorCode::InvalidManifest, "cannot open manifest: " + path);
  }
  return load_manifest_stream(in, opts);
}

std::vector<LosoSplit> generate_loso_splits(const Corpus& corpus) {
  std::vector<std::string> held = corpus.non_control_speaker_ids();
  if (held.size() < 2) {
    throw DsrError(ErrorCode::InsufficientSpeakers,
                   "LOSO needs at least 2 non-control speakers, have " +
                       std::to_string(held.size()));
  }
  std::vector<LosoSplit> splits;
  splits.reserve(held.size());
  for (const auto& speaker : held) {
    LosoSplit split;
    split.held_out_speaker = speaker;
    for (const auto& u : corpus.utterances) {
      (u.speaker_id == speaker ? split.test_utterances : split.train_utterances)
          .push_back(u.id);
    }
    splits.push_back(std::move(split));
  }
  return splits;
}

}  // namespace dsr
