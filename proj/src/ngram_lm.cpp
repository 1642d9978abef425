#include "dsr/ngram_lm.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "dsr/errors.hpp"
#include "json.hpp"

namespace dsr {
namespace {

bool is_reserved(const std::string& token) {
  return token == NGramLM::kUnk || token == NGramLM::kBos ||
         token == NGramLM::kEos;
}

// Space-joined context key. Tokens are whitespace-free after tokenization,
// and reserved markers contain no spaces, so the join is unambiguous.
std::string join_context(const std::vector<std::string>& padded,
                         std::size_t begin, std::size_t end) {
  std::string key;
  for (std::size_t i = begin; i < end; ++i) {
    if (!key.empty()) key.push_back(' ');
    key += padded[i];
  }
  return key;
}

}  // namespace

NGramLM NGramLM::train(const std::vector<TokenSeq>& texts, int order,
                       double smoothing_k) {
  if (texts.empty()) {
    throw DsrError(ErrorCode::EmptyCorpus, "lm training corpus is empty");
  }
  if (order < 1) {
    throw DsrError(ErrorCode::InvalidConfig, "lm order must be >= 1");
  }
  if (!(smoothing_k > 0.0) || !std::isfinite(smoothing_k)) {
    throw DsrError(ErrorCode::InvalidConfig, "lm smoothing_k must be > 0");
  }

  NGramLM lm;
  lm.order_ = order;
  lm.smoothing_k_ = smoothing_k;

  std::set<std::string> vocab;
  for (const auto& text : texts) {
    for (const auto& token : text) {
      // A literal reserved string in the data folds into <unk> rather than
      // colliding with the marker event.
      if (!is_reserved(token)) vocab.insert(token);
    }
  }
  lm.vocab_.assign(vocab.begin(), vocab.end());
  lm.vocab_set_.insert(lm.vocab_.begin(), lm.vocab_.end());

  const std::size_t ctx = static_cast<std::size_t>(order) - 1;
  for (const auto& text : texts) {
    std::vector<std::string> padded(ctx, kBos);
    padded.reserve(ctx + text.size() + 1);
    for (const auto& token : text) padded.push_back(lm.map_token(token));
    padded.push_back(kEos);
    for (std::size_t i = ctx; i < padded.size(); ++i) {
      std::string key = join_context(padded, i - ctx, i);
      lm.counts_[key][padded[i]] += 1;
      lm.context_totals_[key] += 1;
    }
  }
  return lm;
}

const std::string& NGramLM::map_token(const std::string& token) const {
  static const std::string unk = kUnk;
  static const std::string eos = kEos;
  if (token == kEos) return eos;
  if (vocab_set_.count(token) != 0) return token;
  return unk;
}

std::string NGramLM::context_key(const TokenSeq& context) const {
  const std::size_t ctx = static_cast<std::size_t>(order_) - 1;
  std::vector<std::string> padded;
  padded.reserve(ctx);
  // Keep only the most recent order-1 tokens, left-padding with <s>.
  const std::size_t have = context.size() > ctx ? ctx : context.size();
  for (std::size_t i = 0; i < ctx - have; ++i) padded.push_back(kBos);
  for (std::size_t i = context.size() - have; i < context.size(); ++i) {
    padded.push_back(map_token(context[i]));
  }
  return join_context(padded, 0, padded.size());
}

double NGramLM::score_step(const TokenSeq& context,
                           const std::string& token) const {
  const std::string key = context_key(context);
  const std::string& event = map_token(token);
  std::uint64_t c = 0;
  auto it = counts_.find(key);
  if (it != counts_.end()) {
    auto jt = it->second.find(event);
    if (jt != it->second.end()) c = jt->second;
  }
  std::uint64_t total = 0;
  auto tt = context_totals_.find(key);
  if (tt != context_totals_.end()) total = tt->second;
  const double v = static_cast<double>(event_count());
  return std::log((static_cast<double>(c) + smoothing_k_) /
                  (static_cast<double>(total) + smoothing_k_ * v));
}

double NGramLM::logprob(const TokenSeq& tokens) const {
  double sum = 0.0;
  TokenSeq context;
  context.reserve(tokens.size());
  for (const auto& token : tokens) {
    sum += score_step(context, token);
    context.push_back(token);
  }
  sum += score_step(context, kEos);
  return sum;
}

std::string NGramLM::to_json() const {
  nlohmann::ordered_json doc;  // insertion order below is already sorted
  nlohmann::ordered_json counts = nlohmann::ordered_json::object();
  for (const auto& [key, events] : counts_) {
    nlohmann::ordered_json row = nlohmann::ordered_json::object();
    for (const auto& [event, count] : events) row[event] = count;
    counts[key] = std::move(row);
  }
  doc["counts"] = std::move(counts);
  doc["order"] = order_;
  doc["smoothing_k"] = smoothing_k_;
  doc["version"] = 1;
  doc["vocab"] = vocab_;
  return doc.dump();
}

NGramLM NGramLM::from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DsrError(ErrorCode::InvalidConfig,
                   std::string("lm document is not valid json: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("version") ||
      doc["version"] != 1 || !doc.contains("counts") ||
      !doc.contains("order") || !doc.contains("smoothing_k") ||
      !doc.contains("vocab")) {
    throw DsrError(ErrorCode::InvalidConfig, "lm document missing fields");
  }
  NGramLM lm;
  lm.order_ = doc["order"].get<int>();
  lm.smoothing_k_ = doc["smoothing_k"].get<double>();
  if (lm.order_ < 1 || !(lm.smoothing_k_ > 0.0)) {
    throw DsrError(ErrorCode::InvalidConfig, "lm document has invalid params");
  }
  lm.vocab_ = doc["vocab"].get<std::vector<std::string>>();
  if (!std::is_sorted(lm.vocab_.begin(), lm.vocab_.end())) {
    throw DsrError(ErrorCode::InvalidConfig, "lm vocab must be sorted");
  }
  lm.vocab_set_.insert(lm.vocab_.begin(), lm.vocab_.end());
  for (const auto& [key, events] : doc["counts"].items()) {
    std::uint64_t total = 0;
    for (const auto& [event, count] : events.items()) {
      const std::uint64_t c = count.get<std::uint64_t>();
      lm.counts_[key][event] = c;
      total += c;
    }
    lm.context_totals_[key] = total;
  }
  return lm;
}

}  // namespace dsr
