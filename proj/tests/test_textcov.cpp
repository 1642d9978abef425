#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "dsr/errors.hpp"
#include "dsr/rng.hpp"
#include "dsr/textcov.hpp"
#include "test_util.hpp"

using dsr::CoverageWeights;
using dsr::ErrorCode;
using dsr::TokenSeq;
using testutil::throws_code;

namespace {

std::vector<TokenSeq> random_texts(dsr::SplitMix64& rng, std::size_t count,
                                   std::size_t max_len,
                                   std::size_t vocab_size) {
  std::vector<TokenSeq> texts;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t len = 1 + rng.next_below(max_len);
    TokenSeq text;
    for (std::size_t j = 0; j < len; ++j) {
      text.push_back("w" + std::to_string(rng.next_below(vocab_size)));
    }
    texts.push_back(std::move(text));
  }
  return texts;
}

}  // namespace

TEST_CASE("greedy selection is within (1-1/e) of the exhaustive optimum") {
  // Random instances small enough to brute-force every subset.
  const double bound = 1.0 - 1.0 / std::exp(1.0);
  dsr::SplitMix64 rng(2024);
  for (int trial = 0; trial < 60; ++trial) {
    const auto candidates = random_texts(rng, 2 + rng.next_below(7), 5, 6);
    const auto target = random_texts(rng, 1 + rng.next_below(3), 6, 6);
    const std::size_t budget = 1 + rng.next_below(4);

    const auto chosen = dsr::select_covering_set(candidates, target, budget);
    std::vector<TokenSeq> picked;
    for (std::size_t index : chosen) picked.push_back(candidates[index]);
    const double greedy = dsr::ngram_coverage(picked, target).combined;
    const double optimal =
        testutil::oracle_best_subset_coverage(candidates, target, budget);

    CHECK(greedy >= bound * optimal - 1e-12);
    CHECK(greedy <= optimal + 1e-12);
  }
}

TEST_CASE("coverage ratios count distinct n-gram types") {
  // target has unigrams {a,b,c} and bigrams {ab,bc}; the pool covers
  // a, b and ab only.
  const std::vector<TokenSeq> target = {{"a", "b", "c"}};
  const std::vector<TokenSeq> pool = {{"a", "b"}, {"b", "a"}};
  const auto report = dsr::ngram_coverage(pool, target);
  CHECK(report.per_order.at(1) == doctest::Approx(2.0 / 3.0));
  CHECK(report.per_order.at(2) == doctest::Approx(0.5));
  CHECK(report.combined == doctest::Approx(0.5 * (2.0 / 3.0) + 0.5 * 0.5));
  CHECK(report.target_ngram_count.at(1) == 3);
  CHECK(report.target_ngram_count.at(2) == 2);
}

TEST_CASE("repeated tokens count once per type") {
  const std::vector<TokenSeq> target = {{"a", "a", "a"}};
  const std::vector<TokenSeq> pool = {{"a"}};
  const auto report = dsr::ngram_coverage(pool, target);
  CHECK(report.per_order.at(1) == doctest::Approx(1.0));
  // the only bigram type "a a" is uncovered
  CHECK(report.per_order.at(2) == doctest::Approx(0.0));
}

TEST_CASE("order with no target n-grams counts as covered") {
  // single-token target has no bigrams at all
  const std::vector<TokenSeq> target = {{"a"}};
  const std::vector<TokenSeq> pool = {};
  const auto report = dsr::ngram_coverage(pool, target);
  CHECK(report.per_order.at(2) == doctest::Approx(1.0));
  CHECK(report.target_ngram_count.at(2) == 0);
  CHECK(report.per_order.at(1) == doctest::Approx(0.0));
}

TEST_CASE("weights are normalized before combining") {
  const std::vector<TokenSeq> target = {{"a", "b"}};
  const std::vector<TokenSeq> pool = {{"a"}};
  CoverageWeights cw;
  cw.orders = {1, 2};
  cw.weights = {3.0, 1.0};  // normalizes to 0.75 / 0.25
  const auto report = dsr::ngram_coverage(pool, target, cw);
  CHECK(report.combined == doctest::Approx(0.75 * 0.5 + 0.25 * 0.0));
}

TEST_CASE("pool covering every target text reaches combined 1") {
  const std::vector<TokenSeq> target = {{"a", "b", "c"}, {"d"}};
  const auto report = dsr::ngram_coverage(target, target);
  CHECK(report.combined == doctest::Approx(1.0));
  for (const auto& [order, ratio] : report.per_order) {
    CHECK(ratio == doctest::Approx(1.0));
  }
}

TEST_CASE("selection prefers the text covering more, ties to lower index") {
  const std::vector<TokenSeq> target = {{"a", "b", "c", "d"}};
  const std::vector<TokenSeq> candidates = {
      {"a"}, {"c", "d"}, {"a", "b"}, {"b", "a"}};
  const auto chosen = dsr::select_covering_set(candidates, target, 2);
  // "c d" and "a b" both gain 2 unigrams + 1 bigram; the tie goes to the
  // lower index, so "c d" is taken first.
  REQUIRE(chosen.size() == 2);
  CHECK(chosen[0] == 1);
  CHECK(chosen[1] == 2);
}

TEST_CASE("selection stops early when nothing more can be gained") {
  const std::vector<TokenSeq> target = {{"a"}};
  const std::vector<TokenSeq> candidates = {{"a"}, {"a"}, {"b"}};
  const auto chosen = dsr::select_covering_set(candidates, target, 3);
  CHECK(chosen == std::vector<std::size_t>{0});
}

TEST_CASE("selecting the target texts themselves is exhaustive coverage") {
  const std::vector<TokenSeq> target = {{"x", "y"}, {"z"}, {"y", "z", "x"}};
  const auto chosen =
      dsr::select_covering_set(target, target, target.size());
  std::vector<TokenSeq> picked;
  for (std::size_t index : chosen) picked.push_back(target[index]);
  CHECK(dsr::ngram_coverage(picked, target).combined == doctest::Approx(1.0));
}

TEST_CASE("coverage input validation") {
  const std::vector<TokenSeq> texts = {{"a"}};
  CHECK(throws_code(ErrorCode::EmptyTarget,
                    [&] { dsr::ngram_coverage(texts, {}); }));
  CHECK(throws_code(ErrorCode::EmptyTarget,
                    [&] { dsr::select_covering_set(texts, {}, 1); }));
  CHECK(throws_code(ErrorCode::EmptyPool,
                    [&] { dsr::select_covering_set({}, texts, 1); }));
  CHECK(throws_code(ErrorCode::InvalidConfig,
                    [&] { dsr::select_covering_set(texts, texts, 0); }));

  CoverageWeights bad;
  bad.orders = {};
  bad.weights = {};
  CHECK(throws_code(ErrorCode::InvalidConfig,
                    [&] { dsr::ngram_coverage(texts, texts, bad); }));
  bad.orders = {1, 2};
  bad.weights = {1.0};
  CHECK(throws_code(ErrorCode::InvalidConfig,
                    [&] { dsr::ngram_coverage(texts, texts, bad); }));
  bad.weights = {1.0, -1.0};
  CHECK(throws_code(ErrorCode::InvalidConfig,
                    [&] { dsr::ngram_coverage(texts, texts, bad); }));
  bad.orders = {0, 1};
  bad.weights = {1.0, 1.0};
  CHECK(throws_code(ErrorCode::InvalidConfig,
                    [&] { dsr::ngram_coverage(texts, texts, bad); }));
}

TEST_CASE("coverage and selection are deterministic") {
  dsr::SplitMix64 rng(99);
  const auto candidates = random_texts(rng, 8, 5, 6);
  const auto target = random_texts(rng, 3, 6, 6);
  const auto first = dsr::select_covering_set(candidates, target, 3);
  const auto second = dsr::select_covering_set(candidates, target, 3);
  CHECK(first == second);
}
