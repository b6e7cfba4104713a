#pragma once

// Precision/recall/F1 bookkeeping with the intra/inter-sentence breakdown.

#include <cstddef>
#include <string>
#include <vector>

#include "docre/corpus.hpp"
#include "json.hpp"

namespace docre {

struct Counts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  // 0 when undefined.
  double precision() const noexcept;
  double recall() const noexcept;
  double f1() const noexcept;

  // Micro-averaged over non-"no relation" categories: a correct non-zero
  // prediction is a TP, a non-zero prediction on a zero gold is an FP and a
  // non-zero gold predicted as zero or as another category is an FN.
  void add(std::size_t gold, std::size_t predicted) noexcept;

  Counts& operator+=(const Counts& other) noexcept;
  bool operator==(const Counts&) const = default;
};

enum class SentenceScope { Intra, Inter };

const char* scope_name(SentenceScope scope) noexcept;

// Intra when some head token and some tail token share a sentence.
SentenceScope split_intra_inter(const PairInstance& pair, const Document& doc);

struct EvalReport {
  Counts overall;
  Counts intra;
  Counts inter;
  std::size_t pairs = 0;
  std::size_t intra_pairs = 0;
  std::size_t inter_pairs = 0;
  std::string fingerprint;

  void add(SentenceScope scope, std::size_t gold, std::size_t predicted);
  nlohmann::json to_json() const;
  // Aligned-column table with Overall / Intra / Inter rows.
  std::string to_table() const;
};

}  // namespace docre
