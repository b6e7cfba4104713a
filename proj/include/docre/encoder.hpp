#pragma once

// Input layer (word + two relative-position embeddings) and the stack of
// labelled-edge GCNN blocks with per-message sigmoid gates and residuals.

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "docre/corpus.hpp"
#include "docre/graph.hpp"
#include "docre/tensor.hpp"

namespace docre {

class WordVocab {
 public:
  static constexpr const char* kUnknown = "<unk>";
  static constexpr std::size_t kUnknownIndex = 0;

  WordVocab() : words_{kUnknown} { index_.emplace(kUnknown, 0); }
  explicit WordVocab(const std::vector<std::string>& words);
  // Every token seen at least `min_count` times, in order of first occurrence.
  static WordVocab from_documents(const std::vector<Document>& docs, std::size_t min_count = 1);

  std::size_t size() const noexcept { return words_.size(); }
  const std::vector<std::string>& words() const noexcept { return words_; }
  std::size_t index_of(const std::string& word) const;  // UNK when absent
  std::size_t add(const std::string& word);
  std::vector<std::size_t> encode(const std::vector<std::string>& tokens) const;

  bool operator==(const WordVocab& other) const { return words_ == other.words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct EmbeddingTables {
  WordVocab vocab;
  Var words;          // |V| x d_w
  Var position_head;  // (2P+1) x d_p
  Var position_tail;  // (2P+1) x d_p
  std::size_t clamp = 64;
};

// Glorot-uniform initialised tables for `vocab`.
EmbeddingTables make_embeddings(WordVocab vocab, std::size_t word_dim, std::size_t position_dim,
                                std::size_t clamp, Rng& rng);

// Reads whitespace-separated "token v1 ... vd" lines. Tokens missing from the
// vocabulary are appended; listed rows overwrite the random initialisation.
// Returns the number of vectors loaded.
std::size_t load_pretrained(EmbeddingTables& tables, const std::filesystem::path& path, Rng& rng);

// Signed offset from `token` to its nearest token in `targets` (minimum
// |offset|, ties resolved to the negative offset), clamped to [-clamp, clamp].
long relative_position(std::size_t token, const std::vector<std::size_t>& targets, std::size_t clamp);

// Rows [word(w_i); pos_head(d1_i); pos_tail(d2_i)] for every token.
Var encode_inputs(Tape& tape, const std::vector<std::size_t>& word_ids, const PairInstance& pair,
                  const EmbeddingTables& tables);

struct SlotParams {
  Var weight;       // d_g x d_g, applied as x_u * W
  Var bias;         // d_g
  Var gate_weight;  // d_g x 1
  Var gate_bias;    // scalar
};

struct GcnnBlock {
  std::map<std::size_t, SlotParams> slots;  // keyed by Slot::id()
};

struct GcnnOptions {
  std::string activation = "relu";
  bool gating = true;
  bool residual = true;
  double dropout = 0.05;
};

struct GcnnEncoder {
  std::optional<Var> input_weight;  // d_in x d_g when d_in != d_g
  std::optional<Var> input_bias;
  std::vector<GcnnBlock> blocks;
};

GcnnEncoder make_gcnn(const EdgeTypeVocabulary& vocab, std::size_t input_dim, std::size_t dim,
                      std::size_t blocks, Rng& rng);

// Messages grouped by parameter slot: slot id -> (sources, targets).
struct MessagePlan {
  struct Group {
    std::vector<std::size_t> sources;
    std::vector<std::size_t> targets;
  };
  std::size_t nodes = 0;
  std::map<std::size_t, Group> groups;
};

// Messages whose slot has no parameters (rare types when the vocabulary has
// no rare bucket) are left out.
MessagePlan plan_messages(const DocumentGraph& graph, const EdgeTypeVocabulary& vocab);

Var gcnn_forward(Tape& tape, const Var& inputs, const MessagePlan& plan, const GcnnEncoder& encoder,
                 const GcnnOptions& options, Rng& rng, bool train);

// Glorot-uniform matrix in +-sqrt(6/(fan_in+fan_out)).
Tensor glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng);

}  // namespace docre
