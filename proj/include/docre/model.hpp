#pragma once

// The full relation extraction model: embeddings -> GCNN -> head/tail
// projections -> bi-affine MIL scores, plus the per-document preprocessing
// it consumes.

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "docre/classifier.hpp"
#include "docre/config.hpp"
#include "docre/corpus.hpp"
#include "docre/encoder.hpp"
#include "docre/graph.hpp"

namespace docre {

struct PreparedDocument {
  Document doc;  // entities merged
  std::vector<std::size_t> word_ids;
  DocumentGraph graph;
  MessagePlan plan;
};

struct Dataset {
  std::vector<PreparedDocument> docs;
  std::vector<PairInstance> pairs;

  const PreparedDocument& doc_of(const PairInstance& pair) const { return docs.at(pair.doc_index); }
};

PairOptions pair_options(const TrainConfig& config);
GraphOptions graph_options(const TrainConfig& config);

// Applies entity merging to every document.
std::vector<Document> merge_all(std::vector<Document> docs);

using NamedParameters = std::vector<std::pair<std::string, Var>>;

class Model {
 public:
  Model(TrainConfig config, WordVocab words, EdgeTypeVocabulary edges, RelationVocab relations,
        std::uint64_t seed);

  // Fits the word, edge-type and relation vocabularies on the merged training
  // documents, then initialises parameters from `seed`.
  static Model initialise(const TrainConfig& config, const std::vector<Document>& train_docs,
                          std::uint64_t seed);

  const TrainConfig& config() const noexcept { return config_; }
  const WordVocab& words() const noexcept { return embeddings_.vocab; }
  const EdgeTypeVocabulary& edge_vocab() const noexcept { return edge_vocab_; }
  const RelationVocab& relations() const noexcept { return relations_; }
  const GcnnEncoder& encoder() const noexcept { return encoder_; }
  GcnnEncoder& encoder() noexcept { return encoder_; }

  // Graphs use `graph` options; pairs use the config's pair options.
  Dataset prepare(const std::vector<Document>& merged_docs, const GraphOptions& graph) const;
  Dataset prepare(const std::vector<Document>& merged_docs) const {
    return prepare(merged_docs, graph_options(config_));
  }

  NamedParameters named_parameters() const;
  std::size_t parameter_count() const;

  // Relation scores (rank-1, one per category) for one pair.
  Var forward(Tape& tape, const PreparedDocument& doc, const PairInstance& pair, Rng& rng,
              bool train) const;
  Tensor scores(const PreparedDocument& doc, const PairInstance& pair) const;
  std::size_t predict(const PreparedDocument& doc, const PairInstance& pair) const;

  std::vector<Tensor> parameter_values() const;
  void set_parameter_values(const std::vector<Tensor>& values);
  // Deep copy with independent parameter storage.
  Model clone() const;

  // Replaces the word table, growing the vocabulary with pretrained tokens.
  std::size_t load_embeddings(const std::string& path, Rng& rng);

 private:
  Model() = default;
  Var mention_rows(Tape& tape, const Var& encoded, const std::vector<std::size_t>& tokens,
                   const std::vector<Span>& mentions, std::size_t n) const;

  TrainConfig config_;
  EmbeddingTables embeddings_;
  EdgeTypeVocabulary edge_vocab_;
  RelationVocab relations_;
  GcnnEncoder encoder_;
  ProjectionHeads heads_;
  Var biaffine_;
};

}  // namespace docre
