#pragma once

// Document data model, JSONL ingest/serialisation and the preprocessing
// rules applied before graph building: KB-ID entity merging, self-relation
// removal and candidate pair generation.

#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace docre {

// Half-open token range [begin, end).
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t length() const noexcept { return end - begin; }
  bool contains(std::size_t token) const noexcept { return token >= begin && token < end; }
  bool operator==(const Span&) const = default;
};

struct DepArc {
  std::size_t head = 0;
  std::size_t dependent = 0;
  std::string label;
  bool operator==(const DepArc&) const = default;
};

struct Mention {
  Span span;
  std::string entity_id;
  std::vector<std::string> kb_ids;  // sorted, unique, non-empty
  std::string entity_type;
  bool operator==(const Mention&) const = default;
};

// Gold relation between two entities. After merging, head/tail hold entity
// ids, which are themselves KB ids.
struct Relation {
  std::string head;
  std::string tail;
  std::string label;
  bool operator==(const Relation&) const = default;
};

struct Document {
  std::string doc_id;
  std::vector<std::string> tokens;
  std::vector<Span> sentences;
  std::vector<std::size_t> sentence_roots;
  std::vector<DepArc> dep_arcs;
  std::vector<std::vector<Span>> coref_chains;
  std::vector<Mention> mentions;
  std::vector<Relation> relations;

  std::size_t size() const noexcept { return tokens.size(); }
  // Sentence index containing `token`.
  std::size_t sentence_of(std::size_t token) const;
  // Distinct entity ids in order of first mention.
  std::vector<std::string> entity_ids() const;

  bool operator==(const Document&) const = default;
};

// Throws ErrorKind::Ingest naming the document when an invariant fails.
void validate(const Document& doc);

struct IngestStats {
  std::string doc_id;
  std::size_t dropped_ungrounded_mentions = 0;
  std::size_t dropped_self_relations = 0;
};

struct IngestResult {
  std::vector<Document> documents;
  std::vector<IngestStats> stats;  // one entry per document

  std::size_t total_warnings() const;
};

Document document_from_json(const nlohmann::json& record, std::size_t line_no,
                            IngestStats* stats = nullptr);
nlohmann::json document_to_json(const Document& doc);

IngestResult ingest_jsonl(std::istream& in);
IngestResult ingest_jsonl(const std::filesystem::path& path);
void write_jsonl(std::ostream& out, const std::vector<Document>& docs);
void write_jsonl(const std::filesystem::path& path, const std::vector<Document>& docs);

// Groups mentions by the transitive closure of shared KB ids; each group's
// entity id becomes its lexicographically smallest KB id. Relations are
// rewritten to entity ids and relations whose two ends collapse onto one
// entity are removed. Idempotent.
Document merge_entities(Document doc);

// Relation label vocabulary; index 0 is always "no relation".
class RelationVocab {
 public:
  static constexpr const char* kNoRelation = "NA";

  RelationVocab() : labels_{kNoRelation} {}
  explicit RelationVocab(const std::vector<std::string>& labels);
  // Sorted distinct labels found in the gold relations of `docs`.
  static RelationVocab from_documents(const std::vector<Document>& docs);

  std::size_t size() const noexcept { return labels_.size(); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const std::string& label(std::size_t index) const { return labels_.at(index); }
  // Throws ErrorKind::Label for unknown labels.
  std::size_t index_of(const std::string& label) const;

  bool operator==(const RelationVocab&) const = default;

 private:
  std::vector<std::string> labels_;
};

struct PairInstance {
  std::string doc_id;
  std::size_t doc_index = 0;  // position in the owning corpus
  std::string head_entity;
  std::string tail_entity;
  std::size_t label = 0;
  std::vector<std::size_t> head_tokens;  // sorted, unique
  std::vector<std::size_t> tail_tokens;
  // Mention spans, for the per-mention pooling variant.
  std::vector<Span> head_mentions;
  std::vector<Span> tail_mentions;
};

enum class PairMode { Undirected, Bidirectional };

using PairFilter = std::function<bool(const Document&, const std::string& head,
                                      const std::string& tail)>;

struct PairOptions {
  PairMode mode = PairMode::Bidirectional;
  // When set, only pairs whose head/tail entity types match are produced.
  std::optional<std::pair<std::string, std::string>> type_constraint;
  // Returns true to keep a pair. Default keeps everything.
  PairFilter filter;
};

// Candidate pairs over the merged entities of `doc`.
std::vector<PairInstance> generate_pairs(const Document& doc, const RelationVocab& relations,
                                         const PairOptions& options, std::size_t doc_index = 0);

}  // namespace docre
