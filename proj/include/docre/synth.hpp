#pragma once

// Synthetic distant-supervision corpora: a toy knowledge base of entity
// pairs and template documents whose gold labels come from that KB.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "docre/corpus.hpp"
#include "json.hpp"

namespace docre {

struct ToyEntity {
  std::string primary_id;    // "K0003"
  std::string secondary_id;  // "S0003"; sorts after every primary id
  std::string name;          // surface token, shared by several entities
  std::string alias;         // surface token unique to this entity
};

struct ToyTriple {
  std::size_t head = 0;
  std::size_t tail = 0;
  std::string relation;
  bool operator==(const ToyTriple&) const = default;
};

struct ToyKB {
  std::vector<ToyEntity> entities;
  std::vector<ToyTriple> triples;  // sorted by (head, tail), no self triples

  // Relation label of (head, tail), or empty.
  const std::string* relation(std::size_t head, std::size_t tail) const;
  bool linked(std::size_t a, std::size_t b) const;  // either direction

  nlohmann::json to_json() const;
};

// Samples `n_triples` distinct ordered non-self pairs without replacement.
// Throws ErrorKind::Config when n_triples > n_entities * (n_entities - 1).
ToyKB gen_kb(std::size_t n_entities, std::size_t n_triples, std::uint64_t seed,
             const std::vector<std::string>& relations = {"reaction"});

enum class PlantKind { Intra, Inter, CorefOnly };
const char* plant_kind_name(PlantKind kind) noexcept;

struct PlantedTruth {
  std::string doc_id;
  PlantKind kind = PlantKind::Intra;
  std::string head;  // entity ids after merging
  std::string tail;
  std::string relation;
  bool coref_dependent = false;
};

struct SynthCorpus {
  std::vector<Document> documents;
  std::vector<PlantedTruth> truth;  // one entry per document

  nlohmann::json truth_json() const;
  // Writes the JSONL corpus and a sidecar "<path>.truth.json".
  void write(const std::filesystem::path& path) const;
};

// Each document plants one KB triple. round(pct_inter * n_docs) documents
// state it across two sentences; round(pct_coref_only * n_docs) of those
// only through an alias coreference link, so pct_coref_only may not exceed
// pct_inter. Unrelated distractor entities make the negatives.
SynthCorpus gen_corpus(const ToyKB& kb, std::size_t n_docs, double pct_inter, double pct_coref_only,
                       std::uint64_t seed);

}  // namespace docre
