#pragma once

// Document-level labelled multigraph over token indices, and the edge-type
// vocabulary that decides which types get their own parameters.

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "docre/corpus.hpp"
#include "json.hpp"

namespace docre {

enum class EdgeKind : std::uint8_t {
  SyntacticDependency = 0,
  Coreference = 1,
  AdjacentSentence = 2,
  AdjacentWord = 3,
  SelfNode = 4,
};

inline constexpr std::array<EdgeKind, 5> kAllEdgeKinds = {
    EdgeKind::SyntacticDependency, EdgeKind::Coreference, EdgeKind::AdjacentSentence,
    EdgeKind::AdjacentWord, EdgeKind::SelfNode};

// Stable name used for ranking ties, reports and the CLI.
const char* kind_name(EdgeKind kind) noexcept;
EdgeKind parse_edge_kind(const std::string& name);

// Bit set over EdgeKind.
class KindSet {
 public:
  constexpr KindSet() = default;
  static constexpr KindSet all() { return KindSet(0x1f); }
  static KindSet of(std::initializer_list<EdgeKind> kinds);

  bool contains(EdgeKind k) const noexcept { return bits_ & bit(k); }
  bool empty() const noexcept { return bits_ == 0; }
  KindSet with(EdgeKind k) const noexcept { return KindSet(bits_ | bit(k)); }
  KindSet without(EdgeKind k) const noexcept { return KindSet(bits_ & ~bit(k)); }
  std::uint8_t bits() const noexcept { return bits_; }
  std::string to_string() const;
  bool operator==(const KindSet&) const = default;

 private:
  constexpr explicit KindSet(std::uint8_t bits) : bits_(bits) {}
  static constexpr std::uint8_t bit(EdgeKind k) { return std::uint8_t(1u << unsigned(k)); }
  std::uint8_t bits_ = 0;
};

// An edge category; only syntactic dependencies carry a label.
struct EdgeType {
  EdgeKind kind = EdgeKind::SelfNode;
  std::string label;

  std::string name() const;  // e.g. "self_node", "syntactic:nsubj"
  static EdgeType parse(const std::string& name);
  auto operator<=>(const EdgeType&) const = default;
};

struct Edge {
  std::size_t src = 0;
  std::size_t dst = 0;
  EdgeType type;
};

enum class Direction : std::uint8_t { Forward = 0, Reverse = 1, Self = 2 };

// One received message: node `from` sends along `edge` in `direction`.
struct Incidence {
  std::size_t from = 0;
  std::size_t edge = 0;
  Direction direction = Direction::Forward;
};

struct GraphOptions {
  KindSet enabled = KindSet::all();
  // Link every pair of mentions in a coreference chain instead of consecutive ones.
  bool coref_clique = false;
};

class DocumentGraph {
 public:
  DocumentGraph() = default;
  DocumentGraph(std::size_t n, std::vector<Edge> edges);

  std::size_t size() const noexcept { return n_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  // Messages received by `node`, split by traversal direction.
  const std::vector<Incidence>& incoming(std::size_t node, Direction direction) const;

  std::map<EdgeKind, std::size_t> count_by_kind() const;
  std::map<EdgeType, std::size_t> count_by_type() const;

 private:
  std::size_t n_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::array<std::vector<Incidence>, 3>> incoming_;
};

DocumentGraph build_graph(const Document& doc, const GraphOptions& options = {});

// Closed-form per-kind counts for `doc` with every kind enabled.
std::map<EdgeKind, std::size_t> expected_edge_counts(const Document& doc, bool coref_clique = false);

// Parameter slot = (bucket, direction).
struct Slot {
  std::size_t bucket = 0;
  Direction direction = Direction::Forward;

  std::size_t id() const noexcept { return bucket * 3 + static_cast<std::size_t>(direction); }
  auto operator<=>(const Slot&) const = default;
};

class EdgeTypeVocabulary {
 public:
  struct Entry {
    EdgeType type;
    std::size_t frequency = 0;
  };

  EdgeTypeVocabulary() = default;

  // Ranks types by descending training frequency (ties: kind name, then label)
  // and gives the first `top_n` their own bucket. With `syntactic_only`, the
  // four structural kinds always get their own bucket and only syntactic
  // labels compete for the top-N.
  static EdgeTypeVocabulary fit(const std::vector<DocumentGraph>& train_graphs, std::size_t top_n,
                                bool syntactic_only = false);
  static EdgeTypeVocabulary from_ranked(std::vector<Entry> ranked, std::size_t top_n,
                                        bool syntactic_only = false);

  std::size_t top_n() const noexcept { return top_n_; }
  bool syntactic_only() const noexcept { return syntactic_only_; }
  const std::vector<Entry>& ranked() const noexcept { return ranked_; }
  std::size_t own_buckets() const noexcept { return own_count_; }
  bool has_rare() const noexcept { return has_rare_; }
  std::size_t rare_bucket() const noexcept { return own_count_; }
  // own buckets, plus one when any seen type is rare
  std::size_t bucket_count() const noexcept { return own_count_ + (has_rare_ ? 1 : 0); }

  // Unseen and non-top types map to the rare bucket.
  std::size_t bucket_of(const EdgeType& type) const;
  bool is_rare(const EdgeType& type) const { return bucket_of(type) == rare_bucket(); }
  Slot slot_of(const EdgeType& type, Direction direction) const {
    return Slot{bucket_of(type), direction};
  }
  // Slots that receive messages given the seen types, in id order.
  std::vector<Slot> active_slots() const;
  // Whether a slot can carry parameters (rare slots only exist when has_rare()).
  bool slot_exists(const Slot& slot) const;

  nlohmann::json to_json() const;
  static EdgeTypeVocabulary from_json(const nlohmann::json& j);

  bool operator==(const EdgeTypeVocabulary& other) const;

 private:
  std::vector<Entry> ranked_;
  std::map<EdgeType, std::size_t> bucket_;
  std::size_t top_n_ = 0;
  std::size_t own_count_ = 0;
  bool has_rare_ = false;
  bool syntactic_only_ = false;
};

// Per-document audit report used by the build-graph subcommand.
nlohmann::json graph_report(const Document& doc, const DocumentGraph& graph);

}  // namespace docre
