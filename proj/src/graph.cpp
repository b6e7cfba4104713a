#include "docre/graph.hpp"

#include <algorithm>

#include "docre/error.hpp"

namespace docre {

using nlohmann::json;

const char* kind_name(EdgeKind kind) noexcept {
  switch (kind) {
    case EdgeKind::SyntacticDependency: return "syntactic";
    case EdgeKind::Coreference: return "coreference";
    case EdgeKind::AdjacentSentence: return "adjacent_sentence";
    case EdgeKind::AdjacentWord: return "adjacent_word";
    case EdgeKind::SelfNode: return "self_node";
  }
  return "unknown";
}

EdgeKind parse_edge_kind(const std::string& name) {
  for (EdgeKind k : kAllEdgeKinds) {
    if (name == kind_name(k)) return k;
  }
  throw Error(ErrorKind::Config, "unknown edge category '" + name + "'");
}

KindSet KindSet::of(std::initializer_list<EdgeKind> kinds) {
  KindSet s;
  for (EdgeKind k : kinds) s = s.with(k);
  return s;
}

std::string KindSet::to_string() const {
  std::string out;
  for (EdgeKind k : kAllEdgeKinds) {
    if (!contains(k)) continue;
    if (!out.empty()) out += ',';
    out += kind_name(k);
  }
  return out;
}

std::string EdgeType::name() const {
  if (kind == EdgeKind::SyntacticDependency) return std::string(kind_name(kind)) + ":" + label;
  return kind_name(kind);
}

EdgeType EdgeType::parse(const std::string& name) {
  const auto colon = name.find(':');
  if (colon == std::string::npos) return EdgeType{parse_edge_kind(name), {}};
  return EdgeType{parse_edge_kind(name.substr(0, colon)), name.substr(colon + 1)};
}

// ---- DocumentGraph -----------------------------------------------------------

DocumentGraph::DocumentGraph(std::size_t n, std::vector<Edge> edges)
    : n_(n), edges_(std::move(edges)), incoming_(n) {
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    const Edge& edge = edges_[e];
    if (edge.src >= n_ || edge.dst >= n_) {
      throw Error(ErrorKind::GraphBuild, "edge endpoint outside [0, " + std::to_string(n_) + ")");
    }
    if (edge.type.kind == EdgeKind::SelfNode) {
      incoming_[edge.dst][2].push_back({edge.src, e, Direction::Self});
    } else {
      incoming_[edge.dst][0].push_back({edge.src, e, Direction::Forward});
      incoming_[edge.src][1].push_back({edge.dst, e, Direction::Reverse});
    }
  }
}

const std::vector<Incidence>& DocumentGraph::incoming(std::size_t node, Direction direction) const {
  return incoming_.at(node)[static_cast<std::size_t>(direction)];
}

std::map<EdgeKind, std::size_t> DocumentGraph::count_by_kind() const {
  std::map<EdgeKind, std::size_t> counts;
  for (EdgeKind k : kAllEdgeKinds) counts[k] = 0;
  for (const auto& e : edges_) ++counts[e.type.kind];
  return counts;
}

std::map<EdgeType, std::size_t> DocumentGraph::count_by_type() const {
  std::map<EdgeType, std::size_t> counts;
  for (const auto& e : edges_) ++counts[e.type];
  return counts;
}

DocumentGraph build_graph(const Document& doc, const GraphOptions& options) {
  if (options.enabled.empty()) {
    throw Error(ErrorKind::GraphBuild, "no edge categories enabled for '" + doc.doc_id + "'");
  }
  const std::size_t n = doc.size();
  std::vector<Edge> edges;
  const KindSet& on = options.enabled;

  if (on.contains(EdgeKind::SyntacticDependency)) {
    for (const auto& arc : doc.dep_arcs) {
      edges.push_back({arc.head, arc.dependent, {EdgeKind::SyntacticDependency, arc.label}});
    }
  }
  if (on.contains(EdgeKind::Coreference)) {
    for (const auto& chain : doc.coref_chains) {
      for (std::size_t a = 0; a + 1 < chain.size(); ++a) {
        const std::size_t last = options.coref_clique ? chain.size() : a + 2;
        for (std::size_t b = a + 1; b < last; ++b) {
          edges.push_back({chain[a].begin, chain[b].begin, {EdgeKind::Coreference, {}}});
        }
      }
    }
  }
  if (on.contains(EdgeKind::AdjacentSentence)) {
    if (doc.sentence_roots.size() != doc.sentences.size()) {
      throw Error(ErrorKind::GraphBuild,
                  "adjacent-sentence edges need one root per sentence in '" + doc.doc_id + "'");
    }
    for (std::size_t s = 0; s + 1 < doc.sentences.size(); ++s) {
      edges.push_back({doc.sentence_roots[s], doc.sentence_roots[s + 1],
                       {EdgeKind::AdjacentSentence, {}}});
    }
  }
  if (on.contains(EdgeKind::AdjacentWord)) {
    for (const auto& s : doc.sentences) {
      for (std::size_t i = s.begin; i + 1 < s.end; ++i) {
        edges.push_back({i, i + 1, {EdgeKind::AdjacentWord, {}}});
      }
    }
  }
  if (on.contains(EdgeKind::SelfNode)) {
    for (std::size_t i = 0; i < n; ++i) edges.push_back({i, i, {EdgeKind::SelfNode, {}}});
  }
  return DocumentGraph(n, std::move(edges));
}

std::map<EdgeKind, std::size_t> expected_edge_counts(const Document& doc, bool coref_clique) {
  std::map<EdgeKind, std::size_t> counts;
  counts[EdgeKind::SelfNode] = doc.size();
  std::size_t adjacent_word = 0;
  for (const auto& s : doc.sentences) adjacent_word += s.length() - 1;
  counts[EdgeKind::AdjacentWord] = adjacent_word;
  counts[EdgeKind::AdjacentSentence] = doc.sentences.empty() ? 0 : doc.sentences.size() - 1;
  counts[EdgeKind::SyntacticDependency] = doc.dep_arcs.size();
  std::size_t coref = 0;
  for (const auto& chain : doc.coref_chains) {
    const std::size_t len = chain.size();
    if (len < 2) continue;
    coref += coref_clique ? len * (len - 1) / 2 : len - 1;
  }
  counts[EdgeKind::Coreference] = coref;
  return counts;
}

// ---- EdgeTypeVocabulary ------------------------------------------------------

namespace {

bool rank_before(const EdgeTypeVocabulary::Entry& a, const EdgeTypeVocabulary::Entry& b) {
  if (a.frequency != b.frequency) return a.frequency > b.frequency;
  const std::string ka = kind_name(a.type.kind);
  const std::string kb = kind_name(b.type.kind);
  if (ka != kb) return ka < kb;
  return a.type.label < b.type.label;
}

}  // namespace

EdgeTypeVocabulary EdgeTypeVocabulary::fit(const std::vector<DocumentGraph>& train_graphs,
                                           std::size_t top_n, bool syntactic_only) {
  std::map<EdgeType, std::size_t> freq;
  for (const auto& g : train_graphs) {
    for (const auto& e : g.edges()) ++freq[e.type];
  }
  std::vector<Entry> ranked;
  ranked.reserve(freq.size());
  for (const auto& [type, count] : freq) ranked.push_back({type, count});
  return from_ranked(std::move(ranked), top_n, syntactic_only);
}

EdgeTypeVocabulary EdgeTypeVocabulary::from_ranked(std::vector<Entry> ranked, std::size_t top_n,
                                                   bool syntactic_only) {
  EdgeTypeVocabulary vocab;
  std::sort(ranked.begin(), ranked.end(), rank_before);
  vocab.ranked_ = std::move(ranked);
  vocab.top_n_ = top_n;
  vocab.syntactic_only_ = syntactic_only;
  std::size_t competing = 0;
  std::vector<const Entry*> rare;
  for (const auto& entry : vocab.ranked_) {
    const bool exempt = syntactic_only && entry.type.kind != EdgeKind::SyntacticDependency;
    if (exempt || competing < top_n) {
      vocab.bucket_[entry.type] = vocab.own_count_++;
      if (!exempt) ++competing;
    } else {
      rare.push_back(&entry);
    }
  }
  vocab.has_rare_ = !rare.empty();
  for (const Entry* entry : rare) vocab.bucket_[entry->type] = vocab.own_count_;
  return vocab;
}

std::size_t EdgeTypeVocabulary::bucket_of(const EdgeType& type) const {
  const auto it = bucket_.find(type);
  return it == bucket_.end() ? rare_bucket() : it->second;
}

std::vector<Slot> EdgeTypeVocabulary::active_slots() const {
  std::vector<std::array<bool, 3>> used(bucket_count(), {false, false, false});
  for (const auto& [type, bucket] : bucket_) {
    if (type.kind == EdgeKind::SelfNode) {
      used[bucket][2] = true;
    } else {
      used[bucket][0] = used[bucket][1] = true;
    }
  }
  std::vector<Slot> slots;
  for (std::size_t b = 0; b < used.size(); ++b) {
    for (std::size_t d = 0; d < 3; ++d) {
      if (used[b][d]) slots.push_back({b, static_cast<Direction>(d)});
    }
  }
  return slots;
}

bool EdgeTypeVocabulary::slot_exists(const Slot& slot) const {
  const auto slots = active_slots();
  return std::find(slots.begin(), slots.end(), slot) != slots.end();
}

json EdgeTypeVocabulary::to_json() const {
  json ranked = json::array();
  for (const auto& e : ranked_) {
    ranked.push_back({{"type", e.type.name()}, {"frequency", e.frequency},
                      {"bucket", bucket_of(e.type)}, {"rare", is_rare(e.type)}});
  }
  return {{"top_n", top_n_},
          {"syntactic_only", syntactic_only_},
          {"buckets", bucket_count()},
          {"slots", active_slots().size()},
          {"ranked", std::move(ranked)}};
}

EdgeTypeVocabulary EdgeTypeVocabulary::from_json(const json& j) {
  std::vector<Entry> ranked;
  for (const auto& e : j.at("ranked")) {
    ranked.push_back({EdgeType::parse(e.at("type").get<std::string>()),
                      e.at("frequency").get<std::size_t>()});
  }
  return from_ranked(std::move(ranked), j.at("top_n").get<std::size_t>(),
                     j.value("syntactic_only", false));
}

bool EdgeTypeVocabulary::operator==(const EdgeTypeVocabulary& other) const {
  return bucket_ == other.bucket_ && top_n_ == other.top_n_ && own_count_ == other.own_count_ &&
         has_rare_ == other.has_rare_ && syntactic_only_ == other.syntactic_only_;
}

json graph_report(const Document& doc, const DocumentGraph& graph) {
  json by_kind = json::object();
  for (const auto& [kind, count] : graph.count_by_kind()) by_kind[kind_name(kind)] = count;
  json by_type = json::object();
  for (const auto& [type, count] : graph.count_by_type()) by_type[type.name()] = count;
  return {{"doc_id", doc.doc_id},
          {"tokens", doc.size()},
          {"sentences", doc.sentences.size()},
          {"edges", graph.edges().size()},
          {"by_category", std::move(by_kind)},
          {"by_type", std::move(by_type)}};
}

}  // namespace docre
