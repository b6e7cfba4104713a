#include "docre/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "docre/error.hpp"

namespace docre {

using nlohmann::json;

namespace {

[[noreturn]] void parse_fail(std::size_t line_no, const std::string& field, const std::string& why) {
  throw Error(ErrorKind::Parse,
              "line " + std::to_string(line_no) + ", field '" + field + "': " + why);
}

[[noreturn]] void ingest_fail(const std::string& doc_id, const std::string& why) {
  throw Error(ErrorKind::Ingest, "document '" + doc_id + "': " + why);
}

const json& require(const json& obj, const char* key, std::size_t line_no, const std::string& ctx) {
  const auto it = obj.find(key);
  if (it == obj.end()) parse_fail(line_no, ctx + key, "missing");
  return *it;
}

std::size_t as_index(const json& v, std::size_t line_no, const std::string& field) {
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    parse_fail(line_no, field, "expected a non-negative integer");
  }
  return v.get<std::size_t>();
}

std::string as_string(const json& v, std::size_t line_no, const std::string& field) {
  if (!v.is_string()) parse_fail(line_no, field, "expected a string");
  return v.get<std::string>();
}

const json& as_array(const json& v, std::size_t line_no, const std::string& field) {
  if (!v.is_array()) parse_fail(line_no, field, "expected an array");
  return v;
}

Span as_span(const json& v, std::size_t line_no, const std::string& field) {
  if (!v.is_array() || v.size() != 2) parse_fail(line_no, field, "expected [start, end)");
  return Span{as_index(v[0], line_no, field), as_index(v[1], line_no, field)};
}

json span_json(const Span& s) { return json::array({s.begin, s.end}); }

struct UnionFind {
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
  std::vector<std::size_t> parent;
};

}  // namespace

std::size_t Document::sentence_of(std::size_t token) const {
  const auto it = std::upper_bound(sentences.begin(), sentences.end(), token,
                                   [](std::size_t t, const Span& s) { return t < s.end; });
  if (it == sentences.end() || !it->contains(token)) {
    throw Error(ErrorKind::Precondition,
                "token " + std::to_string(token) + " outside the sentences of '" + doc_id + "'");
  }
  return static_cast<std::size_t>(it - sentences.begin());
}

std::vector<std::string> Document::entity_ids() const {
  std::vector<std::pair<std::size_t, std::string>> first;
  std::map<std::string, std::size_t> seen;
  for (const auto& m : mentions) {
    auto [it, inserted] = seen.emplace(m.entity_id, m.span.begin);
    if (!inserted) it->second = std::min(it->second, m.span.begin);
  }
  for (const auto& [id, pos] : seen) first.emplace_back(pos, id);
  std::sort(first.begin(), first.end());
  std::vector<std::string> ids;
  ids.reserve(first.size());
  for (auto& [pos, id] : first) ids.push_back(std::move(id));
  return ids;
}

void validate(const Document& doc) {
  const std::size_t n = doc.size();
  if (n == 0) ingest_fail(doc.doc_id, "no tokens");
  if (doc.sentences.empty()) ingest_fail(doc.doc_id, "no sentences");
  std::size_t expected = 0;
  for (std::size_t s = 0; s < doc.sentences.size(); ++s) {
    const Span& span = doc.sentences[s];
    if (span.begin != expected || span.end <= span.begin) {
      ingest_fail(doc.doc_id, "sentence " + std::to_string(s) +
                                  " does not continue the partition of the tokens");
    }
    expected = span.end;
  }
  if (expected != n) ingest_fail(doc.doc_id, "sentences do not cover all tokens");

  if (!doc.sentence_roots.empty()) {
    if (doc.sentence_roots.size() != doc.sentences.size()) {
      ingest_fail(doc.doc_id, "expected one root per sentence");
    }
    for (std::size_t s = 0; s < doc.sentences.size(); ++s) {
      if (!doc.sentences[s].contains(doc.sentence_roots[s])) {
        ingest_fail(doc.doc_id, "root of sentence " + std::to_string(s) + " lies outside it");
      }
    }
  }
  for (const auto& arc : doc.dep_arcs) {
    if (arc.head >= n || arc.dependent >= n) ingest_fail(doc.doc_id, "dependency arc out of range");
    if (doc.sentence_of(arc.head) != doc.sentence_of(arc.dependent)) {
      ingest_fail(doc.doc_id, "dependency arc " + std::to_string(arc.head) + "->" +
                                  std::to_string(arc.dependent) + " crosses a sentence boundary");
    }
  }
  for (const auto& chain : doc.coref_chains) {
    for (const auto& span : chain) {
      if (span.end <= span.begin || span.end > n) ingest_fail(doc.doc_id, "coreference span out of range");
    }
  }
  std::set<std::string> kb_known;
  std::set<std::string> entities;
  for (const auto& m : doc.mentions) {
    if (m.span.end <= m.span.begin || m.span.end > n) ingest_fail(doc.doc_id, "mention span out of range");
    if (m.kb_ids.empty()) ingest_fail(doc.doc_id, "ungrounded mention");
    kb_known.insert(m.kb_ids.begin(), m.kb_ids.end());
    entities.insert(m.entity_id);
  }
  for (const auto& r : doc.relations) {
    const bool head_ok = entities.count(r.head) || kb_known.count(r.head);
    const bool tail_ok = entities.count(r.tail) || kb_known.count(r.tail);
    if (!head_ok || !tail_ok) {
      ingest_fail(doc.doc_id, "relation " + r.head + "->" + r.tail + " references an unknown entity");
    }
    if (r.head == r.tail) ingest_fail(doc.doc_id, "self relation on " + r.head);
  }
}

std::size_t IngestResult::total_warnings() const {
  std::size_t total = 0;
  for (const auto& s : stats) total += s.dropped_ungrounded_mentions + s.dropped_self_relations;
  return total;
}

Document document_from_json(const json& record, std::size_t line_no, IngestStats* stats) {
  if (!record.is_object()) parse_fail(line_no, "<record>", "expected a JSON object");
  Document doc;
  doc.doc_id = as_string(require(record, "doc_id", line_no, ""), line_no, "doc_id");
  IngestStats local{doc.doc_id};

  for (const auto& t : as_array(require(record, "tokens", line_no, ""), line_no, "tokens")) {
    doc.tokens.push_back(as_string(t, line_no, "tokens"));
  }
  for (const auto& s : as_array(require(record, "sentences", line_no, ""), line_no, "sentences")) {
    doc.sentences.push_back(as_span(s, line_no, "sentences"));
  }
  if (const auto it = record.find("roots"); it != record.end()) {
    for (const auto& r : as_array(*it, line_no, "roots")) {
      doc.sentence_roots.push_back(as_index(r, line_no, "roots"));
    }
  }
  if (const auto it = record.find("deps"); it != record.end()) {
    for (const auto& d : as_array(*it, line_no, "deps")) {
      if (!d.is_array() || d.size() != 3) parse_fail(line_no, "deps", "expected [head, dep, label]");
      doc.dep_arcs.push_back(DepArc{as_index(d[0], line_no, "deps"), as_index(d[1], line_no, "deps"),
                                    as_string(d[2], line_no, "deps")});
    }
  }
  if (const auto it = record.find("coref"); it != record.end()) {
    for (const auto& chain : as_array(*it, line_no, "coref")) {
      std::vector<Span> spans;
      for (const auto& s : as_array(chain, line_no, "coref")) spans.push_back(as_span(s, line_no, "coref"));
      doc.coref_chains.push_back(std::move(spans));
    }
  }
  if (const auto it = record.find("mentions"); it != record.end()) {
    for (const auto& m : as_array(*it, line_no, "mentions")) {
      if (!m.is_object()) parse_fail(line_no, "mentions", "expected an object");
      Mention mention;
      mention.span = as_span(require(m, "span", line_no, "mentions."), line_no, "mentions.span");
      for (const auto& k : as_array(require(m, "kb_ids", line_no, "mentions."), line_no, "mentions.kb_ids")) {
        mention.kb_ids.push_back(as_string(k, line_no, "mentions.kb_ids"));
      }
      if (const auto t = m.find("type"); t != m.end()) {
        mention.entity_type = as_string(*t, line_no, "mentions.type");
      }
      std::sort(mention.kb_ids.begin(), mention.kb_ids.end());
      mention.kb_ids.erase(std::unique(mention.kb_ids.begin(), mention.kb_ids.end()),
                           mention.kb_ids.end());
      if (mention.kb_ids.empty()) {
        ++local.dropped_ungrounded_mentions;
        continue;
      }
      mention.entity_id = mention.kb_ids.front();
      doc.mentions.push_back(std::move(mention));
    }
  }
  if (const auto it = record.find("relations"); it != record.end()) {
    for (const auto& r : as_array(*it, line_no, "relations")) {
      if (!r.is_object()) parse_fail(line_no, "relations", "expected an object");
      Relation rel{as_string(require(r, "head_kb", line_no, "relations."), line_no, "relations.head_kb"),
                   as_string(require(r, "tail_kb", line_no, "relations."), line_no, "relations.tail_kb"),
                   as_string(require(r, "label", line_no, "relations."), line_no, "relations.label")};
      if (rel.head == rel.tail) {
        ++local.dropped_self_relations;
        continue;
      }
      doc.relations.push_back(std::move(rel));
    }
  }
  validate(doc);
  if (stats) *stats = local;
  return doc;
}

json document_to_json(const Document& doc) {
  json out = json::object();
  out["doc_id"] = doc.doc_id;
  out["tokens"] = doc.tokens;
  json sentences = json::array();
  for (const auto& s : doc.sentences) sentences.push_back(span_json(s));
  out["sentences"] = std::move(sentences);
  out["roots"] = doc.sentence_roots;
  json deps = json::array();
  for (const auto& d : doc.dep_arcs) deps.push_back(json::array({d.head, d.dependent, d.label}));
  out["deps"] = std::move(deps);
  json coref = json::array();
  for (const auto& chain : doc.coref_chains) {
    json c = json::array();
    for (const auto& s : chain) c.push_back(span_json(s));
    coref.push_back(std::move(c));
  }
  out["coref"] = std::move(coref);
  json mentions = json::array();
  for (const auto& m : doc.mentions) {
    mentions.push_back({{"span", span_json(m.span)}, {"kb_ids", m.kb_ids}, {"type", m.entity_type}});
  }
  out["mentions"] = std::move(mentions);
  json relations = json::array();
  for (const auto& r : doc.relations) {
    relations.push_back({{"head_kb", r.head}, {"tail_kb", r.tail}, {"label", r.label}});
  }
  out["relations"] = std::move(relations);
  return out;
}

IngestResult ingest_jsonl(std::istream& in) {
  IngestResult result;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      parse_fail(line_no, "<record>", e.what());
    }
    IngestStats stats;
    result.documents.push_back(document_from_json(record, line_no, &stats));
    result.stats.push_back(std::move(stats));
  }
  return result;
}

IngestResult ingest_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open corpus file " + path.string());
  return ingest_jsonl(in);
}

void write_jsonl(std::ostream& out, const std::vector<Document>& docs) {
  for (const auto& doc : docs) out << document_to_json(doc).dump() << '\n';
}

void write_jsonl(const std::filesystem::path& path, const std::vector<Document>& docs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  write_jsonl(out, docs);
}

Document merge_entities(Document doc) {
  const std::size_t m = doc.mentions.size();
  UnionFind groups(m);
  std::map<std::string, std::size_t> owner;  // kb id -> first mention carrying it
  for (std::size_t i = 0; i < m; ++i) {
    for (const auto& kb : doc.mentions[i].kb_ids) {
      auto [it, inserted] = owner.emplace(kb, i);
      if (!inserted) groups.unite(it->second, i);
    }
  }
  std::map<std::size_t, std::string> smallest;  // group root -> smallest kb id
  for (std::size_t i = 0; i < m; ++i) {
    auto& best = smallest[groups.find(i)];
    const auto& candidate = doc.mentions[i].kb_ids.front();
    if (best.empty() || candidate < best) best = candidate;
  }
  for (std::size_t i = 0; i < m; ++i) doc.mentions[i].entity_id = smallest[groups.find(i)];

  auto resolve = [&](const std::string& ref) -> std::string {
    if (const auto it = owner.find(ref); it != owner.end()) return smallest[groups.find(it->second)];
    return ref;
  };
  std::vector<Relation> relations;
  for (auto& r : doc.relations) {
    Relation merged{resolve(r.head), resolve(r.tail), r.label};
    if (merged.head == merged.tail) continue;
    if (std::find(relations.begin(), relations.end(), merged) == relations.end()) {
      relations.push_back(std::move(merged));
    }
  }
  doc.relations = std::move(relations);
  return doc;
}

RelationVocab::RelationVocab(const std::vector<std::string>& labels) : labels_{kNoRelation} {
  for (const auto& l : labels) {
    if (l == kNoRelation) continue;
    if (std::find(labels_.begin(), labels_.end(), l) != labels_.end()) {
      throw Error(ErrorKind::Config, "duplicate relation label '" + l + "'");
    }
    labels_.push_back(l);
  }
}

RelationVocab RelationVocab::from_documents(const std::vector<Document>& docs) {
  std::set<std::string> labels;
  for (const auto& d : docs) {
    for (const auto& r : d.relations) labels.insert(r.label);
  }
  return RelationVocab(std::vector<std::string>(labels.begin(), labels.end()));
}

std::size_t RelationVocab::index_of(const std::string& label) const {
  const auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) throw Error(ErrorKind::Label, "unknown relation label '" + label + "'");
  return static_cast<std::size_t>(it - labels_.begin());
}

std::vector<PairInstance> generate_pairs(const Document& doc, const RelationVocab& relations,
                                         const PairOptions& options, std::size_t doc_index) {
  const auto ids = doc.entity_ids();
  std::map<std::string, std::vector<std::size_t>> tokens;
  std::map<std::string, std::vector<Span>> spans;
  std::map<std::string, std::string> types;
  for (const auto& m : doc.mentions) {
    auto& t = tokens[m.entity_id];
    for (std::size_t i = m.span.begin; i < m.span.end; ++i) t.push_back(i);
    spans[m.entity_id].push_back(m.span);
    types.emplace(m.entity_id, m.entity_type);
  }
  for (auto& [id, t] : tokens) {
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
  }
  auto gold_label = [&](const std::string& h, const std::string& t) -> std::optional<std::size_t> {
    for (const auto& r : doc.relations) {
      if (r.head == h && r.tail == t) return relations.index_of(r.label);
    }
    return std::nullopt;
  };

  std::vector<PairInstance> pairs;
  for (std::size_t a = 0; a < ids.size(); ++a) {
    for (std::size_t b = 0; b < ids.size(); ++b) {
      if (a == b) continue;
      if (options.mode == PairMode::Undirected && b < a) continue;
      const auto& head = ids[a];
      const auto& tail = ids[b];
      if (options.type_constraint && (types[head] != options.type_constraint->first ||
                                      types[tail] != options.type_constraint->second)) {
        continue;
      }
      if (options.filter && !options.filter(doc, head, tail)) continue;
      PairInstance pair;
      pair.doc_id = doc.doc_id;
      pair.doc_index = doc_index;
      pair.head_entity = head;
      pair.tail_entity = tail;
      auto label = gold_label(head, tail);
      if (!label && options.mode == PairMode::Undirected) label = gold_label(tail, head);
      pair.label = label.value_or(0);
      pair.head_tokens = tokens[head];
      pair.tail_tokens = tokens[tail];
      pair.head_mentions = spans[head];
      pair.tail_mentions = spans[tail];
      pairs.push_back(std::move(pair));
    }
  }
  return pairs;
}

}  // namespace docre
