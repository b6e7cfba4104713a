#include "docre/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>

#include "docre/error.hpp"
#include "docre/tensor.hpp"

namespace docre {

using nlohmann::json;

namespace {

constexpr std::size_t kNamePool = 40;
const std::vector<std::string> kTriggers = {"converts", "yields", "forms"};
const std::vector<std::string> kNeutralVerbs = {"resembles", "accompanies", "precedes"};

std::string padded(char prefix, std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%04zu", prefix, n);
  return buf;
}

}  // namespace

const std::string* ToyKB::relation(std::size_t head, std::size_t tail) const {
  auto it = std::lower_bound(triples.begin(), triples.end(), std::pair{head, tail},
                             [](const ToyTriple& t, const std::pair<std::size_t, std::size_t>& k) {
                               return std::pair{t.head, t.tail} < k;
                             });
  if (it != triples.end() && it->head == head && it->tail == tail) return &it->relation;
  return nullptr;
}

bool ToyKB::linked(std::size_t a, std::size_t b) const {
  return relation(a, b) != nullptr || relation(b, a) != nullptr;
}

json ToyKB::to_json() const {
  json ents = json::array();
  for (const auto& e : entities) {
    ents.push_back({{"kb_ids", {e.primary_id, e.secondary_id}}, {"name", e.name}, {"alias", e.alias}});
  }
  json trips = json::array();
  for (const auto& t : triples) {
    trips.push_back({{"head", entities[t.head].primary_id},
                     {"tail", entities[t.tail].primary_id},
                     {"relation", t.relation}});
  }
  return {{"entities", std::move(ents)}, {"triples", std::move(trips)}};
}

ToyKB gen_kb(std::size_t n_entities, std::size_t n_triples, std::uint64_t seed,
             const std::vector<std::string>& relations) {
  const std::size_t capacity = n_entities < 2 ? 0 : n_entities * (n_entities - 1);
  if (n_triples > capacity) {
    throw Error(ErrorKind::Config, std::to_string(n_triples) + " triples requested but " +
                                       std::to_string(n_entities) + " entities allow only " +
                                       std::to_string(capacity));
  }
  if (relations.empty()) throw Error(ErrorKind::Config, "knowledge base needs at least one relation label");

  Rng rng(derive_seed(seed, 0));
  ToyKB kb;
  kb.entities.reserve(n_entities);
  for (std::size_t i = 0; i < n_entities; ++i) {
    kb.entities.push_back({padded('K', i), padded('S', i), "chem" + std::to_string(rng.below(kNamePool)),
                           "alias" + std::to_string(i)});
  }

  // Floyd's sampling over the indices of all ordered non-self pairs.
  std::set<std::size_t> picked;
  for (std::size_t j = capacity - n_triples; j < capacity; ++j) {
    const std::size_t v = rng.below(j + 1);
    if (!picked.insert(v).second) picked.insert(j);
  }
  for (std::size_t k : picked) {
    const std::size_t head = k / (n_entities - 1);
    std::size_t tail = k % (n_entities - 1);
    if (tail >= head) ++tail;
    kb.triples.push_back({head, tail, relations[rng.below(relations.size())]});
  }
  // `picked` iterates in index order, which is (head, tail) order.
  return kb;
}

const char* plant_kind_name(PlantKind kind) noexcept {
  switch (kind) {
    case PlantKind::Intra: return "intra";
    case PlantKind::Inter: return "inter";
    case PlantKind::CorefOnly: return "coref_only";
  }
  return "?";
}

namespace {

constexpr std::size_t kNone = static_cast<std::size_t>(-1);

// Sentence under construction. Dependencies form a chain through the root:
// tokens left of the root attach to their right neighbour, tokens right of
// it to their left neighbour.
struct Draft {
  std::vector<std::string> tokens;
  std::vector<std::string> labels;  // label of the arc into each token
  std::size_t root = 0;
  std::vector<std::pair<std::size_t, std::size_t>> mentions;  // (token, entity)
  std::vector<std::pair<std::size_t, std::size_t>> aliases;   // (token, entity)
};

class DocBuilder {
 public:
  DocBuilder(const ToyKB& kb, Rng& rng) : kb_(kb), rng_(rng) {}

  Draft trigger_intra(std::size_t h, std::size_t t) {
    Draft d;
    add_entity(d, h, "nsubj");
    add(d, pick(kTriggers), "");
    add_entity(d, t, "dobj");
    add(d, ".", "punct");
    d.root = 1;
    return d;
  }

  // "h was isolated ." rooted at the entity.
  Draft isolated(std::size_t e) {
    Draft d;
    add_entity(d, e, "");
    add(d, "was", "aux");
    add(d, "isolated", "amod");
    add(d, ".", "punct");
    d.root = 0;
    return d;
  }

  Draft trigger_tail(std::size_t t) {
    Draft d;
    add(d, pick(kTriggers), "");
    add_entity(d, t, "dobj");
    add(d, ".", "punct");
    d.root = 0;
    return d;
  }

  Draft pair_isolated(std::size_t a, std::size_t b) {
    Draft d;
    add_entity(d, a, "nsubj");
    add(d, "and", "cc");
    add_entity(d, b, "conj");
    add(d, "were", "aux");
    add(d, "isolated", "");
    add(d, ".", "punct");
    d.root = 4;
    return d;
  }

  Draft alias_clause(std::size_t aliased, std::size_t object, bool trigger) {
    Draft d;
    d.aliases.emplace_back(0, aliased);
    add(d, kb_.entities[aliased].alias, "nsubj");
    add(d, trigger ? pick(kTriggers) : pick(kNeutralVerbs), "");
    add_entity(d, object, "dobj");
    add(d, ".", "punct");
    d.root = 1;
    return d;
  }

  Draft neutral(std::size_t a, std::size_t b) {
    Draft d;
    add_entity(d, a, "nsubj");
    add(d, pick(kNeutralVerbs), "");
    add_entity(d, b, "dobj");
    add(d, ".", "punct");
    d.root = 1;
    return d;
  }

  Draft detected(std::size_t e) {
    Draft d;
    add(d, "the", "det");
    add_entity(d, e, "nsubj");
    add(d, "was", "aux");
    add(d, "detected", "");
    add(d, ".", "punct");
    d.root = 3;
    return d;
  }

  Draft filler() {
    Draft d;
    add(d, "samples", "nsubj");
    add(d, "were", "aux");
    add(d, "analysed", "");
    add(d, ".", "punct");
    d.root = 2;
    return d;
  }

  // Entity not yet in the document and unrelated in the KB to all of
  // `chosen`, or nothing after a bounded number of draws.
  std::optional<std::size_t> clean_entity(const std::vector<std::size_t>& chosen) {
    for (int attempt = 0; attempt < 200; ++attempt) {
      const std::size_t e = rng_.below(kb_.entities.size());
      bool ok = true;
      for (std::size_t c : chosen) {
        if (c == e || kb_.linked(c, e)) {
          ok = false;
          break;
        }
      }
      if (ok) return e;
    }
    return std::nullopt;
  }

  const std::string& pick(const std::vector<std::string>& words) { return words[rng_.below(words.size())]; }

 private:
  static void add(Draft& d, const std::string& token, const std::string& label) {
    d.tokens.push_back(token);
    d.labels.push_back(label);
  }
  void add_entity(Draft& d, std::size_t e, const std::string& label) {
    d.mentions.emplace_back(d.tokens.size(), e);
    add(d, kb_.entities[e].name, label);
  }

  const ToyKB& kb_;
  Rng& rng_;
};

Document assemble(const ToyKB& kb, const std::string& doc_id, const std::vector<Draft>& drafts,
                  const std::vector<std::size_t>& entities, Rng& rng) {
  Document doc;
  doc.doc_id = doc_id;
  std::map<std::size_t, std::vector<Span>> mention_spans, alias_spans;
  std::vector<std::pair<std::size_t, std::size_t>> mention_order;  // (token, entity)
  for (const auto& d : drafts) {
    const std::size_t base = doc.tokens.size();
    doc.tokens.insert(doc.tokens.end(), d.tokens.begin(), d.tokens.end());
    doc.sentences.push_back({base, base + d.tokens.size()});
    doc.sentence_roots.push_back(base + d.root);
    for (std::size_t i = 0; i < d.tokens.size(); ++i) {
      if (i == d.root) continue;
      const std::size_t head = i < d.root ? i + 1 : i - 1;
      doc.dep_arcs.push_back({base + head, base + i, d.labels[i].empty() ? "dep" : d.labels[i]});
    }
    for (auto [tok, e] : d.mentions) {
      mention_spans[e].push_back({base + tok, base + tok + 1});
      mention_order.emplace_back(base + tok, e);
    }
    for (auto [tok, e] : d.aliases) alias_spans[e].push_back({base + tok, base + tok + 1});
  }

  // KB id forms: some entities are also written with their secondary id, and
  // later mentions may carry only that id, so merging has work to do.
  std::map<std::size_t, bool> uses_secondary;
  for (std::size_t e : entities) uses_secondary[e] = rng.uniform() < 0.3;
  std::set<std::size_t> seen;
  for (auto [tok, e] : mention_order) {
    const auto& ent = kb.entities[e];
    Mention m;
    m.span = {tok, tok + 1};
    m.entity_type = "chemical";
    const bool first = seen.insert(e).second;
    if (!uses_secondary[e]) {
      m.kb_ids = {ent.primary_id};
    } else if (first || rng.uniform() < 0.5) {
      m.kb_ids = {ent.primary_id, ent.secondary_id};
    } else {
      m.kb_ids = {ent.secondary_id};
    }
    m.entity_id = m.kb_ids.front();
    doc.mentions.push_back(std::move(m));
  }

  // Coreference chains: aliases always link to their entity; repeated
  // mentions are linked half of the time.
  for (std::size_t e : entities) {
    std::vector<Span> chain;
    const auto& ms = mention_spans[e];
    const auto alias = alias_spans.find(e);
    if (alias != alias_spans.end()) {
      chain = alias->second;
      if (!ms.empty()) chain.push_back(ms.front());
      if (ms.size() > 1 && rng.uniform() < 0.5) chain.insert(chain.end(), ms.begin() + 1, ms.end());
    } else if (ms.size() > 1 && rng.uniform() < 0.5) {
      chain = ms;
    }
    if (chain.size() < 2) continue;
    std::sort(chain.begin(), chain.end(), [](const Span& a, const Span& b) { return a.begin < b.begin; });
    doc.coref_chains.push_back(std::move(chain));
  }

  for (std::size_t a : entities) {
    for (std::size_t b : entities) {
      if (a == b) continue;
      if (const std::string* rel = kb.relation(a, b)) {
        doc.relations.push_back({kb.entities[a].primary_id, kb.entities[b].primary_id, *rel});
      }
    }
  }
  return doc;
}

}  // namespace

SynthCorpus gen_corpus(const ToyKB& kb, std::size_t n_docs, double pct_inter, double pct_coref_only,
                       std::uint64_t seed) {
  auto in_unit = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!in_unit(pct_inter) || !in_unit(pct_coref_only)) {
    throw Error(ErrorKind::Config, "synthetic corpus percentages must lie in [0, 1]");
  }
  if (pct_coref_only > pct_inter) {
    throw Error(ErrorKind::Config, "pct_coref_only exceeds pct_inter; coreference-only relations are inter-sentence");
  }
  SynthCorpus corpus;
  if (n_docs == 0) return corpus;
  if (kb.triples.empty()) throw Error(ErrorKind::Config, "knowledge base has no triples to plant");

  const auto n_inter = static_cast<std::size_t>(std::llround(pct_inter * static_cast<double>(n_docs)));
  const auto n_coref = static_cast<std::size_t>(std::llround(pct_coref_only * static_cast<double>(n_docs)));
  std::vector<PlantKind> kinds(n_docs, PlantKind::Intra);
  for (std::size_t i = 0; i < n_inter; ++i) kinds[i] = i < n_coref ? PlantKind::CorefOnly : PlantKind::Inter;
  Rng kind_rng(derive_seed(seed, 1));
  kind_rng.shuffle(kinds);

  // Plant triples whose reverse is absent so each document has one positive.
  std::vector<std::size_t> plantable;
  for (std::size_t i = 0; i < kb.triples.size(); ++i) {
    if (!kb.relation(kb.triples[i].tail, kb.triples[i].head)) plantable.push_back(i);
  }
  if (plantable.empty()) {
    for (std::size_t i = 0; i < kb.triples.size(); ++i) plantable.push_back(i);
  }

  const std::uint64_t doc_stream = derive_seed(seed, 2);
  for (std::size_t index = 0; index < n_docs; ++index) {
    Rng rng(derive_seed(doc_stream, index));
    DocBuilder b(kb, rng);
    const ToyTriple& planted = kb.triples[plantable[rng.below(plantable.size())]];
    const std::size_t h = planted.head, t = planted.tail;
    std::vector<std::size_t> entities = {h, t};
    std::vector<std::size_t> distractors;
    auto new_distractor = [&]() -> std::size_t {
      auto e = b.clean_entity(entities);
      if (!e) return kNone;
      entities.push_back(*e);
      distractors.push_back(*e);
      return *e;
    };

    std::vector<Draft> core;
    const PlantKind kind = kinds[index];
    if (kind == PlantKind::Intra) {
      core.push_back(b.trigger_intra(h, t));
    } else if (kind == PlantKind::Inter) {
      core.push_back(b.isolated(h));
      core.push_back(b.trigger_tail(t));
    } else {
      const std::size_t d = new_distractor();
      if (d == kNone) throw Error(ErrorKind::Config, "knowledge base too small for coreference-only documents");
      core.push_back(rng.below(2) == 0 ? b.pair_isolated(h, d) : b.pair_isolated(d, h));
      core.push_back(b.alias_clause(h, t, true));
    }

    std::vector<Draft> extra;
    const std::size_t n_extra = 1 + rng.below(2);
    for (std::size_t k = 0; k < n_extra; ++k) {
      switch (rng.below(5)) {
        case 0: {
          const std::size_t d = new_distractor();
          if (d != kNone) extra.push_back(b.isolated(d));
          break;
        }
        case 1: {
          const std::size_t d = new_distractor();
          const std::size_t e = d == kNone ? kNone : new_distractor();
          if (e != kNone) extra.push_back(b.neutral(d, e));
          break;
        }
        case 2:
          extra.push_back(b.detected(entities[rng.below(entities.size())]));
          break;
        case 3: {
          // Alias of a distractor that is mentioned elsewhere in the document.
          const std::size_t d = distractors.empty() ? new_distractor() : distractors[rng.below(distractors.size())];
          if (d == kNone) break;
          if (std::find_if(extra.begin(), extra.end(), [&](const Draft& x) {
                return std::any_of(x.mentions.begin(), x.mentions.end(), [&](auto m) { return m.second == d; });
              }) == extra.end() &&
              std::none_of(core.begin(), core.end(), [&](const Draft& x) {
                return std::any_of(x.mentions.begin(), x.mentions.end(), [&](auto m) { return m.second == d; });
              })) {
            extra.push_back(b.detected(d));
          }
          const std::size_t e = new_distractor();
          if (e != kNone) extra.push_back(b.alias_clause(d, e, false));
          break;
        }
        default:
          extra.push_back(b.filler());
      }
    }

    // Distractor sentences in random order with the core sentences inserted
    // at random positions; the planted sentences keep their relative order
    // and inter-sentence plants stay adjacent.
    rng.shuffle(extra);
    std::vector<Draft> drafts = std::move(extra);
    if (kind == PlantKind::CorefOnly) {
      const std::size_t i = rng.below(drafts.size() + 1);
      drafts.insert(drafts.begin() + static_cast<std::ptrdiff_t>(i), core[0]);
      const std::size_t j = i + 1 + rng.below(drafts.size() - i);
      drafts.insert(drafts.begin() + static_cast<std::ptrdiff_t>(j), core[1]);
    } else {
      const std::size_t i = rng.below(drafts.size() + 1);
      drafts.insert(drafts.begin() + static_cast<std::ptrdiff_t>(i), core.begin(), core.end());
    }

    char id[48];
    std::snprintf(id, sizeof id, "synth-%05zu", index);
    Document doc = assemble(kb, id, drafts, entities, rng);
    validate(doc);
    corpus.documents.push_back(std::move(doc));
    corpus.truth.push_back({id, kind, kb.entities[h].primary_id, kb.entities[t].primary_id, planted.relation,
                            kind == PlantKind::CorefOnly});
  }
  return corpus;
}

json SynthCorpus::truth_json() const {
  json docs = json::array();
  for (const auto& t : truth) {
    docs.push_back({{"doc_id", t.doc_id},
                    {"kind", plant_kind_name(t.kind)},
                    {"planted", {{"head", t.head}, {"tail", t.tail}, {"relation", t.relation}}},
                    {"coref_dependent", t.coref_dependent}});
  }
  return {{"documents", std::move(docs)}};
}

void SynthCorpus::write(const std::filesystem::path& path) const {
  write_jsonl(path, documents);
  std::filesystem::path sidecar = path;
  sidecar += ".truth.json";
  std::ofstream out(sidecar, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + sidecar.string());
  out << truth_json().dump(2) << '\n';
  if (!out) throw Error(ErrorKind::Io, "failed writing " + sidecar.string());
}

}  // namespace docre
