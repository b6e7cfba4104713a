#pragma once

// Shared fixtures, oracles and random generators for the test binaries.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "docre/config.hpp"
#include "docre/corpus.hpp"
#include "docre/model.hpp"
#include "docre/tensor.hpp"

namespace docre::testing {

// Two sentences of three tokens: "A B C" and "D E F", roots B and E, four
// dependency arcs, one coreference chain {A, D}. A and D are both mentions of
// K1, F is K2, C is K3; K1 -> K2 is the only gold relation.
inline Document six_token_doc() {
  Document d;
  d.doc_id = "six";
  d.tokens = {"A", "B", "C", "D", "E", "F"};
  d.sentences = {{0, 3}, {3, 6}};
  d.sentence_roots = {1, 4};
  d.dep_arcs = {{1, 0, "nsubj"}, {1, 2, "dobj"}, {4, 3, "nsubj"}, {4, 5, "dobj"}};
  d.coref_chains = {{{0, 1}, {3, 4}}};
  d.mentions = {{{0, 1}, "K1", {"K1"}, "chemical"},
                {{2, 3}, "K3", {"K3"}, "chemical"},
                {{3, 4}, "K1", {"K1"}, "chemical"},
                {{5, 6}, "K2", {"K2"}, "chemical"}};
  d.relations = {{"K1", "K2", "reaction"}};
  return d;
}

// Hand-labelled evaluation fixture: five entities over three sentences,
// undirected pairs (10 of them), labels {NA, inhibits, reaction}.
//   S0 "E1 x E2 ."   S1 "E3 y E1 ."   S2 "E4 z E5 ."
inline Document ten_pair_doc() {
  Document d;
  d.doc_id = "ten";
  d.tokens = {"E1", "x", "E2", ".", "E3", "y", "E1", ".", "E4", "z", "E5", "."};
  d.sentences = {{0, 4}, {4, 8}, {8, 12}};
  d.sentence_roots = {1, 5, 9};
  d.dep_arcs = {{1, 0, "nsubj"}, {1, 2, "dobj"}, {5, 4, "nsubj"}, {5, 6, "dobj"}, {9, 8, "nsubj"}, {9, 10, "dobj"}};
  auto m = [](std::size_t t, const char* id) { return Mention{{t, t + 1}, id, {id}, "chemical"}; };
  d.mentions = {m(0, "E1"), m(2, "E2"), m(4, "E3"), m(6, "E1"), m(8, "E4"), m(10, "E5")};
  d.relations = {{"E1", "E2", "reaction"}, {"E3", "E1", "inhibits"}, {"E1", "E4", "reaction"},
                 {"E3", "E4", "inhibits"}, {"E4", "E5", "reaction"}};
  return d;
}

// Hand-made predictions for ten_pair_doc, keyed by the unordered entity pair
// (0 = NA, 1 = inhibits, 2 = reaction). Tally by hand:
//   intra (E1,E2) gold 2 pred 2 TP | (E1,E3) gold 1 pred 2 FN | (E4,E5) gold 2 pred 2 TP
//   inter (E1,E4) gold 2 pred 0 FN | (E1,E5) gold 0 pred 2 FP | (E2,E3) 0/0
//         (E2,E4) gold 0 pred 1 FP | (E2,E5) 0/0 | (E3,E4) gold 1 pred 1 TP | (E3,E5) 0/0
//   overall TP 3 FP 2 FN 2; intra TP 2 FP 0 FN 1; inter TP 1 FP 2 FN 1
inline std::size_t ten_pair_prediction(std::string a, std::string b) {
  if (b < a) std::swap(a, b);
  const std::map<std::pair<std::string, std::string>, std::size_t> table = {
      {{"E1", "E2"}, 2}, {{"E1", "E3"}, 2}, {{"E1", "E4"}, 0}, {{"E1", "E5"}, 2}, {{"E2", "E3"}, 0},
      {{"E2", "E4"}, 1}, {{"E2", "E5"}, 0}, {{"E3", "E4"}, 1}, {{"E3", "E5"}, 0}, {{"E4", "E5"}, 2}};
  return table.at({a, b});
}

// Small dimensions so finite differences over every parameter stay cheap.
inline TrainConfig tiny_config() {
  TrainConfig c;
  c.word_dimension = 4;
  c.position_dimension = 2;
  c.gcnn_dimension = 5;
  c.mil_dimension = 4;
  c.position_clamp = 3;
  c.top_n = 100;
  c.dropout_input = c.dropout_gcnn = c.dropout_mil = 0.0;
  c.batch_size = 4;
  c.max_epochs = 3;
  return c;
}

// |a - n| / max(|a|, |n|, floor): relative error with a floor so that
// gradients that are zero up to rounding compare absolutely.
inline double rel_err(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Central differences of `loss` with respect to every element of `param`.
inline Tensor numeric_grad(const std::function<double()>& loss, Var& param, double step = 1e-4) {
  Tensor g(param.shape(), 0.0);
  Tensor& v = param.mutable_value();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double saved = v[i];
    v[i] = saved + step;
    const double up = loss();
    v[i] = saved - step;
    const double down = loss();
    v[i] = saved;
    g[i] = (up - down) / (2 * step);
  }
  return g;
}

inline double max_rel_err(const Tensor& analytic, const Tensor& numeric) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) worst = std::max(worst, rel_err(analytic[i], numeric[i]));
  return worst;
}

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (auto& x : t.values()) x = rng.uniform(lo, hi);
  return t;
}

// Random valid document: chain-shaped dependencies with a random root per
// sentence, random single-token mentions over a small KB-id pool (so merging
// has overlaps to resolve), random coreference chains and gold relations.
inline Document random_document(Rng& rng, const std::string& id, std::size_t max_sentences = 4) {
  static const std::vector<std::string> labels = {"nsubj", "dobj", "amod", "det", "punct"};
  Document d;
  d.doc_id = id;
  const std::size_t n_sent = 1 + rng.below(max_sentences);
  for (std::size_t s = 0; s < n_sent; ++s) {
    const std::size_t len = 1 + rng.below(6);
    const std::size_t base = d.tokens.size();
    for (std::size_t i = 0; i < len; ++i) d.tokens.push_back("w" + std::to_string(rng.below(12)));
    d.sentences.push_back({base, base + len});
    const std::size_t root = rng.below(len);
    d.sentence_roots.push_back(base + root);
    for (std::size_t i = 0; i < len; ++i) {
      if (i == root || rng.uniform() < 0.15) continue;  // occasionally a fragment
      const std::size_t head = i < root ? i + 1 : i - 1;
      d.dep_arcs.push_back({base + head, base + i, labels[rng.below(labels.size())]});
    }
  }
  const std::size_t n = d.tokens.size();
  const std::size_t n_mentions = rng.below(std::min<std::size_t>(n, 6) + 1);
  for (std::size_t m = 0; m < n_mentions; ++m) {
    const std::size_t t = rng.below(n);
    Mention mention;
    mention.span = {t, t + 1};
    mention.kb_ids = {"K" + std::to_string(rng.below(5))};
    if (rng.uniform() < 0.3) mention.kb_ids.push_back("K" + std::to_string(rng.below(5)));
    std::sort(mention.kb_ids.begin(), mention.kb_ids.end());
    mention.kb_ids.erase(std::unique(mention.kb_ids.begin(), mention.kb_ids.end()), mention.kb_ids.end());
    mention.entity_id = mention.kb_ids.front();
    mention.entity_type = "chemical";
    d.mentions.push_back(std::move(mention));
  }
  const std::size_t n_chains = rng.below(3);
  for (std::size_t c = 0; c < n_chains; ++c) {
    std::vector<Span> chain;
    const std::size_t len = 1 + rng.below(3);
    for (std::size_t k = 0; k < len; ++k) {
      const std::size_t t = rng.below(n);
      chain.push_back({t, t + 1});
    }
    d.coref_chains.push_back(std::move(chain));
  }
  const auto ids = d.entity_ids();
  if (ids.size() >= 2) {
    for (std::size_t r = 0; r < 2; ++r) {
      const auto& a = ids[rng.below(ids.size())];
      const auto& b = ids[rng.below(ids.size())];
      if (a != b) d.relations.push_back({a, b, rng.below(2) ? "reaction" : "inhibits"});
    }
  }
  return d;
}

// Sum of the pair losses of `data` with dropout off.
inline Var total_loss(Tape& tape, const Model& model, const Dataset& data) {
  Rng rng(0);
  std::vector<Var> terms;
  for (const auto& pair : data.pairs) {
    const Var scores = model.forward(tape, data.doc_of(pair), pair, rng, false);
    terms.push_back(cross_entropy(tape, scores, pair.label));
  }
  return sum(tape, add_n(tape, terms));
}

struct GradientCheck {
  double worst = 0.0;
  std::string worst_name;
  std::size_t elements = 0;
};

// Tape gradients of total_loss against central differences, every element of
// every named parameter.
inline GradientCheck check_model_gradients(const Model& model, const Dataset& data, double step = 1e-4) {
  NamedParameters params = model.named_parameters();
  for (auto& [name, p] : params) p.zero_grad();
  {
    Tape tape;
    tape.backward(total_loss(tape, model, data));
  }
  auto loss = [&] {
    Tape t;
    return total_loss(t, model, data).value().item();
  };
  GradientCheck out;
  for (auto& [name, p] : params) {
    const double err = max_rel_err(p.grad(), numeric_grad(loss, p, step));
    out.elements += p.value().size();
    if (err >= out.worst) {
      out.worst = err;
      out.worst_name = name;
    }
  }
  return out;
}

// Zeroes every GCNN slot whose bucket holds an edge type of `kind`. Only
// meaningful when no type of that kind shares the rare bucket.
inline std::size_t zero_category_slots(Model& model, EdgeKind kind) {
  const auto& vocab = model.edge_vocab();
  std::set<std::size_t> buckets;
  for (const auto& e : vocab.ranked()) {
    if (e.type.kind == kind) buckets.insert(vocab.bucket_of(e.type));
  }
  std::size_t zeroed = 0;
  for (auto& block : model.encoder().blocks) {
    for (auto& [id, slot] : block.slots) {
      if (!buckets.count(id / 3)) continue;
      for (Var* v : {&slot.weight, &slot.bias, &slot.gate_weight, &slot.gate_bias}) v->mutable_value().fill(0.0);
      ++zeroed;
    }
  }
  return zeroed;
}

}  // namespace docre::testing
