#include "docre/encoder.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "docre/error.hpp"

namespace docre {

WordVocab::WordVocab(const std::vector<std::string>& words) : WordVocab() {
  for (const auto& w : words) add(w);
}

WordVocab WordVocab::from_documents(const std::vector<Document>& docs, std::size_t min_count) {
  std::unordered_map<std::string, std::size_t> counts;
  std::vector<std::string> order;
  for (const auto& d : docs) {
    for (const auto& t : d.tokens) {
      if (counts[t]++ == 0) order.push_back(t);
    }
  }
  WordVocab vocab;
  for (const auto& w : order) {
    if (counts[w] >= min_count) vocab.add(w);
  }
  return vocab;
}

std::size_t WordVocab::index_of(const std::string& word) const {
  const auto it = index_.find(word);
  return it == index_.end() ? kUnknownIndex : it->second;
}

std::size_t WordVocab::add(const std::string& word) {
  const auto [it, inserted] = index_.emplace(word, words_.size());
  if (inserted) words_.push_back(word);
  return it->second;
}

std::vector<std::size_t> WordVocab::encode(const std::vector<std::string>& tokens) const {
  std::vector<std::size_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(index_of(t));
  return ids;
}

Tensor glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Tensor t(Shape{rows, cols});
  for (auto& v : t.values()) v = rng.uniform(-limit, limit);
  return t;
}

EmbeddingTables make_embeddings(WordVocab vocab, std::size_t word_dim, std::size_t position_dim,
                                std::size_t clamp, Rng& rng) {
  EmbeddingTables tables;
  tables.clamp = clamp;
  tables.words = Var::parameter(glorot_uniform(vocab.size(), word_dim, rng));
  tables.position_head = Var::parameter(glorot_uniform(2 * clamp + 1, position_dim, rng));
  tables.position_tail = Var::parameter(glorot_uniform(2 * clamp + 1, position_dim, rng));
  tables.vocab = std::move(vocab);
  return tables;
}

std::size_t load_pretrained(EmbeddingTables& tables, const std::filesystem::path& path, Rng& rng) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open embeddings file " + path.string());
  const std::size_t dim = tables.words.value().cols();
  std::vector<std::pair<std::string, std::vector<double>>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string token;
    if (!(fields >> token)) continue;
    std::vector<double> values;
    double v;
    while (fields >> v) values.push_back(v);
    if (!fields.eof()) {
      throw Error(ErrorKind::Parse, path.string() + " line " + std::to_string(line_no) +
                                        ": non-numeric embedding value");
    }
    if (values.size() != dim) {
      throw Error(ErrorKind::Config, path.string() + " line " + std::to_string(line_no) + ": " +
                                         std::to_string(values.size()) +
                                         " values, word_dimension is " + std::to_string(dim));
    }
    rows.emplace_back(std::move(token), std::move(values));
  }
  for (const auto& [token, values] : rows) tables.vocab.add(token);
  const Tensor& old = tables.words.value();
  Tensor grown(Shape{tables.vocab.size(), dim});
  std::copy(old.values().begin(), old.values().end(), grown.values().begin());
  const double limit = std::sqrt(6.0 / static_cast<double>(tables.vocab.size() + dim));
  for (std::size_t i = old.size(); i < grown.size(); ++i) grown[i] = rng.uniform(-limit, limit);
  for (const auto& [token, values] : rows) {
    const std::size_t r = tables.vocab.index_of(token);
    std::copy(values.begin(), values.end(), grown.data() + r * dim);
  }
  tables.words = Var::parameter(std::move(grown));
  return rows.size();
}

long relative_position(std::size_t token, const std::vector<std::size_t>& targets, std::size_t clamp) {
  if (targets.empty()) {
    throw Error(ErrorKind::Precondition, "relative position against an empty mention set");
  }
  long best = 0;
  bool found = false;
  for (std::size_t t : targets) {
    const long offset = static_cast<long>(token) - static_cast<long>(t);
    if (!found || std::labs(offset) < std::labs(best) ||
        (std::labs(offset) == std::labs(best) && offset < best)) {
      best = offset;
      found = true;
    }
  }
  const long c = static_cast<long>(clamp);
  return std::max(-c, std::min(c, best));
}

Var encode_inputs(Tape& tape, const std::vector<std::size_t>& word_ids, const PairInstance& pair,
                  const EmbeddingTables& tables) {
  if (pair.head_tokens.empty() || pair.tail_tokens.empty()) {
    throw Error(ErrorKind::Precondition, "pair " + pair.head_entity + "->" + pair.tail_entity +
                                             " has an empty mention set");
  }
  const std::size_t n = word_ids.size();
  std::vector<std::size_t> head_pos(n), tail_pos(n);
  const long clamp = static_cast<long>(tables.clamp);
  for (std::size_t i = 0; i < n; ++i) {
    head_pos[i] = static_cast<std::size_t>(relative_position(i, pair.head_tokens, tables.clamp) + clamp);
    tail_pos[i] = static_cast<std::size_t>(relative_position(i, pair.tail_tokens, tables.clamp) + clamp);
  }
  const Var parts[] = {gather_rows(tape, tables.words, word_ids),
                       gather_rows(tape, tables.position_head, head_pos),
                       gather_rows(tape, tables.position_tail, tail_pos)};
  return concat_cols(tape, parts);
}

GcnnEncoder make_gcnn(const EdgeTypeVocabulary& vocab, std::size_t input_dim, std::size_t dim,
                      std::size_t blocks, Rng& rng) {
  GcnnEncoder encoder;
  if (input_dim != dim) {
    encoder.input_weight = Var::parameter(glorot_uniform(input_dim, dim, rng));
    encoder.input_bias = Var::parameter(Tensor(Shape{dim}, 0.0));
  }
  const auto slots = vocab.active_slots();
  for (std::size_t k = 0; k < blocks; ++k) {
    GcnnBlock block;
    for (const Slot& slot : slots) {
      SlotParams p;
      p.weight = Var::parameter(glorot_uniform(dim, dim, rng));
      p.bias = Var::parameter(Tensor(Shape{dim}, 0.0));
      p.gate_weight = Var::parameter(glorot_uniform(dim, 1, rng));
      p.gate_bias = Var::parameter(Tensor::scalar(1.0));
      block.slots.emplace(slot.id(), std::move(p));
    }
    encoder.blocks.push_back(std::move(block));
  }
  return encoder;
}

MessagePlan plan_messages(const DocumentGraph& graph, const EdgeTypeVocabulary& vocab) {
  MessagePlan plan;
  plan.nodes = graph.size();
  const auto active = vocab.active_slots();
  std::vector<bool> exists;
  for (const Slot& s : active) {
    if (exists.size() <= s.id()) exists.resize(s.id() + 1, false);
    exists[s.id()] = true;
  }
  for (std::size_t node = 0; node < graph.size(); ++node) {
    for (Direction dir : {Direction::Forward, Direction::Reverse, Direction::Self}) {
      for (const Incidence& inc : graph.incoming(node, dir)) {
        const Slot slot = vocab.slot_of(graph.edges()[inc.edge].type, dir);
        if (slot.id() >= exists.size() || !exists[slot.id()]) continue;
        auto& group = plan.groups[slot.id()];
        group.sources.push_back(inc.from);
        group.targets.push_back(node);
      }
    }
  }
  return plan;
}

namespace {

Var activate(Tape& tape, const Var& x, const std::string& activation) {
  if (activation == "relu") return relu(tape, x);
  if (activation == "tanh") return docre::tanh(tape, x);
  if (activation == "identity") return x;
  throw Error(ErrorKind::Config, "unknown activation '" + activation + "'");
}

}  // namespace

Var gcnn_forward(Tape& tape, const Var& inputs, const MessagePlan& plan, const GcnnEncoder& encoder,
                 const GcnnOptions& options, Rng& rng, bool train) {
  if (inputs.value().rows() != plan.nodes) {
    throw Error(ErrorKind::Dimension, "gcnn_forward: " + std::to_string(inputs.value().rows()) +
                                          " input rows for a " + std::to_string(plan.nodes) +
                                          "-node graph");
  }
  Var x = inputs;
  if (encoder.input_weight) x = add(tape, matmul(tape, x, *encoder.input_weight), *encoder.input_bias);
  for (const GcnnBlock& block : encoder.blocks) {
    std::vector<Var> terms;
    terms.reserve(plan.groups.size());
    for (const auto& [slot_id, group] : plan.groups) {
      const auto it = block.slots.find(slot_id);
      if (it == block.slots.end()) continue;
      const SlotParams& p = it->second;
      const Var sources = gather_rows(tape, x, group.sources);
      Var message = add(tape, matmul(tape, sources, p.weight), p.bias);
      if (options.gating) {
        const Var gate =
            sigmoid(tape, add(tape, matmul(tape, sources, p.gate_weight), p.gate_bias));
        message = mul(tape, message, gate);
      }
      terms.push_back(scatter_add_rows(tape, message, group.targets, plan.nodes));
    }
    const Var summed = terms.empty() ? Var::constant(Tensor(x.shape(), 0.0)) : add_n(tape, terms);
    Var out = activate(tape, summed, options.activation);
    if (options.residual) out = add(tape, out, x);
    x = dropout(tape, out, options.dropout, rng, train);
  }
  return x;
}

}  // namespace docre
