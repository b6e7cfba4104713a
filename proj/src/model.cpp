#include "docre/model.hpp"

#include "docre/error.hpp"

namespace docre {

PairOptions pair_options(const TrainConfig& config) {
  PairOptions options;
  options.mode = config.pair_mode == "undirected" ? PairMode::Undirected : PairMode::Bidirectional;
  if (!config.pair_types.empty()) {
    const auto colon = config.pair_types.find(':');
    options.type_constraint = std::make_pair(config.pair_types.substr(0, colon),
                                             config.pair_types.substr(colon + 1));
  }
  return options;
}

GraphOptions graph_options(const TrainConfig& config) {
  return GraphOptions{config.edge_categories, config.coref_clique};
}

std::vector<Document> merge_all(std::vector<Document> docs) {
  for (auto& d : docs) d = merge_entities(std::move(d));
  return docs;
}

Model::Model(TrainConfig config, WordVocab words, EdgeTypeVocabulary edges, RelationVocab relations,
             std::uint64_t seed)
    : config_(std::move(config)), edge_vocab_(std::move(edges)), relations_(std::move(relations)) {
  config_.validate();
  Rng rng(derive_seed(seed, 0x1417));
  const std::size_t input_dim = config_.word_dimension + 2 * config_.position_dimension;
  embeddings_ = make_embeddings(std::move(words), config_.word_dimension, config_.position_dimension,
                                config_.position_clamp, rng);
  encoder_ = make_gcnn(edge_vocab_, input_dim, config_.gcnn_dimension, config_.gcnn_blocks, rng);
  heads_ = make_projection_heads(config_.gcnn_dimension, config_.mil_dimension, rng);
  biaffine_ = make_biaffine(config_.mil_dimension, relations_.size(), rng);
}

Model Model::initialise(const TrainConfig& config, const std::vector<Document>& train_docs,
                        std::uint64_t seed) {
  config.validate();
  std::vector<DocumentGraph> graphs;
  graphs.reserve(train_docs.size());
  const GraphOptions gopt = graph_options(config);
  for (const auto& d : train_docs) graphs.push_back(build_graph(d, gopt));
  auto edges = EdgeTypeVocabulary::fit(graphs, config.top_n, config.topn_syntactic_only);
  auto words = WordVocab::from_documents(train_docs, config.min_word_count);
  RelationVocab relations = config.relation_labels.empty()
                                ? RelationVocab::from_documents(train_docs)
                                : RelationVocab(config.relation_labels);
  if (relations.size() < 2) {
    throw Error(ErrorKind::Config, "training corpus declares no relation labels");
  }
  Model model(config, std::move(words), std::move(edges), std::move(relations), seed);
  if (!config.embeddings_path.empty()) {
    Rng rng(derive_seed(seed, 0xe3b));
    model.load_embeddings(config.embeddings_path, rng);
  }
  return model;
}

std::size_t Model::load_embeddings(const std::string& path, Rng& rng) {
  return load_pretrained(embeddings_, path, rng);
}

Dataset Model::prepare(const std::vector<Document>& merged_docs, const GraphOptions& graph) const {
  Dataset data;
  const PairOptions popt = pair_options(config_);
  data.docs.reserve(merged_docs.size());
  for (std::size_t i = 0; i < merged_docs.size(); ++i) {
    PreparedDocument p;
    p.doc = merged_docs[i];
    p.word_ids = embeddings_.vocab.encode(p.doc.tokens);
    p.graph = build_graph(p.doc, graph);
    p.plan = plan_messages(p.graph, edge_vocab_);
    auto pairs = generate_pairs(p.doc, relations_, popt, i);
    data.pairs.insert(data.pairs.end(), std::make_move_iterator(pairs.begin()),
                      std::make_move_iterator(pairs.end()));
    data.docs.push_back(std::move(p));
  }
  return data;
}

NamedParameters Model::named_parameters() const {
  NamedParameters params;
  params.emplace_back("embedding.word", embeddings_.words);
  params.emplace_back("embedding.position_head", embeddings_.position_head);
  params.emplace_back("embedding.position_tail", embeddings_.position_tail);
  if (encoder_.input_weight) {
    params.emplace_back("gcnn.input.weight", *encoder_.input_weight);
    params.emplace_back("gcnn.input.bias", *encoder_.input_bias);
  }
  for (std::size_t k = 0; k < encoder_.blocks.size(); ++k) {
    for (const auto& [slot, p] : encoder_.blocks[k].slots) {
      const std::string prefix = "gcnn.block" + std::to_string(k) + ".slot" + std::to_string(slot);
      params.emplace_back(prefix + ".weight", p.weight);
      params.emplace_back(prefix + ".bias", p.bias);
      params.emplace_back(prefix + ".gate_weight", p.gate_weight);
      params.emplace_back(prefix + ".gate_bias", p.gate_bias);
    }
  }
  params.emplace_back("mil.head.w0", heads_.head_w0);
  params.emplace_back("mil.head.w1", heads_.head_w1);
  params.emplace_back("mil.tail.w0", heads_.tail_w0);
  params.emplace_back("mil.tail.w1", heads_.tail_w1);
  params.emplace_back("mil.biaffine", biaffine_);
  return params;
}

std::size_t Model::parameter_count() const {
  std::size_t total = 0;
  for (const auto& [name, v] : named_parameters()) total += v.value().size();
  return total;
}

Var Model::mention_rows(Tape& tape, const Var& encoded, const std::vector<std::size_t>& tokens,
                        const std::vector<Span>& mentions, std::size_t n) const {
  if (config_.mention_pooling == "tokens") return gather_rows(tape, encoded, tokens);
  // one averaged row per mention
  Tensor pool(Shape{mentions.size(), n}, 0.0);
  for (std::size_t m = 0; m < mentions.size(); ++m) {
    const double w = 1.0 / static_cast<double>(mentions[m].length());
    for (std::size_t i = mentions[m].begin; i < mentions[m].end; ++i) pool.at(m, i) = w;
  }
  return matmul(tape, Var::constant(std::move(pool)), encoded);
}

Var Model::forward(Tape& tape, const PreparedDocument& doc, const PairInstance& pair, Rng& rng,
                   bool train) const {
  Var x = encode_inputs(tape, doc.word_ids, pair, embeddings_);
  x = dropout(tape, x, config_.dropout_input, rng, train);
  const GcnnOptions gopt{config_.activation, config_.edge_gating, config_.residual, config_.dropout_gcnn};
  const Var encoded = gcnn_forward(tape, x, doc.plan, encoder_, gopt, rng, train);
  const std::size_t n = doc.doc.size();
  const Var head_in = mention_rows(tape, encoded, pair.head_tokens, pair.head_mentions, n);
  const Var tail_in = mention_rows(tape, encoded, pair.tail_tokens, pair.tail_mentions, n);
  const Var head = project_head(tape, head_in, heads_, config_.dropout_mil, rng, train);
  const Var tail = project_tail(tape, tail_in, heads_, config_.dropout_mil, rng, train);
  return entity_pair_scores(tape, head, tail, biaffine_);
}

Tensor Model::scores(const PreparedDocument& doc, const PairInstance& pair) const {
  Tape tape;
  Rng unused(0);
  return forward(tape, doc, pair, unused, false).value();
}

std::size_t Model::predict(const PreparedDocument& doc, const PairInstance& pair) const {
  return argmax(scores(doc, pair));
}

std::vector<Tensor> Model::parameter_values() const {
  std::vector<Tensor> values;
  for (const auto& [name, v] : named_parameters()) values.push_back(v.value());
  return values;
}

void Model::set_parameter_values(const std::vector<Tensor>& values) {
  auto params = named_parameters();
  if (values.size() != params.size()) {
    throw Error(ErrorKind::Invariant, "parameter count mismatch on restore");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (values[i].shape() != params[i].second.shape()) {
      throw Error(ErrorKind::Dimension, "restoring " + params[i].first + ": " +
                                            shape_string(values[i].shape()) + " vs " +
                                            shape_string(params[i].second.shape()));
    }
    params[i].second.mutable_value() = values[i];
  }
}

Model Model::clone() const {
  Model copy;
  copy.config_ = config_;
  copy.edge_vocab_ = edge_vocab_;
  copy.relations_ = relations_;
  auto fresh = [](const Var& v) { return Var::parameter(v.value()); };
  copy.embeddings_.vocab = embeddings_.vocab;
  copy.embeddings_.clamp = embeddings_.clamp;
  copy.embeddings_.words = fresh(embeddings_.words);
  copy.embeddings_.position_head = fresh(embeddings_.position_head);
  copy.embeddings_.position_tail = fresh(embeddings_.position_tail);
  if (encoder_.input_weight) {
    copy.encoder_.input_weight = fresh(*encoder_.input_weight);
    copy.encoder_.input_bias = fresh(*encoder_.input_bias);
  }
  for (const auto& block : encoder_.blocks) {
    GcnnBlock b;
    for (const auto& [slot, p] : block.slots) {
      b.slots.emplace(slot, SlotParams{fresh(p.weight), fresh(p.bias), fresh(p.gate_weight),
                                       fresh(p.gate_bias)});
    }
    copy.encoder_.blocks.push_back(std::move(b));
  }
  copy.heads_ = ProjectionHeads{fresh(heads_.head_w0), fresh(heads_.head_w1), fresh(heads_.tail_w0),
                                fresh(heads_.tail_w1)};
  copy.biaffine_ = fresh(biaffine_);
  return copy;
}

}  // namespace docre
