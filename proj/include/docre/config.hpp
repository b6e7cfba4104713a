#pragma once

// Experiment configuration: a flat key = value text format with one key per
// field. Defaults are the best-known setting.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "docre/graph.hpp"

namespace docre {

struct TrainConfig {
  // optimisation
  std::size_t batch_size = 32;
  double learning_rate = 5e-4;
  double learning_rate_decay = 0.75;
  double gradient_clipping = 10.0;
  std::size_t patience = 5;
  std::size_t max_epochs = 50;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double ema_decay = 0.999;
  // Caps the EMA decay at (1+t)/(10+t) for step t so short runs are not
  // dominated by the initial weights.
  bool ema_warmup = true;

  // architecture
  std::size_t word_dimension = 100;
  std::size_t position_dimension = 20;
  std::size_t gcnn_dimension = 140;
  std::size_t gcnn_blocks = 2;
  std::size_t mil_dimension = 140;
  std::size_t position_clamp = 64;
  double dropout_input = 0.1;
  double dropout_gcnn = 0.05;
  double dropout_mil = 0.05;
  bool residual = true;
  bool edge_gating = true;
  std::string activation = "relu";  // relu | tanh | identity
  std::string mention_pooling = "tokens";  // tokens | mean

  // graph
  std::size_t top_n = 4;
  bool topn_syntactic_only = false;
  bool coref_clique = false;
  KindSet edge_categories = KindSet::all();

  // data
  std::string pair_mode = "bidirectional";  // bidirectional | undirected
  std::string pair_types;                   // "head_type:tail_type", empty = any
  std::vector<std::string> relation_labels;  // empty = collected from the training split
  std::size_t min_word_count = 1;
  std::string embeddings_path;
  bool merge_train_dev = false;
  bool document_batches = false;

  // runs
  std::uint64_t seed = 1;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  bool ablate_retrain = true;

  // Sets one key from its text form; throws ErrorKind::Config on unknown
  // keys or malformed values.
  void set(const std::string& key, const std::string& value);
  // Checks value ranges; throws ErrorKind::Config naming the offending key.
  void validate() const;

  // Canonical "key = value" text, one key per line in a fixed order.
  std::string to_text() const;
  static TrainConfig from_text(const std::string& text);
  static TrainConfig from_file(const std::filesystem::path& path);
  // Applies every DOCRE_<KEY> environment variable.
  void apply_environment(const std::string& prefix = "DOCRE_");

  // FNV-1a over to_text(), as hex.
  std::string fingerprint() const;

  bool operator==(const TrainConfig&) const = default;
};

std::vector<std::string> config_keys();

}  // namespace docre
