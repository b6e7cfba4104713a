#pragma once

// Optimisation loop: mini-batch Adam with an exponential moving average of
// the weights, global-norm clipping, per-epoch learning-rate decay and early
// stopping on development F1 of the averaged weights.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "docre/config.hpp"
#include "docre/metrics.hpp"
#include "docre/model.hpp"
#include "json.hpp"

namespace docre {

// Scales every tensor by c/g when the joint L2 norm g exceeds c. Returns g.
double clip_global_norm(std::vector<Tensor>& grads, double c);

class Optimizer {
 public:
  Optimizer(const std::vector<Tensor>& initial, const TrainConfig& config);

  // One Adam step on `params` followed by the EMA update.
  void step(std::vector<Tensor*>& params, const std::vector<Tensor>& grads, double learning_rate);

  std::size_t steps() const noexcept { return steps_; }
  const std::vector<Tensor>& ema() const noexcept { return shadow_; }
  // Decay used for the most recent EMA update.
  double last_ema_decay() const noexcept { return last_decay_; }

 private:
  double beta1_, beta2_, epsilon_, ema_decay_;
  bool ema_warmup_;
  std::size_t steps_ = 0;
  double last_decay_ = 0.0;
  std::vector<Tensor> first_, second_, shadow_;
};

class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  // Records the score of the next epoch (1-based). Returns true when the
  // score strictly improves on the best so far.
  bool update(double score);
  bool should_stop() const noexcept { return since_best_ >= patience_; }
  std::size_t best_epoch() const noexcept { return best_epoch_; }
  double best_score() const noexcept { return best_; }
  std::size_t epochs() const noexcept { return epoch_; }

 private:
  std::size_t patience_;
  std::size_t epoch_ = 0;
  std::size_t best_epoch_ = 0;
  std::size_t since_best_ = 0;
  double best_ = -1.0;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double learning_rate = 0.0;
  double train_loss = 0.0;
  std::size_t steps = 0;
  EvalReport dev;
  bool improved = false;

  nlohmann::json to_json() const;
};

struct TrainResult {
  Model model;  // best-epoch EMA weights
  std::size_t best_epoch = 0;
  double best_dev_f1 = 0.0;
  bool stopped_early = false;
  std::vector<EpochMetrics> log;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

// Trains on `train_docs` (merged with dev when config.merge_train_dev) and
// selects the epoch by F1 on `dev_docs`. Documents are entity-merged here.
// `graph` overrides the graph options (used by ablations).
TrainResult train(const std::vector<Document>& train_docs, const std::vector<Document>& dev_docs,
                  const TrainConfig& config, std::uint64_t seed,
                  const std::optional<GraphOptions>& graph = std::nullopt,
                  const EpochCallback& on_epoch = {});

// Evaluates merged documents; throws ErrorKind::Eval when their relation
// labels are unknown to the model.
EvalReport evaluate(const Model& model, const std::vector<Document>& docs,
                    const std::optional<GraphOptions>& graph = std::nullopt);
EvalReport evaluate(const Model& model, const Dataset& data);
// Tallies given predictions, one per pair of `data`, in pair order.
EvalReport evaluate_predictions(const Dataset& data, const std::vector<std::size_t>& predicted);

struct SeedRun {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  std::size_t best_epoch = 0;
  EvalReport report;
};

struct SeedSummary {
  std::vector<SeedRun> runs;
  double mean_precision = 0, mean_recall = 0, mean_f1 = 0;
  double std_precision = 0, std_recall = 0, std_f1 = 0;

  nlohmann::json to_json() const;
  std::string to_table() const;
};

// Mean and (population) standard deviation over successful runs.
SeedSummary summarise(std::vector<SeedRun> runs);

// Trains once per config.seeds entry and evaluates on `eval_docs`.
SeedSummary run_seeds(const std::vector<Document>& train_docs, const std::vector<Document>& dev_docs,
                      const std::vector<Document>& eval_docs, const TrainConfig& config);

// ---- checkpoints -------------------------------------------------------------

inline constexpr int kCheckpointFormat = 1;

struct CheckpointInfo {
  std::size_t best_epoch = 0;
  double dev_f1 = 0.0;
};

void save_checkpoint(const std::filesystem::path& dir, const Model& model, const CheckpointInfo& info);

struct LoadedCheckpoint {
  Model model;
  CheckpointInfo info;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir);

// One named-parameter blob: u64 name length, name bytes, u64 rank, u64
// extents, then row-major f64 values; all little-endian.
void write_blob(std::ostream& out, const std::string& name, const Tensor& value);
std::pair<std::string, Tensor> read_blob(std::istream& in);

}  // namespace docre
