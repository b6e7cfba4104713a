#pragma once

// Edge-category ablation and the top-N edge-type sweep.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "docre/config.hpp"
#include "docre/corpus.hpp"
#include "docre/metrics.hpp"
#include "docre/trainer.hpp"
#include "json.hpp"

namespace docre {

struct AblationReport {
  EdgeKind removed = EdgeKind::SelfNode;
  bool retrained = true;
  // averaged over seeds
  double overall_f1 = 0, intra_f1 = 0, inter_f1 = 0;
  double full_overall_f1 = 0, full_intra_f1 = 0, full_inter_f1 = 0;
  std::vector<EvalReport> per_seed;
  std::vector<EvalReport> full_per_seed;

  double delta_overall() const { return overall_f1 - full_overall_f1; }
  double delta_intra() const { return intra_f1 - full_intra_f1; }
  double delta_inter() const { return inter_f1 - full_inter_f1; }
  nlohmann::json to_json() const;
};

struct AblationInputs {
  std::vector<Document> train;
  std::vector<Document> dev;
  std::vector<Document> eval;  // reports are computed on this split
};

// Removes one category from config.edge_categories and compares against the
// full graph, once per seed in `seeds`. With config.ablate_retrain the
// ablated model is retrained; otherwise the full model is re-evaluated on
// graphs without the category. Refuses to remove the last enabled category.
AblationReport ablate(const AblationInputs& data, const TrainConfig& config, EdgeKind category,
                      const std::vector<std::uint64_t>& seeds);

// One report per enabled category, sharing the full-graph runs.
std::vector<AblationReport> ablate_all(const AblationInputs& data, const TrainConfig& config,
                                       const std::vector<std::uint64_t>& seeds);

std::string ablation_table(const std::vector<AblationReport>& reports);

struct SweepRow {
  std::size_t top_n = 0;
  std::size_t buckets = 0;
  std::size_t slots = 0;
  std::size_t parameters = 0;
  double dev_f1 = 0.0;  // mean over seeds
  std::vector<double> per_seed_f1;
};

// One training run per (N, seed); rows sorted by N.
std::vector<SweepRow> sweep_top_n(const AblationInputs& data, const TrainConfig& config,
                                  std::vector<std::size_t> values,
                                  const std::vector<std::uint64_t>& seeds);

nlohmann::json sweep_json(const std::vector<SweepRow>& rows);
std::string sweep_table(const std::vector<SweepRow>& rows);

}  // namespace docre
