#include "docre/experiments.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include "docre/error.hpp"

namespace docre {

using nlohmann::json;

namespace {

struct FullRuns {
  std::vector<TrainResult> models;
  std::vector<EvalReport> reports;
};

FullRuns train_full(const AblationInputs& data, const TrainConfig& config,
                    const std::vector<std::uint64_t>& seeds) {
  FullRuns runs;
  for (auto seed : seeds) {
    runs.models.push_back(train(data.train, data.dev, config, seed));
    runs.reports.push_back(evaluate(runs.models.back().model, data.eval));
  }
  return runs;
}

void average_into(const std::vector<EvalReport>& reports, double& overall, double& intra, double& inter) {
  overall = intra = inter = 0.0;
  if (reports.empty()) return;
  for (const auto& r : reports) {
    overall += r.overall.f1();
    intra += r.intra.f1();
    inter += r.inter.f1();
  }
  const double n = static_cast<double>(reports.size());
  overall /= n;
  intra /= n;
  inter /= n;
}

AblationReport ablate_with(const AblationInputs& data, const TrainConfig& config, EdgeKind category,
                           const std::vector<std::uint64_t>& seeds, const FullRuns& full) {
  const KindSet remaining = config.edge_categories.without(category);
  if (remaining.empty()) {
    throw Error(ErrorKind::Config, std::string("removing ") + kind_name(category) +
                                       " leaves no edge categories");
  }
  AblationReport report;
  report.removed = category;
  report.retrained = config.ablate_retrain;
  report.full_per_seed = full.reports;
  const GraphOptions ablated{remaining, config.coref_clique};
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    if (config.ablate_retrain) {
      TrainResult r = train(data.train, data.dev, config, seeds[s], ablated);
      report.per_seed.push_back(evaluate(r.model, data.eval));
    } else {
      report.per_seed.push_back(evaluate(full.models[s].model, data.eval, ablated));
    }
  }
  average_into(report.per_seed, report.overall_f1, report.intra_f1, report.inter_f1);
  average_into(report.full_per_seed, report.full_overall_f1, report.full_intra_f1, report.full_inter_f1);
  return report;
}

}  // namespace

AblationReport ablate(const AblationInputs& data, const TrainConfig& config, EdgeKind category,
                      const std::vector<std::uint64_t>& seeds) {
  config.validate();
  if (config.edge_categories.without(category).empty()) {
    throw Error(ErrorKind::Config, std::string("removing ") + kind_name(category) +
                                       " leaves no edge categories");
  }
  return ablate_with(data, config, category, seeds, train_full(data, config, seeds));
}

std::vector<AblationReport> ablate_all(const AblationInputs& data, const TrainConfig& config,
                                       const std::vector<std::uint64_t>& seeds) {
  config.validate();
  const FullRuns full = train_full(data, config, seeds);
  std::vector<AblationReport> reports;
  for (EdgeKind k : kAllEdgeKinds) {
    if (!config.edge_categories.contains(k)) continue;
    if (config.edge_categories.without(k).empty()) continue;
    reports.push_back(ablate_with(data, config, k, seeds, full));
  }
  return reports;
}

json AblationReport::to_json() const {
  json seeds = json::array();
  for (const auto& r : per_seed) seeds.push_back(r.to_json());
  json full = json::array();
  for (const auto& r : full_per_seed) full.push_back(r.to_json());
  return {{"removed", kind_name(removed)},
          {"retrained", retrained},
          {"f1", {{"overall", overall_f1}, {"intra", intra_f1}, {"inter", inter_f1}}},
          {"full_f1", {{"overall", full_overall_f1}, {"intra", full_intra_f1}, {"inter", full_inter_f1}}},
          {"delta", {{"overall", delta_overall()}, {"intra", delta_intra()}, {"inter", delta_inter()}}},
          {"per_seed", std::move(seeds)},
          {"full_per_seed", std::move(full)}};
}

std::string ablation_table(const std::vector<AblationReport>& reports) {
  std::ostringstream os;
  os << std::left << std::setw(26) << "Model" << std::right << std::setw(10) << "Overall"
     << std::setw(10) << "Intra" << std::setw(10) << "Inter" << '\n';
  os << std::fixed << std::setprecision(2);
  if (!reports.empty()) {
    const auto& r = reports.front();
    os << std::left << std::setw(26) << "GCNN (full)" << std::right << std::setw(10)
       << 100 * r.full_overall_f1 << std::setw(10) << 100 * r.full_intra_f1 << std::setw(10)
       << 100 * r.full_inter_f1 << '\n';
  }
  for (const auto& r : reports) {
    os << std::left << std::setw(26) << (std::string("  - ") + kind_name(r.removed)) << std::right
       << std::setw(10) << 100 * r.overall_f1 << std::setw(10) << 100 * r.intra_f1 << std::setw(10)
       << 100 * r.inter_f1 << '\n';
  }
  return os.str();
}

std::vector<SweepRow> sweep_top_n(const AblationInputs& data, const TrainConfig& config,
                                  std::vector<std::size_t> values,
                                  const std::vector<std::uint64_t>& seeds) {
  if (values.empty()) throw Error(ErrorKind::Config, "top-N sweep needs at least one value");
  if (seeds.empty()) throw Error(ErrorKind::Config, "top-N sweep needs at least one seed");
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  std::vector<SweepRow> rows;
  for (std::size_t n : values) {
    TrainConfig c = config;
    c.top_n = n;
    SweepRow row;
    row.top_n = n;
    for (auto seed : seeds) {
      TrainResult r = train(data.train, data.dev, c, seed);
      row.buckets = r.model.edge_vocab().bucket_count();
      row.slots = r.model.edge_vocab().active_slots().size();
      row.parameters = r.model.parameter_count();
      row.per_seed_f1.push_back(evaluate(r.model, data.eval).overall.f1());
    }
    double total = 0.0;
    for (double f : row.per_seed_f1) total += f;
    row.dev_f1 = total / static_cast<double>(row.per_seed_f1.size());
    rows.push_back(std::move(row));
  }
  return rows;
}

json sweep_json(const std::vector<SweepRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    out.push_back({{"top_n", r.top_n},
                   {"buckets", r.buckets},
                   {"slots", r.slots},
                   {"parameters", r.parameters},
                   {"dev_f1", r.dev_f1},
                   {"per_seed_f1", r.per_seed_f1}});
  }
  return out;
}

std::string sweep_table(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << std::right << std::setw(6) << "N" << std::setw(9) << "Buckets" << std::setw(7) << "Slots"
     << std::setw(12) << "Params" << std::setw(10) << "F1(%)" << '\n';
  os << std::fixed << std::setprecision(2);
  for (const auto& r : rows) {
    os << std::setw(6) << r.top_n << std::setw(9) << r.buckets << std::setw(7) << r.slots
       << std::setw(12) << r.parameters << std::setw(10) << 100 * r.dev_f1 << '\n';
  }
  return os.str();
}

}  // namespace docre
