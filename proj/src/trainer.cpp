#include "docre/trainer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "docre/error.hpp"

namespace docre {

using nlohmann::json;

double clip_global_norm(std::vector<Tensor>& grads, double c) {
  if (!(c > 0.0)) throw Error(ErrorKind::Config, "clip threshold must be positive");
  double sq = 0.0;
  for (const auto& g : grads) {
    for (double v : g.values()) sq += v * v;
  }
  const double norm = std::sqrt(sq);
  if (norm > c) {
    const double factor = c / norm;
    for (auto& g : grads) {
      for (auto& v : g.values()) v *= factor;
    }
  }
  return norm;
}

// ---- Optimizer ---------------------------------------------------------------

Optimizer::Optimizer(const std::vector<Tensor>& initial, const TrainConfig& config)
    : beta1_(config.adam_beta1),
      beta2_(config.adam_beta2),
      epsilon_(config.adam_epsilon),
      ema_decay_(config.ema_decay),
      ema_warmup_(config.ema_warmup),
      shadow_(initial) {
  for (const auto& t : initial) {
    first_.emplace_back(t.shape(), 0.0);
    second_.emplace_back(t.shape(), 0.0);
  }
}

void Optimizer::step(std::vector<Tensor*>& params, const std::vector<Tensor>& grads,
                     double learning_rate) {
  if (params.size() != grads.size() || params.size() != first_.size()) {
    throw Error(ErrorKind::Invariant, "optimizer parameter count mismatch");
  }
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double correction1 = 1.0 - std::pow(beta1_, t);
  const double correction2 = 1.0 - std::pow(beta2_, t);
  double decay = ema_decay_;
  if (ema_warmup_) decay = std::min(decay, (1.0 + t) / (10.0 + t));
  last_decay_ = decay;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& value = *params[p];
    const Tensor& g = grads[p];
    Tensor& m = first_[p];
    Tensor& v = second_[p];
    Tensor& shadow = shadow_[p];
    for (std::size_t i = 0; i < value.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      value[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + epsilon_);
      shadow[i] = decay * shadow[i] + (1.0 - decay) * value[i];
    }
  }
}

// ---- EarlyStopping -----------------------------------------------------------

bool EarlyStopping::update(double score) {
  ++epoch_;
  if (score > best_) {
    best_ = score;
    best_epoch_ = epoch_;
    since_best_ = 0;
    return true;
  }
  ++since_best_;
  return false;
}

json EpochMetrics::to_json() const {
  return {{"epoch", epoch},
          {"learning_rate", learning_rate},
          {"train_loss", train_loss},
          {"steps", steps},
          {"dev", dev.to_json()},
          {"improved", improved}};
}

// ---- evaluation --------------------------------------------------------------

EvalReport evaluate_predictions(const Dataset& data, const std::vector<std::size_t>& predicted) {
  if (predicted.size() != data.pairs.size()) {
    throw Error(ErrorKind::Eval, std::to_string(predicted.size()) + " predictions for " +
                                     std::to_string(data.pairs.size()) + " pairs");
  }
  EvalReport report;
  for (std::size_t i = 0; i < data.pairs.size(); ++i) {
    const auto& pair = data.pairs[i];
    report.add(split_intra_inter(pair, data.doc_of(pair).doc), pair.label, predicted[i]);
  }
  return report;
}

EvalReport evaluate(const Model& model, const Dataset& data) {
  std::vector<std::size_t> predicted;
  predicted.reserve(data.pairs.size());
  for (const auto& pair : data.pairs) {
    if (pair.label >= model.relations().size()) {
      throw Error(ErrorKind::Eval, "gold label index outside the model's relation vocabulary");
    }
    predicted.push_back(model.predict(data.doc_of(pair), pair));
  }
  EvalReport report = evaluate_predictions(data, predicted);
  report.fingerprint = model.config().fingerprint();
  return report;
}

EvalReport evaluate(const Model& model, const std::vector<Document>& docs,
                    const std::optional<GraphOptions>& graph) {
  Dataset data;
  try {
    const auto merged = merge_all(docs);
    data = graph ? model.prepare(merged, *graph) : model.prepare(merged);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Label) {
      throw Error(ErrorKind::Eval, std::string("relation vocabulary mismatch: ") + e.what());
    }
    throw;
  }
  return evaluate(model, data);
}

// ---- training ----------------------------------------------------------------

namespace {

std::vector<std::vector<std::size_t>> make_batches(const Dataset& data, const TrainConfig& config,
                                                   Rng& rng) {
  std::vector<std::size_t> order;
  if (config.document_batches) {
    std::vector<std::size_t> doc_order(data.docs.size());
    for (std::size_t i = 0; i < doc_order.size(); ++i) doc_order[i] = i;
    rng.shuffle(doc_order);
    std::vector<std::vector<std::size_t>> by_doc(data.docs.size());
    for (std::size_t p = 0; p < data.pairs.size(); ++p) by_doc[data.pairs[p].doc_index].push_back(p);
    for (std::size_t d : doc_order) order.insert(order.end(), by_doc[d].begin(), by_doc[d].end());
  } else {
    order.resize(data.pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
    const std::size_t end = std::min(order.size(), start + config.batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

}  // namespace

TrainResult train(const std::vector<Document>& train_docs, const std::vector<Document>& dev_docs,
                  const TrainConfig& config, std::uint64_t seed,
                  const std::optional<GraphOptions>& graph, const EpochCallback& on_epoch) {
  config.validate();
  if (train_docs.empty() || dev_docs.empty()) {
    throw Error(ErrorKind::Train, "training and development splits must be non-empty");
  }
  std::vector<Document> train_merged = merge_all(train_docs);
  const std::vector<Document> dev_merged = merge_all(dev_docs);
  if (config.merge_train_dev) {
    train_merged.insert(train_merged.end(), dev_merged.begin(), dev_merged.end());
  }
  TrainConfig effective = config;
  if (graph) {
    effective.edge_categories = graph->enabled;
    effective.coref_clique = graph->coref_clique;
  }
  Model model = Model::initialise(effective, train_merged, seed);
  const Dataset train_set = model.prepare(train_merged);
  Dataset dev_set;
  try {
    dev_set = model.prepare(dev_merged);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Label) throw Error(ErrorKind::Eval, e.what());
    throw;
  }
  if (train_set.pairs.empty()) throw Error(ErrorKind::Train, "training split yields no entity pairs");

  auto params = model.named_parameters();
  std::vector<Tensor*> values;
  std::vector<Var> vars;
  for (auto& [name, var] : params) {
    values.push_back(&var.mutable_value());
    vars.push_back(var);
  }
  Optimizer optimizer(model.parameter_values(), effective);
  EarlyStopping stopper(effective.patience);
  Rng rng(derive_seed(seed, 0x7ea1));

  TrainResult result{model.clone(), 0, 0.0, false, {}};
  std::vector<Tensor> grads(vars.size());
  for (std::size_t epoch = 1; epoch <= effective.max_epochs; ++epoch) {
    const double lr =
        effective.learning_rate * std::pow(effective.learning_rate_decay, static_cast<double>(epoch - 1));
    const auto batches = make_batches(train_set, effective, rng);
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto& batch = batches[b];
      for (auto& v : vars) v.zero_grad();
      const double inv = 1.0 / static_cast<double>(batch.size());
      try {
        for (std::size_t idx : batch) {
          const PairInstance& pair = train_set.pairs[idx];
          Tape tape;
          const Var scores = model.forward(tape, train_set.doc_of(pair), pair, rng, true);
          const Var loss = cross_entropy(tape, scores, pair.label);
          loss_sum += loss.value().item();
          tape.backward(scale(tape, loss, inv));
        }
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::Numeric) throw;
        throw Error(ErrorKind::Train, "divergence in epoch " + std::to_string(epoch) + ", batch " +
                                          std::to_string(b) + ": " + e.what());
      }
      if (!std::isfinite(loss_sum)) {
        throw Error(ErrorKind::Train, "non-finite loss in epoch " + std::to_string(epoch) +
                                          ", batch " + std::to_string(b));
      }
      for (std::size_t p = 0; p < vars.size(); ++p) grads[p] = vars[p].grad();
      clip_global_norm(grads, effective.gradient_clipping);
      optimizer.step(values, grads, lr);
    }

    Model averaged = model.clone();
    averaged.set_parameter_values(optimizer.ema());
    EpochMetrics metrics;
    metrics.epoch = epoch;
    metrics.learning_rate = lr;
    metrics.train_loss = loss_sum / static_cast<double>(train_set.pairs.size());
    metrics.steps = optimizer.steps();
    metrics.dev = evaluate(averaged, dev_set);
    metrics.improved = stopper.update(metrics.dev.overall.f1());
    if (metrics.improved) {
      result.model = std::move(averaged);
      result.best_epoch = epoch;
      result.best_dev_f1 = metrics.dev.overall.f1();
    }
    result.log.push_back(metrics);
    if (on_epoch) on_epoch(metrics);
    if (stopper.should_stop()) {
      result.stopped_early = true;
      break;
    }
  }
  return result;
}

// ---- multi-seed ---------------------------------------------------------------

SeedSummary summarise(std::vector<SeedRun> runs) {
  SeedSummary s;
  s.runs = std::move(runs);
  std::vector<const SeedRun*> ok;
  for (const auto& r : s.runs) {
    if (r.ok) ok.push_back(&r);
  }
  if (ok.empty()) return s;
  const double n = static_cast<double>(ok.size());
  auto stats = [&](auto metric, double& mean, double& sd) {
    mean = 0.0;
    for (const auto* r : ok) mean += metric(r->report.overall);
    mean /= n;
    double var = 0.0;
    for (const auto* r : ok) var += std::pow(metric(r->report.overall) - mean, 2);
    sd = std::sqrt(var / n);
  };
  stats([](const Counts& c) { return c.precision(); }, s.mean_precision, s.std_precision);
  stats([](const Counts& c) { return c.recall(); }, s.mean_recall, s.std_recall);
  stats([](const Counts& c) { return c.f1(); }, s.mean_f1, s.std_f1);
  return s;
}

SeedSummary run_seeds(const std::vector<Document>& train_docs, const std::vector<Document>& dev_docs,
                      const std::vector<Document>& eval_docs, const TrainConfig& config) {
  config.validate();
  std::vector<SeedRun> runs;
  for (std::uint64_t seed : config.seeds) {
    SeedRun run;
    run.seed = seed;
    try {
      TrainResult r = train(train_docs, dev_docs, config, seed);
      run.best_epoch = r.best_epoch;
      run.report = evaluate(r.model, eval_docs);
      run.ok = true;
    } catch (const Error& e) {
      run.error = e.what();
    }
    runs.push_back(std::move(run));
  }
  return summarise(std::move(runs));
}

json SeedSummary::to_json() const {
  json rows = json::array();
  for (const auto& r : runs) {
    json row = {{"seed", r.seed}, {"ok", r.ok}, {"best_epoch", r.best_epoch}};
    if (r.ok) {
      row["report"] = r.report.to_json();
    } else {
      row["error"] = r.error;
    }
    rows.push_back(std::move(row));
  }
  return {{"runs", std::move(rows)},
          {"mean", {{"precision", mean_precision}, {"recall", mean_recall}, {"f1", mean_f1}}},
          {"std", {{"precision", std_precision}, {"recall", std_recall}, {"f1", std_f1}}}};
}

std::string SeedSummary::to_table() const {
  std::ostringstream os;
  os << std::left << std::setw(10) << "Seed" << std::right << std::setw(9) << "P(%)" << std::setw(9)
     << "R(%)" << std::setw(9) << "F1(%)" << "  Status\n";
  os << std::fixed << std::setprecision(2);
  for (const auto& r : runs) {
    os << std::left << std::setw(10) << r.seed << std::right;
    if (r.ok) {
      const auto& c = r.report.overall;
      os << std::setw(9) << 100 * c.precision() << std::setw(9) << 100 * c.recall() << std::setw(9)
         << 100 * c.f1() << "  ok\n";
    } else {
      os << std::setw(9) << "-" << std::setw(9) << "-" << std::setw(9) << "-" << "  FAILED: " << r.error
         << '\n';
    }
  }
  os << std::left << std::setw(10) << "mean" << std::right << std::setw(9) << 100 * mean_precision
     << std::setw(9) << 100 * mean_recall << std::setw(9) << 100 * mean_f1 << '\n';
  os << std::left << std::setw(10) << "std" << std::right << std::setw(9) << 100 * std_precision
     << std::setw(9) << 100 * std_recall << std::setw(9) << 100 * std_f1 << '\n';
  return os.str();
}

// ---- checkpoints --------------------------------------------------------------

namespace {

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw Error(ErrorKind::Io, "truncated parameter blob");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

std::string blob_file(const std::string& name) { return name + ".bin"; }

}  // namespace

void write_blob(std::ostream& out, const std::string& name, const Tensor& value) {
  put_u64(out, name.size());
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  put_u64(out, value.rank());
  for (auto extent : value.shape()) put_u64(out, extent);
  for (double v : value.values()) put_u64(out, std::bit_cast<std::uint64_t>(v));
}

std::pair<std::string, Tensor> read_blob(std::istream& in) {
  const std::uint64_t name_len = get_u64(in);
  if (name_len > (1u << 16)) throw Error(ErrorKind::Io, "implausible parameter name length");
  std::string name(name_len, '\0');
  if (!in.read(name.data(), static_cast<std::streamsize>(name_len))) {
    throw Error(ErrorKind::Io, "truncated parameter name");
  }
  const std::uint64_t rank = get_u64(in);
  if (rank > 8) throw Error(ErrorKind::Io, "implausible rank in blob " + name);
  Shape shape;
  for (std::uint64_t i = 0; i < rank; ++i) shape.push_back(get_u64(in));
  Tensor value(shape);
  for (auto& v : value.values()) v = std::bit_cast<double>(get_u64(in));
  return {std::move(name), std::move(value)};
}

void save_checkpoint(const std::filesystem::path& dir, const Model& model, const CheckpointInfo& info) {
  std::filesystem::create_directories(dir);
  json params = json::array();
  for (const auto& [name, var] : model.named_parameters()) {
    std::ofstream out(dir / blob_file(name), std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + (dir / blob_file(name)).string());
    write_blob(out, name, var.value());
    params.push_back(name);
  }
  json manifest = {{"format_version", kCheckpointFormat},
                   {"config", model.config().to_text()},
                   {"edge_vocabulary", model.edge_vocab().to_json()},
                   {"word_vocabulary", model.words().words()},
                   {"relation_vocabulary", model.relations().labels()},
                   {"best_epoch", info.best_epoch},
                   {"dev_f1", info.dev_f1},
                   {"parameters", std::move(params)}};
  std::ofstream out(dir / "manifest", std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + (dir / "manifest").string());
  out << manifest.dump(2) << '\n';
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest");
  if (!in) throw Error(ErrorKind::Io, "no checkpoint manifest in " + dir.string());
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, "checkpoint manifest: " + std::string(e.what()));
  }
  if (manifest.value("format_version", 0) != kCheckpointFormat) {
    throw Error(ErrorKind::Io, "unsupported checkpoint format in " + dir.string());
  }
  const TrainConfig config = TrainConfig::from_text(manifest.at("config").get<std::string>());
  WordVocab words;
  const auto word_list = manifest.at("word_vocabulary").get<std::vector<std::string>>();
  if (word_list.empty() || word_list.front() != WordVocab::kUnknown) {
    throw Error(ErrorKind::Io, "word vocabulary must start with " + std::string(WordVocab::kUnknown));
  }
  for (const auto& w : word_list) words.add(w);
  auto labels = manifest.at("relation_vocabulary").get<std::vector<std::string>>();
  if (!labels.empty()) labels.erase(labels.begin());
  Model model(config, std::move(words), EdgeTypeVocabulary::from_json(manifest.at("edge_vocabulary")),
              RelationVocab(labels), 0);
  std::vector<Tensor> values;
  for (const auto& [name, var] : model.named_parameters()) {
    std::ifstream blob(dir / blob_file(name), std::ios::binary);
    if (!blob) throw Error(ErrorKind::Io, "missing parameter blob " + name);
    auto [stored, value] = read_blob(blob);
    if (stored != name) throw Error(ErrorKind::Io, "blob " + blob_file(name) + " holds " + stored);
    values.push_back(std::move(value));
  }
  model.set_parameter_values(values);
  CheckpointInfo info{manifest.at("best_epoch").get<std::size_t>(), manifest.at("dev_f1").get<double>()};
  return LoadedCheckpoint{std::move(model), info};
}

}  // namespace docre
