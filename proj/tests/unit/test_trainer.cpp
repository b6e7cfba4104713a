#include <cmath>
#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "docre/error.hpp"
#include "docre/synth.hpp"
#include "docre/trainer.hpp"
#include "support.hpp"

using namespace docre;
using docre::testing::random_tensor;
using docre::testing::tiny_config;

namespace fs = std::filesystem;

namespace {

std::vector<Document> small_corpus(std::uint64_t seed, std::size_t n = 12) {
  static const ToyKB kb = gen_kb(80, 100, 9);
  return gen_corpus(kb, n, 0.5, 0.25, seed).documents;
}

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("docre_test_" + name);
  fs::remove_all(p);
  return p;
}

EvalReport report_with(std::size_t tp, std::size_t fp, std::size_t fn) {
  EvalReport r;
  r.overall = Counts{tp, fp, fn};
  return r;
}

}  // namespace

TEST_CASE("clip examples") {
  std::vector<Tensor> small = {Tensor::vector({3, 4})};
  CHECK(clip_global_norm(small, 10) == 5.0);
  CHECK(small[0] == Tensor::vector({3, 4}));
  std::vector<Tensor> big = {Tensor::vector({30, 40})};
  CHECK(clip_global_norm(big, 10) == 50.0);
  CHECK(big[0][0] == doctest::Approx(6.0).epsilon(1e-15));
  CHECK(big[0][1] == doctest::Approx(8.0).epsilon(1e-15));
}

TEST_CASE("property: clipped global norm never exceeds the threshold") {
  Rng rng(61);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Tensor> grads;
    for (int k = 0, n = 1 + static_cast<int>(rng.below(4)); k < n; ++k) {
      grads.push_back(random_tensor({1 + rng.below(5), 1 + rng.below(5)}, rng, -20, 20));
    }
    const double c = rng.uniform(0.1, 15);
    clip_global_norm(grads, c);
    double sq = 0;
    for (const auto& g : grads)
      for (double v : g.values()) sq += v * v;
    CHECK(std::sqrt(sq) <= c + 1e-12);
  }
}

TEST_CASE("zero gradients leave parameters unchanged and the EMA equal to them") {
  TrainConfig c;
  Tensor p = Tensor::vector({1.5, -2});
  Optimizer opt({p}, c);
  std::vector<Tensor*> params = {&p};
  for (int i = 0; i < 3; ++i) opt.step(params, {Tensor::vector({0, 0})}, 0.1);
  CHECK(p == Tensor::vector({1.5, -2}));
  CHECK(opt.ema()[0] == p);
}

TEST_CASE("two Adam steps match the recurrences applied by hand") {
  TrainConfig c;
  c.ema_warmup = false;
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8, decay = 0.999;
  Tensor p = Tensor::vector({1.0});
  Optimizer opt({p}, c);
  std::vector<Tensor*> params = {&p};
  const double g1 = 0.5, g2 = -0.2;

  double m = 0, v = 0, x = 1.0, shadow = 1.0;
  m = b1 * m + (1 - b1) * g1;
  v = b2 * v + (1 - b2) * g1 * g1;
  x -= lr * (m / (1 - b1)) / (std::sqrt(v / (1 - b2)) + eps);
  shadow = decay * shadow + (1 - decay) * x;
  opt.step(params, {Tensor::vector({g1})}, lr);
  CHECK(p[0] == doctest::Approx(x).epsilon(1e-14));
  // the first bias-corrected step moves by lr in the gradient's sign
  CHECK(p[0] == doctest::Approx(0.9).epsilon(1e-6));

  m = b1 * m + (1 - b1) * g2;
  v = b2 * v + (1 - b2) * g2 * g2;
  x -= lr * (m / (1 - b1 * b1)) / (std::sqrt(v / (1 - b2 * b2)) + eps);
  shadow = decay * shadow + (1 - decay) * x;
  opt.step(params, {Tensor::vector({g2})}, lr);
  CHECK(p[0] == doctest::Approx(x).epsilon(1e-14));
  CHECK(opt.ema()[0][0] == doctest::Approx(shadow).epsilon(1e-14));
  CHECK(opt.last_ema_decay() == decay);
}

TEST_CASE("EMA warm-up caps the decay early on") {
  TrainConfig c;
  Tensor p = Tensor::vector({0.0});
  Optimizer opt({p}, c);
  std::vector<Tensor*> params = {&p};
  opt.step(params, {Tensor::vector({1})}, 0.1);
  CHECK(opt.last_ema_decay() == doctest::Approx(2.0 / 11.0));
  for (int i = 0; i < 20000; ++i) opt.step(params, {Tensor::vector({0})}, 0.0);
  CHECK(opt.last_ema_decay() == 0.999);
}

TEST_CASE("early stopping example") {
  EarlyStopping s(5);
  const double f1[] = {.5, .6, .6, .6, .6, .6, .6};
  std::size_t stopped_at = 0;
  for (double f : f1) {
    s.update(f);
    if (s.should_stop()) {
      stopped_at = s.epochs();
      break;
    }
  }
  CHECK(stopped_at == 7);
  CHECK(s.best_epoch() == 2);
  CHECK(s.best_score() == 0.6);
}

TEST_CASE("seed summary: mean and population standard deviation") {
  std::vector<SeedRun> runs(3);
  runs[0] = {1, true, "", 1, report_with(1, 1, 1)};  // F1 .5
  runs[1] = {2, true, "", 1, report_with(7, 3, 3)};  // F1 .7
  runs[2] = {3, false, "diverged", 0, {}};
  const SeedSummary s = summarise(runs);
  CHECK(s.mean_f1 == doctest::Approx(0.6).epsilon(1e-14));
  CHECK(s.std_f1 == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(s.runs.size() == 3);
  CHECK(s.to_json()["runs"].size() == 3);
  CHECK(s.to_table().find("diverged") != std::string::npos);
}

TEST_CASE("empty splits are refused") {
  CHECK_THROWS_AS(train({}, small_corpus(1), tiny_config(), 1), Error);
  CHECK_THROWS_AS(train(small_corpus(1), {}, tiny_config(), 1), Error);
}

TEST_CASE("training is deterministic for a seed") {
  const auto docs = small_corpus(2);
  const TrainResult a = train(docs, docs, tiny_config(), 7);
  const TrainResult b = train(docs, docs, tiny_config(), 7);
  const TrainResult c = train(docs, docs, tiny_config(), 8);
  CHECK(a.model.parameter_values() == b.model.parameter_values());
  CHECK(a.model.parameter_values() != c.model.parameter_values());
  REQUIRE(a.log.size() == b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) CHECK(a.log[i].to_json().dump() == b.log[i].to_json().dump());
}

TEST_CASE("training logs one entry per epoch and decays the learning rate") {
  const auto docs = small_corpus(3);
  TrainConfig c = tiny_config();
  c.max_epochs = 3;
  c.patience = 100;
  std::size_t callbacks = 0;
  const TrainResult r = train(docs, docs, c, 1, std::nullopt, [&](const EpochMetrics&) { ++callbacks; });
  REQUIRE(r.log.size() == 3);
  CHECK(callbacks == 3);
  CHECK(r.log[1].learning_rate == doctest::Approx(c.learning_rate * 0.75));
  CHECK(r.log[2].learning_rate == doctest::Approx(c.learning_rate * 0.75 * 0.75));
  CHECK(r.best_epoch >= 1);
  CHECK(r.best_dev_f1 == r.log[r.best_epoch - 1].dev.overall.f1());
  // the returned model is the selected epoch's averaged model
  CHECK(evaluate(r.model, docs).overall.f1() == r.best_dev_f1);
}

TEST_CASE("learning on a tiny corpus lowers the loss") {
  const auto docs = small_corpus(4, 16);
  TrainConfig c = tiny_config();
  c.word_dimension = 12;
  c.gcnn_dimension = 16;
  c.mil_dimension = 16;
  c.position_dimension = 4;
  c.learning_rate = 5e-3;
  c.max_epochs = 8;
  c.patience = 100;
  const TrainResult r = train(docs, docs, c, 3);
  CHECK(r.log.back().train_loss < r.log.front().train_loss);
}

TEST_CASE("document batches and train+dev merging run") {
  const auto docs = small_corpus(5);
  TrainConfig c = tiny_config();
  c.document_batches = true;
  c.merge_train_dev = true;
  c.max_epochs = 1;
  CHECK_NOTHROW(train(docs, small_corpus(6), c, 1));
}

TEST_CASE("dev labels unknown to the model are an eval error") {
  auto dev = merge_all(small_corpus(7));
  const auto ids = dev[0].entity_ids();
  REQUIRE(ids.size() >= 2);
  dev[0].relations = {{ids[0], ids[1], "unseen-label"}};
  try {
    train(small_corpus(8), dev, tiny_config(), 1);
    FAIL("expected an eval error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Eval);
  }
}

TEST_CASE("blob round trip is bit exact") {
  Rng rng(71);
  Tensor t = random_tensor({3, 2, 4}, rng);
  t[0] = -0.0;
  t[1] = 1e-310;  // subnormal
  std::stringstream buf;
  write_blob(buf, "x.y", t);
  const auto [name, back] = read_blob(buf);
  CHECK(name == "x.y");
  CHECK(back.shape() == t.shape());
  CHECK(std::memcmp(back.data(), t.data(), t.size() * sizeof(double)) == 0);
}

TEST_CASE("checkpoint round trip preserves parameters, vocabularies and scores") {
  const auto docs = small_corpus(9);
  const TrainResult r = train(docs, docs, tiny_config(), 2);
  const fs::path dir = temp_dir("ckpt");
  save_checkpoint(dir, r.model, {r.best_epoch, r.best_dev_f1});
  const LoadedCheckpoint loaded = load_checkpoint(dir);
  CHECK(loaded.model.parameter_values() == r.model.parameter_values());
  CHECK(loaded.model.config() == r.model.config());
  CHECK(loaded.model.words() == r.model.words());
  CHECK(loaded.model.edge_vocab() == r.model.edge_vocab());
  CHECK(loaded.model.relations() == r.model.relations());
  CHECK(loaded.info.best_epoch == r.best_epoch);
  CHECK(loaded.info.dev_f1 == r.best_dev_f1);
  CHECK(evaluate(loaded.model, docs).to_json() == evaluate(r.model, docs).to_json());
  fs::remove_all(dir);
}

TEST_CASE("corrupt or missing checkpoints raise errors") {
  CHECK_THROWS_AS(load_checkpoint(temp_dir("missing")), Error);
  const auto docs = small_corpus(10);
  const Model m = Model::initialise(tiny_config(), merge_all(docs), 1);
  const fs::path dir = temp_dir("corrupt");
  save_checkpoint(dir, m, {});
  fs::resize_file(dir / "mil.biaffine.bin", 20);
  CHECK_THROWS_AS(load_checkpoint(dir), Error);
  fs::remove_all(dir);
}
