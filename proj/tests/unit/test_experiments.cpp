#include "doctest.h"
#include "docre/error.hpp"
#include "docre/experiments.hpp"
#include "docre/synth.hpp"
#include "support.hpp"

using namespace docre;
using docre::testing::six_token_doc;
using docre::testing::tiny_config;

namespace {

AblationInputs small_inputs() {
  const ToyKB kb = gen_kb(60, 80, 2);
  AblationInputs in;
  in.train = gen_corpus(kb, 10, 0.5, 0.25, 1).documents;
  in.dev = gen_corpus(kb, 6, 0.5, 0.25, 2).documents;
  in.eval = in.dev;
  return in;
}

TrainConfig quick_config() {
  TrainConfig c = tiny_config();
  c.max_epochs = 1;
  return c;
}

}  // namespace

TEST_CASE("ablate_all reports every enabled category against shared full runs") {
  const auto reports = ablate_all(small_inputs(), quick_config(), {1});
  REQUIRE(reports.size() == 5);
  for (std::size_t i = 0; i < reports.size(); ++i) {
    CHECK(reports[i].removed == kAllEdgeKinds[i]);
    CHECK(reports[i].per_seed.size() == 1);
    CHECK(reports[i].full_overall_f1 == reports[0].full_overall_f1);
    CHECK(reports[i].delta_inter() == reports[i].inter_f1 - reports[i].full_inter_f1);
  }
  const std::string table = ablation_table(reports);
  for (EdgeKind k : kAllEdgeKinds) CHECK(table.find(kind_name(k)) != std::string::npos);
}

TEST_CASE("evaluate-only ablation keeps the full model") {
  TrainConfig c = quick_config();
  c.ablate_retrain = false;
  const AblationInputs in = small_inputs();
  const AblationReport r = ablate(in, c, EdgeKind::Coreference, {3});
  CHECK_FALSE(r.retrained);
  const AblationReport again = ablate(in, c, EdgeKind::Coreference, {3});
  CHECK(r.to_json() == again.to_json());
  CHECK(r.to_json()["removed"] == "coreference");
}

TEST_CASE("removing the only enabled category is refused") {
  TrainConfig c = quick_config();
  c.edge_categories = KindSet::of({EdgeKind::SelfNode});
  try {
    ablate(small_inputs(), c, EdgeKind::SelfNode, {1});
    FAIL("expected a config error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Config);
  }
  // ablate_all skips it rather than failing
  CHECK(ablate_all(small_inputs(), c, {1}).empty());
}

TEST_CASE("dropping self edges on a self-edges-only graph still reports") {
  Document d = six_token_doc();
  d.coref_chains.clear();
  TrainConfig c = quick_config();
  c.edge_categories = KindSet::of({EdgeKind::SelfNode, EdgeKind::Coreference});
  AblationInputs in{{d}, {d}, {d}};
  for (bool retrain : {true, false}) {
    c.ablate_retrain = retrain;
    const AblationReport r = ablate(in, c, EdgeKind::SelfNode, {1});
    CHECK(r.per_seed.size() == 1);
    CHECK(r.per_seed[0].pairs == 6);
  }
}

TEST_CASE("top-N sweep rows are sorted and unique with nondecreasing slots") {
  const auto rows = sweep_top_n(small_inputs(), quick_config(), {4, 0, 2, 4}, {1});
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].top_n == 0);
  CHECK(rows[1].top_n == 2);
  CHECK(rows[2].top_n == 4);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(rows[i].slots >= rows[i - 1].slots);
    CHECK(rows[i].parameters >= rows[i - 1].parameters);
  }
  // N = 0 leaves only the shared rare bucket
  CHECK(rows[0].buckets == 1);
  CHECK(rows[0].slots == 3);
  CHECK(sweep_json(rows).size() == 3);
  CHECK(sweep_table(rows).find("Slots") != std::string::npos);
}

TEST_CASE("sweeps need values and seeds") {
  CHECK_THROWS_AS(sweep_top_n(small_inputs(), quick_config(), {}, {1}), Error);
  CHECK_THROWS_AS(sweep_top_n(small_inputs(), quick_config(), {2}, {}), Error);
}
