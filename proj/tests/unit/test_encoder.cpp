#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "doctest.h"
#include "docre/encoder.hpp"
#include "docre/error.hpp"
#include "support.hpp"

using namespace docre;
using docre::testing::max_rel_err;
using docre::testing::numeric_grad;
using docre::testing::random_tensor;
using docre::testing::six_token_doc;

namespace {

using Entry = EdgeTypeVocabulary::Entry;

EdgeTypeVocabulary vocab_of(std::vector<EdgeType> types) {
  std::vector<Entry> ranked;
  std::size_t f = 100;
  for (auto& t : types) ranked.push_back({t, f--});
  return EdgeTypeVocabulary::from_ranked(ranked, types.size());
}

const EdgeType kSelf{EdgeKind::SelfNode, ""};
const EdgeType kWord{EdgeKind::AdjacentWord, ""};
const EdgeType kCoref{EdgeKind::Coreference, ""};
const EdgeType kNsubj{EdgeKind::SyntacticDependency, "nsubj"};

GcnnOptions plain() {
  GcnnOptions o;
  o.dropout = 0.0;
  return o;
}

// Random graph with every kind of edge among n nodes.
DocumentGraph random_graph(std::size_t n, Rng& rng) {
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i) edges.push_back({i, i, kSelf});
  const EdgeType kinds[] = {kWord, kCoref, kNsubj};
  for (std::size_t e = 0; e < 2 * n; ++e) {
    const std::size_t a = rng.below(n), b = rng.below(n);
    if (a != b) edges.push_back({a, b, kinds[rng.below(3)]});
  }
  return DocumentGraph(n, edges);
}

}  // namespace

TEST_CASE("relative position examples") {
  CHECK(relative_position(3, {2, 3, 4}, 64) == 0);
  CHECK(relative_position(5, {0, 1, 8, 9}, 64) == -3);
  CHECK(relative_position(5, {3, 7}, 64) == -2);  // tie goes negative
  CHECK(relative_position(0, {100}, 64) == -64);
  CHECK(relative_position(100, {0}, 64) == 64);
}

TEST_CASE("property: relative position matches a brute-force scan") {
  Rng rng(31);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng.below(40);
    std::vector<std::size_t> targets;
    for (std::size_t k = 0, m = 1 + rng.below(4); k < m; ++k) targets.push_back(rng.below(n));
    std::sort(targets.begin(), targets.end());
    targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
    const std::size_t clamp = 1 + rng.below(10);
    const std::size_t tok = rng.below(n);
    long best = 0;
    bool first = true;
    for (std::size_t t : targets) {
      const long off = static_cast<long>(tok) - static_cast<long>(t);
      if (first || std::labs(off) < std::labs(best) || (std::labs(off) == std::labs(best) && off < best)) best = off;
      first = false;
    }
    best = std::clamp(best, -static_cast<long>(clamp), static_cast<long>(clamp));
    CHECK(relative_position(tok, targets, clamp) == best);
  }
}

TEST_CASE("word vocabulary maps unknown tokens to the UNK row") {
  const WordVocab v = WordVocab::from_documents({six_token_doc()});
  CHECK(v.size() == 7);
  CHECK(v.index_of("A") == 1);
  CHECK(v.index_of("never-seen") == WordVocab::kUnknownIndex);
  CHECK(v.encode({"B", "zzz"}) == std::vector<std::size_t>{2, 0});
}

TEST_CASE("min_count drops rare tokens") {
  Document d = six_token_doc();
  d.tokens = {"a", "a", "b", "c", "c", "c"};
  const WordVocab v = WordVocab::from_documents({d}, 2);
  CHECK(v.words() == std::vector<std::string>{"<unk>", "a", "c"});
}

TEST_CASE("input rows concatenate word and both position embeddings") {
  Rng rng(1);
  EmbeddingTables t = make_embeddings(WordVocab::from_documents({six_token_doc()}), 3, 2, 2, rng);
  PairInstance p;
  p.head_tokens = {0};
  p.tail_tokens = {5};
  const std::vector<std::size_t> ids = {1, 0, 2};
  Tape tape;
  const Tensor x = encode_inputs(tape, ids, p, t).value();
  REQUIRE(x.shape() == Shape{3, 7});
  // token 2: offset +2 to head, -3 -> clamp -2 to tail; rows are offset + clamp
  for (std::size_t c = 0; c < 3; ++c) CHECK(x.at(2, c) == t.words.value().at(2, c));
  for (std::size_t c = 0; c < 2; ++c) {
    CHECK(x.at(2, 3 + c) == t.position_head.value().at(4, c));
    CHECK(x.at(2, 5 + c) == t.position_tail.value().at(0, c));
    CHECK(x.at(1, 5 + c) == t.position_tail.value().at(0, c));
  }
}

TEST_CASE("glorot initialisation stays within its bound") {
  Rng rng(2);
  const Tensor w = glorot_uniform(30, 20, rng);
  const double bound = std::sqrt(6.0 / 50.0);
  for (double v : w.values()) CHECK(std::abs(v) <= bound);
}

TEST_CASE("pretrained vectors extend the vocabulary and overwrite rows") {
  Rng rng(3);
  EmbeddingTables t = make_embeddings(WordVocab::from_documents({six_token_doc()}), 2, 2, 2, rng);
  const auto path = std::filesystem::temp_directory_path() / "docre_vectors.txt";
  {
    std::ofstream out(path);
    out << "A 0.5 -0.5\nnewword 1 2\n";
  }
  CHECK(load_pretrained(t, path, rng) == 2);
  CHECK(t.vocab.size() == 8);
  CHECK(t.words.value().at(1, 0) == 0.5);
  CHECK(t.words.value().at(7, 1) == 2.0);
  {
    std::ofstream out(path);
    out << "A 0.5 -0.5 3\n";
  }
  CHECK_THROWS_AS(load_pretrained(t, path, rng), Error);
  std::filesystem::remove(path);
}

TEST_CASE("self-edges-only graph with identity weights doubles the input") {
  const auto vocab = vocab_of({kSelf});
  Rng rng(4);
  GcnnEncoder enc = make_gcnn(vocab, 3, 3, 1, rng);
  REQUIRE_FALSE(enc.input_weight.has_value());
  auto& slot = enc.blocks[0].slots.at(Slot{0, Direction::Self}.id());
  slot.weight.mutable_value() = Tensor::matrix({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  slot.bias.mutable_value().fill(0.0);
  slot.gate_weight.mutable_value().fill(0.0);
  slot.gate_bias.mutable_value().fill(1000.0);  // sigmoid saturates to exactly 1
  GcnnOptions opts = plain();
  opts.activation = "identity";
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < 4; ++i) edges.push_back({i, i, kSelf});
  const MessagePlan plan = plan_messages(DocumentGraph(4, edges), vocab);
  const Tensor x = random_tensor({4, 3}, rng);
  Tape tape;
  const Tensor y = gcnn_forward(tape, Var::constant(x), plan, enc, opts, rng, false).value();
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == 2 * x[i]);
}

TEST_CASE("two-node graph with one forward edge matches a hand evaluation") {
  const auto vocab = vocab_of({kNsubj});
  Rng rng(5);
  GcnnEncoder enc = make_gcnn(vocab, 2, 2, 1, rng);
  auto& fwd = enc.blocks[0].slots.at(Slot{0, Direction::Forward}.id());
  auto& rev = enc.blocks[0].slots.at(Slot{0, Direction::Reverse}.id());
  fwd.weight.mutable_value() = Tensor::matrix({{1, 2}, {3, 4}});
  fwd.bias.mutable_value() = Tensor::vector({0.5, -0.5});
  fwd.gate_weight.mutable_value() = Tensor::matrix({{1}, {-1}});
  fwd.gate_bias.mutable_value() = Tensor::scalar(0.25);
  rev.weight.mutable_value() = Tensor::matrix({{0, 1}, {1, 0}});
  rev.bias.mutable_value() = Tensor::vector({0, 0});
  rev.gate_weight.mutable_value() = Tensor::matrix({{0}, {0}});
  rev.gate_bias.mutable_value() = Tensor::scalar(0);
  // edge 0 -> 1
  const MessagePlan plan = plan_messages(DocumentGraph(2, {{0, 1, kNsubj}}), vocab);
  const Tensor x = Tensor::matrix({{1, -2}, {0.5, 3}});
  Tape tape;
  const Tensor y = gcnn_forward(tape, Var::constant(x), plan, enc, plain(), rng, false).value();

  auto sig = [](double v) { return 1 / (1 + std::exp(-v)); };
  // node 1 receives from node 0 along the edge: x0 W + b, gated by x0 . w + b
  const double g1 = sig(1 * 1 + -2 * -1 + 0.25);
  const double m1a = (1 * 1 + -2 * 3 + 0.5) * g1, m1b = (1 * 2 + -2 * 4 - 0.5) * g1;
  // node 0 receives from node 1 against the edge with gate 0.5
  const double m0a = 3 * 0.5, m0b = 0.5 * 0.5;
  auto relu = [](double v) { return v > 0 ? v : 0.0; };
  CHECK(y.at(0, 0) == doctest::Approx(relu(m0a) + 1));
  CHECK(y.at(0, 1) == doctest::Approx(relu(m0b) - 2));
  CHECK(y.at(1, 0) == doctest::Approx(relu(m1a) + 0.5));
  CHECK(y.at(1, 1) == doctest::Approx(relu(m1b) + 3));
}

TEST_CASE("input projection appears only when dimensions differ") {
  const auto vocab = vocab_of({kSelf});
  Rng rng(6);
  CHECK_FALSE(make_gcnn(vocab, 4, 4, 2, rng).input_weight.has_value());
  const GcnnEncoder e = make_gcnn(vocab, 6, 4, 2, rng);
  REQUIRE(e.input_weight.has_value());
  CHECK(e.input_weight->shape() == Shape{6, 4});
  CHECK(e.blocks.size() == 2);
}

TEST_CASE("rare-typed messages without a rare bucket are dropped from the plan") {
  const auto vocab = vocab_of({kSelf});
  const MessagePlan plan = plan_messages(DocumentGraph(2, {{0, 0, kSelf}, {1, 1, kSelf}, {0, 1, kCoref}}), vocab);
  REQUIRE(plan.groups.size() == 1);
  CHECK(plan.groups.begin()->second.sources.size() == 2);
}

TEST_CASE("gcnn gradients match finite differences for every parameter") {
  Rng rng(7);
  const auto vocab = EdgeTypeVocabulary::from_ranked({{kSelf, 9}, {kWord, 8}, {kCoref, 7}, {kNsubj, 6}}, 2);
  GcnnEncoder enc = make_gcnn(vocab, 3, 4, 2, rng);
  // Non-zero biases exercise their gradient paths.
  for (auto& b : enc.blocks)
    for (auto& [id, s] : b.slots) s.bias.mutable_value() = random_tensor(s.bias.shape(), rng, -0.2, 0.2);
  const MessagePlan plan = plan_messages(random_graph(5, rng), vocab);
  const Var x = Var::constant(random_tensor({5, 3}, rng));
  const Tensor w = random_tensor({5, 4}, rng);
  for (const std::string act : {"tanh", "relu"}) {
    GcnnOptions opts = plain();
    opts.activation = act;
    auto loss = [&] {
      Tape t;
      return sum(t, mul(t, gcnn_forward(t, x, plan, enc, opts, rng, false), Var::constant(w))).value().item();
    };
    std::vector<Var> params = {*enc.input_weight, *enc.input_bias};
    for (auto& b : enc.blocks)
      for (auto& [id, s] : b.slots) params.insert(params.end(), {s.weight, s.bias, s.gate_weight, s.gate_bias});
    for (auto& p : params) p.zero_grad();
    Tape tape;
    tape.backward(sum(tape, mul(tape, gcnn_forward(tape, x, plan, enc, opts, rng, false), Var::constant(w))));
    for (auto& p : params) {
      CAPTURE(act);
      CHECK(max_rel_err(p.grad(), numeric_grad(loss, p)) <= 1e-3);
    }
  }
}

TEST_CASE("property: node relabelling permutes the output rows") {
  Rng rng(8);
  const auto vocab = vocab_of({kSelf, kWord, kCoref, kNsubj});
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 2 + rng.below(7);
    GcnnEncoder enc = make_gcnn(vocab, 3, 3, 2, rng);
    const DocumentGraph g = random_graph(n, rng);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    std::vector<Edge> moved;
    for (const auto& e : g.edges()) moved.push_back({perm[e.src], perm[e.dst], e.type});
    const Tensor x = random_tensor({n, 3}, rng);
    Tensor xp({n, 3});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < 3; ++c) xp.at(perm[i], c) = x.at(i, c);
    Tape t;
    const Tensor y = gcnn_forward(t, Var::constant(x), plan_messages(g, vocab), enc, plain(), rng, false).value();
    const Tensor yp =
        gcnn_forward(t, Var::constant(xp), plan_messages(DocumentGraph(n, moved), vocab), enc, plain(), rng, false)
            .value();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < 3; ++c) CHECK(yp.at(perm[i], c) == doctest::Approx(y.at(i, c)).epsilon(1e-12));
  }
}

TEST_CASE("gcnn rejects inputs of the wrong length") {
  const auto vocab = vocab_of({kSelf});
  Rng rng(9);
  const GcnnEncoder enc = make_gcnn(vocab, 2, 2, 1, rng);
  const MessagePlan plan = plan_messages(DocumentGraph(3, {}), vocab);
  Tape t;
  CHECK_THROWS_AS(gcnn_forward(t, Var::constant(Tensor({2, 2})), plan, enc, plain(), rng, false), Error);
}
