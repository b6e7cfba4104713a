#include "docre/metrics.hpp"

#include <iomanip>
#include <set>
#include <sstream>

namespace docre {

double Counts::precision() const noexcept {
  return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
}

double Counts::recall() const noexcept {
  return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
}

double Counts::f1() const noexcept {
  const double p = precision();
  const double r = recall();
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

void Counts::add(std::size_t gold, std::size_t predicted) noexcept {
  if (gold != 0 && predicted == gold) {
    ++tp;
  } else if (gold == 0 && predicted != 0) {
    ++fp;
  } else if (gold != 0) {
    ++fn;
  }
}

Counts& Counts::operator+=(const Counts& other) noexcept {
  tp += other.tp;
  fp += other.fp;
  fn += other.fn;
  return *this;
}

const char* scope_name(SentenceScope scope) noexcept {
  return scope == SentenceScope::Intra ? "intra" : "inter";
}

SentenceScope split_intra_inter(const PairInstance& pair, const Document& doc) {
  std::set<std::size_t> head_sentences;
  for (std::size_t t : pair.head_tokens) head_sentences.insert(doc.sentence_of(t));
  for (std::size_t t : pair.tail_tokens) {
    if (head_sentences.count(doc.sentence_of(t))) return SentenceScope::Intra;
  }
  return SentenceScope::Inter;
}

void EvalReport::add(SentenceScope scope, std::size_t gold, std::size_t predicted) {
  overall.add(gold, predicted);
  ++pairs;
  if (scope == SentenceScope::Intra) {
    intra.add(gold, predicted);
    ++intra_pairs;
  } else {
    inter.add(gold, predicted);
    ++inter_pairs;
  }
}

namespace {

nlohmann::json counts_json(const Counts& c) {
  return {{"tp", c.tp},           {"fp", c.fp},        {"fn", c.fn},
          {"precision", c.precision()}, {"recall", c.recall()}, {"f1", c.f1()}};
}

}  // namespace

nlohmann::json EvalReport::to_json() const {
  return {{"overall", counts_json(overall)},
          {"intra", counts_json(intra)},
          {"inter", counts_json(inter)},
          {"pairs", pairs},
          {"intra_pairs", intra_pairs},
          {"inter_pairs", inter_pairs},
          {"config_fingerprint", fingerprint}};
}

std::string EvalReport::to_table() const {
  std::ostringstream os;
  os << std::left << std::setw(8) << "Slice" << std::right << std::setw(8) << "Pairs"
     << std::setw(6) << "TP" << std::setw(6) << "FP" << std::setw(6) << "FN" << std::setw(9)
     << "P(%)" << std::setw(9) << "R(%)" << std::setw(9) << "F1(%)" << '\n';
  auto row = [&](const char* name, std::size_t n, const Counts& c) {
    os << std::left << std::setw(8) << name << std::right << std::setw(8) << n << std::setw(6)
       << c.tp << std::setw(6) << c.fp << std::setw(6) << c.fn << std::fixed
       << std::setprecision(2) << std::setw(9) << 100.0 * c.precision() << std::setw(9)
       << 100.0 * c.recall() << std::setw(9) << 100.0 * c.f1() << '\n';
  };
  row("Overall", pairs, overall);
  row("Intra", intra_pairs, intra);
  row("Inter", inter_pairs, inter);
  return os.str();
}

}  // namespace docre
