#include "docre/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>

#include "docre/error.hpp"

namespace docre {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) {
    cur = trim(cur);
    if (!cur.empty()) parts.push_back(cur);
  }
  return parts;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* want) {
  throw Error(ErrorKind::Config, "key '" + key + "': expected " + want + ", got '" + value + "'");
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) bad_value(key, value, "a non-negative integer");
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) bad_value(key, value, "a number");
    return v;
  } catch (const std::logic_error&) {
    bad_value(key, value, "a number");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "yes" || value == "1" || value == "on") return true;
  if (value == "false" || value == "no" || value == "0" || value == "off") return false;
  bad_value(key, value, "a boolean");
}

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += ',';
    out += parts[i];
  }
  return out;
}

struct Field {
  std::string key;
  std::function<void(TrainConfig&, const std::string& key, const std::string& value)> set;
  std::function<std::string(const TrainConfig&)> get;
};

template <typename T>
Field size_field(const char* key, T TrainConfig::*member) {
  return {key,
          [member](TrainConfig& c, const std::string& k, const std::string& v) {
            c.*member = static_cast<T>(parse_u64(k, v));
          },
          [member](const TrainConfig& c) { return std::to_string(c.*member); }};
}

Field double_field(const char* key, double TrainConfig::*member) {
  return {key,
          [member](TrainConfig& c, const std::string& k, const std::string& v) {
            c.*member = parse_double(k, v);
          },
          [member](const TrainConfig& c) { return format_double(c.*member); }};
}

Field bool_field(const char* key, bool TrainConfig::*member) {
  return {key,
          [member](TrainConfig& c, const std::string& k, const std::string& v) {
            c.*member = parse_bool(k, v);
          },
          [member](const TrainConfig& c) { return std::string(c.*member ? "true" : "false"); }};
}

Field string_field(const char* key, std::string TrainConfig::*member) {
  return {key,
          [member](TrainConfig& c, const std::string&, const std::string& v) { c.*member = v; },
          [member](const TrainConfig& c) { return c.*member; }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      size_field("batch_size", &TrainConfig::batch_size),
      double_field("learning_rate", &TrainConfig::learning_rate),
      double_field("learning_rate_decay", &TrainConfig::learning_rate_decay),
      double_field("gradient_clipping", &TrainConfig::gradient_clipping),
      size_field("patience", &TrainConfig::patience),
      size_field("max_epochs", &TrainConfig::max_epochs),
      double_field("adam_beta1", &TrainConfig::adam_beta1),
      double_field("adam_beta2", &TrainConfig::adam_beta2),
      double_field("adam_epsilon", &TrainConfig::adam_epsilon),
      double_field("ema_decay", &TrainConfig::ema_decay),
      bool_field("ema_warmup", &TrainConfig::ema_warmup),
      size_field("word_dimension", &TrainConfig::word_dimension),
      size_field("position_dimension", &TrainConfig::position_dimension),
      size_field("gcnn_dimension", &TrainConfig::gcnn_dimension),
      size_field("gcnn_blocks", &TrainConfig::gcnn_blocks),
      size_field("mil_dimension", &TrainConfig::mil_dimension),
      size_field("position_clamp", &TrainConfig::position_clamp),
      double_field("dropout_input", &TrainConfig::dropout_input),
      double_field("dropout_gcnn", &TrainConfig::dropout_gcnn),
      double_field("dropout_mil", &TrainConfig::dropout_mil),
      bool_field("residual", &TrainConfig::residual),
      bool_field("edge_gating", &TrainConfig::edge_gating),
      string_field("activation", &TrainConfig::activation),
      string_field("mention_pooling", &TrainConfig::mention_pooling),
      size_field("top_n", &TrainConfig::top_n),
      bool_field("topn_syntactic_only", &TrainConfig::topn_syntactic_only),
      bool_field("coref_clique", &TrainConfig::coref_clique),
      {"edge_categories",
       [](TrainConfig& c, const std::string&, const std::string& v) {
         KindSet set;
         for (const auto& name : split(v, ',')) set = set.with(parse_edge_kind(name));
         c.edge_categories = set;
       },
       [](const TrainConfig& c) { return c.edge_categories.to_string(); }},
      string_field("pair_mode", &TrainConfig::pair_mode),
      string_field("pair_types", &TrainConfig::pair_types),
      {"relation_labels",
       [](TrainConfig& c, const std::string&, const std::string& v) {
         c.relation_labels = split(v, ',');
       },
       [](const TrainConfig& c) { return join(c.relation_labels); }},
      size_field("min_word_count", &TrainConfig::min_word_count),
      string_field("embeddings_path", &TrainConfig::embeddings_path),
      bool_field("merge_train_dev", &TrainConfig::merge_train_dev),
      bool_field("document_batches", &TrainConfig::document_batches),
      size_field("seed", &TrainConfig::seed),
      {"seeds",
       [](TrainConfig& c, const std::string& k, const std::string& v) {
         c.seeds.clear();
         for (const auto& s : split(v, ',')) c.seeds.push_back(parse_u64(k, s));
       },
       [](const TrainConfig& c) {
         std::vector<std::string> parts;
         for (auto s : c.seeds) parts.push_back(std::to_string(s));
         return join(parts);
       }},
      bool_field("ablate_retrain", &TrainConfig::ablate_retrain),
  };
  return table;
}

const Field& field(const std::string& key) {
  for (const auto& f : fields()) {
    if (f.key == key) return f;
  }
  throw Error(ErrorKind::Config, "unknown config key '" + key + "'");
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : fields()) keys.push_back(f.key);
  return keys;
}

void TrainConfig::set(const std::string& key, const std::string& value) {
  field(trim(key)).set(*this, trim(key), trim(value));
}

void TrainConfig::validate() const {
  auto rate = [](const char* key, double v) {
    if (!(v >= 0.0 && v < 1.0)) {
      throw Error(ErrorKind::Config, std::string("key '") + key + "': rate " + format_double(v) +
                                         " outside [0, 1)");
    }
  };
  auto positive = [](const char* key, double v) {
    if (!(v > 0.0)) throw Error(ErrorKind::Config, std::string("key '") + key + "' must be positive");
  };
  rate("dropout_input", dropout_input);
  rate("dropout_gcnn", dropout_gcnn);
  rate("dropout_mil", dropout_mil);
  rate("adam_beta1", adam_beta1);
  rate("adam_beta2", adam_beta2);
  if (!(ema_decay >= 0.0 && ema_decay <= 1.0)) {
    throw Error(ErrorKind::Config, "key 'ema_decay' outside [0, 1]");
  }
  if (!(learning_rate_decay > 0.0 && learning_rate_decay <= 1.0)) {
    throw Error(ErrorKind::Config, "key 'learning_rate_decay' outside (0, 1]");
  }
  positive("batch_size", double(batch_size));
  positive("learning_rate", learning_rate);
  positive("gradient_clipping", gradient_clipping);
  positive("patience", double(patience));
  positive("max_epochs", double(max_epochs));
  positive("adam_epsilon", adam_epsilon);
  positive("word_dimension", double(word_dimension));
  positive("position_dimension", double(position_dimension));
  positive("gcnn_dimension", double(gcnn_dimension));
  positive("gcnn_blocks", double(gcnn_blocks));
  positive("mil_dimension", double(mil_dimension));
  if (activation != "relu" && activation != "tanh" && activation != "identity") {
    throw Error(ErrorKind::Config, "key 'activation' must be relu, tanh or identity");
  }
  if (mention_pooling != "tokens" && mention_pooling != "mean") {
    throw Error(ErrorKind::Config, "key 'mention_pooling' must be tokens or mean");
  }
  if (pair_mode != "bidirectional" && pair_mode != "undirected") {
    throw Error(ErrorKind::Config, "key 'pair_mode' must be bidirectional or undirected");
  }
  if (!pair_types.empty() && pair_types.find(':') == std::string::npos) {
    throw Error(ErrorKind::Config, "key 'pair_types' must look like head_type:tail_type");
  }
  if (edge_categories.empty()) {
    throw Error(ErrorKind::Config, "key 'edge_categories' must enable at least one category");
  }
  if (seeds.empty()) throw Error(ErrorKind::Config, "key 'seeds' must list at least one seed");
}

std::string TrainConfig::to_text() const {
  std::string out;
  for (const auto& f : fields()) out += f.key + " = " + f.get(*this) + "\n";
  return out;
}

TrainConfig TrainConfig::from_text(const std::string& text) {
  TrainConfig config;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::Config, "config line " + std::to_string(line_no) + ": expected key = value");
    }
    config.set(line.substr(0, eq), line.substr(eq + 1));
  }
  return config;
}

TrainConfig TrainConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Config, "cannot read config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_text(buf.str());
}

void TrainConfig::apply_environment(const std::string& prefix) {
  for (const auto& f : fields()) {
    std::string name = prefix;
    for (char ch : f.key) name += static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    if (const char* v = std::getenv(name.c_str())) set(f.key, v);
  }
}

std::string TrainConfig::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : to_text()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

}  // namespace docre
