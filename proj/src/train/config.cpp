#include "nodemr/train/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace nodemr::train {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <class T>
T parse_number(std::string_view v, const char* what) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("expected " + std::string(what) + ", got '" + std::string(v) + "'");
  }
  return out;
}

bool parse_bool(std::string_view v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw ConfigError("expected a boolean (true/false), got '" + std::string(v) + "'");
}

using Setter = std::function<void(TrainConfig&, std::string_view)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"family", [](TrainConfig& c, std::string_view v) { c.family = parse_family(v); }},
      {"epochs", [](TrainConfig& c, std::string_view v) { c.epochs = parse_number<int>(v, "an integer"); }},
      {"batch_size", [](TrainConfig& c, std::string_view v) { c.batch_size = parse_number<int>(v, "an integer"); }},
      {"learning_rate",
       [](TrainConfig& c, std::string_view v) { c.learning_rate = parse_number<double>(v, "a number"); }},
      {"optimizer", [](TrainConfig& c, std::string_view v) { c.optimizer = parse_optimizer(v); }},
      {"lookahead", [](TrainConfig& c, std::string_view v) { c.lookahead = parse_bool(v); }},
      {"lookahead_k", [](TrainConfig& c, std::string_view v) { c.lookahead_k = parse_number<int>(v, "an integer"); }},
      {"lookahead_alpha",
       [](TrainConfig& c, std::string_view v) { c.lookahead_alpha = parse_number<double>(v, "a number"); }},
      {"seed", [](TrainConfig& c, std::string_view v) { c.seed = parse_number<std::uint64_t>(v, "an unsigned integer"); }},
      {"checkpointing", [](TrainConfig& c, std::string_view v) { c.checkpointing = parse_bool(v); }},
      {"n_steps", [](TrainConfig& c, std::string_view v) { c.n_steps = parse_number<int>(v, "an integer"); }},
      {"cascades", [](TrainConfig& c, std::string_view v) { c.cascades = parse_number<int>(v, "an integer"); }},
      {"width", [](TrainConfig& c, std::string_view v) { c.width = parse_number<int>(v, "an integer"); }},
      {"val_count", [](TrainConfig& c, std::string_view v) { c.val_count = parse_number<int>(v, "an integer"); }},
      {"dc_mode",
       [](TrainConfig& c, std::string_view v) {
         if (v == "every") c.dc_every_step = true;
         else if (v == "final") c.dc_every_step = false;
         else throw ConfigError("dc_mode must be 'every' or 'final', got '" + std::string(v) + "'");
       }},
  };
  return table;
}

// Accepted spellings that map onto a canonical key.
std::string_view canonical_key(std::string_view key) { return key == "checkpoint" ? "checkpointing" : key; }

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be at least 1, got " + std::to_string(epochs));
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1, got " + std::to_string(batch_size));
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be finite and non-negative, got " + format_double(learning_rate));
  }
  if (val_count < 1) throw ConfigError("val_count must be at least 1, got " + std::to_string(val_count));
  model_options().validate();
  optimizer_config().validate();
}

ModelOptions TrainConfig::model_options() const {
  ModelOptions o;
  o.width = width;
  o.n_steps = n_steps;
  o.cascades = cascades;
  o.dc_every_step = dc_every_step;
  o.checkpointing = checkpointing;
  return o;
}

OptimizerConfig TrainConfig::optimizer_config() const {
  OptimizerConfig o;
  o.kind = optimizer;
  o.learning_rate = learning_rate;
  o.lookahead = lookahead;
  o.lookahead_k = lookahead_k;
  o.lookahead_alpha = lookahead_alpha;
  return o;
}

TrainConfig parse_train_config(std::string_view text, const std::string& source) {
  TrainConfig cfg;
  std::set<std::string, std::less<>> seen;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + "expected 'key = value', got '" + std::string(line) + "'");
    const std::string_view key = canonical_key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) {
      std::string keys;
      for (const auto& [k, _] : setters()) keys += (keys.empty() ? "" : ", ") + k;
      throw ConfigError(where + "unknown key '" + std::string(key) + "'; valid keys: " + keys);
    }
    if (!seen.insert(std::string(key)).second) throw ConfigError(where + "key '" + std::string(key) + "' repeated");
    if (value.empty()) throw ConfigError(where + "key '" + std::string(key) + "' has no value");
    try {
      it->second(cfg, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + std::string(key) + ": " + e.what());
    }
  }
  try {
    cfg.validate();
    if (!(cfg.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive, got " + format_double(cfg.learning_rate));
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return cfg;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string() + ": cannot open config file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_train_config(ss.str(), path.string());
}

std::string format_train_config(const TrainConfig& c) {
  std::ostringstream os;
  os << "family = " << c.family.name() << "\n"
     << "epochs = " << c.epochs << "\n"
     << "batch_size = " << c.batch_size << "\n"
     << "learning_rate = " << format_double(c.learning_rate) << "\n"
     << "optimizer = " << to_string(c.optimizer) << "\n"
     << "lookahead = " << (c.lookahead ? "true" : "false") << "\n"
     << "lookahead_k = " << c.lookahead_k << "\n"
     << "lookahead_alpha = " << format_double(c.lookahead_alpha) << "\n"
     << "seed = " << c.seed << "\n"
     << "checkpointing = " << (c.checkpointing ? "true" : "false") << "\n"
     << "n_steps = " << c.n_steps << "\n"
     << "cascades = " << c.cascades << "\n"
     << "width = " << c.width << "\n"
     << "val_count = " << c.val_count << "\n"
     << "dc_mode = " << (c.dc_every_step ? "every" : "final") << "\n";
  return os.str();
}

}  // namespace nodemr::train
