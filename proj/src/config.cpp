#include "ib/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

#include "ib/io.hpp"

namespace ib {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::vector<std::string> tokens(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

double parse_double_or_throw(const std::string& value, const std::string& where) {
  const char* s = value.c_str();
  char* end = nullptr;
  const double v = std::strtod(s, &end);
  if (end == s || *end != '\0') {
    throw std::invalid_argument(where + ": expected a number, got '" + value + "'");
  }
  return v;
}

std::int64_t parse_int_or_throw(const std::string& value, const std::string& where) {
  const char* s = value.c_str();
  char* end = nullptr;
  const long long v = std::strtoll(s, &end, 10);
  if (end == s || *end != '\0') {
    throw std::invalid_argument(where + ": expected an integer, got '" + value + "'");
  }
  return v;
}

}  // namespace

ConfigMap ConfigMap::parse_file(const std::string& path) {
  return parse_text(read_file(path), path);
}

ConfigMap ConfigMap::parse_text(const std::string& text, const std::string& origin) {
  ConfigMap map;
  map.origin_ = origin;
  std::istringstream in(text);
  std::string line, section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw std::invalid_argument(origin + ":" + std::to_string(line_no) +
                                    ": unterminated section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) {
        throw std::invalid_argument(origin + ":" + std::to_string(line_no) + ": empty section name");
      }
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(origin + ":" + std::to_string(line_no) +
                                  ": expected 'key = value', got '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw std::invalid_argument(origin + ":" + std::to_string(line_no) + ": empty key");
    }
    map.sections_[section][key] = Entry{value};
  }
  return map;
}

void ConfigMap::set(const std::string& section, const std::string& key, const std::string& value) {
  sections_[section][key] = Entry{value};
}

void ConfigMap::apply_override(const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw std::invalid_argument("override '" + assignment + "' must look like path=value");
  }
  const std::string path = trim(assignment.substr(0, eq));
  const std::string value = trim(assignment.substr(eq + 1));
  const std::size_t dot = path.find('.');
  if (dot == std::string::npos) {
    set("", path, value);
  } else {
    set(path.substr(0, dot), path.substr(dot + 1), value);
  }
}

std::string ConfigMap::describe(const std::string& section, const std::string& key) const {
  return origin_ + ": " + (section.empty() ? key : "[" + section + "] " + key);
}

bool ConfigMap::has(const std::string& section, const std::string& key) const {
  const auto sec = sections_.find(section);
  return sec != sections_.end() && sec->second.count(key) > 0;
}

std::string ConfigMap::get_string(const std::string& section, const std::string& key,
                                  const std::string& fallback) const {
  const auto sec = sections_.find(section);
  if (sec == sections_.end()) return fallback;
  const auto it = sec->second.find(key);
  if (it == sec->second.end()) return fallback;
  it->second.used = true;
  return it->second.value;
}

std::string ConfigMap::require_string(const std::string& section, const std::string& key) const {
  if (!has(section, key)) {
    throw std::invalid_argument(describe(section, key) + ": required key is missing");
  }
  return get_string(section, key, "");
}

double ConfigMap::get_double(const std::string& section, const std::string& key,
                             double fallback) const {
  if (!has(section, key)) return fallback;
  return parse_double_or_throw(get_string(section, key, ""), describe(section, key));
}

std::int64_t ConfigMap::get_int(const std::string& section, const std::string& key,
                                std::int64_t fallback) const {
  if (!has(section, key)) return fallback;
  return parse_int_or_throw(get_string(section, key, ""), describe(section, key));
}

std::uint64_t ConfigMap::get_u64(const std::string& section, const std::string& key,
                                 std::uint64_t fallback) const {
  if (!has(section, key)) return fallback;
  const std::string value = get_string(section, key, "");
  const char* s = value.c_str();
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s, &end, 10);
  if (end == s || *end != '\0') {
    throw std::invalid_argument(describe(section, key) + ": expected an unsigned integer, got '" +
                                value + "'");
  }
  return v;
}

bool ConfigMap::get_bool(const std::string& section, const std::string& key, bool fallback) const {
  if (!has(section, key)) return fallback;
  std::string v = get_string(section, key, "");
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw std::invalid_argument(describe(section, key) + ": expected a boolean, got '" + v + "'");
}

std::vector<int> ConfigMap::get_ints(const std::string& section, const std::string& key) const {
  std::vector<int> out;
  for (const std::string& tok : tokens(get_string(section, key, ""))) {
    out.push_back(static_cast<int>(parse_int_or_throw(tok, describe(section, key))));
  }
  return out;
}

void ConfigMap::check_consumed() const {
  std::string unknown;
  for (const auto& [section, entries] : sections_) {
    for (const auto& [key, entry] : entries) {
      if (!entry.used) {
        if (!unknown.empty()) unknown += ", ";
        unknown += section.empty() ? key : section + "." + key;
      }
    }
  }
  if (!unknown.empty()) {
    throw std::invalid_argument(origin_ + ": unknown config keys: " + unknown);
  }
}

LossSpec loss_spec_from_map(const ConfigMap& map, const std::string& section) {
  LossSpec spec;
  spec.kind = parse_loss_kind(map.get_string(section, "loss", "ce"));
  spec.gamma = map.get_double(section, "gamma", spec.gamma);
  spec.beta = map.get_double(section, "beta", spec.beta);
  spec.alpha = map.get_double(section, "alpha", spec.alpha);
  spec.epsilon = map.get_double(section, "epsilon", spec.epsilon);
  spec.ib_norm = parse_norm(map.get_string(section, "norm", to_string(spec.ib_norm)));
  spec.ib_use_factor = map.get_bool(section, "use_ib_factor", spec.ib_use_factor);
  spec.renormalize_weights = map.get_bool(section, "renormalize", spec.renormalize_weights);
  try {
    validate(spec);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(map.describe(section, "loss") + ": " + e.what());
  }
  return spec;
}

ExperimentConfig ExperimentConfig::load(const std::string& path,
                                        const std::vector<std::string>& overrides) {
  ConfigMap map = ConfigMap::parse_file(path);
  for (const std::string& o : overrides) map.apply_override(o);
  return from_map(map);
}

ExperimentConfig ExperimentConfig::from_map(ConfigMap& map) {
  ExperimentConfig cfg;
  cfg.seed = map.get_u64("", "seed", 0);
  cfg.output_dir = map.get_string("", "output_dir", cfg.output_dir);

  // [data]
  const std::string source = map.get_string("data", "source", "gaussian");
  if (source == "gaussian") {
    cfg.data.source = DataConfig::Source::Gaussian;
    const std::string means = map.require_string("data", "means");
    std::size_t start = 0;
    for (;;) {
      const std::size_t semi = means.find(';', start);
      const std::string chunk =
          semi == std::string::npos ? means.substr(start) : means.substr(start, semi - start);
      Vector point;
      for (const std::string& tok : tokens(chunk)) {
        point.push_back(parse_double_or_throw(tok, map.describe("data", "means")));
      }
      if (point.empty()) {
        throw std::invalid_argument(map.describe("data", "means") +
                                    ": every ';'-separated group needs coordinates");
      }
      cfg.data.means.push_back(std::move(point));
      if (semi == std::string::npos) break;
      start = semi + 1;
    }
    cfg.data.cov_scale = map.get_double("data", "cov_scale", cfg.data.cov_scale);
    cfg.data.n_per_class = static_cast<int>(map.get_int("data", "n_per_class", cfg.data.n_per_class));
    if (cfg.data.n_per_class < 1) {
      throw std::invalid_argument(map.describe("data", "n_per_class") + ": must be >= 1");
    }
    if (cfg.data.cov_scale < 0.0) {
      throw std::invalid_argument(map.describe("data", "cov_scale") + ": must be >= 0");
    }
  } else if (source == "csv") {
    cfg.data.source = DataConfig::Source::Csv;
    cfg.data.csv_path = map.require_string("data", "csv_path");
  } else {
    throw std::invalid_argument(map.describe("data", "source") + ": expected gaussian or csv, got '" +
                                source + "'");
  }
  cfg.data.test_fraction = map.get_double("data", "test_fraction", cfg.data.test_fraction);
  if (cfg.data.test_fraction < 0.0 || cfg.data.test_fraction >= 1.0) {
    throw std::invalid_argument(map.describe("data", "test_fraction") + ": must lie in [0, 1)");
  }
  const std::string imbalance = map.get_string("data", "imbalance", "none");
  if (imbalance == "none") {
    cfg.data.imbalance = ImbalanceSpec::Kind::None;
  } else if (imbalance == "longtail") {
    cfg.data.imbalance = ImbalanceSpec::Kind::LongTailed;
  } else if (imbalance == "step") {
    cfg.data.imbalance = ImbalanceSpec::Kind::Step;
  } else {
    throw std::invalid_argument(map.describe("data", "imbalance") +
                                ": expected none, longtail or step, got '" + imbalance + "'");
  }
  cfg.data.rho = map.get_double("data", "rho", cfg.data.rho);
  cfg.data.minority_classes =
      static_cast<int>(map.get_int("data", "minority_classes", cfg.data.minority_classes));
  if (cfg.data.imbalance != ImbalanceSpec::Kind::None && !(cfg.data.rho > 1.0)) {
    throw std::invalid_argument(map.describe("data", "rho") + ": must be > 1 for imbalance");
  }

  // [model]
  cfg.layer_sizes = map.get_ints("model", "layer_sizes");
  if (cfg.layer_sizes.size() < 2) {
    throw std::invalid_argument(map.describe("model", "layer_sizes") +
                                ": need at least input and output sizes");
  }

  // [train]
  TrainConfig& tc = cfg.train;
  tc.total_epochs = static_cast<int>(map.get_int("train", "epochs", tc.total_epochs));
  tc.transition_epoch =
      static_cast<int>(map.get_int("train", "transition_epoch", tc.total_epochs / 2));
  tc.batch_size = static_cast<int>(map.get_int("train", "batch_size", tc.batch_size));
  tc.base_lr = map.get_double("train", "base_lr", tc.base_lr);
  tc.warmup_epochs = static_cast<int>(map.get_int("train", "warmup_epochs", tc.warmup_epochs));
  tc.momentum = map.get_double("train", "momentum", tc.momentum);
  tc.weight_decay = map.get_double("train", "weight_decay", tc.weight_decay);
  const std::string decay = map.get_string("train", "decay", "");
  if (!decay.empty()) {
    std::size_t start = 0;
    for (;;) {
      const std::size_t comma = decay.find(',', start);
      const std::string chunk =
          comma == std::string::npos ? decay.substr(start) : decay.substr(start, comma - start);
      const std::size_t colon = chunk.find(':');
      if (colon == std::string::npos) {
        throw std::invalid_argument(map.describe("train", "decay") +
                                    ": expected epoch:factor entries, got '" + chunk + "'");
      }
      DecayPoint dp;
      dp.epoch = static_cast<int>(
          parse_int_or_throw(trim(chunk.substr(0, colon)), map.describe("train", "decay")));
      dp.factor =
          parse_double_or_throw(trim(chunk.substr(colon + 1)), map.describe("train", "decay"));
      tc.decay_points.push_back(dp);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
  }
  tc.phase1_loss = loss_spec_from_map(map, "phase1");
  tc.phase2_loss = loss_spec_from_map(map, "phase2");
  tc.seed = mix_seed(cfg.seed, 5);
  try {
    validate(tc);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(map.describe("train", "epochs") + ": " + e.what());
  }

  // [report]
  cfg.report.top_m = map.get_int("report", "top_m", cfg.report.top_m);
  cfg.report.top_k = static_cast<int>(map.get_int("report", "top_k", cfg.report.top_k));
  if (cfg.report.top_m < 1) {
    throw std::invalid_argument(map.describe("report", "top_m") + ": must be >= 1");
  }
  if (cfg.report.top_k < 1) {
    throw std::invalid_argument(map.describe("report", "top_k") + ": must be >= 1");
  }

  map.check_consumed();
  return cfg;
}

namespace {

std::string loss_section(const std::string& name, const LossSpec& spec) {
  std::string out = "[" + name + "]\n";
  out += "loss = " + to_string(spec.kind) + "\n";
  out += "gamma = " + format_double(spec.gamma) + "\n";
  out += "beta = " + format_double(spec.beta) + "\n";
  out += "alpha = " + format_double(spec.alpha) + "\n";
  out += "epsilon = " + format_double(spec.epsilon) + "\n";
  out += "norm = " + to_string(spec.ib_norm) + "\n";
  out += std::string("use_ib_factor = ") + (spec.ib_use_factor ? "true" : "false") + "\n";
  out += std::string("renormalize = ") + (spec.renormalize_weights ? "true" : "false") + "\n";
  return out;
}

}  // namespace

std::string ExperimentConfig::resolved_ini() const {
  std::string out;
  out += "seed = " + std::to_string(seed) + "\n";
  out += "output_dir = " + output_dir + "\n\n";

  out += "[data]\n";
  if (data.source == DataConfig::Source::Gaussian) {
    out += "source = gaussian\n";
    out += "means =";
    for (std::size_t k = 0; k < data.means.size(); ++k) {
      if (k > 0) out += " ;";
      for (double v : data.means[k]) out += " " + format_double(v);
    }
    out += "\n";
    out += "cov_scale = " + format_double(data.cov_scale) + "\n";
    out += "n_per_class = " + std::to_string(data.n_per_class) + "\n";
  } else {
    out += "source = csv\n";
    out += "csv_path = " + data.csv_path + "\n";
  }
  out += "test_fraction = " + format_double(data.test_fraction) + "\n";
  switch (data.imbalance) {
    case ImbalanceSpec::Kind::None: out += "imbalance = none\n"; break;
    case ImbalanceSpec::Kind::LongTailed: out += "imbalance = longtail\n"; break;
    case ImbalanceSpec::Kind::Step: out += "imbalance = step\n"; break;
  }
  out += "rho = " + format_double(data.rho) + "\n";
  out += "minority_classes = " + std::to_string(data.minority_classes) + "\n\n";

  out += "[model]\n";
  out += "layer_sizes =";
  for (int s : layer_sizes) out += " " + std::to_string(s);
  out += "\n\n";

  out += "[train]\n";
  out += "epochs = " + std::to_string(train.total_epochs) + "\n";
  out += "transition_epoch = " + std::to_string(train.transition_epoch) + "\n";
  out += "batch_size = " + std::to_string(train.batch_size) + "\n";
  out += "base_lr = " + format_double(train.base_lr) + "\n";
  out += "warmup_epochs = " + std::to_string(train.warmup_epochs) + "\n";
  if (!train.decay_points.empty()) {
    out += "decay = ";
    for (std::size_t i = 0; i < train.decay_points.size(); ++i) {
      if (i > 0) out += ",";
      out += std::to_string(train.decay_points[i].epoch) + ":" +
             format_double(train.decay_points[i].factor);
    }
    out += "\n";
  }
  out += "momentum = " + format_double(train.momentum) + "\n";
  out += "weight_decay = " + format_double(train.weight_decay) + "\n\n";

  out += loss_section("phase1", train.phase1_loss) + "\n";
  out += loss_section("phase2", train.phase2_loss) + "\n";

  out += "[report]\n";
  out += "top_m = " + std::to_string(report.top_m) + "\n";
  out += "top_k = " + std::to_string(report.top_k) + "\n";
  return out;
}

}  // namespace ib
