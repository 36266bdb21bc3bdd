#include "wavespoof/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "wavespoof/errors.hpp"

namespace wavespoof {

std::vector<double> PipelineConfig::frequencies_hz() const {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(std::max(freq_count, 0)));
  for (int i = 0; i < freq_count; ++i) out.push_back(freq_start_hz + freq_step_hz * i);
  return out;
}

TrainConfig PipelineConfig::train_config() const {
  TrainConfig t;
  t.learning_rate = learning_rate;
  t.momentum = momentum;
  t.batch_size = batch_size;
  t.epochs = epochs;
  t.patience = patience;
  t.channels1 = channels1;
  t.channels2 = channels2;
  t.leaky_slope = leaky_slope;
  return t;
}

AttackConfig PipelineConfig::attack_config() const {
  AttackConfig a;
  a.max_iters = attack_max_iters;
  a.check_every = attack_check_every;
  a.memory = attack_memory;
  a.method = attack_method;
  return a;
}

PipelineConfig desk_profile() { return PipelineConfig{}; }

PipelineConfig paper_profile() {
  PipelineConfig p;
  p.profile = "paper";
  p.domain = Rect{0.0, 100.0, 0.0, 100.0};
  p.mesh_h = 100.0 / 108.0;
  p.c = 1525.0;
  p.source = {5.0, 75.0};
  p.interferer = {9.75, 68.75};
  p.detector = {52.5, 12.5};
  p.epsilon = 2.0 * p.mesh_h;
  p.dt = 1.0 / 6000.0;
  p.num_steps = 6000;
  p.stft_freqs = 129;
  p.freq_start_hz = 10.0;
  p.freq_step_hz = 10.0;
  p.freq_count = 80;
  p.train_per_freq = 40;
  p.test_per_freq = 10;
  p.val_per_freq = 10;
  return p;
}

PipelineConfig profile_defaults(const std::string& name) {
  if (name == "desk") return desk_profile();
  if (name == "paper") return paper_profile();
  throw ConfigError("unknown profile '" + name + "' (expected desk or paper)");
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError("key '" + key + "': expected a real number, got '" + v + "'");
  }
  return out;
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& v) {
  Int out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError("key '" + key + "': expected an integer, got '" + v + "'");
  }
  return out;
}

struct Field {
  std::function<std::string(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, const std::string&, const std::string&)> set;
};

Field real(double PipelineConfig::*member) {
  return {[member](const PipelineConfig& c) { return format_double(c.*member); },
          [member](PipelineConfig& c, const std::string& k, const std::string& v) { c.*member = parse_double(k, v); }};
}

Field integer(int PipelineConfig::*member) {
  return {[member](const PipelineConfig& c) { return std::to_string(c.*member); },
          [member](PipelineConfig& c, const std::string& k, const std::string& v) {
            c.*member = parse_int<int>(k, v);
          }};
}

template <typename Get, typename Set>
Field custom(Get get, Set set) {
  return {get, set};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> t;
    t["profile"] = custom([](const PipelineConfig& c) { return c.profile; },
                          [](PipelineConfig& c, const std::string&, const std::string& v) {
                            if (v != "desk" && v != "paper") throw ConfigError("profile must be desk or paper");
                            c.profile = v;
                          });
    t["domain_xmin_m"] = custom([](const PipelineConfig& c) { return format_double(c.domain.xmin); },
                                [](PipelineConfig& c, const std::string& k, const std::string& v) {
                                  c.domain.xmin = parse_double(k, v);
                                });
    t["domain_xmax_m"] = custom([](const PipelineConfig& c) { return format_double(c.domain.xmax); },
                                [](PipelineConfig& c, const std::string& k, const std::string& v) {
                                  c.domain.xmax = parse_double(k, v);
                                });
    t["domain_ymin_m"] = custom([](const PipelineConfig& c) { return format_double(c.domain.ymin); },
                                [](PipelineConfig& c, const std::string& k, const std::string& v) {
                                  c.domain.ymin = parse_double(k, v);
                                });
    t["domain_ymax_m"] = custom([](const PipelineConfig& c) { return format_double(c.domain.ymax); },
                                [](PipelineConfig& c, const std::string& k, const std::string& v) {
                                  c.domain.ymax = parse_double(k, v);
                                });
    auto point = [&t](const std::string& prefix, Point2 PipelineConfig::*member) {
      t[prefix + "_x_m"] = custom([member](const PipelineConfig& c) { return format_double((c.*member).x1); },
                                  [member](PipelineConfig& c, const std::string& k, const std::string& v) {
                                    (c.*member).x1 = parse_double(k, v);
                                  });
      t[prefix + "_y_m"] = custom([member](const PipelineConfig& c) { return format_double((c.*member).x2); },
                                  [member](PipelineConfig& c, const std::string& k, const std::string& v) {
                                    (c.*member).x2 = parse_double(k, v);
                                  });
    };
    point("source", &PipelineConfig::source);
    point("interferer", &PipelineConfig::interferer);
    point("detector", &PipelineConfig::detector);
    t["mesh_h_m"] = real(&PipelineConfig::mesh_h);
    t["mesh_jitter"] = real(&PipelineConfig::mesh_jitter);
    t["c_m_per_s"] = real(&PipelineConfig::c);
    t["epsilon_m"] = real(&PipelineConfig::epsilon);
    t["dt_s"] = real(&PipelineConfig::dt);
    t["num_steps"] = integer(&PipelineConfig::num_steps);
    t["stft_window_samples"] = integer(&PipelineConfig::stft_window);
    t["stft_hop_samples"] = integer(&PipelineConfig::stft_hop);
    t["stft_num_freqs"] = integer(&PipelineConfig::stft_freqs);
    t["band_min_hz"] = real(&PipelineConfig::band_min_hz);
    t["band_max_hz"] = real(&PipelineConfig::band_max_hz);
    t["floor_db"] = real(&PipelineConfig::floor_db);
    t["noise_kappa"] = real(&PipelineConfig::noise_kappa);
    t["noise_mode"] = custom(
        [](const PipelineConfig& c) {
          return std::string(c.noise_mode == NoiseMode::stft_domain ? "stft_domain" : "time_domain");
        },
        [](PipelineConfig& c, const std::string& k, const std::string& v) {
          if (v == "stft_domain") {
            c.noise_mode = NoiseMode::stft_domain;
          } else if (v == "time_domain") {
            c.noise_mode = NoiseMode::time_domain;
          } else {
            throw ConfigError("key '" + k + "': expected stft_domain or time_domain");
          }
        });
    t["freq_start_hz"] = real(&PipelineConfig::freq_start_hz);
    t["freq_step_hz"] = real(&PipelineConfig::freq_step_hz);
    t["freq_count"] = integer(&PipelineConfig::freq_count);
    t["threshold_hz"] = real(&PipelineConfig::threshold_hz);
    t["intruder_amplitude"] = real(&PipelineConfig::intruder_amplitude);
    t["train_per_freq"] = integer(&PipelineConfig::train_per_freq);
    t["test_per_freq"] = integer(&PipelineConfig::test_per_freq);
    t["val_per_freq"] = integer(&PipelineConfig::val_per_freq);
    t["train_learning_rate"] = real(&PipelineConfig::learning_rate);
    t["train_momentum"] = real(&PipelineConfig::momentum);
    t["train_batch_size"] = integer(&PipelineConfig::batch_size);
    t["train_epochs"] = integer(&PipelineConfig::epochs);
    t["train_patience"] = integer(&PipelineConfig::patience);
    t["net_channels1"] = integer(&PipelineConfig::channels1);
    t["net_channels2"] = integer(&PipelineConfig::channels2);
    t["net_leaky_slope"] = real(&PipelineConfig::leaky_slope);
    t["attack_max_iters"] = integer(&PipelineConfig::attack_max_iters);
    t["attack_check_every"] = integer(&PipelineConfig::attack_check_every);
    t["attack_memory"] = integer(&PipelineConfig::attack_memory);
    t["attack_method"] = custom(
        [](const PipelineConfig& c) {
          return std::string(c.attack_method == AttackMethod::reduced_lbfgs ? "reduced_lbfgs" : "projected_gradient");
        },
        [](PipelineConfig& c, const std::string& k, const std::string& v) {
          if (v == "reduced_lbfgs") {
            c.attack_method = AttackMethod::reduced_lbfgs;
          } else if (v == "projected_gradient") {
            c.attack_method = AttackMethod::projected_gradient;
          } else {
            throw ConfigError("key '" + k + "': expected reduced_lbfgs or projected_gradient");
          }
        });
    t["bench_repetitions"] = integer(&PipelineConfig::bench_repetitions);
    t["seed"] = custom([](const PipelineConfig& c) { return std::to_string(c.seed); },
                       [](PipelineConfig& c, const std::string& k, const std::string& v) {
                         c.seed = parse_int<std::uint64_t>(k, v);
                       });
    return t;
  }();
  return table;
}

}  // namespace

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected `key = value`");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw ConfigError("line " + std::to_string(lineno) + ": empty key or value");
    }
    if (!out.emplace(key, value).second) {
      throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
  }
  return out;
}

void apply_overrides(PipelineConfig& config, const std::map<std::string, std::string>& values) {
  const auto& table = fields();
  for (const auto& [key, value] : values) {
    const auto it = table.find(key);
    if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second.set(config, key, value);
  }
}

void validate(const PipelineConfig& c) {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (!(c.domain.width() > 0.0 && c.domain.height() > 0.0)) fail("domain rectangle must have positive width and height");
  if (!(c.mesh_h > 0.0) || c.mesh_h > std::min(c.domain.width(), c.domain.height())) {
    fail("mesh_h_m must be positive and no larger than the domain");
  }
  if (c.mesh_jitter < 0.0) fail("mesh_jitter must be non-negative");
  if (!(c.c > 0.0)) fail("c_m_per_s must be positive");
  if (!(c.epsilon > 0.0)) fail("epsilon_m must be positive");
  for (const auto& [name, p] : {std::pair{"source", c.source}, {"interferer", c.interferer}, {"detector", c.detector}}) {
    if (!c.domain.contains(p)) fail(std::string(name) + " position lies outside the domain");
  }
  if (!(c.dt > 0.0)) fail("dt_s must be positive");
  if (c.num_steps < 4) fail("num_steps must be at least 4");
  if (c.stft_window < 2 || c.stft_window > c.num_samples()) fail("stft_window_samples must lie in [2, K + 1]");
  if (c.stft_hop < 1) fail("stft_hop_samples must be positive");
  if (c.stft_freqs < 2) fail("stft_num_freqs must be at least 2");
  const double nyquist = 0.5 / c.dt;
  if (!(c.band_min_hz >= 0.0) || !(c.band_max_hz > c.band_min_hz)) fail("band_max_hz must exceed band_min_hz >= 0");
  if (c.band_min_hz >= nyquist) fail("band_min_hz must lie below the Nyquist frequency");
  if (!(c.noise_kappa >= 0.0)) fail("noise_kappa must be non-negative");
  if (c.freq_count < 2 || !(c.freq_start_hz > 0.0) || !(c.freq_step_hz > 0.0)) fail("bad source frequency grid");
  const auto freqs = c.frequencies_hz();
  if (freqs.back() >= nyquist) fail("source frequencies must lie below the Nyquist frequency");
  const auto malicious = std::count_if(freqs.begin(), freqs.end(), [&](double f) { return c.label_for(f) == 1; });
  if (malicious == 0 || malicious == static_cast<long>(freqs.size())) fail("threshold_hz must split the frequency grid");
  if (c.train_per_freq < 1 || c.test_per_freq < 1 || c.val_per_freq < 1) fail("per-frequency counts must be positive");
  if (!(c.intruder_amplitude > 0.0)) fail("intruder_amplitude must be positive");
  if (!(c.learning_rate > 0.0) || c.momentum < 0.0 || c.momentum >= 1.0) fail("bad learning rate or momentum");
  if (c.batch_size < 1 || c.epochs < 1 || c.patience < 1) fail("batch size, epochs and patience must be positive");
  if (c.channels1 < 1 || c.channels2 < 1) fail("channel counts must be positive");
  if (c.attack_check_every < 1 || c.attack_max_iters < c.attack_check_every) {
    fail("attack needs attack_max_iters >= attack_check_every >= 1");
  }
  if (c.attack_memory < 1) fail("attack_memory must be positive");
  if (c.bench_repetitions < 1) fail("bench_repetitions must be positive");
}

PipelineConfig load_config(const std::string& profile, const std::filesystem::path& config_path,
                           const std::uint64_t* seed_override) {
  PipelineConfig config = profile_defaults(profile);
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw ConfigError("cannot read config file " + config_path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    auto values = parse_config_text(buf.str());
    const auto prof = values.find("profile");
    if (prof != values.end() && prof->second != profile) {
      throw ConfigError("config file declares profile '" + prof->second + "' but --profile is '" + profile + "'");
    }
    apply_overrides(config, values);
  }
  if (seed_override != nullptr) config.seed = *seed_override;
  validate(config);
  return config;
}

std::map<std::string, std::string> to_key_values(const PipelineConfig& config) {
  std::map<std::string, std::string> out;
  for (const auto& [key, field] : fields()) out[key] = field.get(config);
  return out;
}

std::string to_text(const PipelineConfig& config) {
  std::string out;
  for (const auto& [key, value] : to_key_values(config)) out += key + " = " + value + "\n";
  return out;
}

std::string stage_name(Stage stage) {
  switch (stage) {
    case Stage::mesh: return "mesh";
    case Stage::precompute: return "precompute";
    case Stage::gendata: return "gendata";
    case Stage::train: return "train";
    case Stage::attack: return "attack";
    case Stage::evaluate: return "evaluate";
    case Stage::bench: return "bench";
  }
  return "unknown";
}

std::vector<std::string> stage_keys(Stage stage) {
  std::vector<std::string> keys = {"domain_xmin_m", "domain_xmax_m", "domain_ymin_m", "domain_ymax_m",
                                   "mesh_h_m",      "mesh_jitter",   "seed"};
  auto add = [&keys](std::initializer_list<const char*> more) { keys.insert(keys.end(), more.begin(), more.end()); };
  if (stage == Stage::mesh) return keys;
  add({"c_m_per_s", "source_x_m", "source_y_m", "interferer_x_m", "interferer_y_m", "detector_x_m", "detector_y_m",
       "epsilon_m", "dt_s", "num_steps", "stft_window_samples", "stft_hop_samples", "stft_num_freqs", "band_min_hz",
       "band_max_hz"});
  if (stage == Stage::precompute) return keys;
  add({"floor_db", "noise_kappa", "noise_mode", "freq_start_hz", "freq_step_hz", "freq_count", "threshold_hz",
       "intruder_amplitude", "train_per_freq", "test_per_freq", "val_per_freq"});
  if (stage == Stage::gendata) return keys;
  add({"train_learning_rate", "train_momentum", "train_batch_size", "train_epochs", "train_patience", "net_channels1",
       "net_channels2", "net_leaky_slope"});
  if (stage == Stage::train) return keys;
  if (stage == Stage::bench) {
    add({"bench_repetitions"});
    return keys;
  }
  add({"attack_max_iters", "attack_check_every", "attack_memory", "attack_method"});
  return keys;  // attack, evaluate
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string stage_hash(const PipelineConfig& config, Stage stage) {
  const auto all = to_key_values(config);
  auto keys = stage_keys(stage);
  std::sort(keys.begin(), keys.end());
  std::string text;
  for (const auto& k : keys) text += k + "=" + all.at(k) + "\n";
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(text)));
  return buf;
}

}  // namespace wavespoof
