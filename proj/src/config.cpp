#include "cradar/config.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "cradar/error.hpp"
#include "cradar/seeding.hpp"

namespace cradar::harness {
namespace {

// Sub-stream ids for seeds derived from the run seed.
constexpr std::uint64_t kTrainFddStream = 3;
constexpr std::uint64_t kEvalFddStream = 4;

[[noreturn]] void invalid(const std::string& msg) { throw Error(ErrorKind::InvalidConfig, msg); }

/// One mapping of the document; remembers which keys were read so that
/// misspelled keys are reported instead of silently ignored.
class Section {
 public:
  Section(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) invalid(where() + " must be a mapping");
  }

  bool has(const std::string& key) const { return node_.IsMap() && node_[key]; }

  template <typename T>
  void get(const std::string& key, T& out) {
    if (!has(key)) return;
    seen_.insert(key);
    try {
      out = node_[key].template as<T>();
    } catch (const YAML::Exception&) {
      invalid(where(key) + " has an invalid value '" + render(node_[key]) + "'");
    }
  }

  Section child(const std::string& key) {
    if (!has(key)) return Section(YAML::Node(), path_.empty() ? key : path_ + "." + key);
    seen_.insert(key);
    return Section(node_[key], path_.empty() ? key : path_ + "." + key);
  }

  void finish() const {
    if (!node_.IsMap()) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!seen_.count(key)) invalid("unknown configuration key '" + where(key) + "'");
    }
  }

  std::string where(const std::string& key = {}) const {
    if (key.empty()) return path_.empty() ? "document" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  static std::string render(const YAML::Node& n) {
    YAML::Emitter e;
    e << YAML::Flow << n;
    return e.c_str();
  }

  YAML::Node node_;
  std::string path_;
  std::set<std::string> seen_;
};

void apply_override(YAML::Node root, const Override& ov) {
  if (ov.first.empty()) invalid("empty override key");
  std::vector<std::string> parts;
  std::stringstream ss(ov.first);
  for (std::string part; std::getline(ss, part, '.');) {
    if (part.empty()) invalid("malformed override key '" + ov.first + "'");
    parts.push_back(part);
  }
  YAML::Node cur = root;
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (cur[parts[i]] && !cur[parts[i]].IsMap()) invalid("override '" + ov.first + "' descends into a scalar");
    YAML::Node next = cur[parts[i]];
    cur.reset(next);
  }
  try {
    cur[parts.back()] = YAML::Load(ov.second);
  } catch (const YAML::Exception& e) {
    invalid("override '" + ov.first + "': " + e.what());
  }
}

SourceSpec read_source(Section s, const SourceSpec& fallback, std::uint64_t derived_seed, std::size_t n_subbands,
                       const std::filesystem::path& base_dir) {
  std::string type;
  if (!s.has("type")) {
    // Without a type only keys of the fallback's own kind may be refined.
    type = std::visit(
        [](const auto& src) -> std::string {
          using T = std::decay_t<decltype(src)>;
          if constexpr (std::is_same_v<T, env::TddSource>) return "tdd";
          if constexpr (std::is_same_v<T, env::FddSource>) return "fdd";
          return "trace";
        },
        fallback.source);
  }
  s.get("type", type);
  SourceSpec spec;
  if (type == "tdd") {
    env::TddSource src = std::holds_alternative<env::TddSource>(fallback.source)
                             ? std::get<env::TddSource>(fallback.source)
                             : env::TddSource{};
    s.get("bands", src.bands);
    s.get("on", src.on_steps);
    s.get("off", src.off_steps);
    s.get("phase", src.phase);
    spec.source = src;
  } else if (type == "fdd") {
    env::FddSource src = std::holds_alternative<env::FddSource>(fallback.source)
                             ? std::get<env::FddSource>(fallback.source)
                             : env::FddSource{};
    src.seed = derived_seed;
    s.get("bands", src.bands);
    s.get("activity", src.activity);
    s.get("seed", src.seed);
    spec.source = src;
  } else if (type == "trace") {
    env::TraceSource src;
    std::string path = fallback.trace_path.string();
    s.get("path", path);
    s.get("wrap", src.wrap);
    if (path.empty()) invalid(s.where("path") + " is required for trace sources");
    std::filesystem::path p(path);
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    src.rows = env::load_trace(p);
    spec.source = std::move(src);
    spec.trace_path = p;
  } else {
    invalid(s.where("type") + " must be tdd, fdd or trace (got '" + type + "')");
  }
  s.finish();
  env::validate_source(spec.source, n_subbands);
  return spec;
}

nlohmann::ordered_json source_json(const SourceSpec& spec) {
  return std::visit(
      [&](const auto& src) -> nlohmann::ordered_json {
        using T = std::decay_t<decltype(src)>;
        nlohmann::ordered_json j;
        if constexpr (std::is_same_v<T, env::TddSource>) {
          j["type"] = "tdd";
          j["bands"] = src.bands;
          j["on"] = src.on_steps;
          j["off"] = src.off_steps;
          j["phase"] = src.phase;
        } else if constexpr (std::is_same_v<T, env::FddSource>) {
          j["type"] = "fdd";
          j["bands"] = src.bands;
          j["activity"] = src.activity;
          j["seed"] = src.seed;
        } else {
          j["type"] = "trace";
          j["path"] = spec.trace_path.string();
          j["wrap"] = src.wrap;
        }
        return j;
      },
      spec.source);
}

std::vector<double> log_sweep(double lo_exp10, double hi_exp10, double step) {
  std::vector<double> out;
  const auto n = static_cast<int>(std::lround((hi_exp10 - lo_exp10) / step));
  for (int i = 0; i <= n; ++i) out.push_back(std::pow(10.0, lo_exp10 + step * i));
  return out;
}

}  // namespace

std::string_view to_string(Scale scale) { return scale == Scale::Desk ? "desk" : "full"; }

Scale parse_scale(std::string_view name) {
  if (name == "desk") return Scale::Desk;
  if (name == "full") return Scale::Full;
  invalid("scale must be desk or full (got '" + std::string(name) + "')");
}

ExperimentConfig default_config(Scale scale) {
  ExperimentConfig cfg;
  cfg.scale = scale;
  cfg.interference_train.source = env::TddSource{{1, 2}, 2, 3, 0};
  cfg.interference_eval.source = env::TddSource{{1, 2}, 3, 2, 0};
  cfg.detection.pfas = log_sweep(-7.0, -1.0, 0.5);
  cfg.scene.target_delay = 12.31e-6;
  cfg.scene.noise_power = 1.0;
  // Five Doppler bins at desk scale.
  cfg.scene.target_doppler = 5.0 / (64 * 409.6e-6);
  if (scale == Scale::Desk) {
    cfg.radar = dsp::RadarConfig::desk_scale();
    cfg.scene.target_amplitude = 0.03;
    cfg.detection.n_cpis = 100;
  } else {
    cfg.radar = dsp::RadarConfig::full_scale();
    // Same post-integration SNR as desk scale: 4x samples per pulse, 1000/64 pulses.
    cfg.scene.target_amplitude = 0.03 / std::sqrt(4.0 * 1000.0 / 64.0);
    cfg.detection.n_cpis = 500;
    cfg.agent.online_epochs = (cfg.detection.n_cpis * cfg.radar.pulses_per_cpi + cfg.agent.steps_per_epoch - 1) /
                              cfg.agent.steps_per_epoch;
  }
  // The adaptation budget resets once per radar CPI.
  cfg.env.cpi_pulses = cfg.radar.pulses_per_cpi;
  cfg.radar.n_subbands = cfg.env.n_subbands;
  return cfg;
}

void ExperimentConfig::validate() const {
  env.validate();
  agent.validate();
  radar.validate();
  if (radar.n_subbands != env.n_subbands) invalid("radar and environment disagree on n_subbands");
  detection_scene().validate(radar);
  env::validate_source(interference_train.source, env.n_subbands);
  env::validate_source(interference_eval.source, env.n_subbands);
  if (!std::isfinite(inr_db)) invalid("inr_db must be finite");
  const std::size_t online_decisions = agent.online_epochs * agent.steps_per_epoch;
  if (sharing_window < 1 || sharing_window > online_decisions) {
    invalid("sharing_window must lie in [1, online decisions = " + std::to_string(online_decisions) + "]");
  }
  if (detection.enabled) {
    if (detection.n_cpis < 1) invalid("detection.n_cpis must be >= 1");
    const std::size_t needed = detection.n_cpis * radar.pulses_per_cpi;
    if (needed > online_decisions) {
      invalid("detection needs " + std::to_string(needed) + " evaluated decisions but the online phase makes " +
              std::to_string(online_decisions));
    }
    if (detection.pfas.empty()) invalid("detection.pfas must not be empty");
    for (std::size_t i = 0; i < detection.pfas.size(); ++i) {
      if (!(detection.pfas[i] > 0.0 && detection.pfas[i] < 1.0)) invalid("detection.pfas must lie in (0, 1)");
      if (i > 0 && !(detection.pfas[i] > detection.pfas[i - 1])) invalid("detection.pfas must be ascending");
    }
    for (double fa : detection.matched_fa) {
      if (!(fa > 0.0 && fa < 1.0)) invalid("detection.matched_fa must lie in (0, 1)");
    }
    dsp::CfarConfig{detection.n_train, detection.n_guard, detection.pfas.front()}.validate();
  }
}

dsp::Scene ExperimentConfig::detection_scene() const {
  dsp::Scene s = scene;
  s.schedule.clear();
  s.interference_power.assign(env.n_subbands, scene.noise_power * std::pow(10.0, inr_db / 10.0));
  return s;
}

ExperimentConfig parse_config(const std::string& yaml_text, const std::vector<Override>& overrides,
                              const std::filesystem::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    invalid(std::string("malformed configuration: ") + e.what());
  }
  if (!root || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  if (!root.IsMap()) invalid("configuration document must be a mapping");
  for (const auto& ov : overrides) apply_override(root, ov);

  Section top(root, "");
  std::string scale_name = "desk";
  top.get("scale", scale_name);
  ExperimentConfig cfg = default_config(parse_scale(scale_name));

  top.get("seed", cfg.seed);
  std::string out_dir = cfg.output_dir.string();
  top.get("output_dir", out_dir);
  cfg.output_dir = out_dir;
  std::string algorithm(agents::to_string(cfg.agent.algorithm));
  top.get("algorithm", algorithm);
  cfg.agent.algorithm = agents::parse_algorithm(algorithm);
  top.get("inr_db", cfg.inr_db);
  top.get("sharing_window", cfg.sharing_window);

  {
    Section s = top.child("env");
    s.get("n_subbands", cfg.env.n_subbands);
    s.get("history_depth", cfg.env.history_depth);
    s.get("total_bandwidth", cfg.env.total_bandwidth);
    s.get("sense_threshold_p0", cfg.env.sense_threshold_p0);
    s.get("sense_jitter_db", cfg.env.sense_jitter_db);
    s.get("collision_penalty", cfg.env.collision_penalty);
    s.get("bandwidth_reward_unit", cfg.env.bandwidth_reward_unit);
    s.get("adaptation_penalty", cfg.env.adaptation_penalty);
    s.get("adaptation_limit", cfg.env.adaptation_limit);
    s.get("cpi_pulses", cfg.env.cpi_pulses);
    s.finish();
  }
  {
    Section s = top.child("agent");
    s.get("gamma", cfg.agent.gamma);
    s.get("target_update_period", cfg.agent.target_update_period);
    s.get("n_online", cfg.agent.n_online);
    s.get("offline_epochs", cfg.agent.offline_epochs);
    s.get("online_epochs", cfg.agent.online_epochs);
    s.get("steps_per_epoch", cfg.agent.steps_per_epoch);
    s.get("replay_capacity", cfg.agent.replay_capacity);
    s.get("episode_length", cfg.agent.episode_length);
    s.get("online_epsilon", cfg.agent.online_epsilon);
    s.get("online_learning", cfg.agent.online_learning);
    s.get("hidden_width", cfg.agent.hidden_width);
    s.get("learning_rate", cfg.agent.sgd.learning_rate);
    s.get("batch_size", cfg.agent.sgd.batch_size);
    s.get("grad_clip", cfg.agent.sgd.grad_clip);
    s.finish();
  }
  {
    Section s = top.child("radar");
    s.get("sample_rate", cfg.radar.sample_rate);
    s.get("pri", cfg.radar.pri);
    s.get("pulses_per_cpi", cfg.radar.pulses_per_cpi);
    s.get("pulse_width", cfg.radar.pulse_width);
    s.get("range_window", cfg.radar.range_window);
    s.get("doppler_window", cfg.radar.doppler_window);
    s.finish();
  }
  {
    Section s = top.child("scene");
    s.get("target_delay", cfg.scene.target_delay);
    s.get("target_doppler", cfg.scene.target_doppler);
    s.get("target_amplitude", cfg.scene.target_amplitude);
    s.get("noise_power", cfg.scene.noise_power);
    s.finish();
  }
  {
    Section s = top.child("detection");
    s.get("enabled", cfg.detection.enabled);
    s.get("n_cpis", cfg.detection.n_cpis);
    s.get("pfas", cfg.detection.pfas);
    s.get("matched_fa", cfg.detection.matched_fa);
    s.get("n_train", cfg.detection.n_train);
    s.get("n_guard", cfg.detection.n_guard);
    s.get("no_rfi_baseline", cfg.detection.no_rfi_baseline);
    s.finish();
  }
  // Scale presets tie the adaptation window to the radar CPI unless set explicitly.
  if (!top.child("env").has("cpi_pulses")) cfg.env.cpi_pulses = cfg.radar.pulses_per_cpi;
  cfg.radar.n_subbands = cfg.env.n_subbands;

  cfg.interference_train = read_source(top.child("interference_train"), cfg.interference_train,
                                       derive_seed(cfg.seed, kTrainFddStream), cfg.env.n_subbands, base_dir);
  cfg.interference_eval = read_source(top.child("interference_eval"), cfg.interference_eval,
                                      derive_seed(cfg.seed, kEvalFddStream), cfg.env.n_subbands, base_dir);
  top.finish();
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<Override>& overrides) {
  if (path.empty()) return parse_config("", overrides);
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), overrides, path.parent_path());
}

nlohmann::ordered_json to_json(const ExperimentConfig& cfg) {
  nlohmann::ordered_json j;
  j["scale"] = to_string(cfg.scale);
  j["seed"] = cfg.seed;
  j["algorithm"] = agents::to_string(cfg.agent.algorithm);
  j["output_dir"] = cfg.output_dir.string();
  j["inr_db"] = cfg.inr_db;
  j["sharing_window"] = cfg.sharing_window;
  j["env"] = {
      {"n_subbands", cfg.env.n_subbands},
      {"history_depth", cfg.env.history_depth},
      {"total_bandwidth", cfg.env.total_bandwidth},
      {"sense_threshold_p0", cfg.env.sense_threshold_p0},
      {"sense_jitter_db", cfg.env.sense_jitter_db},
      {"collision_penalty", cfg.env.collision_penalty},
      {"bandwidth_reward_unit", cfg.env.bandwidth_reward_unit},
      {"adaptation_penalty", cfg.env.adaptation_penalty},
      {"adaptation_limit", cfg.env.adaptation_limit},
      {"cpi_pulses", cfg.env.cpi_pulses},
  };
  j["agent"] = {
      {"gamma", cfg.agent.gamma},
      {"target_update_period", cfg.agent.target_update_period},
      {"n_online", cfg.agent.n_online},
      {"offline_epochs", cfg.agent.offline_epochs},
      {"online_epochs", cfg.agent.online_epochs},
      {"steps_per_epoch", cfg.agent.steps_per_epoch},
      {"replay_capacity", cfg.agent.replay_capacity},
      {"episode_length", cfg.agent.episode_length},
      {"online_epsilon", cfg.agent.online_epsilon},
      {"online_learning", cfg.agent.online_learning},
      {"hidden_width", cfg.agent.hidden_width},
      {"learning_rate", cfg.agent.sgd.learning_rate},
      {"batch_size", cfg.agent.sgd.batch_size},
      {"grad_clip", cfg.agent.sgd.grad_clip},
  };
  j["radar"] = {
      {"sample_rate", cfg.radar.sample_rate},         {"pri", cfg.radar.pri},
      {"pulses_per_cpi", cfg.radar.pulses_per_cpi},   {"pulse_width", cfg.radar.pulse_width},
      {"range_window", cfg.radar.range_window},       {"doppler_window", cfg.radar.doppler_window},
  };
  j["scene"] = {
      {"target_delay", cfg.scene.target_delay},
      {"target_doppler", cfg.scene.target_doppler},
      {"target_amplitude", cfg.scene.target_amplitude},
      {"noise_power", cfg.scene.noise_power},
  };
  j["detection"] = {
      {"enabled", cfg.detection.enabled},       {"n_cpis", cfg.detection.n_cpis},
      {"pfas", cfg.detection.pfas},             {"matched_fa", cfg.detection.matched_fa},
      {"n_train", cfg.detection.n_train},       {"n_guard", cfg.detection.n_guard},
      {"no_rfi_baseline", cfg.detection.no_rfi_baseline},
  };
  j["interference_train"] = source_json(cfg.interference_train);
  j["interference_eval"] = source_json(cfg.interference_eval);
  return j;
}

}  // namespace cradar::harness
