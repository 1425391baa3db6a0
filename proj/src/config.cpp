#include "lrcl/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace lrcl {

using nlohmann::json;

namespace {

/// Applies one handler per known key and rejects everything else.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError("config: '" + name_ + "' must be an object");
  }

  template <typename T>
  Section& field(const std::string& key, T& target) {
    handlers_[key] = [this, key, &target](const json& v) { target = read<T>(v, key); };
    return *this;
  }

  Section& custom(const std::string& key, std::function<void(const json&, const std::string&)> fn) {
    handlers_[key] = [fn = std::move(fn), this, key](const json& v) { fn(v, path(key)); };
    return *this;
  }

  void apply() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      auto h = handlers_.find(it.key());
      if (h == handlers_.end()) throw ConfigError("config: unknown key '" + path(it.key()) + "'");
      h->second(it.value());
    }
  }

  std::string path(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

 private:
  template <typename T>
  T read(const json& v, const std::string& key) const {
    const std::string where = path(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError("config: '" + where + "' must be a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError("config: '" + where + "' must be a string");
      return v.get<std::string>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError("config: '" + where + "' must be a number");
      return v.get<T>();
    } else if constexpr (std::is_unsigned_v<T>) {
      if (!v.is_number_unsigned()) throw ConfigError("config: '" + where + "' must be a non-negative integer");
      return v.get<T>();
    } else if constexpr (std::is_same_v<T, std::vector<std::size_t>>) {
      if (!v.is_array()) throw ConfigError("config: '" + where + "' must be an array of non-negative integers");
      T out;
      for (const auto& e : v) {
        if (!e.is_number_unsigned()) {
          throw ConfigError("config: '" + where + "' must be an array of non-negative integers");
        }
        out.push_back(e.get<std::size_t>());
      }
      return out;
    } else {
      static_assert(sizeof(T) == 0, "unsupported config field type");
    }
  }

  const json& j_;
  std::string name_;
  std::map<std::string, std::function<void(const json&)>> handlers_;
};

void policy_field(Section& s, const std::string& key, InputPolicy& target) {
  s.custom(key, [&target](const json& v, const std::string& where) {
    if (!v.is_string()) throw ConfigError("config: '" + where + "' must be a string");
    target = parse_input_policy(v.get<std::string>());
  });
}

void parse_synth(const json& j, const std::string& where, SynthConfig& c) {
  Section s(j, where);
  s.field("num_classes", c.num_classes)
      .field("windows_per_class", c.windows_per_class)
      .field("window_len", c.window_len)
      .field("sample_rate_hz", c.sample_rate_hz)
      .field("noise_sigma", c.noise_sigma)
      .field("phase_jitter", c.phase_jitter)
      .field("amplitude", c.amplitude)
      .field("amplitude_jitter", c.amplitude_jitter)
      .field("min_frequency_hz", c.min_frequency_hz)
      .field("max_frequency_hz", c.max_frequency_hz)
      .field("frequency_jitter", c.frequency_jitter)
      .field("null_amplitude", c.null_amplitude)
      .field("prototype_seed", c.prototype_seed)
      .field("num_subjects", c.num_subjects)
      .custom("mirror", [&c](const json& v, const std::string& w) {
        if (!v.is_array() || v.size() != 3) throw ConfigError("config: '" + w + "' must be an array of 3 numbers");
        for (std::size_t i = 0; i < 3; ++i) {
          if (!v[i].is_number()) throw ConfigError("config: '" + w + "' must be an array of 3 numbers");
          c.mirror[i] = v[i].get<double>();
        }
      });
  s.apply();
}

json synth_json(const SynthConfig& c) {
  return {{"num_classes", c.num_classes},
          {"windows_per_class", c.windows_per_class},
          {"window_len", c.window_len},
          {"sample_rate_hz", c.sample_rate_hz},
          {"noise_sigma", c.noise_sigma},
          {"phase_jitter", c.phase_jitter},
          {"amplitude", c.amplitude},
          {"amplitude_jitter", c.amplitude_jitter},
          {"min_frequency_hz", c.min_frequency_hz},
          {"max_frequency_hz", c.max_frequency_hz},
          {"frequency_jitter", c.frequency_jitter},
          {"null_amplitude", c.null_amplitude},
          {"mirror", c.mirror},
          {"prototype_seed", c.prototype_seed},
          {"num_subjects", c.num_subjects}};
}

}  // namespace

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  Section root(j, "");
  root.custom("data", [&c](const json& v, const std::string& w) {
        DataConfig& d = c.data;
        Section s(v, w);
        s.field("source", d.source)
            .field("seed", d.seed)
            .field("validation_windows_per_class", d.validation_windows_per_class)
            .field("test_windows_per_class", d.test_windows_per_class)
            .field("unlabeled_path", d.unlabeled_path)
            .field("train_path", d.train_path)
            .field("validation_path", d.validation_path)
            .field("test_path", d.test_path)
            .field("standardize", d.standardize)
            .field("labels_per_class", d.labels_per_class)
            .custom("synth", [&d](const json& sv, const std::string& sw) { parse_synth(sv, sw, d.synth); });
        s.apply();
        if (d.source != "synth" && d.source != "files") {
          throw ConfigError("config: 'data.source' must be synth or files; got '" + d.source + "'");
        }
      })
      .custom("pretrain", [&c](const json& v, const std::string& w) {
        PretrainConfig& p = c.pretrain;
        Section s(v, w);
        s.field("batch_size", p.batch_size)
            .field("temperature", p.temperature)
            .field("lr", p.base_lr)
            .field("epochs", p.epochs)
            .field("momentum", p.momentum)
            .field("latent_size", p.latent_size)
            .field("seed", p.seed);
        policy_field(s, "simclr_side", p.simclr_side);
        s.apply();
      })
      .custom("finetune", [&c](const json& v, const std::string& w) {
        FinetuneConfig& f = c.finetune;
        Section s(v, w);
        s.field("lr", f.lr)
            .field("epochs", f.epochs)
            .field("patience", f.patience)
            .field("batch_size", f.batch_size)
            .field("seed", f.seed)
            .custom("freeze", [&f](const json& fv, const std::string& fw) {
              if (!fv.is_string()) throw ConfigError("config: '" + fw + "' must be a string");
              f.freeze = parse_freeze_policy(fv.get<std::string>());
            });
        policy_field(s, "input", f.input);
        s.apply();
      })
      .custom("eval", [&c](const json& v, const std::string& w) {
        EvalConfig& e = c.eval;
        Section s(v, w);
        s.field("counts", e.counts)
            .field("repeats", e.repeats)
            .field("batch_sizes", e.batch_sizes)
            .field("latent_sizes", e.latent_sizes)
            .field("jobs", e.jobs);
        policy_field(s, "side", e.side);
        s.apply();
      })
      .custom("output", [&c](const json& v, const std::string& w) {
        Section s(v, w);
        s.field("dir", c.output.dir);
        s.apply();
      });
  root.apply();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw ConfigError("config: '" + path + "' is not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

json to_json(const RunConfig& c) {
  const auto& d = c.data;
  const auto& p = c.pretrain;
  const auto& f = c.finetune;
  const auto& e = c.eval;
  return {{"data",
           {{"source", d.source},
            {"synth", synth_json(d.synth)},
            {"seed", d.seed},
            {"validation_windows_per_class", d.validation_windows_per_class},
            {"test_windows_per_class", d.test_windows_per_class},
            {"unlabeled_path", d.unlabeled_path},
            {"train_path", d.train_path},
            {"validation_path", d.validation_path},
            {"test_path", d.test_path},
            {"standardize", d.standardize},
            {"labels_per_class", d.labels_per_class}}},
          {"pretrain",
           {{"batch_size", p.batch_size},
            {"temperature", p.temperature},
            {"lr", p.base_lr},
            {"epochs", p.epochs},
            {"momentum", p.momentum},
            {"latent_size", p.latent_size},
            {"seed", p.seed},
            {"simclr_side", to_string(p.simclr_side)}}},
          {"finetune",
           {{"lr", f.lr},
            {"epochs", f.epochs},
            {"patience", f.patience},
            {"batch_size", f.batch_size},
            {"seed", f.seed},
            {"freeze", to_string(f.freeze)},
            {"input", to_string(f.input)}}},
          {"eval",
           {{"side", to_string(e.side)},
            {"counts", e.counts},
            {"repeats", e.repeats},
            {"batch_sizes", e.batch_sizes},
            {"latent_sizes", e.latent_sizes},
            {"jobs", e.jobs}}},
          {"output", {{"dir", c.output.dir}}}};
}

std::string config_help() {
  std::string out;
  std::function<void(const json&, const std::string&)> walk = [&](const json& j, const std::string& prefix) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
      if (it.value().is_object()) {
        walk(it.value(), key);
      } else {
        out += "  " + key + " = " + it.value().dump() + "\n";
      }
    }
  };
  walk(to_json(RunConfig{}), "");
  return out;
}

ExperimentData load_experiment_data(const DataConfig& c) {
  ExperimentData out;
  if (c.source == "synth") {
    const Rng root(c.seed);
    Rng train_rng = root.fork(20);
    Rng val_rng = root.fork(21);
    Rng test_rng = root.fork(22);
    out.train = synth_generate(c.synth, train_rng);
    SynthConfig held = c.synth;
    held.windows_per_class = c.validation_windows_per_class;
    out.validation = synth_generate(held, val_rng);
    held.windows_per_class = c.test_windows_per_class;
    out.test = synth_generate(held, test_rng);
    out.unlabeled = out.train;
  } else {
    for (const auto* p : {&c.train_path, &c.validation_path, &c.test_path}) {
      if (p->empty()) throw ConfigError("config: data.source 'files' needs train_path, validation_path and test_path");
    }
    out.train = read_canonical(c.train_path);
    out.validation = read_canonical(c.validation_path);
    out.test = read_canonical(c.test_path);
    out.unlabeled = c.unlabeled_path.empty() ? out.train : read_canonical(c.unlabeled_path);
  }
  for (auto& p : out.unlabeled.pairs) p.label = kUnlabeled;
  if (c.standardize) {
    const ChannelStats stats = channel_stats(out.train);
    for (auto* ds : {&out.unlabeled, &out.train, &out.validation, &out.test}) standardize(*ds, stats);
  }
  return out;
}

}  // namespace lrcl
