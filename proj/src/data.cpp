#include "lrcl/data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include <json.hpp>

#include "binary_io.hpp"

namespace lrcl {

using nlohmann::json;

void WindowedDataset::validate() const {
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    const Shape want{3, window_len};
    if (p.left.shape() != want || p.right.shape() != want) {
      throw DataError("dataset: pair " + std::to_string(i) + " has shapes " + shape_string(p.left.shape()) + " / " +
                      shape_string(p.right.shape()) + ", expected " + shape_string(want));
    }
    if (p.label != kUnlabeled && (p.label < 0 || static_cast<std::size_t>(p.label) >= class_names.size())) {
      throw DataError("dataset: pair " + std::to_string(i) + " has label " + std::to_string(p.label) + " but only " +
                      std::to_string(class_names.size()) + " classes are named");
    }
  }
}

void SplitSpec::validate() const {
  std::map<int, std::string> seen;
  for (const auto& [role, subjects] : roles) {
    for (int s : subjects) {
      auto [it, inserted] = seen.emplace(s, role);
      if (!inserted && it->second != role) {
        throw ConfigError("split: subject " + std::to_string(s) + " appears in both " + it->second + " and " + role);
      }
    }
  }
}

std::optional<std::string> SplitSpec::role_of(int subject) const {
  for (const auto& [role, subjects] : roles) {
    if (std::find(subjects.begin(), subjects.end(), subject) != subjects.end()) return role;
  }
  return std::nullopt;
}

SplitSpec mmfit_split() {
  return SplitSpec{{{"train", {1, 2, 3, 4, 6, 7, 8, 16, 17, 18}},
                    {"validation", {14, 15, 19}},
                    {"test", {9, 10, 11}},
                    {"unseen_test", {0, 5, 12, 13, 20}}}};
}

std::size_t seconds_to_samples(double seconds, double rate_hz) {
  if (!(seconds > 0.0) || !(rate_hz > 0.0)) {
    throw ParameterError("window and step durations and the sample rate must be positive");
  }
  const auto n = static_cast<std::size_t>(std::llround(seconds * rate_hz));
  if (n == 0) throw ParameterError("duration of " + std::to_string(seconds) + " s is shorter than one sample");
  return n;
}

std::vector<StreamWindow> window_stream(const Tensor& stream, double window_seconds, double step_seconds,
                                        double rate_hz) {
  if (stream.rank() != 2) throw ShapeError("window_stream: stream must be [C x L], got " + shape_string(stream.shape()));
  const std::size_t win = seconds_to_samples(window_seconds, rate_hz);
  const std::size_t step = seconds_to_samples(step_seconds, rate_hz);
  const std::size_t channels = stream.dim(0);
  const std::size_t len = stream.dim(1);
  if (len < win) {
    throw DataError("window_stream: stream of " + std::to_string(len) + " samples is shorter than one window (" +
                    std::to_string(win) + ")");
  }
  std::vector<StreamWindow> out;
  for (std::size_t start = 0; start + win <= len; start += step) {
    Tensor w({channels, win});
    for (std::size_t c = 0; c < channels; ++c) {
      std::copy_n(stream.data().begin() + c * len + start, win, w.data().begin() + c * win);
    }
    out.push_back({std::move(w), start});
  }
  return out;
}

int label_window(std::span<const int> sample_labels) {
  if (sample_labels.empty()) return kUnlabeled;
  std::map<int, std::size_t> counts;
  for (int l : sample_labels) ++counts[l];
  // std::map iterates ascending, so strict '>' keeps the lowest id on ties.
  int best = counts.begin()->first;
  std::size_t best_count = 0;
  for (const auto& [label, count] : counts) {
    if (count > best_count) {
      best = label;
      best_count = count;
    }
  }
  return best;
}

std::string encode_dataset(const WindowedDataset& ds) {
  ds.validate();
  json header = {{"count", ds.pairs.size()},
                 {"T", ds.window_len},
                 {"rate", ds.sample_rate_hz},
                 {"class_names", ds.class_names},
                 {"provenance", ds.provenance}};
  const std::string text = header.dump();
  std::string out(kDatasetMagic, 4);
  detail::put_le<std::uint64_t>(out, text.size());
  out += text;
  out.reserve(out.size() + ds.pairs.size() * (12 + 24 * ds.window_len));
  for (const auto& p : ds.pairs) {
    detail::put_i32(out, p.label);
    detail::put_i32(out, p.subject);
    detail::put_i32(out, p.t0);
    detail::put_floats(out, p.left.data());
    detail::put_floats(out, p.right.data());
  }
  return out;
}

WindowedDataset decode_dataset(const std::string& bytes) {
  detail::Reader reader(bytes, "dataset");
  if (reader.take(4) != std::string_view(kDatasetMagic, 4)) {
    throw CorruptionError("dataset: bad magic or version (expected \"LRW1\")");
  }
  const auto header_len = reader.get_le<std::uint64_t>();
  if (header_len > reader.remaining()) throw CorruptionError("dataset: header length exceeds file size");
  WindowedDataset ds;
  std::size_t count = 0;
  try {
    const json header = json::parse(reader.take(static_cast<std::size_t>(header_len)));
    count = header.at("count").get<std::size_t>();
    ds.window_len = header.at("T").get<std::size_t>();
    ds.sample_rate_hz = header.at("rate").get<double>();
    ds.class_names = header.at("class_names").get<std::vector<std::string>>();
    ds.provenance = header.at("provenance").get<std::string>();
  } catch (const json::exception& e) {
    throw CorruptionError(std::string("dataset: malformed JSON header: ") + e.what());
  }
  const std::size_t record = 12 + 24 * ds.window_len;
  if (count > 0 && (ds.window_len == 0 || reader.remaining() / record < count)) {
    throw CorruptionError("dataset: truncated (header announces " + std::to_string(count) + " records, file holds " +
                          std::to_string(ds.window_len ? reader.remaining() / record : 0) + ")");
  }
  if (reader.remaining() != count * record) {
    throw CorruptionError("dataset: " + std::to_string(reader.remaining() - count * record) +
                          " bytes after the last record");
  }
  ds.pairs.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    WindowPair p;
    p.label = reader.get_i32();
    p.subject = reader.get_i32();
    p.t0 = reader.get_i32();
    p.left = Tensor({3, ds.window_len});
    p.right = Tensor({3, ds.window_len});
    reader.get_floats(p.left.data());
    reader.get_floats(p.right.data());
    ds.pairs.push_back(std::move(p));
  }
  try {
    ds.validate();
  } catch (const DataError& e) {
    throw CorruptionError(e.what());
  }
  return ds;
}

void write_canonical(const WindowedDataset& ds, const std::string& path) {
  detail::write_file(path, encode_dataset(ds));
}

WindowedDataset read_canonical(const std::string& path) { return decode_dataset(detail::read_file(path)); }

WindowedDataset synth_generate(const SynthConfig& config, Rng& rng) {
  if (config.num_classes < 2) {
    throw ConfigError("synth: num_classes must be at least 2 (class 0 is no-activity), got " +
                      std::to_string(config.num_classes));
  }
  if (config.windows_per_class == 0) throw ConfigError("synth: windows_per_class must be positive");
  if (config.window_len == 0) throw ConfigError("synth: window_len must be positive");
  if (!(config.sample_rate_hz > 0.0)) throw ConfigError("synth: sample_rate_hz must be positive");
  if (config.noise_sigma < 0.0 || config.phase_jitter < 0.0 || config.amplitude_jitter < 0.0 ||
      config.frequency_jitter < 0.0) {
    throw ConfigError("synth: noise and jitter parameters must be non-negative");
  }
  if (!(config.min_frequency_hz > 0.0) || config.max_frequency_hz < config.min_frequency_hz) {
    throw ConfigError("synth: frequency range must satisfy 0 < min <= max");
  }
  if (config.num_subjects == 0) throw ConfigError("synth: num_subjects must be positive");

  const std::size_t classes = config.num_classes;
  const std::size_t len = config.window_len;
  constexpr double two_pi = 2.0 * std::numbers::pi;

  struct Prototype {
    double frequency = 0.0;
    std::array<double, 3> amplitude{};
    std::array<double, 3> phase{};
  };
  std::vector<Prototype> protos(classes);
  Rng proto_rng(config.prototype_seed);
  for (std::size_t c = 1; c < classes; ++c) {
    // Frequencies are spread over the range so that classes stay distinct.
    const double lo = config.min_frequency_hz;
    const double hi = config.max_frequency_hz;
    const double slot = (hi - lo) / static_cast<double>(classes - 1);
    protos[c].frequency = lo + slot * (static_cast<double>(c - 1) + proto_rng.uniform());
    for (std::size_t ax = 0; ax < 3; ++ax) {
      protos[c].amplitude[ax] = config.amplitude * proto_rng.uniform(0.3, 1.0);
      protos[c].phase[ax] = proto_rng.uniform(0.0, two_pi);
    }
  }

  WindowedDataset ds;
  ds.sample_rate_hz = config.sample_rate_hz;
  ds.window_len = len;
  ds.class_names.push_back("no_activity");
  for (std::size_t c = 1; c < classes; ++c) ds.class_names.push_back("activity_" + std::to_string(c));
  ds.provenance = "synthetic symmetric activities (prototype_seed=" + std::to_string(config.prototype_seed) +
                  ", window_seed=" + std::to_string(rng.seed()) + ")";
  ds.pairs.reserve(classes * config.windows_per_class);

  std::vector<double> left_signal(3 * len);
  std::vector<double> right_signal(3 * len);
  std::size_t index = 0;
  for (std::size_t w = 0; w < config.windows_per_class; ++w) {
    for (std::size_t c = 0; c < classes; ++c, ++index) {
      if (c == 0) {
        for (std::size_t i = 0; i < 3 * len; ++i) left_signal[i] = config.null_amplitude * rng.normal();
        right_signal = left_signal;
      } else {
        const Prototype& p = protos[c];
        const double theta = rng.uniform(0.0, two_pi);
        const double delta = config.phase_jitter > 0.0 ? rng.uniform(-config.phase_jitter, config.phase_jitter) : 0.0;
        const double scale = 1.0 + (config.amplitude_jitter > 0.0
                                        ? rng.uniform(-config.amplitude_jitter, config.amplitude_jitter)
                                        : 0.0);
        const double freq =
            p.frequency * (1.0 + (config.frequency_jitter > 0.0
                                      ? rng.uniform(-config.frequency_jitter, config.frequency_jitter)
                                      : 0.0));
        for (std::size_t ax = 0; ax < 3; ++ax) {
          for (std::size_t t = 0; t < len; ++t) {
            const double base = two_pi * freq * static_cast<double>(t) / config.sample_rate_hz + p.phase[ax] + theta;
            left_signal[ax * len + t] = scale * p.amplitude[ax] * std::sin(base);
            right_signal[ax * len + t] = scale * p.amplitude[ax] * std::sin(base + delta);
          }
        }
      }
      WindowPair pair;
      pair.left = Tensor({3, len});
      pair.right = Tensor({3, len});
      for (std::size_t ax = 0; ax < 3; ++ax) {
        for (std::size_t t = 0; t < len; ++t) {
          const std::size_t i = ax * len + t;
          const double eps_l = config.noise_sigma > 0.0 ? config.noise_sigma * rng.normal() : 0.0;
          const double eps_r = config.noise_sigma > 0.0 ? config.noise_sigma * rng.normal() : 0.0;
          pair.left[i] = static_cast<float>(left_signal[i] + eps_l);
          pair.right[i] = static_cast<float>(config.mirror[ax] * right_signal[i] + eps_r);
        }
      }
      pair.label = static_cast<int>(c);
      pair.subject = static_cast<int>(index % config.num_subjects);
      pair.t0 = static_cast<int>(index * len);
      ds.pairs.push_back(std::move(pair));
    }
  }
  return ds;
}

std::vector<std::size_t> select_labeled(const WindowedDataset& ds, std::size_t n_per_class, Rng& rng) {
  std::vector<std::vector<std::size_t>> by_class(ds.num_classes());
  for (std::size_t i = 0; i < ds.pairs.size(); ++i) {
    const int l = ds.pairs[i].label;
    if (l >= 0 && static_cast<std::size_t>(l) < by_class.size()) by_class[static_cast<std::size_t>(l)].push_back(i);
  }
  std::vector<std::size_t> chosen;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& pool = by_class[c];
    if (pool.size() < n_per_class) {
      throw DataError("subsample_labels: class " + std::to_string(c) + " (" + ds.class_names[c] + ") has " +
                      std::to_string(pool.size()) + " labeled windows, fewer than the requested " +
                      std::to_string(n_per_class));
    }
    // Partial Fisher-Yates: the first n entries become a uniform sample.
    for (std::size_t i = 0; i < n_per_class; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
      std::swap(pool[i], pool[j]);
      chosen.push_back(pool[i]);
    }
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

WindowedDataset subsample_labels(const WindowedDataset& ds, std::size_t n_per_class, Rng& rng) {
  const auto keep = select_labeled(ds, n_per_class, rng);
  WindowedDataset out = ds;
  std::vector<bool> keep_mask(ds.pairs.size(), false);
  for (std::size_t i : keep) keep_mask[i] = true;
  for (std::size_t i = 0; i < out.pairs.size(); ++i) {
    if (!keep_mask[i]) out.pairs[i].label = kUnlabeled;
  }
  return out;
}

WindowedDataset labeled_only(const WindowedDataset& ds) {
  WindowedDataset out = ds;
  out.pairs.clear();
  for (const auto& p : ds.pairs) {
    if (p.label != kUnlabeled) out.pairs.push_back(p);
  }
  return out;
}

WindowedDataset filter_subjects(const WindowedDataset& ds, std::span<const int> subjects) {
  const std::set<int> wanted(subjects.begin(), subjects.end());
  WindowedDataset out = ds;
  out.pairs.clear();
  for (const auto& p : ds.pairs) {
    if (wanted.count(p.subject)) out.pairs.push_back(p);
  }
  return out;
}

ChannelStats channel_stats(const WindowedDataset& ds) {
  ChannelStats stats;
  std::array<double, 3> sum{}, sq{};
  double n = 0.0;
  for (const auto& p : ds.pairs) {
    for (const Tensor* side : {&p.left, &p.right}) {
      for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t t = 0; t < ds.window_len; ++t) {
          const double v = side->at(c, t);
          sum[c] += v;
          sq[c] += v * v;
        }
      }
    }
    n += 2.0 * static_cast<double>(ds.window_len);
  }
  if (n == 0.0) return stats;
  for (std::size_t c = 0; c < 3; ++c) {
    stats.mean[c] = sum[c] / n;
    const double var = std::max(0.0, sq[c] / n - stats.mean[c] * stats.mean[c]);
    stats.stddev[c] = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  return stats;
}

void standardize(WindowedDataset& ds, const ChannelStats& stats) {
  for (auto& p : ds.pairs) {
    for (Tensor* side : {&p.left, &p.right}) {
      for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t t = 0; t < ds.window_len; ++t) {
          side->at(c, t) = static_cast<float>((side->at(c, t) - stats.mean[c]) / stats.stddev[c]);
        }
      }
    }
  }
}

}  // namespace lrcl
