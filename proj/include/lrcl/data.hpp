#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lrcl/rng.hpp"
#include "lrcl/tensor.hpp"

namespace lrcl {

inline constexpr int kUnlabeled = -1;

/// One synchronized example: left and right windows of shape [3 x T].
struct WindowPair {
  Tensor left;
  Tensor right;
  int label = kUnlabeled;
  int subject = 0;
  int t0 = 0;  // window start index in the source stream
};

struct WindowedDataset {
  std::vector<WindowPair> pairs;
  double sample_rate_hz = 0.0;
  std::size_t window_len = 0;
  std::vector<std::string> class_names;
  std::string provenance;

  std::size_t size() const noexcept { return pairs.size(); }
  std::size_t num_classes() const noexcept { return class_names.size(); }

  /// Throws DataError if pairs disagree on shape or reference unknown classes.
  void validate() const;
};

/// Role name ("train", "validation", "test", "unseen_test") to subject ids.
struct SplitSpec {
  std::map<std::string, std::vector<int>> roles;

  /// Throws ConfigError if a subject appears under more than one role.
  void validate() const;
  std::optional<std::string> role_of(int subject) const;
};

/// Subject split used for MM-Fit.
SplitSpec mmfit_split();

std::size_t seconds_to_samples(double seconds, double rate_hz);

struct StreamWindow {
  Tensor data;  // [C x window_len]
  std::size_t start = 0;
};

/// Cuts a [C x L] stream into windows starting at 0, step, 2*step, ...;
/// the trailing partial window is dropped.
std::vector<StreamWindow> window_stream(const Tensor& stream, double window_seconds, double step_seconds,
                                        double rate_hz);

/// Majority label of a window's per-sample labels; ties go to the lowest id
/// (so kUnlabeled wins a tie against any class).
int label_window(std::span<const int> sample_labels);

/// Canonical container (integers little-endian):
///
///   "LRW1" | u64 header length H | H bytes of UTF-8 JSON | records
///
/// The header is {"count", "T", "rate", "class_names", "provenance"}. Each
/// record is label (i32), subject (i32), t0 (i32), then the left and right
/// windows as 3*T float32 values each.
inline constexpr char kDatasetMagic[4] = {'L', 'R', 'W', '1'};

std::string encode_dataset(const WindowedDataset& ds);
WindowedDataset decode_dataset(const std::string& bytes);
void write_canonical(const WindowedDataset& ds, const std::string& path);
WindowedDataset read_canonical(const std::string& path);

/// Parameters of the synthetic symmetric-activity generator.
///
/// Class 0 is "no activity": shared low-amplitude Gaussian noise. Every
/// other class c has a frequency f_c and per-axis amplitude A[c][ax] and
/// phase phi[c][ax], drawn once from `prototype_seed` so that datasets
/// generated with different window seeds share the same classes. A window
/// of class c is
///
///   left[ax][t]  = s * A[c][ax] * sin(2 pi f_c t / rate + phi[c][ax] + theta) + eps
///   right[ax][t] = M[ax] * s * A[c][ax] * sin(2 pi f_c t / rate + phi[c][ax] + theta + delta) + eps'
///
/// with a random start phase theta, per-window amplitude scale s, right-side
/// jitter delta in [-phase_jitter, phase_jitter] and noise eps ~ N(0, noise_sigma^2).
struct SynthConfig {
  std::size_t num_classes = 6;
  std::size_t windows_per_class = 100;
  std::size_t window_len = 60;
  double sample_rate_hz = 30.0;
  double noise_sigma = 0.1;
  double phase_jitter = 0.1;
  double amplitude = 1.0;
  /// Per-window amplitude scale s is drawn from [1 - amplitude_jitter, 1 + amplitude_jitter].
  double amplitude_jitter = 0.2;
  double min_frequency_hz = 0.5;
  double max_frequency_hz = 3.0;
  /// Relative per-window perturbation of f_c.
  double frequency_jitter = 0.0;
  double null_amplitude = 0.05;
  std::array<double, 3> mirror{-1.0, 1.0, 1.0};
  std::uint64_t prototype_seed = 7;
  std::size_t num_subjects = 10;
};

/// Throws ConfigError for K < 2 or non-positive sizes.
WindowedDataset synth_generate(const SynthConfig& config, Rng& rng);

/// Indices of exactly n windows per class, sampled uniformly without replacement
/// and returned in ascending order.
std::vector<std::size_t> select_labeled(const WindowedDataset& ds, std::size_t n_per_class, Rng& rng);

/// Keeps the labels of select_labeled() windows and marks all others unlabeled.
WindowedDataset subsample_labels(const WindowedDataset& ds, std::size_t n_per_class, Rng& rng);

WindowedDataset labeled_only(const WindowedDataset& ds);
WindowedDataset filter_subjects(const WindowedDataset& ds, std::span<const int> subjects);

/// Per-channel mean and standard deviation over both sides of every window.
struct ChannelStats {
  std::array<double, 3> mean{};
  std::array<double, 3> stddev{1.0, 1.0, 1.0};
};

ChannelStats channel_stats(const WindowedDataset& ds);
void standardize(WindowedDataset& ds, const ChannelStats& stats);

}  // namespace lrcl
