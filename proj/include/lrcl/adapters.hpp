#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "lrcl/data.hpp"

namespace lrcl {

/// 2-D numeric table loaded from .npy (float32/float64/int32/int64,
/// C order) or from delimited text (comma, whitespace or semicolon).
struct NumericTable {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;  // row-major

  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

NumericTable read_npy(const std::string& path);
NumericTable read_text_table(const std::string& path);
/// Dispatches on the ".npy" extension.
NumericTable read_table(const std::string& path);

/// Locates the MM-Fit files for each workout. Path templates substitute
/// "{w}" with the workout id (e.g. "w03").
///
/// Stream files hold one row per sample with a frame column, a timestamp
/// column and three acceleration columns. The label file holds rows
/// "start_frame,end_frame,repetitions,activity".
struct MmfitConfig {
  std::string root;
  std::vector<std::string> workouts;  // default w00..w20
  std::string left_file = "{w}/{w}_sw_l_acc.npy";
  std::string right_file = "{w}/{w}_sw_r_acc.npy";
  std::string labels_file = "{w}/{w}_labels.csv";
  std::size_t frame_column = 0;
  std::size_t time_column = 1;
  std::vector<std::size_t> accel_columns{2, 3, 4};
  /// Multiplier taking the timestamp column to seconds.
  double time_scale = 1e-3;
  double rate_hz = 100.0;
  double window_seconds = 2.0;
  double step_seconds = 1.0;
  /// Workout id -> subject id; missing entries use the digits of the workout id.
  std::map<std::string, int> subject_of;
  std::vector<std::string> class_names{"squats",
                                       "lunges",
                                       "bicep_curls",
                                       "situps",
                                       "pushups",
                                       "tricep_extensions",
                                       "dumbbell_rows",
                                       "jumping_jacks",
                                       "dumbbell_shoulder_press",
                                       "lateral_shoulder_raises",
                                       "non_activity"};
  std::string rest_class = "non_activity";
  SplitSpec split = mmfit_split();
};

MmfitConfig mmfit_config_from_json(const nlohmann::json& j);

struct MmfitIngest {
  WindowedDataset all;
  std::map<std::string, WindowedDataset> splits;  // role -> windows of that role's subjects
};

/// Aligns both wrists on a common clock by nearest timestamp, windows them
/// and labels windows by majority. Throws DataError naming the workout when
/// a stream is missing or the two streams do not overlap by one window.
MmfitIngest adapt_mmfit(const MmfitConfig& config);

/// Opportunity session files (S<subject>-ADL<k>.dat, S<subject>-Drill.dat):
/// whitespace-separated columns, NaN for missing values. Column indices are
/// 1-based as in the dataset's column list and must be supplied.
struct OpportunityConfig {
  std::string root;
  std::vector<std::size_t> left_columns;   // LLA accelerometer x, y, z
  std::vector<std::size_t> right_columns;  // RLA accelerometer x, y, z
  std::size_t label_column = 0;            // locomotion label
  /// Raw label value -> class name; other non-null values are rejected.
  std::map<int, std::string> label_map{{1, "stand"}, {2, "walk"}, {4, "sit"}, {5, "lie"}};
  int null_label = 0;
  double rate_hz = 30.0;
  double window_seconds = 2.0;
  double step_seconds = 1.0;
  std::vector<std::string> train_sessions{"S1-ADL1", "S1-ADL2", "S1-ADL3", "S1-ADL4", "S1-ADL5", "S1-Drill",
                                          "S2-ADL1", "S2-ADL2", "S2-ADL3", "S2-Drill",
                                          "S3-ADL1", "S3-ADL2", "S3-ADL3", "S3-Drill"};
  std::vector<std::string> test_sessions{"S2-ADL4", "S2-ADL5", "S3-ADL4", "S3-ADL5"};
};

OpportunityConfig opportunity_config_from_json(const nlohmann::json& j);

struct OpportunityIngest {
  WindowedDataset train;
  WindowedDataset test;
  std::size_t dropped_null_windows = 0;
};

/// Interpolates NaNs linearly within each session (holding the nearest
/// value at the ends), windows each session, and drops windows whose
/// majority label is null.
OpportunityIngest adapt_opportunity(const OpportunityConfig& config);

/// Linear interpolation over NaNs; leading/trailing NaNs take the nearest
/// finite value. An all-NaN column becomes zeros.
void fill_missing(std::vector<double>& column);

}  // namespace lrcl
