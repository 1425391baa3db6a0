#include "lrcl/adapters.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "binary_io.hpp"

namespace lrcl {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string substitute(std::string pattern, const std::string& workout) {
  for (std::size_t pos; (pos = pattern.find("{w}")) != std::string::npos;) pattern.replace(pos, 3, workout);
  return pattern;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',' || ch == ';' || std::isspace(static_cast<unsigned char>(ch))) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

bool parse_number(const std::string& field, double& out) {
  const char* begin = field.c_str();
  char* end = nullptr;
  out = std::strtod(begin, &end);
  return end != begin && *end == '\0';
}

std::string npy_header_value(const std::string& header, const std::string& key) {
  const auto pos = header.find("'" + key + "'");
  if (pos == std::string::npos) throw DataError("npy: header lacks '" + key + "'");
  auto colon = header.find(':', pos);
  if (colon == std::string::npos) throw DataError("npy: malformed header");
  ++colon;
  while (colon < header.size() && header[colon] == ' ') ++colon;
  if (header[colon] == '(') return header.substr(colon, header.find(')', colon) - colon + 1);
  if (header[colon] == '\'') return header.substr(colon + 1, header.find('\'', colon + 1) - colon - 1);
  const auto stop = header.find_first_of(",}", colon);
  return header.substr(colon, stop - colon);
}

int subject_from_digits(const std::string& id) {
  std::string digits;
  for (char ch : id) {
    if (std::isdigit(static_cast<unsigned char>(ch))) digits.push_back(ch);
  }
  if (digits.empty()) throw ConfigError("cannot derive a subject id from '" + id + "'");
  return std::stoi(digits);
}

/// Nearest-sample indices of `times` for each point of a regular clock.
std::vector<std::size_t> nearest_indices(const std::vector<double>& times, double start, double rate, std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::size_t j = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = start + static_cast<double>(k) / rate;
    while (j + 1 < times.size() && std::abs(times[j + 1] - t) <= std::abs(times[j] - t)) ++j;
    idx[k] = j;
  }
  return idx;
}

template <typename T>
std::vector<T> json_list(const json& j, const char* key, std::vector<T> fallback) {
  return j.contains(key) ? j.at(key).get<std::vector<T>>() : std::move(fallback);
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& section) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find_if(known.begin(), known.end(), [&](const char* k) { return it.key() == k; }) == known.end()) {
      throw ConfigError(section + ": unknown key '" + it.key() + "'");
    }
  }
}

}  // namespace

NumericTable read_npy(const std::string& path) {
  const std::string bytes = detail::read_file(path);
  detail::Reader r(bytes, "npy " + path);
  if (r.take(6) != std::string_view("\x93NUMPY", 6)) throw DataError("npy: " + path + " lacks the NUMPY magic");
  const auto major = static_cast<unsigned char>(r.take(1)[0]);
  r.take(1);
  const std::size_t header_len = major == 1 ? r.get_le<std::uint16_t>() : r.get_le<std::uint32_t>();
  const std::string header(r.take(header_len));
  const std::string descr = npy_header_value(header, "descr");
  if (npy_header_value(header, "fortran_order").find("True") != std::string::npos) {
    throw DataError("npy: " + path + " is Fortran-ordered; only C order is supported");
  }
  std::string shape_text = npy_header_value(header, "shape");
  std::vector<std::size_t> shape;
  for (const auto& f : split_fields(shape_text.substr(1, shape_text.size() - 2))) shape.push_back(std::stoull(f));
  NumericTable t;
  t.rows = shape.empty() ? 1 : shape[0];
  t.cols = shape.size() >= 2 ? shape[1] : 1;
  const std::size_t n = t.rows * t.cols;
  t.values.resize(n);
  if (descr.size() < 3 || (descr[0] != '<' && descr[0] != '|' && descr[0] != '=')) {
    throw DataError("npy: " + path + " uses unsupported dtype " + descr);
  }
  const std::string kind = descr.substr(1);
  for (std::size_t i = 0; i < n; ++i) {
    if (kind == "f8") {
      t.values[i] = std::bit_cast<double>(r.get_le<std::uint64_t>());
    } else if (kind == "f4") {
      t.values[i] = std::bit_cast<float>(r.get_le<std::uint32_t>());
    } else if (kind == "i8") {
      t.values[i] = static_cast<double>(static_cast<std::int64_t>(r.get_le<std::uint64_t>()));
    } else if (kind == "i4") {
      t.values[i] = static_cast<double>(static_cast<std::int32_t>(r.get_le<std::uint32_t>()));
    } else {
      throw DataError("npy: " + path + " uses unsupported dtype " + descr);
    }
  }
  return t;
}

NumericTable read_text_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  NumericTable t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = split_fields(line);
    if (fields.empty()) continue;
    std::vector<double> row(fields.size());
    bool numeric = true;
    for (std::size_t i = 0; i < fields.size() && numeric; ++i) numeric = parse_number(fields[i], row[i]);
    if (!numeric) {
      if (t.rows == 0) continue;  // header line
      throw DataError(path + ":" + std::to_string(line_no) + ": non-numeric field");
    }
    if (t.rows == 0) t.cols = row.size();
    if (row.size() != t.cols) {
      throw DataError(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(t.cols) + " columns, found " +
                      std::to_string(row.size()));
    }
    t.values.insert(t.values.end(), row.begin(), row.end());
    ++t.rows;
  }
  return t;
}

NumericTable read_table(const std::string& path) {
  return fs::path(path).extension() == ".npy" ? read_npy(path) : read_text_table(path);
}

void fill_missing(std::vector<double>& column) {
  std::size_t first = column.size();
  for (std::size_t i = 0; i < column.size(); ++i) {
    if (std::isfinite(column[i])) {
      first = i;
      break;
    }
  }
  if (first == column.size()) {
    std::fill(column.begin(), column.end(), 0.0);
    return;
  }
  for (std::size_t i = 0; i < first; ++i) column[i] = column[first];
  std::size_t prev = first;
  for (std::size_t i = first + 1; i < column.size(); ++i) {
    if (!std::isfinite(column[i])) continue;
    for (std::size_t k = prev + 1; k < i; ++k) {
      const double frac = static_cast<double>(k - prev) / static_cast<double>(i - prev);
      column[k] = column[prev] + frac * (column[i] - column[prev]);
    }
    prev = i;
  }
  for (std::size_t k = prev + 1; k < column.size(); ++k) column[k] = column[prev];
}

MmfitConfig mmfit_config_from_json(const json& j) {
  reject_unknown(j, {"kind", "root", "workouts", "left_file", "right_file", "labels_file", "frame_column", "time_column",
                     "accel_columns", "time_scale", "rate_hz", "window_seconds", "step_seconds", "subject_of",
                     "class_names", "rest_class", "split"},
                 "mmfit adapter");
  MmfitConfig c;
  try {
    c.root = j.at("root").get<std::string>();
    c.workouts = json_list<std::string>(j, "workouts", {});
    c.left_file = j.value("left_file", c.left_file);
    c.right_file = j.value("right_file", c.right_file);
    c.labels_file = j.value("labels_file", c.labels_file);
    c.frame_column = j.value("frame_column", c.frame_column);
    c.time_column = j.value("time_column", c.time_column);
    c.accel_columns = json_list<std::size_t>(j, "accel_columns", c.accel_columns);
    c.time_scale = j.value("time_scale", c.time_scale);
    c.rate_hz = j.value("rate_hz", c.rate_hz);
    c.window_seconds = j.value("window_seconds", c.window_seconds);
    c.step_seconds = j.value("step_seconds", c.step_seconds);
    if (j.contains("subject_of")) c.subject_of = j.at("subject_of").get<std::map<std::string, int>>();
    c.class_names = json_list<std::string>(j, "class_names", c.class_names);
    c.rest_class = j.value("rest_class", c.rest_class);
    if (j.contains("split")) c.split.roles = j.at("split").get<std::map<std::string, std::vector<int>>>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("mmfit adapter: ") + e.what());
  }
  if (c.accel_columns.size() != 3) throw ConfigError("mmfit adapter: accel_columns must list exactly 3 columns");
  return c;
}

MmfitIngest adapt_mmfit(const MmfitConfig& config) {
  config.split.validate();
  std::vector<std::string> workouts = config.workouts;
  if (workouts.empty()) {
    for (int w = 0; w <= 20; ++w) workouts.push_back((w < 10 ? "w0" : "w") + std::to_string(w));
  }
  const auto rest = std::find(config.class_names.begin(), config.class_names.end(), config.rest_class);
  if (rest == config.class_names.end()) throw ConfigError("mmfit adapter: rest_class is not among class_names");
  const int rest_id = static_cast<int>(rest - config.class_names.begin());

  std::vector<std::string> missing;
  for (const auto& w : workouts) {
    for (const auto& tmpl : {config.left_file, config.right_file, config.labels_file}) {
      const fs::path p = fs::path(config.root) / substitute(tmpl, w);
      if (!fs::exists(p)) missing.push_back(p.string());
    }
  }
  if (!missing.empty()) {
    std::string msg = "mmfit adapter: missing files:";
    for (const auto& m : missing) msg += "\n  " + m;
    throw DataError(msg);
  }

  MmfitIngest result;
  WindowedDataset& all = result.all;
  all.sample_rate_hz = config.rate_hz;
  all.window_len = seconds_to_samples(config.window_seconds, config.rate_hz);
  all.class_names = config.class_names;
  all.provenance = "MM-Fit smartwatch accelerometers from " + config.root;

  for (const auto& w : workouts) {
    const NumericTable left = read_table((fs::path(config.root) / substitute(config.left_file, w)).string());
    const NumericTable right = read_table((fs::path(config.root) / substitute(config.right_file, w)).string());
    for (const NumericTable* t : {&left, &right}) {
      const std::size_t need = std::max({config.frame_column, config.time_column, config.accel_columns[0],
                                         config.accel_columns[1], config.accel_columns[2]}) + 1;
      if (t->cols < need || t->rows == 0) {
        throw DataError("mmfit adapter: workout " + w + " has a stream with " + std::to_string(t->cols) +
                        " columns, expected at least " + std::to_string(need));
      }
    }
    auto times_of = [&](const NumericTable& t) {
      std::vector<double> times(t.rows);
      for (std::size_t r = 0; r < t.rows; ++r) times[r] = t.at(r, config.time_column) * config.time_scale;
      if (!std::is_sorted(times.begin(), times.end())) {
        throw DataError("mmfit adapter: workout " + w + " has non-monotonic timestamps");
      }
      return times;
    };
    const auto tl = times_of(left);
    const auto tr = times_of(right);
    const double start = std::max(tl.front(), tr.front());
    const double end = std::min(tl.back(), tr.back());
    if (!(end > start) || static_cast<std::size_t>((end - start) * config.rate_hz) + 1 < all.window_len) {
      throw DataError("mmfit adapter: workout " + w + ": left and right streams do not overlap by one window");
    }
    const auto n = static_cast<std::size_t>(std::floor((end - start) * config.rate_hz)) + 1;
    const auto il = nearest_indices(tl, start, config.rate_hz, n);
    const auto ir = nearest_indices(tr, start, config.rate_hz, n);

    Tensor ls({3, n});
    Tensor rs({3, n});
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t c = 0; c < 3; ++c) {
        ls.at(c, k) = static_cast<float>(left.at(il[k], config.accel_columns[c]));
        rs.at(c, k) = static_cast<float>(right.at(ir[k], config.accel_columns[c]));
      }
    }

    // Label segments: start_frame, end_frame, repetitions, activity.
    struct Segment {
      double first, last;
      int label;
    };
    std::vector<Segment> segments;
    {
      const std::string path = (fs::path(config.root) / substitute(config.labels_file, w)).string();
      std::ifstream in(path);
      std::string line;
      while (std::getline(in, line)) {
        std::vector<std::string> f;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
        double first = 0, last = 0;
        if (f.size() < 4 || !parse_number(f[0], first) || !parse_number(f[1], last)) continue;
        std::string name = f[3];
        name.erase(std::remove_if(name.begin(), name.end(), [](unsigned char ch) { return std::isspace(ch); }),
                   name.end());
        const auto it = std::find(config.class_names.begin(), config.class_names.end(), name);
        if (it == config.class_names.end()) {
          throw DataError("mmfit adapter: workout " + w + " has unknown activity '" + name + "'");
        }
        segments.push_back({first, last, static_cast<int>(it - config.class_names.begin())});
      }
    }
    std::vector<int> sample_labels(n, rest_id);
    for (std::size_t k = 0; k < n; ++k) {
      const double frame = left.at(il[k], config.frame_column);
      for (const auto& s : segments) {
        if (frame >= s.first && frame <= s.last) {
          sample_labels[k] = s.label;
          break;
        }
      }
    }

    const int subject = config.subject_of.count(w) ? config.subject_of.at(w) : subject_from_digits(w);
    const auto lw = window_stream(ls, config.window_seconds, config.step_seconds, config.rate_hz);
    const auto rw = window_stream(rs, config.window_seconds, config.step_seconds, config.rate_hz);
    for (std::size_t i = 0; i < lw.size(); ++i) {
      WindowPair p;
      p.left = lw[i].data;
      p.right = rw[i].data;
      p.label = label_window(std::span<const int>(sample_labels).subspan(lw[i].start, all.window_len));
      p.subject = subject;
      p.t0 = static_cast<int>(lw[i].start);
      all.pairs.push_back(std::move(p));
    }
  }

  for (const auto& [role, subjects] : config.split.roles) {
    WindowedDataset part = filter_subjects(all, subjects);
    part.provenance = all.provenance + " [" + role + "]";
    result.splits.emplace(role, std::move(part));
  }
  return result;
}

OpportunityConfig opportunity_config_from_json(const json& j) {
  reject_unknown(j, {"kind", "root", "left_columns", "right_columns", "label_column", "label_map", "null_label",
                     "rate_hz", "window_seconds", "step_seconds", "train_sessions", "test_sessions"},
                 "opportunity adapter");
  OpportunityConfig c;
  try {
    c.root = j.at("root").get<std::string>();
    if (!j.contains("left_columns") || !j.contains("right_columns") || !j.contains("label_column")) {
      throw ConfigError("opportunity adapter: left_columns, right_columns and label_column are required");
    }
    c.left_columns = j.at("left_columns").get<std::vector<std::size_t>>();
    c.right_columns = j.at("right_columns").get<std::vector<std::size_t>>();
    c.label_column = j.at("label_column").get<std::size_t>();
    if (j.contains("label_map")) {
      c.label_map.clear();
      for (const auto& [k, v] : j.at("label_map").items()) c.label_map[std::stoi(k)] = v.get<std::string>();
    }
    c.null_label = j.value("null_label", c.null_label);
    c.rate_hz = j.value("rate_hz", c.rate_hz);
    c.window_seconds = j.value("window_seconds", c.window_seconds);
    c.step_seconds = j.value("step_seconds", c.step_seconds);
    c.train_sessions = json_list<std::string>(j, "train_sessions", c.train_sessions);
    c.test_sessions = json_list<std::string>(j, "test_sessions", c.test_sessions);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("opportunity adapter: ") + e.what());
  }
  return c;
}

OpportunityIngest adapt_opportunity(const OpportunityConfig& config) {
  if (config.left_columns.size() != 3 || config.right_columns.size() != 3) {
    throw ConfigError("opportunity adapter: left_columns and right_columns must each name 3 columns");
  }
  if (config.label_column == 0) throw ConfigError("opportunity adapter: label_column is required (1-based)");
  for (std::size_t c : config.left_columns) {
    if (c == 0) throw ConfigError("opportunity adapter: column indices are 1-based");
  }
  for (std::size_t c : config.right_columns) {
    if (c == 0) throw ConfigError("opportunity adapter: column indices are 1-based");
  }

  std::vector<std::string> missing;
  for (const auto* list : {&config.train_sessions, &config.test_sessions}) {
    for (const auto& s : *list) {
      const fs::path p = fs::path(config.root) / (s + ".dat");
      if (!fs::exists(p)) missing.push_back(p.string());
    }
  }
  if (!missing.empty()) {
    std::string msg = "opportunity adapter: missing files:";
    for (const auto& m : missing) msg += "\n  " + m;
    throw DataError(msg);
  }

  std::map<int, int> class_of;
  std::vector<std::string> names;
  for (const auto& [raw, name] : config.label_map) {
    class_of[raw] = static_cast<int>(names.size());
    names.push_back(name);
  }

  OpportunityIngest result;
  for (auto* ds : {&result.train, &result.test}) {
    ds->sample_rate_hz = config.rate_hz;
    ds->window_len = seconds_to_samples(config.window_seconds, config.rate_hz);
    ds->class_names = names;
  }
  result.train.provenance = "Opportunity locomotion (train sessions) from " + config.root;
  result.test.provenance = "Opportunity locomotion (test sessions) from " + config.root;

  auto ingest = [&](const std::string& session, WindowedDataset& into) {
    const std::string path = (fs::path(config.root) / (session + ".dat")).string();
    const NumericTable table = read_text_table(path);
    const std::size_t need = std::max({config.label_column, *std::max_element(config.left_columns.begin(),
                                                                              config.left_columns.end()),
                                       *std::max_element(config.right_columns.begin(), config.right_columns.end())});
    if (table.cols < need) {
      throw ConfigError("opportunity adapter: " + path + " has " + std::to_string(table.cols) +
                        " columns; the column spec references column " + std::to_string(need));
    }
    const std::size_t n = table.rows;
    Tensor ls({3, n});
    Tensor rs({3, n});
    for (std::size_t c = 0; c < 3; ++c) {
      for (auto [cols, stream] : {std::pair{&config.left_columns, &ls}, std::pair{&config.right_columns, &rs}}) {
        std::vector<double> column(n);
        for (std::size_t r = 0; r < n; ++r) column[r] = table.at(r, (*cols)[c] - 1);
        fill_missing(column);
        for (std::size_t r = 0; r < n; ++r) stream->at(c, r) = static_cast<float>(column[r]);
      }
    }
    std::vector<int> labels(n, kUnlabeled);
    for (std::size_t r = 0; r < n; ++r) {
      const double raw = table.at(r, config.label_column - 1);
      if (!std::isfinite(raw) || static_cast<int>(raw) == config.null_label) continue;
      const auto it = class_of.find(static_cast<int>(raw));
      if (it == class_of.end()) {
        throw DataError("opportunity adapter: " + path + " row " + std::to_string(r + 1) + " has unmapped label " +
                        std::to_string(static_cast<int>(raw)));
      }
      labels[r] = it->second;
    }
    if (n < into.window_len) return;
    const int subject = subject_from_digits(session.substr(0, session.find('-')));
    const auto lw = window_stream(ls, config.window_seconds, config.step_seconds, config.rate_hz);
    const auto rw = window_stream(rs, config.window_seconds, config.step_seconds, config.rate_hz);
    for (std::size_t i = 0; i < lw.size(); ++i) {
      const int label = label_window(std::span<const int>(labels).subspan(lw[i].start, into.window_len));
      if (label == kUnlabeled) {
        ++result.dropped_null_windows;
        continue;
      }
      into.pairs.push_back(WindowPair{lw[i].data, rw[i].data, label, subject, static_cast<int>(lw[i].start)});
    }
  };
  for (const auto& s : config.train_sessions) ingest(s, result.train);
  for (const auto& s : config.test_sessions) ingest(s, result.test);
  return result;
}

}  // namespace lrcl
