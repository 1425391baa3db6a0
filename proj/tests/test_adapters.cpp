#include <doctest.h>

#include <cmath>
#include <fstream>

#include "lrcl/adapters.hpp"
#include "oracles.hpp"

using namespace lrcl;
namespace fs = std::filesystem;

namespace {

// Minimal NPY v1.0 writer for float64/float32/int64 C-order 2-D arrays.
template <typename T>
void write_npy(const fs::path& path, const std::string& descr, std::size_t rows, std::size_t cols,
               const std::vector<T>& values) {
  std::string header = "{'descr': '" + descr + "', 'fortran_order': False, 'shape': (" + std::to_string(rows) + ", " +
                       std::to_string(cols) + "), }";
  while ((10 + header.size() + 1) % 64 != 0) header += ' ';
  header += '\n';
  std::ofstream f(path, std::ios::binary);
  f.write("\x93NUMPY\x01\x00", 8);
  const auto len = static_cast<std::uint16_t>(header.size());
  f.write(reinterpret_cast<const char*>(&len), 2);
  f << header;
  f.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(T)));
}

// One 10 s workout at 100 Hz; the right watch starts 3 ms later. Frames 200..599 are squats.
void write_workout(const fs::path& root, const std::string& w, double right_offset_ms = 3.0) {
  fs::create_directories(root / w);
  for (auto [suffix, offset, sign] : {std::tuple{"l", 0.0, 1.0}, std::tuple{"r", right_offset_ms, -1.0}}) {
    std::vector<double> v;
    for (std::size_t i = 0; i < 1000; ++i) {
      const double t = static_cast<double>(i);
      v.insert(v.end(), {t, t * 10.0 + offset, sign * std::sin(t / 10.0), std::cos(t / 10.0), 9.81});
    }
    write_npy(root / w / (w + "_sw_" + suffix + "_acc.npy"), "<f8", 1000, 5, v);
  }
  std::ofstream labels(root / w / (w + "_labels.csv"));
  labels << "200,599,10,squats\n";
}

}  // namespace

TEST_SUITE("adapters") {
  TEST_CASE("npy reader") {
    const auto dir = oracle::temp_dir("npy");
    write_npy(dir / "a.npy", "<f4", 2, 3, std::vector<float>{1, 2, 3, 4, 5, 6.5f});
    const NumericTable a = read_npy((dir / "a.npy").string());
    CHECK(a.rows == 2);
    CHECK(a.cols == 3);
    CHECK(a.at(1, 2) == 6.5);
    write_npy(dir / "b.npy", "<i8", 1, 2, std::vector<std::int64_t>{-7, 9});
    CHECK(read_table((dir / "b.npy").string()).at(0, 0) == -7.0);
    std::ofstream(dir / "bad.npy") << "not numpy";
    CHECK_THROWS_AS(read_npy((dir / "bad.npy").string()), DataError);
  }

  TEST_CASE("text table reader") {
    const auto dir = oracle::temp_dir("text");
    std::ofstream(dir / "t.csv") << "a,b,c\n1,2,3\n4,NaN,6\n";
    const NumericTable t = read_text_table((dir / "t.csv").string());
    CHECK(t.rows == 2);
    CHECK(std::isnan(t.at(1, 1)));
    std::ofstream(dir / "s.dat") << "1 2 3\n4 5 6\n";
    CHECK(read_table((dir / "s.dat").string()).at(1, 0) == 4.0);
    std::ofstream(dir / "ragged.dat") << "1 2 3\n4 5\n";
    CHECK_THROWS_AS(read_text_table((dir / "ragged.dat").string()), DataError);
  }

  TEST_CASE("fill missing") {
    std::vector<double> v{NAN, 1.0, NAN, NAN, 4.0, NAN};
    fill_missing(v);
    CHECK(v == std::vector<double>{1.0, 1.0, 2.0, 3.0, 4.0, 4.0});
    std::vector<double> all{NAN, NAN};
    fill_missing(all);
    CHECK(all == std::vector<double>{0.0, 0.0});
  }

  TEST_CASE("mmfit ingest aligns, windows, labels and splits") {
    const auto root = oracle::temp_dir("mmfit");
    write_workout(root, "w01");
    write_workout(root, "w09");
    MmfitConfig cfg;
    cfg.root = root.string();
    cfg.workouts = {"w01", "w09"};
    const MmfitIngest ing = adapt_mmfit(cfg);
    // Common clock covers 999 samples: (999 - 200) / 100 + 1 windows per workout.
    CHECK(ing.all.size() == 16);
    CHECK(ing.all.window_len == 200);
    CHECK(ing.all.num_classes() == 11);
    const auto& p = ing.all.pairs;
    CHECK(p[2].label == 0);   // frames 200..399: squats
    CHECK(p[3].label == 0);   // 300..499
    CHECK(p[6].label == 10);  // 600..799: rest
    CHECK(p[0].subject == 1);
    CHECK(p[8].subject == 9);
    CHECK(ing.splits.at("train").size() == 8);
    CHECK(ing.splits.at("test").size() == 8);
    CHECK(ing.splits.at("validation").size() == 0);
    // The right stream is the mirrored x axis of the left.
    CHECK(p[1].right.at(0, 10) == doctest::Approx(-p[1].left.at(0, 10)).epsilon(1e-2));
  }

  TEST_CASE("mmfit ingest names missing files") {
    const auto root = oracle::temp_dir("mmfit_missing");
    write_workout(root, "w01");
    MmfitConfig cfg;
    cfg.root = root.string();
    cfg.workouts = {"w01", "w02"};
    try {
      adapt_mmfit(cfg);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("w02_sw_l_acc.npy") != std::string::npos);
    }
  }

  TEST_CASE("mmfit config parsing is strict") {
    CHECK(mmfit_config_from_json({{"root", "/x"}, {"rate_hz", 50.0}}).rate_hz == 50.0);
    CHECK_THROWS_AS(mmfit_config_from_json({{"root", "/x"}, {"rate", 50}}), ConfigError);
    CHECK_THROWS_AS(mmfit_config_from_json({{"root", "/x"}, {"accel_columns", {1, 2}}}), ConfigError);
  }

  TEST_CASE("opportunity ingest drops null windows and fills gaps") {
    const auto root = oracle::temp_dir("opportunity");
    auto write_session = [&](const std::string& name) {
      std::ofstream f(root / (name + ".dat"));
      for (int r = 0; r < 300; ++r) {
        f << r * 33;
        for (int c = 0; c < 6; ++c) {
          if (r == 50 && c == 1) f << " NaN";
          else f << " " << (c + 1) * 0.1 + r * 0.001;
        }
        f << " " << (r < 90 ? 0 : 1) << "\n";
      }
    };
    write_session("S1-ADL1");
    write_session("S2-ADL4");
    OpportunityConfig cfg;
    cfg.root = root.string();
    cfg.left_columns = {2, 3, 4};
    cfg.right_columns = {5, 6, 7};
    cfg.label_column = 8;
    cfg.train_sessions = {"S1-ADL1"};
    cfg.test_sessions = {"S2-ADL4"};
    const OpportunityIngest ing = adapt_opportunity(cfg);
    CHECK(ing.train.size() == 6);
    CHECK(ing.test.size() == 6);
    CHECK(ing.dropped_null_windows == 6);
    CHECK(ing.train.class_names == std::vector<std::string>{"stand", "walk", "sit", "lie"});
    for (const auto& p : ing.train.pairs) {
      CHECK(p.label == 0);
      CHECK(p.subject == 1);
      for (float v : p.left.data()) CHECK(std::isfinite(v));
    }
    CHECK(ing.test.pairs[0].subject == 2);

    OpportunityConfig missing = cfg;
    missing.test_sessions = {"S3-ADL4"};
    CHECK_THROWS_AS(adapt_opportunity(missing), DataError);
    OpportunityConfig no_columns = cfg;
    no_columns.left_columns.clear();
    CHECK_THROWS_AS(adapt_opportunity(no_columns), ConfigError);
  }
}
