#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "lrcl/checkpoint.hpp"
#include "oracles.hpp"

using namespace lrcl;
using nlohmann::json;

namespace {

Checkpoint sample(std::uint64_t seed, bool head = true, bool classifier = true) {
  Rng rng(seed);
  Checkpoint c;
  c.model.encoder = init_encoder(rng);
  if (head) c.model.head = init_head(rng, 32);
  if (classifier) c.model.classifier = init_classifier(rng, 5);
  // Non-zero biases make the round trip check every byte.
  for (auto& np : named_parameters(*c.model.encoder))
    for (auto& v : np.param->value.data()) v += static_cast<float>(rng.uniform(-0.1, 0.1));
  c.config = {{"pretrain", {{"temperature", 0.05}}}};
  c.seed = seed * 7919;
  return c;
}

struct Parts {
  json header;
  std::string payload;
};

// Splits "LRCK" | u32 | u64 | header | payload.
Parts split(const std::string& bytes) {
  std::uint64_t len = 0;
  std::memcpy(&len, bytes.data() + 8, 8);
  return {json::parse(bytes.substr(16, len)), bytes.substr(16 + len)};
}

std::string join(const json& header, const std::string& payload, std::uint32_t version = 1) {
  const std::string h = header.dump();
  std::string out = "LRCK";
  out.append(reinterpret_cast<const char*>(&version), 4);
  const std::uint64_t len = h.size();
  out.append(reinterpret_cast<const char*>(&len), 8);
  return out + h + payload;
}

void check_same(const Checkpoint& a, const Checkpoint& b) {
  CHECK(a.seed == b.seed);
  CHECK(a.config == b.config);
  CHECK(a.model.head.has_value() == b.model.head.has_value());
  CHECK(a.model.classifier.has_value() == b.model.classifier.has_value());
  Model ma = a.model, mb = b.model;
  auto compare = [](auto pa, auto pb) {
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
      CHECK(pa[i].name == pb[i].name);
      CHECK(bitwise_equal(pa[i].param->value, pb[i].param->value));
    }
  };
  compare(named_parameters(*ma.encoder), named_parameters(*mb.encoder));
  if (ma.head) compare(named_parameters(*ma.head), named_parameters(*mb.head));
  if (ma.classifier) compare(named_parameters(*ma.classifier), named_parameters(*mb.classifier));
  CHECK(ma.encoder->dropout_rate == mb.encoder->dropout_rate);
}

}  // namespace

TEST_SUITE("checkpoint") {
  TEST_CASE("round trip is bitwise exact") {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      const Checkpoint c = sample(seed, seed % 2 == 0, seed < 2);
      const std::string bytes = encode_checkpoint(c);
      const Checkpoint back = decode_checkpoint(bytes);
      check_same(c, back);
      CHECK(encode_checkpoint(back) == bytes);
    }
  }

  TEST_CASE("file round trip") {
    const auto dir = oracle::temp_dir("ckpt");
    const std::string path = (dir / "model.ckpt").string();
    const Checkpoint c = sample(9);
    save_checkpoint(path, c);
    check_same(c, load_checkpoint(path));
    CHECK_THROWS_AS(load_checkpoint((dir / "missing.ckpt").string()), DataError);
  }

  TEST_CASE("header layout") {
    const Parts p = split(encode_checkpoint(sample(1)));
    CHECK(p.header.at("version") == 1);
    CHECK(p.header.at("seed") == 7919);
    CHECK(p.header.at("tensors").size() == 6 + 6 + 4);
    std::size_t expected_offset = 0;
    for (const auto& t : p.header.at("tensors")) {
      CHECK(t.at("dtype") == "f32");
      CHECK(t.at("offset").get<std::size_t>() == expected_offset);
      expected_offset += t.at("nbytes").get<std::size_t>();
    }
    CHECK(expected_offset == p.payload.size());
  }

  TEST_CASE("bad magic and version") {
    std::string bytes = encode_checkpoint(sample(2));
    std::string bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(decode_checkpoint(bad), CorruptionError);
    const Parts p = split(bytes);
    CHECK_THROWS_AS(decode_checkpoint(join(p.header, p.payload, 2)), CorruptionError);
  }

  TEST_CASE("every truncation is detected") {
    const std::string bytes = encode_checkpoint(sample(3, false, false));
    for (std::size_t cut = 0; cut < bytes.size(); cut += 97) {
      CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, cut)), CorruptionError);
    }
    CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 1)), CorruptionError);
    CHECK_THROWS_AS(decode_checkpoint(bytes + "x"), CorruptionError);
  }

  TEST_CASE("malformed tensor tables") {
    const Parts p = split(encode_checkpoint(sample(4, false, false)));
    SUBCASE("overlap") {
      json h = p.header;
      h["tensors"][1]["offset"] = 4;
      CHECK_THROWS_AS(decode_checkpoint(join(h, p.payload)), CorruptionError);
    }
    SUBCASE("out of bounds") {
      json h = p.header;
      h["tensors"][5]["offset"] = p.payload.size();
      CHECK_THROWS_AS(decode_checkpoint(join(h, p.payload)), CorruptionError);
    }
    SUBCASE("unknown name") {
      json h = p.header;
      h["tensors"][0]["name"] = "encoder.conv9.weight";
      CHECK_THROWS_AS(decode_checkpoint(join(h, p.payload)), CorruptionError);
    }
    SUBCASE("wrong dtype") {
      json h = p.header;
      h["tensors"][0]["dtype"] = "f64";
      CHECK_THROWS_AS(decode_checkpoint(join(h, p.payload)), CorruptionError);
    }
    SUBCASE("shape disagrees with byte count") {
      json h = p.header;
      h["tensors"][0]["shape"] = {32, 3, 23};
      CHECK_THROWS_AS(decode_checkpoint(join(h, p.payload)), CorruptionError);
    }
    SUBCASE("missing tensor") {
      json h = p.header;
      h["tensors"].erase(h["tensors"].end() - 1);
      CHECK_THROWS_AS(decode_checkpoint(join(h, p.payload.substr(0, p.payload.size() - 96 * 4))), CorruptionError);
    }
    SUBCASE("not json") {
      std::string bytes = join(p.header, p.payload);
      bytes[16] = '#';
      CHECK_THROWS_AS(decode_checkpoint(bytes), CorruptionError);
    }
  }
}
