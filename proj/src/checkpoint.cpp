#include "lrcl/checkpoint.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "binary_io.hpp"

namespace lrcl {

namespace detail {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path + " for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write to " + path + " failed");
}

}  // namespace detail

namespace {

using nlohmann::json;

struct Entry {
  std::string name;
  const Tensor* tensor;
};

std::vector<Entry> entries_of(Model& model) {
  std::vector<Entry> out;
  auto add = [&](std::vector<NamedParam> params) {
    for (auto& p : params) out.push_back({p.name, &p.param->value});
  };
  if (model.encoder) add(named_parameters(*model.encoder));
  if (model.head) add(named_parameters(*model.head));
  if (model.classifier) add(named_parameters(*model.classifier));
  return out;
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
  Model model = ckpt.model;
  const auto entries = entries_of(model);

  json tensors = json::array();
  std::uint64_t offset = 0;
  for (const auto& e : entries) {
    const std::uint64_t nbytes = e.tensor->size() * sizeof(float);
    tensors.push_back({{"name", e.name},
                       {"shape", e.tensor->shape()},
                       {"dtype", "f32"},
                       {"offset", offset},
                       {"nbytes", nbytes}});
    offset += nbytes;
  }
  json model_info = json::object();
  if (model.encoder) model_info["dropout_rate"] = model.encoder->dropout_rate;
  json header = {{"version", kCheckpointVersion},
                 {"seed", ckpt.seed},
                 {"config", ckpt.config},
                 {"model", model_info},
                 {"tensors", tensors}};
  const std::string text = header.dump();

  std::string out(kCheckpointMagic, 4);
  detail::put_le<std::uint32_t>(out, kCheckpointVersion);
  detail::put_le<std::uint64_t>(out, text.size());
  out += text;
  for (const auto& e : entries) detail::put_floats(out, e.tensor->data());
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  detail::Reader reader(bytes, "checkpoint");
  if (reader.take(4) != std::string_view(kCheckpointMagic, 4)) {
    throw CorruptionError("checkpoint: bad magic (expected \"LRCK\")");
  }
  const auto version = reader.get_le<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw CorruptionError("checkpoint: unsupported version " + std::to_string(version));
  }
  const auto header_len = reader.get_le<std::uint64_t>();
  if (header_len > reader.remaining()) throw CorruptionError("checkpoint: header length exceeds file size");
  json header;
  try {
    header = json::parse(reader.take(static_cast<std::size_t>(header_len)));
  } catch (const json::exception& e) {
    throw CorruptionError(std::string("checkpoint: malformed JSON header: ") + e.what());
  }
  const std::size_t payload_start = reader.position();
  const std::size_t payload_size = reader.remaining();

  Checkpoint ckpt;
  std::map<std::string, Tensor> loaded;
  try {
    ckpt.seed = header.at("seed").get<std::uint64_t>();
    ckpt.config = header.at("config");
    std::vector<std::pair<std::uint64_t, std::uint64_t>> spans;
    for (const auto& t : header.at("tensors")) {
      const auto name = t.at("name").get<std::string>();
      if (t.at("dtype").get<std::string>() != "f32") throw CorruptionError("checkpoint: tensor " + name + " is not f32");
      const auto shape = t.at("shape").get<Shape>();
      const auto offset = t.at("offset").get<std::uint64_t>();
      const auto nbytes = t.at("nbytes").get<std::uint64_t>();
      if (shape.empty() || shape_size(shape) * sizeof(float) != nbytes) {
        throw CorruptionError("checkpoint: tensor " + name + " byte count disagrees with its shape");
      }
      if (offset > payload_size || nbytes > payload_size - offset) {
        throw CorruptionError("checkpoint: tensor " + name + " extends past the end of the payload (truncated file?)");
      }
      spans.emplace_back(offset, nbytes);
      Tensor value(shape);
      detail::Reader blob(std::string_view(bytes).substr(payload_start + offset, nbytes), "checkpoint");
      blob.get_floats(value.data());
      if (!loaded.emplace(name, std::move(value)).second) {
        throw CorruptionError("checkpoint: duplicate tensor " + name);
      }
    }
    std::sort(spans.begin(), spans.end());
    for (std::size_t i = 1; i < spans.size(); ++i) {
      if (spans[i - 1].first + spans[i - 1].second > spans[i].first) {
        throw CorruptionError("checkpoint: tensor byte ranges overlap at payload offset " + std::to_string(spans[i].first));
      }
    }
    const std::uint64_t end = spans.empty() ? 0 : spans.back().first + spans.back().second;
    if (end != payload_size) throw CorruptionError("checkpoint: payload has " + std::to_string(payload_size - end) + " trailing bytes");
  } catch (const json::exception& e) {
    throw CorruptionError(std::string("checkpoint: malformed header field: ") + e.what());
  }

  auto take_group = [&](const std::string& prefix, auto& params) {
    std::size_t found = 0;
    for (auto& np : named_parameters(params)) {
      auto it = loaded.find(np.name);
      if (it == loaded.end()) continue;
      np.param->value = std::move(it->second);
      loaded.erase(it);
      ++found;
    }
    const std::size_t expected = named_parameters(params).size();
    if (found != 0 && found != expected) {
      throw CorruptionError("checkpoint: component " + prefix + " is incomplete");
    }
    return found == expected;
  };

  try {
    EncoderParams enc;
    if (take_group("encoder", enc)) {
      if (header.contains("model") && header["model"].contains("dropout_rate")) {
        enc.dropout_rate = header["model"]["dropout_rate"].get<double>();
      }
      validate(enc);
      ckpt.model.encoder = std::move(enc);
    }
    HeadParams head;
    if (take_group("head", head)) {
      validate(head);
      ckpt.model.head = std::move(head);
    }
    ClassifierParams cls;
    if (take_group("classifier", cls)) {
      validate(cls);
      ckpt.model.classifier = std::move(cls);
    }
  } catch (const ShapeError& e) {
    throw CorruptionError(std::string("checkpoint: ") + e.what());
  } catch (const json::exception& e) {
    throw CorruptionError(std::string("checkpoint: malformed model section: ") + e.what());
  }
  if (!loaded.empty()) throw CorruptionError("checkpoint: unknown tensor " + loaded.begin()->first);
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  detail::write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::string& path) { return decode_checkpoint(detail::read_file(path)); }

}  // namespace lrcl
