// SPDX-License-Identifier: Apache-2.0
#include "mtlf/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace mtlf {

namespace {

using json = nlohmann::ordered_json;

json config_json(const EncoderConfig& c) {
  json j;
  j["vocab_size"] = c.vocab_size;
  j["max_len"] = c.max_len;
  j["hidden_dim"] = c.hidden_dim;
  j["num_layers"] = c.num_layers;
  j["num_heads"] = c.num_heads;
  j["ffn_dim"] = c.ffn_dim;
  j["dropout_p"] = c.dropout_p;
  j["seed"] = c.seed;
  return j;
}

EncoderConfig config_from(const json& j) {
  EncoderConfig c;
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.max_len = j.at("max_len").get<std::size_t>();
  c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  c.num_layers = j.at("num_layers").get<std::size_t>();
  c.num_heads = j.at("num_heads").get<std::size_t>();
  c.ffn_dim = j.at("ffn_dim").get<std::size_t>();
  c.dropout_p = j.at("dropout_p").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

json task_json(const TaskSpec& s) {
  json j;
  j["name"] = s.name;
  j["task_kind"] = std::string(to_string(s.kind));
  if (is_classification(s.kind)) j["labels"] = s.labels;
  else j["range"] = {s.range_lo, s.range_hi};
  j["loss"] = std::string(to_string(s.loss));
  j["domain"] = std::string(to_string(s.domain));
  return j;
}

TaskSpec task_from(const json& j) {
  TaskSpec s;
  s.name = j.at("name").get<std::string>();
  s.kind = parse_task_kind(j.at("task_kind").get<std::string>());
  if (is_classification(s.kind)) {
    s.labels = j.at("labels").get<std::vector<std::string>>();
  } else {
    const auto r = j.at("range").get<std::vector<double>>();
    if (r.size() != 2) throw CorruptionError("task range must have two entries");
    s.range_lo = r[0];
    s.range_hi = r[1];
  }
  s.loss = parse_loss_kind(j.at("loss").get<std::string>());
  s.domain = parse_domain(j.at("domain").get<std::string>());
  return s;
}

std::uint32_t to_little_endian(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    v = ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
  }
  return v;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw FormatError("cannot open " + p.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

std::string encoder_config_to_json(const EncoderConfig& config) { return config_json(config).dump(); }

EncoderConfig encoder_config_from_json(const std::string& text) {
  try {
    return config_from(json::parse(text));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("encoder config: ") + e.what());
  }
}

void save_checkpoint(const SharedModel<float>& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto params = model.all_parameters();
  json manifest;
  manifest["format"] = kCheckpointMagic;
  manifest["version"] = kCheckpointVersion;
  manifest["config"] = config_json(model.config());
  json table = json::array();
  std::size_t offset = 0;
  for (const auto& p : params) {
    json entry;
    entry["name"] = p.name;
    entry["shape"] = p.tensor.shape();
    entry["offset"] = offset;
    entry["count"] = p.tensor.size();
    table.push_back(entry);
    offset += p.tensor.size() * sizeof(float);
  }
  manifest["parameters"] = table;
  json tasks = json::array();
  for (const auto& spec : model.tasks()) tasks.push_back(task_json(spec));
  manifest["tasks"] = tasks;
  manifest["weights_bytes"] = offset;

  std::ofstream weights(dir / "weights.bin", std::ios::binary | std::ios::trunc);
  for (const auto& p : params) {
    for (float v : p.tensor.data()) {
      const std::uint32_t bits = to_little_endian(std::bit_cast<std::uint32_t>(v));
      weights.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
  }
  if (!weights) throw FormatError("failed writing " + (dir / "weights.bin").string());
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  out << manifest.dump(2) << "\n";
  if (!out) throw FormatError("failed writing " + (dir / "manifest.json").string());
}

SharedModel<float> load_checkpoint(const std::filesystem::path& dir) {
  json manifest;
  try {
    manifest = json::parse(read_file(dir / "manifest.json"));
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint manifest is not valid JSON: ") + e.what());
  }
  if (!manifest.is_object() || manifest.value("format", std::string{}) != kCheckpointMagic)
    throw FormatError("checkpoint magic mismatch (expected " + std::string(kCheckpointMagic) + ")");
  if (manifest.value("version", -1) != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version");

  try {
    const EncoderConfig config = config_from(manifest.at("config"));
    // Build the skeleton first so the parameter table can be checked
    // against the architecture before any value is read.
    SharedModel<float> model(config);
    Rng unused(0);
    for (const auto& t : manifest.at("tasks")) model.attach_head(task_from(t), unused);
    auto params = model.all_parameters();
    const auto& table = manifest.at("parameters");
    if (table.size() != params.size())
      throw CorruptionError("checkpoint lists " + std::to_string(table.size()) + " parameters, architecture has " +
                            std::to_string(params.size()));
    std::size_t expected_offset = 0;
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& e = table[i];
      if (e.at("name").get<std::string>() != params[i].name || e.at("shape").get<Shape>() != params[i].tensor.shape() ||
          e.at("offset").get<std::size_t>() != expected_offset)
        throw CorruptionError("parameter table entry " + std::to_string(i) + " (" + e.at("name").get<std::string>() +
                              ") does not match the architecture");
      expected_offset += params[i].tensor.size() * sizeof(float);
    }
    if (manifest.at("weights_bytes").get<std::size_t>() != expected_offset)
      throw CorruptionError("manifest weights_bytes disagrees with the parameter table");
    const std::string blob = read_file(dir / "weights.bin");
    if (blob.size() != expected_offset)
      throw CorruptionError("weights.bin holds " + std::to_string(blob.size()) + " bytes, expected " +
                            std::to_string(expected_offset));
    std::size_t pos = 0;
    for (auto& p : params) {
      for (float& v : p.tensor.mutable_data()) {
        std::uint32_t bits;
        std::memcpy(&bits, blob.data() + pos, sizeof bits);
        pos += sizeof bits;
        v = std::bit_cast<float>(to_little_endian(bits));
      }
      Tensor<float>::check_finite(p.tensor.data(), "checkpoint parameter " + p.name);
    }
    return model;
  } catch (const json::exception& e) {
    throw CorruptionError(std::string("checkpoint manifest: ") + e.what());
  } catch (const NumericError& e) {
    throw CorruptionError(e.what());
  } catch (const ParseError& e) {
    throw CorruptionError(e.what());
  }
}

}  // namespace mtlf
