// SPDX-License-Identifier: Apache-2.0
#include "mtlf/cli/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace mtlf::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

template <typename T>
void read_if(const json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

TrainConfig parse_train(const json& j) {
  TrainConfig t;
  if (j.is_null()) return t;
  if (!j.is_object()) throw ConfigError("'train' must be an object");
  for (const auto& [key, _] : j.items()) {
    static const std::vector<std::string> known{"batch_size",   "learning_rate", "max_epochs", "patience",
                                                "min_delta",    "validation_fraction", "mtl_epochs", "beta1",
                                                "beta2",        "epsilon",       "weight_decay", "max_grad_norm"};
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ConfigError("unknown train setting '" + key + "'");
  }
  read_if(j, "batch_size", t.batch_size);
  read_if(j, "learning_rate", t.learning_rate);
  read_if(j, "max_epochs", t.max_epochs);
  read_if(j, "patience", t.patience);
  read_if(j, "min_delta", t.min_delta);
  read_if(j, "validation_fraction", t.validation_fraction);
  read_if(j, "mtl_epochs", t.mtl_epochs);
  read_if(j, "beta1", t.beta1);
  read_if(j, "beta2", t.beta2);
  read_if(j, "epsilon", t.epsilon);
  read_if(j, "weight_decay", t.weight_decay);
  read_if(j, "max_grad_norm", t.max_grad_norm);
  t.validate();
  return t;
}

json train_json(const TrainConfig& t) {
  return json{{"batch_size", t.batch_size},       {"learning_rate", t.learning_rate},
              {"max_epochs", t.max_epochs},       {"patience", t.patience},
              {"min_delta", t.min_delta},         {"validation_fraction", t.validation_fraction},
              {"mtl_epochs", t.mtl_epochs},       {"beta1", t.beta1},
              {"beta2", t.beta2},                 {"epsilon", t.epsilon},
              {"weight_decay", t.weight_decay},   {"max_grad_norm", t.max_grad_norm}};
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

DatasetManifest load_manifest_checked(const fs::path& file) {
  if (!fs::exists(file)) throw ConfigError("manifest not found: " + file.string());
  auto m = load_manifest(file);
  if (!fs::exists(m.path)) throw ConfigError("dataset for '" + m.name + "' not found: " + m.path.string());
  return m;
}

}  // namespace

ExperimentConfig parse_experiment_config(std::string_view text, const fs::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("experiment config is not valid JSON: ") + e.what());
  }
  try {
    if (!doc.is_object()) throw ConfigError("experiment config must be a JSON object");
    const int version = doc.value("schema_version", kConfigSchemaVersion);
    if (version != kConfigSchemaVersion)
      throw ConfigError("unsupported config schema_version " + std::to_string(version));

    ExperimentConfig c;
    if (doc.contains("encoder")) {
      const auto& e = doc.at("encoder");
      if (e.is_string()) {
        c.profile = e.get<std::string>();
      } else if (e.is_object()) {
        c.encoder_overrides = e;
        if (e.contains("profile")) {
          c.profile = e.at("profile").get<std::string>();
          c.encoder_overrides.erase("profile");
        }
      } else {
        throw ConfigError("'encoder' must be a profile name or an object");
      }
    }
    resolve_encoder(c, 64);  // validates the profile and overrides early
    c.train = parse_train(doc.value("train", json()));
    read_if(doc, "folds", c.folds);
    if (c.folds < 2) throw ConfigError("folds must be at least 2");
    read_if(doc, "stratified", c.stratified);
    read_if(doc, "aux_per_fold", c.aux_per_fold);
    read_if(doc, "grid", c.grid);
    read_if(doc, "seed", c.seed);
    if (doc.contains("output_dir")) c.output_dir = resolve(base_dir, doc.at("output_dir").get<std::string>());
    if (doc.contains("vocab")) {
      c.vocab_path = resolve(base_dir, doc.at("vocab").get<std::string>());
      if (!fs::exists(*c.vocab_path)) throw ConfigError("vocab file not found: " + c.vocab_path->string());
    }
    if (!doc.contains("target")) throw ConfigError("experiment config needs a 'target' manifest");
    c.target = load_manifest_checked(resolve(base_dir, doc.at("target").get<std::string>()));
    if (c.target.task_kind != TaskKind::single_classification || c.target.labels.size() != 2)
      throw ConfigError("target '" + c.target.name + "' must be binary single-sentence classification");
    for (const auto& p : doc.value("auxiliaries", std::vector<std::string>{})) {
      auto m = load_manifest_checked(resolve(base_dir, p));
      if (m.name == c.target.name) throw ConfigError("auxiliary task '" + m.name + "' duplicates the target");
      for (const auto& other : c.auxiliaries)
        if (other.name == m.name) throw ConfigError("auxiliary task '" + m.name + "' is listed twice");
      c.auxiliaries.push_back(std::move(m));
    }
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
}

ExperimentConfig load_experiment_config(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot read config " + file.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_experiment_config(buf.str(), file.parent_path());
}

nlohmann::ordered_json experiment_config_to_json(const ExperimentConfig& c, const fs::path& relative_to) {
  auto rel = [&](const fs::path& p) {
    return (relative_to.empty() ? p : fs::relative(p, relative_to)).generic_string();
  };
  nlohmann::ordered_json j;
  j["schema_version"] = kConfigSchemaVersion;
  if (c.encoder_overrides.empty()) {
    j["encoder"] = c.profile;
  } else {
    nlohmann::ordered_json e = c.encoder_overrides;
    e["profile"] = c.profile;
    j["encoder"] = e;
  }
  j["train"] = train_json(c.train);
  j["folds"] = c.folds;
  j["stratified"] = c.stratified;
  j["aux_per_fold"] = c.aux_per_fold;
  j["grid"] = c.grid;
  j["seed"] = c.seed;
  j["output_dir"] = rel(c.output_dir);
  if (c.vocab_path) j["vocab"] = rel(*c.vocab_path);
  return j;
}

std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, const char* env_value, std::uint64_t config_seed) {
  if (flag) return *flag;
  if (env_value && *env_value) {
    const std::string_view s(env_value);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
      throw ConfigError("MTLF_SEED must be an unsigned integer, got '" + std::string(s) + "'");
    return v;
  }
  return config_seed;
}

EncoderConfig resolve_encoder(const ExperimentConfig& c, std::size_t vocab_size) {
  EncoderConfig e = EncoderConfig::profile(c.profile, vocab_size);
  try {
    for (const auto& [key, value] : c.encoder_overrides.items()) {
      if (key == "max_len") e.max_len = value.get<std::size_t>();
      else if (key == "hidden_dim") e.hidden_dim = value.get<std::size_t>();
      else if (key == "num_layers") e.num_layers = value.get<std::size_t>();
      else if (key == "num_heads") e.num_heads = value.get<std::size_t>();
      else if (key == "ffn_dim") e.ffn_dim = value.get<std::size_t>();
      else if (key == "dropout_p") e.dropout_p = value.get<double>();
      else throw ConfigError("unknown encoder setting '" + key + "'");
    }
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("encoder settings: ") + ex.what());
  }
  e.validate();
  return e;
}

ExperimentData load_experiment_data(const ExperimentConfig& c) {
  ExperimentData d;
  d.target = c.target.name;
  std::vector<const DatasetManifest*> manifests{&c.target};
  for (const auto& m : c.auxiliaries) {
    manifests.push_back(&m);
    (m.domain == Domain::in_domain ? d.in_domain : d.cross_domain).push_back(m.name);
  }

  std::map<std::string, std::vector<RawExample>> raw;
  std::vector<std::string> texts;
  for (const auto* m : manifests) {
    auto examples = load_dataset(*m);
    if (m->cap) {
      Rng rng(derive_seed(c.seed, "cap", m->name));
      examples = cap_dataset(std::move(examples), *m->cap, rng);
    }
    if (!c.vocab_path)
      for (auto& t : corpus_texts(examples)) texts.push_back(std::move(t));
    raw.emplace(m->name, std::move(examples));
  }
  if (c.vocab_path) {
    std::ifstream in(*c.vocab_path);
    std::stringstream buf;
    buf << in.rdbuf();
    d.vocab = Vocab::from_json(buf.str());
  } else {
    d.vocab = build_vocab(texts);
  }
  d.encoder = resolve_encoder(c, d.vocab.size());
  d.encoder.seed = c.seed;
  for (const auto* m : manifests) {
    GridDataset ds;
    ds.spec = TaskSpec::from_manifest(*m);
    for (const auto& ex : raw.at(m->name)) ds.data.push_back(encode_example(d.vocab, ex, d.encoder.max_len));
    d.datasets.emplace(m->name, std::move(ds));
  }
  return d;
}

}  // namespace mtlf::cli
