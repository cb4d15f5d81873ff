// SPDX-License-Identifier: Apache-2.0
#include "mtlf/text.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace mtlf {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

const std::vector<std::string>& reserved_tokens() {
  static const std::vector<std::string> tokens{"[PAD]", "[UNK]", "[CLS]", "[SEP]"};
  return tokens;
}

std::vector<std::int32_t> lookup(const Vocab& vocab, std::string_view text) {
  std::vector<std::int32_t> ids;
  for (const auto& tok : tokenize(text)) ids.push_back(vocab.id(tok));
  return ids;
}

EncodedExample finish(std::vector<std::int32_t> ids, std::size_t max_len, Label label) {
  EncodedExample ex;
  ex.attention_mask.assign(ids.size(), 1);
  ex.attention_mask.resize(max_len, 0);
  ids.resize(max_len, Vocab::kPad);
  ex.token_ids = std::move(ids);
  ex.label = label;
  return ex;
}

}  // namespace

Vocab::Vocab() : Vocab(reserved_tokens()) {}

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.size() < kReserved ||
      !std::equal(reserved_tokens().begin(), reserved_tokens().end(), tokens_.begin())) {
    throw ParseError("vocabulary must start with [PAD] [UNK] [CLS] [SEP]");
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!ids_.emplace(tokens_[i], static_cast<std::int32_t>(i)).second) {
      throw ParseError("duplicate vocabulary token '" + tokens_[i] + "'");
    }
  }
}

std::int32_t Vocab::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnk : it->second;
}

bool Vocab::contains(std::string_view token) const { return ids_.count(std::string(token)) > 0; }

const std::string& Vocab::token(std::int32_t id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw EncodingError("token id " + std::to_string(id) + " outside vocabulary");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::string Vocab::to_json() const {
  ordered_json doc = ordered_json::object();
  for (std::size_t i = 0; i < tokens_.size(); ++i) doc[tokens_[i]] = i;
  return doc.dump(1) + "\n";
}

Vocab Vocab::from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("vocabulary JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("vocabulary JSON must be an object");
  std::vector<std::string> tokens(doc.size());
  std::vector<bool> seen(doc.size(), false);
  for (const auto& [token, id] : doc.items()) {
    if (!id.is_number_unsigned() || id.get<std::size_t>() >= tokens.size() || seen[id.get<std::size_t>()]) {
      throw ParseError("vocabulary ids must be contiguous 0..size-1 (token '" + token + "')");
    }
    tokens[id.get<std::size_t>()] = token;
    seen[id.get<std::size_t>()] = true;
  }
  return Vocab(std::move(tokens));
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) out.push_back(std::move(current));
    current.clear();
  };
  for (char raw : text) {
    const auto c = static_cast<unsigned char>(raw);
    if (std::isspace(c)) {
      flush();
    } else if (std::ispunct(c)) {
      flush();
      out.emplace_back(1, static_cast<char>(c));
    } else {
      current.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  flush();
  return out;
}

Vocab build_vocab(std::span<const std::string> corpus, std::size_t min_freq, std::size_t max_size) {
  if (min_freq < 1) throw ParameterError("min_freq must be at least 1");
  if (max_size <= Vocab::kReserved) throw ParameterError("max_size must exceed the 4 reserved tokens");
  if (corpus.empty()) throw IngestionError("cannot build a vocabulary from an empty corpus");
  std::map<std::string, std::size_t> counts;
  for (const auto& text : corpus)
    for (auto& tok : tokenize(text)) ++counts[tok];
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [tok, n] : counts) {
    if (n >= min_freq && std::find(reserved_tokens().begin(), reserved_tokens().end(), tok) == reserved_tokens().end())
      ranked.emplace_back(tok, n);
  }
  // counts is already in lexicographic order, so a stable sort by frequency
  // yields (frequency desc, token asc).
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens = reserved_tokens();
  for (auto& [tok, n] : ranked) {
    if (tokens.size() >= max_size) break;
    tokens.push_back(tok);
  }
  return Vocab(std::move(tokens));
}

EncodedExample encode_single(const Vocab& vocab, std::string_view text, std::size_t max_len, Label label) {
  if (max_len < 3) throw ParameterError("encode_single requires max_len >= 3");
  auto body = lookup(vocab, text);
  if (body.size() > max_len - 2) body.resize(max_len - 2);
  std::vector<std::int32_t> ids;
  ids.reserve(max_len);
  ids.push_back(Vocab::kCls);
  ids.insert(ids.end(), body.begin(), body.end());
  ids.push_back(Vocab::kSep);
  return finish(std::move(ids), max_len, label);
}

EncodedExample encode_pair(const Vocab& vocab, std::string_view text_a, std::string_view text_b,
                           std::size_t max_len, Label label) {
  if (max_len < 5) throw ParameterError("encode_pair requires max_len >= 5");
  auto a = lookup(vocab, text_a);
  auto b = lookup(vocab, text_b);
  const std::size_t budget = max_len - 3;
  while (a.size() + b.size() > budget) {
    if (a.size() > b.size()) a.pop_back();
    else b.pop_back();
  }
  std::vector<std::int32_t> ids;
  ids.reserve(max_len);
  ids.push_back(Vocab::kCls);
  ids.insert(ids.end(), a.begin(), a.end());
  ids.push_back(Vocab::kSep);
  ids.insert(ids.end(), b.begin(), b.end());
  ids.push_back(Vocab::kSep);
  return finish(std::move(ids), max_len, label);
}

EncodedExample encode_example(const Vocab& vocab, const RawExample& example, std::size_t max_len) {
  if (example.text_b) return encode_pair(vocab, example.text_a, *example.text_b, max_len, example.label);
  return encode_single(vocab, example.text_a, max_len, example.label);
}

std::vector<std::string> decode(const Vocab& vocab, std::span<const std::int32_t> ids) {
  std::vector<std::string> out;
  for (auto id : ids) {
    if (id == Vocab::kPad || id == Vocab::kCls || id == Vocab::kSep) continue;
    out.push_back(vocab.token(id));
  }
  return out;
}

void DatasetManifest::validate() const {
  if (name.empty()) throw ConfigError("dataset manifest requires a name");
  if (is_classification(task_kind)) {
    if (labels.size() < 2) throw ConfigError("classification manifest '" + name + "' must declare at least 2 labels");
    for (std::size_t i = 0; i < labels.size(); ++i)
      for (std::size_t j = i + 1; j < labels.size(); ++j)
        if (labels[i] == labels[j]) throw ConfigError("manifest '" + name + "' repeats label '" + labels[i] + "'");
  } else if (!(std::isfinite(range_lo) && std::isfinite(range_hi) && range_lo < range_hi)) {
    throw ConfigError("regression manifest '" + name + "' must declare a finite range lo < hi");
  }
  if (cap && *cap == 0) throw ConfigError("manifest '" + name + "' cap must be positive");
}

DatasetManifest parse_manifest(std::string_view text, const std::filesystem::path& base_dir) {
  DatasetManifest m;
  try {
    const json doc = json::parse(text);
    m.name = doc.at("name").get<std::string>();
    m.task_kind = parse_task_kind(doc.at("task_kind").get<std::string>());
    std::filesystem::path p = doc.at("path").get<std::string>();
    m.path = p.is_absolute() || base_dir.empty() ? p : base_dir / p;
    if (is_classification(m.task_kind)) {
      m.labels = doc.at("labels").get<std::vector<std::string>>();
    } else {
      const auto range = doc.at("range").get<std::vector<double>>();
      if (range.size() != 2) throw ConfigError("manifest range must have two entries");
      m.range_lo = range[0];
      m.range_hi = range[1];
    }
    if (doc.contains("cap") && !doc.at("cap").is_null()) m.cap = doc.at("cap").get<std::size_t>();
    if (doc.contains("domain")) m.domain = parse_domain(doc.at("domain").get<std::string>());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("dataset manifest: ") + e.what());
  } catch (const ParseError& e) {
    throw ConfigError(std::string("dataset manifest: ") + e.what());
  }
  m.validate();
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& manifest_file) {
  std::ifstream in(manifest_file);
  if (!in) throw ConfigError("cannot open manifest " + manifest_file.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_manifest(buf.str(), manifest_file.parent_path());
}

std::string manifest_to_json(const DatasetManifest& m, const std::filesystem::path& relative_to) {
  ordered_json doc;
  doc["name"] = m.name;
  doc["task_kind"] = std::string(to_string(m.task_kind));
  doc["path"] = (relative_to.empty() ? m.path : m.path.lexically_relative(relative_to)).generic_string();
  if (is_classification(m.task_kind)) doc["labels"] = m.labels;
  else doc["range"] = {m.range_lo, m.range_hi};
  doc["cap"] = m.cap ? json(*m.cap) : json(nullptr);
  doc["domain"] = std::string(to_string(m.domain));
  return doc.dump(2) + "\n";
}

std::vector<RawExample> parse_dataset(const DatasetManifest& m, std::istream& in) {
  std::vector<RawExample> out;
  std::string line;
  std::size_t line_no = 0;
  const bool pair = is_pair(m.task_kind);
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = m.name + " line " + std::to_string(line_no) + ": ";
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(where + "malformed JSON (" + e.what() + ")");
    }
    if (!rec.is_object() || !rec.contains("label")) throw ParseError(where + "record must be an object with a label");
    RawExample ex;
    auto text_field = [&](const char* key) {
      if (!rec.contains(key) || !rec.at(key).is_string()) throw ParseError(where + "missing string field '" + key + "'");
      return rec.at(key).get<std::string>();
    };
    if (pair) {
      ex.text_a = text_field("text_a");
      ex.text_b = text_field("text_b");
    } else {
      if (rec.contains("text_b")) throw ParseError(where + "single-sentence task record has text_b");
      ex.text_a = text_field("text");
    }
    const auto& label = rec.at("label");
    if (is_classification(m.task_kind)) {
      if (!label.is_string()) throw ParseError(where + "classification label must be a string");
      const auto name = label.get<std::string>();
      auto it = std::find(m.labels.begin(), m.labels.end(), name);
      if (it == m.labels.end()) throw ParseError(where + "unknown class label '" + name + "'");
      ex.label = static_cast<std::size_t>(it - m.labels.begin());
    } else {
      if (!label.is_number()) throw ParseError(where + "regression label must be a number");
      const double v = label.get<double>();
      if (!(v >= m.range_lo && v <= m.range_hi)) {
        throw RangeError(where + "label " + std::to_string(v) + " outside declared range [" +
                         std::to_string(m.range_lo) + ", " + std::to_string(m.range_hi) + "]");
      }
      ex.label = (v - m.range_lo) / (m.range_hi - m.range_lo);
    }
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<RawExample> load_dataset(const DatasetManifest& manifest) {
  std::ifstream in(manifest.path);
  if (!in) throw IngestionError("cannot open dataset file " + manifest.path.string());
  return parse_dataset(manifest, in);
}

void write_dataset(const DatasetManifest& m, std::span<const RawExample> examples, std::ostream& out) {
  for (const auto& ex : examples) {
    ordered_json rec;
    if (is_pair(m.task_kind)) {
      rec["text_a"] = ex.text_a;
      rec["text_b"] = ex.text_b.value_or("");
    } else {
      rec["text"] = ex.text_a;
    }
    if (is_classification(m.task_kind)) rec["label"] = m.labels.at(std::get<std::size_t>(ex.label));
    else rec["label"] = m.range_lo + std::get<double>(ex.label) * (m.range_hi - m.range_lo);
    out << rec.dump() << "\n";
  }
}

std::vector<std::string> corpus_texts(std::span<const RawExample> examples) {
  std::vector<std::string> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    out.push_back(ex.text_a);
    if (ex.text_b) out.push_back(*ex.text_b);
  }
  return out;
}

}  // namespace mtlf
