// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <iterator>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "mtlf/error.hpp"
#include "mtlf/random.hpp"
#include "mtlf/task_kind.hpp"

namespace mtlf {

/// Token <-> id table. Ids are contiguous; the first four are reserved.
class Vocab {
 public:
  static constexpr std::int32_t kPad = 0;
  static constexpr std::int32_t kUnk = 1;
  static constexpr std::int32_t kCls = 2;
  static constexpr std::int32_t kSep = 3;
  static constexpr std::size_t kReserved = 4;

  Vocab();
  /// `tokens` in id order, starting with [PAD] [UNK] [CLS] [SEP].
  explicit Vocab(std::vector<std::string> tokens);

  std::int32_t id(std::string_view token) const;  // kUnk when absent
  bool contains(std::string_view token) const;
  const std::string& token(std::int32_t id) const;
  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  /// JSON object token -> id, keys in id order.
  std::string to_json() const;
  static Vocab from_json(std::string_view json);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> ids_;
};

/// Lowercases, splits on whitespace, and emits each ASCII punctuation
/// character as its own token.
std::vector<std::string> tokenize(std::string_view text);

/// Tokens ranked by (frequency desc, token asc) after the reserved entries.
/// max_size counts the reserved entries.
Vocab build_vocab(std::span<const std::string> corpus, std::size_t min_freq = 1,
                  std::size_t max_size = 30000);

/// Class index for classification tasks, normalized target for regression.
using Label = std::variant<std::size_t, double>;

struct RawExample {
  std::string text_a;
  std::optional<std::string> text_b;
  Label label;
};

struct EncodedExample {
  std::vector<std::int32_t> token_ids;
  std::vector<std::uint8_t> attention_mask;
  Label label;
};

/// [CLS] tokens... [SEP] [PAD]...; truncation keeps the trailing [SEP].
EncodedExample encode_single(const Vocab& vocab, std::string_view text, std::size_t max_len,
                             Label label = std::size_t{0});

/// [CLS] a... [SEP] b... [SEP] [PAD]...; longest side truncated first.
EncodedExample encode_pair(const Vocab& vocab, std::string_view text_a, std::string_view text_b,
                           std::size_t max_len, Label label = std::size_t{0});

EncodedExample encode_example(const Vocab& vocab, const RawExample& example, std::size_t max_len);

/// Tokens of non-special, non-pad positions.
std::vector<std::string> decode(const Vocab& vocab, std::span<const std::int32_t> ids);

struct DatasetManifest {
  std::string name;
  TaskKind task_kind = TaskKind::single_classification;
  std::filesystem::path path;
  std::vector<std::string> labels;  // classification
  double range_lo = 0.0;            // regression
  double range_hi = 1.0;
  std::optional<std::size_t> cap;
  Domain domain = Domain::in_domain;

  void validate() const;  // ConfigError
};

/// Relative data paths resolve against `base_dir`.
DatasetManifest parse_manifest(std::string_view json, const std::filesystem::path& base_dir);
DatasetManifest load_manifest(const std::filesystem::path& manifest_file);
/// `relative_to`, when non-empty, makes the stored path relative to it.
std::string manifest_to_json(const DatasetManifest& manifest,
                             const std::filesystem::path& relative_to = {});

/// Parses JSON-lines records in file order. Regression labels are validated
/// against the declared range and then rescaled to [0, 1].
std::vector<RawExample> parse_dataset(const DatasetManifest& manifest, std::istream& in);
std::vector<RawExample> load_dataset(const DatasetManifest& manifest);

/// Serializes examples back to the JSON-lines contract (labels denormalized).
void write_dataset(const DatasetManifest& manifest, std::span<const RawExample> examples,
                   std::ostream& out);

/// Every text field of every example, for vocabulary construction.
std::vector<std::string> corpus_texts(std::span<const RawExample> examples);

/// Uniform seeded subsample of exactly `cap` elements, original order kept.
template <typename Example>
std::vector<Example> cap_dataset(std::vector<Example> examples, std::size_t cap, Rng& rng) {
  if (cap == 0) throw ParameterError("cap must be at least 1");
  if (examples.size() <= cap) return examples;
  std::vector<std::size_t> all(examples.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  std::vector<std::size_t> keep;
  keep.reserve(cap);
  // Selection sampling over a forward range is stable.
  std::sample(all.begin(), all.end(), std::back_inserter(keep), cap, rng);
  std::vector<Example> out;
  out.reserve(cap);
  for (auto i : keep) out.push_back(std::move(examples[i]));
  return out;
}

}  // namespace mtlf
