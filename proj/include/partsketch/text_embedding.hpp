#pragma once

// Structured part descriptions and a deterministic codebook embedding that
// stands in for a vision-language model's hidden states.

#include <string>
#include <vector>

#include "json.hpp"
#include "partsketch/tensor.hpp"

namespace partsketch {

struct PartGroupDesc {
  std::string name;   // e.g. "legs"
  int count = 0;      // number of instances, 0 when absent
  std::string shape;  // coarse shape code, e.g. "straight"
  friend bool operator==(const PartGroupDesc&, const PartGroupDesc&) = default;
};

struct PartDescription {
  std::string category;
  std::vector<PartGroupDesc> groups;
  friend bool operator==(const PartDescription&, const PartDescription&) = default;
};

nlohmann::json desc_to_json(const PartDescription& d);
PartDescription desc_from_json(const nlohmann::json& j);
// "A chair with 4 straight legs, a square seat, ..."; the prompt text used
// with an external model.
std::string desc_sentence(const PartDescription& d);

enum class TextStyle { PartType, SingleSentence, Verbose };
TextStyle parse_text_style(const std::string& s);
std::string to_string(TextStyle s);

enum class Provenance { Synthetic, File, ExternalService };

struct TextEmbedding {
  Tensor2 tokens;
  Provenance provenance = Provenance::Synthetic;
  std::string prompt;
};

inline constexpr std::size_t kDistractorTokens = 3;

// Codebook row for a key: N(0,1) entries from a generator seeded by the key hash.
Tensor2 codebook_row(const std::string& key, std::size_t width);

// Token keys for a description under a style, in emission order.
std::vector<std::string> text_token_keys(const PartDescription& d, TextStyle style);

// Throws std::invalid_argument for a category outside {chair, airplane, lamp}.
TextEmbedding synth_text_embedding(const PartDescription& d, TextStyle style, std::size_t width);
// One zero token; used when no description is supplied.
TextEmbedding empty_text_embedding(std::size_t width);

}  // namespace partsketch
