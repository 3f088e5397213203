#include "partsketch/text_embedding.hpp"

#include <array>
#include <stdexcept>

#include "partsketch/random.hpp"

namespace partsketch {

namespace {

constexpr std::array<const char*, 3> kCategories{"chair", "airplane", "lamp"};

constexpr std::array<const char*, 12> kModifiers{"wooden", "modern",   "vintage", "metal",  "curved", "glossy",
                                                 "rustic", "minimal",  "padded",  "ornate", "sleek",  "heavy"};

std::string canonical(const PartDescription& d) {
  std::string s = d.category;
  for (const auto& g : d.groups) s += "|" + g.name + ":" + std::to_string(g.count) + ":" + g.shape;
  return s;
}

}  // namespace

nlohmann::json desc_to_json(const PartDescription& d) {
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& g : d.groups) groups.push_back({{"name", g.name}, {"count", g.count}, {"shape", g.shape}});
  return {{"category", d.category}, {"groups", groups}};
}

PartDescription desc_from_json(const nlohmann::json& j) {
  PartDescription d;
  try {
    d.category = j.at("category").get<std::string>();
    for (const auto& g : j.at("groups"))
      d.groups.push_back({g.at("name").get<std::string>(), g.at("count").get<int>(), g.at("shape").get<std::string>()});
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("description: ") + e.what());
  }
  return d;
}

std::string desc_sentence(const PartDescription& d) {
  std::string s = "A " + d.category + " with";
  for (std::size_t i = 0; i < d.groups.size(); ++i) {
    const auto& g = d.groups[i];
    s += i == 0 ? " " : (i + 1 == d.groups.size() ? " and " : ", ");
    s += g.count == 0 ? "no " + g.name : std::to_string(g.count) + " " + g.shape + " " + g.name;
  }
  return s + ".";
}

TextStyle parse_text_style(const std::string& s) {
  if (s == "part-type") return TextStyle::PartType;
  if (s == "single-sentence") return TextStyle::SingleSentence;
  if (s == "verbose") return TextStyle::Verbose;
  throw std::invalid_argument("unknown text style '" + s + "'");
}

std::string to_string(TextStyle s) {
  switch (s) {
    case TextStyle::PartType: return "part-type";
    case TextStyle::SingleSentence: return "single-sentence";
    case TextStyle::Verbose: return "verbose";
  }
  return "?";
}

Tensor2 codebook_row(const std::string& key, std::size_t width) {
  Rng rng(fnv1a64(key));
  Tensor2 row(1, width);
  for (double& v : row.values()) v = rng.normal();
  return row;
}

std::vector<std::string> text_token_keys(const PartDescription& d, TextStyle style) {
  bool known = false;
  for (const char* c : kCategories) known = known || d.category == c;
  if (!known) throw std::invalid_argument("unknown category '" + d.category + "'");

  std::vector<std::string> keys{"category/" + d.category};
  for (const auto& g : d.groups) {
    if (style == TextStyle::PartType)
      keys.push_back(d.category + "/" + g.name + "/" + g.shape);
    else
      keys.push_back(d.category + "/" + g.name + "/" + std::to_string(g.count) + "/" + g.shape);
  }
  if (style == TextStyle::Verbose) {
    Rng rng(fnv1a64(canonical(d)));
    for (std::size_t i = 0; i < kDistractorTokens; ++i)
      keys.push_back(std::string("modifier/") + kModifiers[static_cast<std::size_t>(rng.integer(0, kModifiers.size() - 1))]);
  }
  return keys;
}

TextEmbedding synth_text_embedding(const PartDescription& d, TextStyle style, std::size_t width) {
  auto keys = text_token_keys(d, style);
  TextEmbedding e;
  e.tokens = Tensor2(keys.size(), width);
  for (std::size_t r = 0; r < keys.size(); ++r) {
    auto row = codebook_row(keys[r], width);
    std::copy(row.values().begin(), row.values().end(), e.tokens.row(r).begin());
  }
  e.provenance = Provenance::Synthetic;
  return e;
}

TextEmbedding empty_text_embedding(std::size_t width) {
  TextEmbedding e;
  e.tokens = Tensor2(1, width);
  return e;
}

}  // namespace partsketch
