#include "structkd/model.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "json.hpp"
#include "structkd/errors.hpp"

namespace structkd {

namespace {

constexpr std::array<std::pair<Family, std::string_view>, 6> kFamilyNames{{
    {Family::kChainCrf, "crf"},
    {Family::kTokenMaxEnt, "maxent"},
    {Family::kSpanNer, "span"},
    {Family::kFirstOrderParser, "dep-1st"},
    {Family::kSecondOrderParser, "dep-2nd"},
    {Family::kArcMaxEnt, "arc-maxent"},
}};

constexpr std::string_view kAlphabet =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

}  // namespace

std::string_view family_name(Family f) {
  for (const auto& [family, name] : kFamilyNames) {
    if (family == f) return name;
  }
  return "unknown";
}

std::optional<Family> parse_family(std::string_view name) {
  for (const auto& [family, n] : kFamilyNames) {
    if (n == name) return family;
  }
  return std::nullopt;
}

bool is_ner_family(Family f) {
  return f == Family::kChainCrf || f == Family::kTokenMaxEnt || f == Family::kSpanNer;
}

bool is_parser_family(Family f) { return !is_ner_family(f); }

int Model::num_outputs() const {
  if (family == Family::kChainCrf || family == Family::kTokenMaxEnt) {
    return 1 + 4 * labels.size();
  }
  return labels.size();
}

void require_family(const Model& model, Family expected, std::string_view role) {
  if (model.family != expected) {
    throw UsageError(std::string(role) + " must be a '" + std::string(family_name(expected)) +
                     "' model, got '" + std::string(family_name(model.family)) + "'");
  }
}

std::string base64_encode(std::string_view bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t v = (std::uint32_t(std::uint8_t(bytes[i])) << 16) |
                            (std::uint32_t(std::uint8_t(bytes[i + 1])) << 8) |
                            std::uint32_t(std::uint8_t(bytes[i + 2]));
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  const std::size_t rest = bytes.size() - i;
  if (rest > 0) {
    std::uint32_t v = std::uint32_t(std::uint8_t(bytes[i])) << 16;
    if (rest == 2) v |= std::uint32_t(std::uint8_t(bytes[i + 1])) << 8;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += rest == 2 ? kAlphabet[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

std::string base64_decode(std::string_view text) {
  std::array<int, 256> lookup;
  lookup.fill(-1);
  for (std::size_t k = 0; k < kAlphabet.size(); ++k) {
    lookup[static_cast<unsigned char>(kAlphabet[k])] = static_cast<int>(k);
  }
  if (text.size() % 4 != 0) throw UsageError("base64 block length is not a multiple of 4");
  std::string out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    std::uint32_t v = 0;
    int pad = 0;
    for (std::size_t k = 0; k < 4; ++k) {
      const char c = text[i + k];
      if (c == '=') {
        ++pad;
        v <<= 6;
        continue;
      }
      const int d = lookup[static_cast<unsigned char>(c)];
      if (d < 0 || pad > 0) throw UsageError("invalid base64 character");
      v = (v << 6) | static_cast<std::uint32_t>(d);
    }
    out += static_cast<char>((v >> 16) & 0xff);
    if (pad < 2) out += static_cast<char>((v >> 8) & 0xff);
    if (pad < 1) out += static_cast<char>(v & 0xff);
  }
  return out;
}

namespace {

std::string encode_weights(const std::vector<double>& weights) {
  std::string bytes(weights.size() * 8, '\0');
  for (std::size_t k = 0; k < weights.size(); ++k) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(weights[k]);
    for (int b = 0; b < 8; ++b) bytes[k * 8 + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
  }
  return base64_encode(bytes);
}

std::vector<double> decode_weights(std::string_view text, std::size_t expected) {
  const std::string bytes = base64_decode(text);
  if (bytes.size() != expected * 8) throw UsageError("weight block has the wrong length");
  std::vector<double> weights(expected);
  for (std::size_t k = 0; k < expected; ++k) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= std::uint64_t(std::uint8_t(bytes[k * 8 + b])) << (8 * b);
    }
    weights[k] = std::bit_cast<double>(bits);
  }
  return weights;
}

}  // namespace

void save_model(std::ostream& out, const Model& model) {
  nlohmann::ordered_json doc;
  doc["format"] = "structkd-model";
  doc["template_version"] = kTemplateVersion;
  doc["family"] = std::string(family_name(model.family));
  doc["hash_bits"] = model.params.hash_bits();
  doc["labels"] = model.labels.names();
  if (model.family == Family::kChainCrf || model.family == Family::kTokenMaxEnt) {
    doc["tags"] = model.scheme().tag_alphabet().names();
  }
  doc["mfvi_iterations"] = model.mfvi_iterations;
  doc["bioes_constrained"] = model.bioes_constrained;
  doc["weights"] = encode_weights(model.params.weights);
  out << doc.dump() << '\n';
}

Model load_model(std::istream& in) {
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (doc.at("format") != "structkd-model") throw UsageError("not a structkd model file");
    if (doc.at("template_version").get<int>() != kTemplateVersion) {
      throw UsageError("model was written with a different feature template version");
    }
    auto family = parse_family(doc.at("family").get<std::string>());
    if (!family) throw UsageError("unknown model family");
    Model model(*family, LabelAlphabet(doc.at("labels").get<std::vector<std::string>>()),
                doc.at("hash_bits").get<int>());
    model.mfvi_iterations = doc.value("mfvi_iterations", 3);
    model.bioes_constrained = doc.value("bioes_constrained", false);
    model.params.weights =
        decode_weights(doc.at("weights").get<std::string>(), model.params.size());
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("malformed model file: ") + e.what());
  }
}

void save_model_file(const std::string& path, const Model& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write " + path);
  save_model(out, model);
}

Model load_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path);
  return load_model(in);
}

}  // namespace structkd
