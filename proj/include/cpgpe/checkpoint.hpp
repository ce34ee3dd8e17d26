#pragma once

// Parameter checkpoints: <base>.bin holds every tensor as little-endian
// float64, back to back; <base>.json lists name, kind, shape and byte offset.

#include <bit>
#include <cstring>
#include <fstream>
#include <string>

#include "cpgpe/layers.hpp"
#include "json.hpp"

namespace cpgpe {

inline std::string to_string(ParamKind k) {
  switch (k) {
    case ParamKind::linear: return "linear";
    case ParamKind::norm: return "norm";
    case ParamKind::buffer: return "buffer";
  }
  return "?";
}

inline nlohmann::json checkpoint_manifest(const ParamList& ps) {
  nlohmann::json entries = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& p : ps) {
    entries.push_back({{"name", p.name},
                       {"kind", to_string(p.kind)},
                       {"shape", p.tensor->shape()},
                       {"offset", offset},
                       {"bytes", p.tensor->size() * sizeof(double)}});
    offset += p.tensor->size() * sizeof(double);
  }
  return {{"format", "float64-le"}, {"total_bytes", offset}, {"tensors", entries}};
}

// `extra` is merged into the manifest under "meta".
inline void save_checkpoint(const ParamList& ps, const std::string& base, const nlohmann::json& extra = {}) {
  static_assert(std::endian::native == std::endian::little, "checkpoint writer assumes a little-endian host");
  std::ofstream bin(base + ".bin", std::ios::binary);
  if (!bin) throw ParameterError("cannot write '" + base + ".bin'");
  for (const auto& p : ps) {
    auto d = p.tensor->data();
    bin.write(reinterpret_cast<const char*>(d.data()), static_cast<std::streamsize>(d.size() * sizeof(double)));
  }
  auto manifest = checkpoint_manifest(ps);
  if (!extra.is_null()) manifest["meta"] = extra;
  std::ofstream js(base + ".json");
  if (!js) throw ParameterError("cannot write '" + base + ".json'");
  js << manifest.dump(2) << '\n';
}

inline nlohmann::json read_manifest(const std::string& base) {
  std::ifstream js(base + ".json");
  if (!js) throw ParseError("cannot open '" + base + ".json'", 0);
  try {
    return nlohmann::json::parse(js);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("checkpoint manifest: ") + e.what(), 0);
  }
}

// Fills `ps` in place; names and shapes must match the manifest exactly.
inline nlohmann::json load_checkpoint(ParamList& ps, const std::string& base) {
  auto manifest = read_manifest(base);
  const auto& entries = manifest.at("tensors");
  if (entries.size() != ps.size())
    throw DimensionError("checkpoint has " + std::to_string(entries.size()) + " tensors, model has " +
                         std::to_string(ps.size()));
  std::ifstream bin(base + ".bin", std::ios::binary);
  if (!bin) throw ParseError("cannot open '" + base + ".bin'", 0);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const auto& e = entries[i];
    if (e.at("name").get<std::string>() != ps[i].name)
      throw DimensionError("checkpoint tensor " + std::to_string(i) + " is '" + e.at("name").get<std::string>() +
                           "', model expects '" + ps[i].name + "'");
    if (e.at("shape").get<Shape>() != ps[i].tensor->shape())
      throw DimensionError("checkpoint shape mismatch for '" + ps[i].name + "'");
    bin.seekg(static_cast<std::streamoff>(e.at("offset").get<std::size_t>()));
    auto d = ps[i].tensor->mutable_data();
    bin.read(reinterpret_cast<char*>(d.data()), static_cast<std::streamsize>(d.size() * sizeof(double)));
    if (!bin) throw ParseError("checkpoint data truncated at '" + ps[i].name + "'", 0);
  }
  return manifest.value("meta", nlohmann::json{});
}

}  // namespace cpgpe
