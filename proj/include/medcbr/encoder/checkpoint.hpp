#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "medcbr/encoder/model.hpp"
#include "medcbr/util/csv.hpp"
#include "medcbr/util/digest.hpp"
#include "medcbr/util/error.hpp"

namespace medcbr {

inline const char* to_string(HeadKind h) { return h == HeadKind::kEmbedding ? "embedding" : "concept_bottleneck"; }

inline HeadKind parse_head_kind(const std::string& s) {
  if (s == "embedding") return HeadKind::kEmbedding;
  if (s == "concept_bottleneck") return HeadKind::kConceptBottleneck;
  throw ValidationError("unknown head kind '" + s + "'");
}

inline nlohmann::json to_json(const ModelAssembly& a) {
  return {{"head", to_string(a.head)},
          {"use_text", a.use_text},
          {"lambda", a.weights.lambda},
          {"mu", a.weights.mu},
          {"nu", a.weights.nu}};
}

inline ModelAssembly assembly_from_json(const nlohmann::json& j) {
  ModelAssembly a;
  a.head = parse_head_kind(j.at("head").get<std::string>());
  a.use_text = j.at("use_text").get<bool>();
  a.weights = {j.at("lambda").get<double>(), j.at("mu").get<double>(), j.at("nu").get<double>()};
  return a;
}

struct Checkpoint {
  EncoderConfig encoder;
  ModelAssembly assembly;
  std::string variant;
  nlohmann::json metadata = nlohmann::json::object();
  ModelParams params;
};

inline constexpr char kCheckpointMagic[] = "MEDCBRCK1\n";

// Layout: magic, 8-byte little-endian header length, JSON header, raw doubles
// in tensors() order.
inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  ModelParams p = ck.params;
  auto refs = tensors(p);
  std::string payload;
  nlohmann::json shapes = nlohmann::json::array();
  for (const auto& r : refs) {
    shapes.push_back({{"name", r.name}, {"size", r.size}});
    payload.append(reinterpret_cast<const char*>(r.data), static_cast<std::size_t>(r.size) * sizeof(double));
  }
  nlohmann::json header = {{"format", 1},
                           {"encoder", to_json(ck.encoder)},
                           {"assembly", to_json(ck.assembly)},
                           {"variant", ck.variant},
                           {"metadata", ck.metadata},
                           {"tensors", shapes},
                           {"payload_sha256", sha256_hex(payload)}};
  const std::string h = header.dump();
  std::string blob(kCheckpointMagic);
  std::uint64_t n = h.size();
  for (int i = 0; i < 8; ++i) blob.push_back(static_cast<char>((n >> (8 * i)) & 0xff));
  blob += h;
  blob += payload;
  const auto tmp = path.string() + ".tmp";
  write_file(tmp, blob);
  std::filesystem::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string blob = read_file(path);
  const std::size_t magic_len = std::strlen(kCheckpointMagic);
  if (blob.size() < magic_len + 8 || blob.compare(0, magic_len, kCheckpointMagic) != 0)
    throw CorruptionError("checkpoint " + path.string() + ": bad magic");
  std::uint64_t n = 0;
  for (int i = 0; i < 8; ++i) n |= static_cast<std::uint64_t>(static_cast<unsigned char>(blob[magic_len + i])) << (8 * i);
  const std::size_t start = magic_len + 8;
  if (blob.size() < start + n) throw CorruptionError("checkpoint " + path.string() + ": truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(blob.substr(start, n));
  } catch (const std::exception& e) {
    throw CorruptionError("checkpoint " + path.string() + ": header is not JSON: " + e.what());
  }
  const std::string payload = blob.substr(start + n);
  if (sha256_hex(payload) != header.at("payload_sha256").get<std::string>())
    throw CorruptionError("checkpoint " + path.string() + ": payload digest mismatch");

  Checkpoint ck;
  ck.encoder = encoder_config_from_json(header.at("encoder"));
  ck.assembly = assembly_from_json(header.at("assembly"));
  ck.variant = header.at("variant").get<std::string>();
  ck.metadata = header.value("metadata", nlohmann::json::object());
  EncoderConfig shape_cfg = ck.encoder;
  shape_cfg.pretrained_checkpoint.clear();
  ck.params = init_params(shape_cfg, ck.assembly.head);
  auto refs = tensors(ck.params);
  const auto& shapes = header.at("tensors");
  if (shapes.size() != refs.size()) throw CorruptionError("checkpoint " + path.string() + ": tensor count mismatch");
  std::size_t off = 0;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (shapes[i].at("name").get<std::string>() != refs[i].name ||
        shapes[i].at("size").get<Eigen::Index>() != refs[i].size)
      throw CorruptionError("checkpoint " + path.string() + ": tensor '" + refs[i].name + "' has unexpected shape");
    const std::size_t bytes = static_cast<std::size_t>(refs[i].size) * sizeof(double);
    if (off + bytes > payload.size()) throw CorruptionError("checkpoint " + path.string() + ": truncated payload");
    std::memcpy(refs[i].data, payload.data() + off, bytes);
    off += bytes;
  }
  if (off != payload.size()) throw CorruptionError("checkpoint " + path.string() + ": trailing bytes");
  return ck;
}

// Copies vision, text and temperature weights from a pretrained checkpoint.
inline void load_pretrained_encoder(ModelParams& p, const std::filesystem::path& path) {
  Checkpoint src = load_checkpoint(path);
  auto same = [](const Dense& a, const Dense& b) {
    return a.W.rows() == b.W.rows() && a.W.cols() == b.W.cols();
  };
  if (!same(p.vision_in, src.params.vision_in) || !same(p.vision_out, src.params.vision_out) ||
      !same(p.text_proj, src.params.text_proj))
    throw ValidationError("pretrained checkpoint " + path.string() + " has incompatible encoder shapes");
  p.vision_in = src.params.vision_in;
  p.vision_out = src.params.vision_out;
  p.text_proj = src.params.text_proj;
  p.log_tau = src.params.log_tau;
}

inline void export_embeddings(const std::filesystem::path& path, const std::vector<std::string>& ids,
                              const Matrix& embeddings) {
  if (static_cast<Eigen::Index>(ids.size()) != embeddings.rows())
    throw ValidationError("export_embeddings: id count does not match embedding rows");
  std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream out(path);
  std::vector<std::string> row{"sample_id"};
  for (Eigen::Index j = 0; j < embeddings.cols(); ++j) row.push_back("e" + std::to_string(j));
  csv::write_row(out, row);
  char buf[32];
  for (std::size_t i = 0; i < ids.size(); ++i) {
    row.assign(1, ids[i]);
    for (Eigen::Index j = 0; j < embeddings.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", embeddings(static_cast<Eigen::Index>(i), j));
      row.emplace_back(buf);
    }
    csv::write_row(out, row);
  }
}

}  // namespace medcbr
