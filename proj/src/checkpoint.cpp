#include "vimlab/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include "vimlab/errors.hpp"

namespace vimlab {

namespace {

std::uint64_t to_little_endian(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) return __builtin_bswap64(v);
  return v;
}

void write_u64(std::ostream& os, std::uint64_t v) {
  v = to_little_endian(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_doubles(std::ostream& os, std::span<const double> values) {
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
  } else {
    for (double d : values) write_u64(os, std::bit_cast<std::uint64_t>(d));
  }
}

void read_exact(std::istream& is, char* dst, std::size_t n, const std::string& what) {
  is.read(dst, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n) throw VersionError("checkpoint truncated while reading " + what);
}

}  // namespace

nlohmann::json model_shape_to_json(const ModelShape& shape) {
  return {{"input_dim", shape.input_dim},
          {"hidden", shape.hidden},
          {"latent_dim", shape.latent_dim},
          {"classes", shape.classes}};
}

ModelShape model_shape_from_json(const nlohmann::json& j) {
  ModelShape s;
  s.input_dim = j.at("input_dim").get<std::size_t>();
  s.hidden = j.at("hidden").get<std::vector<std::size_t>>();
  s.latent_dim = j.at("latent_dim").get<std::size_t>();
  s.classes = j.at("classes").get<std::size_t>();
  return s;
}

void save_checkpoint(const std::filesystem::path& path, const StochasticClassifier& model,
                     const nlohmann::json& meta) {
  nlohmann::json header = meta;
  header["format_version"] = kCheckpointVersion;
  header["model"] = model_shape_to_json(model.shape());
  header["K"] = model.latent_dim();
  header["C"] = model.classes();
  nlohmann::json table = nlohmann::json::array();
  for (const auto& p : model.parameters()) table.push_back({{"name", p.name}, {"shape", p.tensor.shape()}});
  header["parameters"] = table;
  const std::string text = header.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write checkpoint " + path.string());
  os.write(kCheckpointMagic, sizeof kCheckpointMagic);
  write_u64(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& p : model.parameters()) write_doubles(os, std::as_const(p.tensor).data());
  if (!os) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint " + path.string());
  char magic[sizeof kCheckpointMagic];
  read_exact(is, magic, sizeof magic, "magic");
  if (std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) throw VersionError("not a vimlab checkpoint: " + path.string());
  std::uint64_t len = 0;
  read_exact(is, reinterpret_cast<char*>(&len), sizeof len, "header length");
  len = to_little_endian(len);
  if (len > (std::uint64_t{1} << 30)) throw VersionError("implausible checkpoint header length");
  std::string text(len, '\0');
  read_exact(is, text.data(), len, "header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw VersionError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  if (header.value("format_version", 0) != kCheckpointVersion) {
    throw VersionError("unsupported checkpoint format version " + header.value("format_version", nlohmann::json()).dump());
  }

  ModelShape shape;
  try {
    shape = model_shape_from_json(header.at("model"));
  } catch (const nlohmann::json::exception& e) {
    throw VersionError(std::string("checkpoint model description unreadable: ") + e.what());
  }
  StochasticClassifier model(shape);
  auto params = model.parameters();
  const auto& table = header.at("parameters");
  if (table.size() != params.size()) throw VersionError("checkpoint parameter count does not match the model");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto name = table[i].at("name").get<std::string>();
    const auto shp = table[i].at("shape").get<Shape>();
    if (name != params[i].name || shp != params[i].tensor.shape()) {
      throw VersionError("checkpoint parameter " + name + shape_string(shp) + " does not match model parameter " +
                         params[i].name + shape_string(params[i].tensor.shape()));
    }
    auto dst = params[i].tensor.data();
    read_exact(is, reinterpret_cast<char*>(dst.data()), dst.size_bytes(), name);
    if constexpr (std::endian::native == std::endian::big) {
      for (double& d : dst) d = std::bit_cast<double>(__builtin_bswap64(std::bit_cast<std::uint64_t>(d)));
    }
  }
  nlohmann::json meta = header;
  for (const char* key : {"format_version", "model", "K", "C", "parameters"}) meta.erase(key);
  return {std::move(model), std::move(meta)};
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelShape& expected) {
  Checkpoint ck = load_checkpoint(path);
  if (!(ck.model.shape() == expected)) {
    throw VersionError("checkpoint model shape " + model_shape_to_json(ck.model.shape()).dump() +
                       " differs from expected " + model_shape_to_json(expected).dump());
  }
  return ck;
}

}  // namespace vimlab
