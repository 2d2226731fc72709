#include "inmt/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <set>

#include "inmt/error.hpp"
#include "json.hpp"

namespace inmt {

namespace {

constexpr char kMagic[8] = {'I', 'N', 'M', 'T', 'C', 'K', 'P', 'T'};

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed-endian hosts are not supported");

void write_le(std::ostream& out, const void* src, std::size_t bytes, std::size_t width) {
  const auto* p = static_cast<const unsigned char*>(src);
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(bytes));
  } else {
    std::vector<unsigned char> buf(p, p + bytes);
    for (std::size_t i = 0; i < bytes; i += width) std::reverse(buf.begin() + i, buf.begin() + i + width);
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(bytes));
  }
}

void read_le(std::istream& in, void* dst, std::size_t bytes, std::size_t width) {
  in.read(static_cast<char*>(dst), static_cast<std::streamsize>(bytes));
  if (!in) throw FormatError("truncated checkpoint");
  if constexpr (std::endian::native == std::endian::big) {
    auto* p = static_cast<unsigned char*>(dst);
    for (std::size_t i = 0; i < bytes; i += width) std::reverse(p + i, p + i + width);
  }
}

nlohmann::json dims_json(const ModelDims& d) {
  return {{"embedding", d.embedding},       {"state", d.state},
          {"attention", d.attention},       {"source_vocab", d.source_vocab},
          {"target_vocab", d.target_vocab}};
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params) {
  nlohmann::json header;
  header["format_version"] = kCheckpointVersion;
  header["dims"] = dims_json(params.dims);
  header["attention"] = std::string(to_string(params.attention));
  auto& entries = header["tensors"] = nlohmann::json::array();
  std::size_t offset = 0;
  params.for_each([&](std::string_view name, const Tensor& t) {
    entries.push_back({{"name", name}, {"shape", t.shape}, {"dtype", "f64"}, {"offset", offset}});
    offset += t.size() * sizeof(double);
  });
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(kMagic, sizeof(kMagic));
  const std::uint64_t len = text.size();
  write_le(out, &len, sizeof(len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  params.for_each([&](std::string_view, const Tensor& t) {
    write_le(out, t.data.data(), t.size() * sizeof(double), sizeof(double));
  });
  if (!out) throw FormatError("failed writing " + path.string());
}

ModelParams load_checkpoint(const std::filesystem::path& path,
                            const std::optional<ModelDims>& expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read " + path.string());
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw FormatError(path.string() + " is not a checkpoint");
  }
  std::uint64_t len = 0;
  read_le(in, &len, sizeof(len), sizeof(len));
  if (len > (1u << 26)) throw FormatError("checkpoint header too large");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw FormatError("truncated checkpoint header");

  nlohmann::json header;
  ModelDims dims;
  AttentionKind attention{};
  try {
    header = nlohmann::json::parse(text);
    if (header.at("format_version").get<int>() != kCheckpointVersion) {
      throw FormatError("unsupported checkpoint version");
    }
    const auto& d = header.at("dims");
    dims.embedding = d.at("embedding").get<std::size_t>();
    dims.state = d.at("state").get<std::size_t>();
    dims.attention = d.at("attention").get<std::size_t>();
    dims.source_vocab = d.at("source_vocab").get<std::size_t>();
    dims.target_vocab = d.at("target_vocab").get<std::size_t>();
    attention = parse_attention(header.at("attention").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  if (expected && !(*expected == dims)) {
    throw ShapeError("checkpoint dimensions do not match the configured model");
  }
  auto params = ModelParams::zeros(dims, attention);

  const auto data_start = in.tellg();
  std::set<std::string> seen;
  for (const auto& entry : header.at("tensors")) {
    std::string name;
    std::vector<std::size_t> shape;
    std::size_t offset = 0;
    try {
      name = entry.at("name").get<std::string>();
      shape = entry.at("shape").get<std::vector<std::size_t>>();
      offset = entry.at("offset").get<std::size_t>();
      if (entry.at("dtype").get<std::string>() != "f64") {
        throw FormatError("unsupported dtype for " + name);
      }
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path.string() + ": " + e.what());
    }
    Tensor* t = params.find(name);
    if (t == nullptr) throw ShapeError("unknown parameter in checkpoint: " + name);
    if (!seen.insert(name).second) throw ShapeError("duplicate parameter: " + name);
    if (t->shape != shape) throw ShapeError("shape mismatch for parameter " + name);
    in.seekg(data_start + static_cast<std::streamoff>(offset));
    read_le(in, t->data.data(), t->size() * sizeof(double), sizeof(double));
  }
  std::size_t expected_count = 0;
  params.for_each([&](std::string_view, const Tensor&) { ++expected_count; });
  if (seen.size() != expected_count) throw ShapeError("checkpoint is missing parameters");
  return params;
}

}  // namespace inmt
