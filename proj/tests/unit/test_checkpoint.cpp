#include <cstring>
#include <filesystem>
#include <fstream>

#include "common/random_model.hpp"
#include "doctest.h"
#include "inmt/checkpoint.hpp"
#include "inmt/error.hpp"
#include "json.hpp"

using namespace inmt;

namespace {

ModelDims dims() {
  ModelDims d;
  d.embedding = 3;
  d.state = 4;
  d.attention = 2;
  d.source_vocab = 9;
  d.target_vocab = 6;
  return d;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const std::filesystem::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

const auto kDir = std::filesystem::temp_directory_path();

}  // namespace

TEST_CASE("checkpoint round trip") {
  for (auto kind : {AttentionKind::additive, AttentionKind::dot}) {
    const auto p = testing::random_model(dims(), kind, 4);
    const auto path = kDir / "inmt_rt.ckpt";
    save_checkpoint(path, p);
    CHECK(load_checkpoint(path) == p);
    CHECK(load_checkpoint(path, dims()) == p);
  }
}

TEST_CASE("checkpoint layout") {
  const auto p = testing::random_model(dims(), AttentionKind::additive, 7);
  const auto path = kDir / "inmt_layout.ckpt";
  save_checkpoint(path, p);
  const auto bytes = slurp(path);
  REQUIRE(bytes.size() > 16);
  CHECK(bytes.substr(0, 8) == "INMTCKPT");
  std::uint64_t len = 0;
  for (int i = 7; i >= 0; --i) len = len << 8 | static_cast<unsigned char>(bytes[8 + i]);
  const auto header = nlohmann::json::parse(bytes.substr(16, len));
  CHECK(header["format_version"] == kCheckpointVersion);
  CHECK(header["dims"]["state"] == 4);
  const std::size_t data = 16 + len;

  // Every tensor can be found by its header entry alone.
  std::size_t n = 0;
  p.for_each([&](std::string_view name, const Tensor& t) {
    const auto& e = header["tensors"][n++];
    CHECK(e["name"] == name);
    CHECK(e["dtype"] == "f64");
    CHECK(e["shape"].get<std::vector<std::size_t>>() == t.shape);
    const std::size_t off = data + e["offset"].get<std::size_t>();
    for (std::size_t i = 0; i < t.size(); ++i) {
      double v;
      std::memcpy(&v, bytes.data() + off + 8 * i, 8);  // little-endian host
      REQUIRE(v == t.data[i]);
    }
  });
  CHECK(n == header["tensors"].size());
}

TEST_CASE("checkpoint validation") {
  const auto p = testing::random_model(dims(), AttentionKind::additive, 8);
  const auto path = kDir / "inmt_val.ckpt";
  save_checkpoint(path, p);
  const auto good = slurp(path);

  auto other = dims();
  other.state = 5;
  CHECK_THROWS_AS(load_checkpoint(path, other), ShapeError);
  CHECK_THROWS_AS(load_checkpoint(kDir / "inmt_missing.ckpt"), FormatError);

  const auto bad = kDir / "inmt_bad.ckpt";
  spit(bad, "NOTACKPT" + good.substr(8));
  CHECK_THROWS_AS(load_checkpoint(bad), FormatError);
  spit(bad, good.substr(0, good.size() - 3));
  CHECK_THROWS_AS(load_checkpoint(bad), FormatError);
  spit(bad, good.substr(0, 12));
  CHECK_THROWS_AS(load_checkpoint(bad), FormatError);

  // Header edits: wrong version, wrong shape, missing tensor.
  std::uint64_t len = 0;
  for (int i = 7; i >= 0; --i) len = len << 8 | static_cast<unsigned char>(good[8 + i]);
  const auto header = nlohmann::json::parse(good.substr(16, len));
  auto rewrite = [&](nlohmann::json h) {
    const auto text = h.dump();
    std::string out = good.substr(0, 8);
    std::uint64_t l = text.size();
    for (int i = 0; i < 8; ++i) out += static_cast<char>(l >> (8 * i) & 0xff);
    out += text + good.substr(16 + len);
    spit(bad, out);
  };
  auto h = header;
  h["format_version"] = 99;
  rewrite(h);
  CHECK_THROWS_AS(load_checkpoint(bad), FormatError);
  h = header;
  h["tensors"][0]["shape"] = {1, 1};
  rewrite(h);
  CHECK_THROWS(load_checkpoint(bad));
  h = header;
  h["tensors"].erase(h["tensors"].size() - 1);
  rewrite(h);
  CHECK_THROWS(load_checkpoint(bad));
  h = header;
  h["tensors"][1]["dtype"] = "f16";
  rewrite(h);
  CHECK_THROWS_AS(load_checkpoint(bad), FormatError);
}
