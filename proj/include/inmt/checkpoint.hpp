#pragma once

#include <filesystem>
#include <optional>

#include "inmt/model.hpp"

namespace inmt {

inline constexpr int kCheckpointVersion = 1;

// Layout: 8-byte magic "INMTCKPT", little-endian u64 header length, a JSON
// header {format_version, dims, attention, tensors: [{name, shape, dtype,
// offset}]}, then raw little-endian f64 data. Offsets are relative to the
// start of the data section.
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params);

// Validates every tensor shape against the dims (from `expected` when given,
// else from the header). Throws FormatError / ShapeError.
ModelParams load_checkpoint(const std::filesystem::path& path,
                            const std::optional<ModelDims>& expected = std::nullopt);

}  // namespace inmt
