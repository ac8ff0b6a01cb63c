#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "semamba/nets/network.hpp"

namespace semamba::nets {

/// Checkpoint layout (all integers little-endian):
///
///   bytes 0..7   magic "SMBACKPT"
///   bytes 8..15  uint64 header length H
///   next H bytes UTF-8 JSON header:
///       { "format_version": 1,
///         "spec": <NetworkSpec json>,
///         "metadata": <free-form object>,
///         "tensors": [ { "name", "dtype" ("f32"|"f64"|"i64"),
///                        "shape", "offset", "nbytes" }, ... ] }
///   remaining    raw tensor payloads; offsets are relative to the payload start
///
/// Tensor names are the hierarchical parameter and buffer names of the
/// network (e.g. "enc0.body.0.weight").
inline constexpr int kCheckpointVersion = 1;

/// Writes atomically (temporary file + rename). Throws DataError on I/O failure.
void save_checkpoint(const std::filesystem::path& path, SegmentationNetwork& network,
                     const nlohmann::json& metadata = nlohmann::json::object());

struct LoadedCheckpoint {
  NetworkPtr network;
  nlohmann::json metadata;
};

/// Rebuilds the network from the stored spec and restores every tensor.
/// Missing files throw DataError, as do missing or unexpected tensor names.
[[nodiscard]] LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace semamba::nets
