#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "msap/parameters.hpp"
#include "msap/synth_motion.hpp"

namespace msap {

/// Raised for unreadable or mismatched checkpoint and corpus files.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct CheckpointHeader {
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
};

/// Checkpoint layout (all integers little-endian):
///
///   magic        8 bytes  "MSAPCKPT"
///   version      u32      1
///   config_hash  u64
///   seed         u64
///   count        u32      number of parameters
///   per parameter, in set order:
///     name_len   u32, name bytes (UTF-8, no terminator)
///     rank       u32, then rank × u64 extents
///     values     product(extents) × f64, row-major
void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params, const CheckpointHeader& header);

/// Reads a checkpoint into `params`, matching by name. Every parameter of the
/// set must be present with the same shape. When `expected_hash` is given it
/// must equal the stored hash.
CheckpointHeader load_checkpoint(const std::filesystem::path& path, ParameterSet& params,
                                 std::optional<std::uint64_t> expected_hash = std::nullopt);

/// FNV-1a 64-bit hash of a string.
std::uint64_t fnv1a64(std::string_view text);

/// Corpus dump layout (little-endian):
///
///   magic    8 bytes "MSAPCORP"
///   version  u32     1
///   C, H, W, T  u32 each
///   count    u64     number of clips
///   per clip: label u32, seed u64, T·C·H·W × f32 frames, row-major
void write_corpus_dump(const std::filesystem::path& path, const std::vector<FullVideo>& clips,
                       const std::vector<ClipRecord>& records);

struct CorpusDump {
    std::vector<FullVideo> clips;
    std::vector<ClipRecord> records;
};

CorpusDump read_corpus_dump(const std::filesystem::path& path);

}  // namespace msap
