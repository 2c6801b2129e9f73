#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "stc/numerics.hpp"
#include "stc/vit.hpp"

namespace stc {

struct StreamConfig {
    std::size_t num_frames = 16;
    std::size_t token_count = 64;
    std::size_t dim = 64;
    /// Fraction of token rows each frame copies from its predecessor.
    double redundancy = 0.9;
    /// Gaussian noise scale added to copied rows.
    double drift = 0.0;
    /// Every event_period-th frame (1-based) receives a block of fresh event
    /// tokens. 0 disables events.
    std::size_t event_period = 4;
    std::uint64_t seed = 0;

    void validate() const;
    /// Size of the contiguous event block, max(1, T/8).
    std::size_t event_block() const noexcept;
};

struct SyntheticStream {
    std::vector<FrameTokens> frames;
    /// Ground-truth positions of injected event tokens, one set per frame.
    std::vector<IndexSet> planted_event_indices;
};

/// A view of L consecutive frames of a stream.
struct Chunk {
    std::size_t first_frame = 0;
    std::span<const FrameTokens> frames;
};

/// Frames live in token space. Background rows mix a stream-wide direction
/// with isotropic Gaussian noise; event rows are pure noise with no
/// background component. Every row has unit L2 norm.
SyntheticStream generate_stream(const StreamConfig& config);

/// Consecutive non-overlapping chunks of `chunk_length` frames; the last may be shorter.
std::vector<Chunk> chunk_stream(std::span<const FrameTokens> frames, std::size_t chunk_length);

// STC1 tensor files: "STC1", then u32 num_frames, u32 T, u32 D, then
// num_frames·T·D f32 values. Everything little-endian, frame-major, row-major.

void write_tensor_file(const std::filesystem::path& path, std::span<const FrameTokens> frames);
std::vector<FrameTokens> load_tensor_file(const std::filesystem::path& path);

/// Parse an in-memory STC1 image; throws FormatError on any defect.
std::vector<FrameTokens> parse_tensor_bytes(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_tensor_bytes(std::span<const FrameTokens> frames);

}  // namespace stc
