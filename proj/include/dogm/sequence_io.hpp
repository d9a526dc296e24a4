#pragma once

#include <filesystem>
#include <vector>

#include "dogm/grid.hpp"

namespace dogm {

// Grid-sequence container, used for measurement grids (2 channels), DOGMa
// sequences (7), label maps (1) and packed label tensors alike.
//
//   magic  "DGM1"
//   u32    version, width_cells, height_cells, channel_count, frame_count
//   f64    cell_size, origin_east, origin_north
//   per frame:
//     f64  timestamp
//     f64  ego_east, ego_north, ego_heading
//     f32  channel values, channel-major; within a channel row-major with
//          east as the fast axis (index n * W + e)
//
// All integers and floats little-endian.

inline constexpr std::uint32_t kSequenceFormatVersion = 1;

struct SequenceIoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Writes a non-empty sequence of frames with uniform geometry and channel
/// count and strictly increasing timestamps. Bit-exact round trip with
/// read_sequence.
void write_sequence(const std::vector<GridFrame>& frames, const std::filesystem::path& path);

/// Reads a grid-sequence file. Throws SequenceIoError on a malformed header
/// or truncated payload.
std::vector<GridFrame> read_sequence(const std::filesystem::path& path);

/// Expected file size in bytes for the given shape; handy for sanity checks.
std::uintmax_t sequence_file_size(int width_cells, int height_cells, int channel_count,
                                  int frame_count);

}  // namespace dogm
