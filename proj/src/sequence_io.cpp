#include "dogm/sequence_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace dogm {
namespace {

constexpr char kMagic[4] = {'D', 'G', 'M', '1'};

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4))
    throw SequenceIoError("grid sequence: truncated header");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f64(std::ostream& os, double v) {
  static_assert(sizeof(double) == 8);
  std::uint64_t u;
  std::memcpy(&u, &v, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

double get_f64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8))
    throw SequenceIoError("grid sequence: truncated payload");
  std::uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &u, 8);
  return v;
}

// f32 payload blocks are written/read in bulk; this code assumes a
// little-endian host with IEEE floats, which covers every supported target.
static_assert(std::endian::native == std::endian::little,
              "grid sequence IO requires a little-endian host");

}  // namespace

std::uintmax_t sequence_file_size(int width_cells, int height_cells, int channel_count,
                                  int frame_count) {
  const std::uintmax_t header = 4 + 5 * 4 + 3 * 8;
  const std::uintmax_t per_frame =
      4 * 8 + std::uintmax_t(width_cells) * height_cells * channel_count * 4;
  return header + per_frame * frame_count;
}

void write_sequence(const std::vector<GridFrame>& frames, const std::filesystem::path& path) {
  if (frames.empty()) throw SequenceIoError("write_sequence: empty frame list");
  const GridGeometry& g = frames.front().geometry;
  const int channels = frames.front().channel_count();
  if (!g.valid() || channels <= 0)
    throw SequenceIoError("write_sequence: invalid geometry or channel count");
  double prev_t = frames.front().timestamp;
  for (size_t i = 0; i < frames.size(); ++i) {
    if (!(frames[i].geometry == g) || frames[i].channel_count() != channels)
      throw SequenceIoError("write_sequence: geometry mismatch across frames");
    if (i > 0 && !(frames[i].timestamp > prev_t))
      throw SequenceIoError("write_sequence: timestamps must strictly increase");
    prev_t = frames[i].timestamp;
  }

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw SequenceIoError("write_sequence: cannot open " + path.string());

  os.write(kMagic, 4);
  put_u32(os, kSequenceFormatVersion);
  put_u32(os, static_cast<std::uint32_t>(g.width_cells));
  put_u32(os, static_cast<std::uint32_t>(g.height_cells));
  put_u32(os, static_cast<std::uint32_t>(channels));
  put_u32(os, static_cast<std::uint32_t>(frames.size()));
  put_f64(os, g.cell_size);
  put_f64(os, g.origin.x());
  put_f64(os, g.origin.y());

  const std::streamsize plane_bytes =
      std::streamsize(g.width_cells) * g.height_cells * sizeof(float);
  for (const GridFrame& f : frames) {
    put_f64(os, f.timestamp);
    put_f64(os, f.ego_pose.east);
    put_f64(os, f.ego_pose.north);
    put_f64(os, f.ego_pose.heading);
    for (const GridPlane& plane : f.channels)
      os.write(reinterpret_cast<const char*>(plane.data()), plane_bytes);
  }
  if (!os) throw SequenceIoError("write_sequence: write failed for " + path.string());
}

std::vector<GridFrame> read_sequence(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw SequenceIoError("read_sequence: cannot open " + path.string());

  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw SequenceIoError("read_sequence: bad magic, not a grid sequence file");
  const std::uint32_t version = get_u32(is);
  if (version != kSequenceFormatVersion)
    throw SequenceIoError("read_sequence: unsupported version");
  const std::uint32_t w = get_u32(is);
  const std::uint32_t h = get_u32(is);
  const std::uint32_t channels = get_u32(is);
  const std::uint32_t frame_count = get_u32(is);
  GridGeometry g;
  g.width_cells = static_cast<int>(w);
  g.height_cells = static_cast<int>(h);
  g.cell_size = get_f64(is);
  g.origin.x() = get_f64(is);
  g.origin.y() = get_f64(is);
  if (!g.valid() || channels == 0 || channels > 1u << 20 || frame_count == 0)
    throw SequenceIoError("read_sequence: malformed header");

  std::vector<GridFrame> frames;
  frames.reserve(frame_count);
  const std::streamsize plane_bytes =
      std::streamsize(g.width_cells) * g.height_cells * sizeof(float);
  for (std::uint32_t i = 0; i < frame_count; ++i) {
    GridFrame f;
    f.geometry = g;
    f.timestamp = get_f64(is);
    f.ego_pose.east = get_f64(is);
    f.ego_pose.north = get_f64(is);
    f.ego_pose.heading = get_f64(is);
    f.channels.reserve(channels);
    for (std::uint32_t c = 0; c < channels; ++c) {
      GridPlane plane(g.height_cells, g.width_cells);
      if (!is.read(reinterpret_cast<char*>(plane.data()), plane_bytes))
        throw SequenceIoError("read_sequence: truncated payload");
      f.channels.push_back(std::move(plane));
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

}  // namespace dogm
