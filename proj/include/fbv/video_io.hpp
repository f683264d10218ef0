#pragma once

// Y4M and headerless planar 4:2:0 readers/writers. Everything is converted to
// the internal 4:4:4 model on ingest (chroma sample duplication) and back to
// 4:2:0 on export (2x2 mean, round half up).

#include <cmath>
#include <fstream>
#include <istream>
#include <iterator>
#include <optional>
#include <ostream>
#include <sstream>

#include "fbv/core.hpp"

namespace fbv {

enum class ChromaFormat { k420, k444 };

/// Describes a raw stream. For Y4M everything but `y4m` is read from the header.
struct VideoFormat {
  bool y4m = true;
  int width = 0;
  int height = 0;
  Rational fps{30, 1};
  ChromaFormat chroma = ChromaFormat::k420;
};

namespace detail {

inline int chroma_dim(int luma, ChromaFormat cf) {
  return cf == ChromaFormat::k420 ? (luma + 1) / 2 : luma;
}

inline std::size_t frame_bytes(int w, int h, ChromaFormat cf) {
  std::size_t cw = chroma_dim(w, cf), ch = chroma_dim(h, cf);
  return static_cast<std::size_t>(w) * h + 2 * cw * ch;
}

inline Rational parse_rational(const std::string& s) {
  auto colon = s.find(':');
  if (colon == std::string::npos) throw FormatError("malformed Y4M rational '" + s + "'");
  try {
    Rational r{std::stoi(s.substr(0, colon)), std::stoi(s.substr(colon + 1))};
    if (r.num <= 0 || r.den <= 0) throw FormatError("non-positive Y4M frame rate");
    return r;
  } catch (const std::logic_error&) {
    throw FormatError("malformed Y4M rational '" + s + "'");
  }
}

inline VideoFormat parse_y4m_header(const std::string& line) {
  std::istringstream in(line);
  std::string magic;
  in >> magic;
  if (magic != "YUV4MPEG2") throw FormatError("missing YUV4MPEG2 signature");
  VideoFormat fmt;
  std::string tok;
  while (in >> tok) {
    const char key = tok[0];
    const std::string val = tok.substr(1);
    try {
      switch (key) {
        case 'W': fmt.width = std::stoi(val); break;
        case 'H': fmt.height = std::stoi(val); break;
        case 'F': fmt.fps = parse_rational(val); break;
        case 'C':
          if (val.rfind("420", 0) == 0) fmt.chroma = ChromaFormat::k420;
          else if (val == "444") fmt.chroma = ChromaFormat::k444;
          else throw FormatError("unsupported Y4M colorspace C" + val);
          break;
        default: break;  // I, A, X: ignored
      }
    } catch (const std::logic_error&) {
      throw FormatError("malformed Y4M header token '" + tok + "'");
    }
  }
  if (fmt.width < kMinFrameDim || fmt.height < kMinFrameDim)
    throw FormatError("Y4M header missing or invalid W/H");
  return fmt;
}

inline Frame unpack_frame(const std::vector<std::uint8_t>& buf, const VideoFormat& fmt, std::int64_t t) {
  Frame f(fmt.width, fmt.height, 0, t);
  const int w = fmt.width, h = fmt.height;
  std::copy_n(buf.begin(), static_cast<std::size_t>(w) * h, f.plane(0).samples().begin());
  const int cw = chroma_dim(w, fmt.chroma), ch = chroma_dim(h, fmt.chroma);
  std::size_t off = static_cast<std::size_t>(w) * h;
  for (int c = 1; c < kChannels; ++c) {
    for (int y = 0; y < h; ++y) {
      const int sy = fmt.chroma == ChromaFormat::k420 ? y / 2 : y;
      for (int x = 0; x < w; ++x) {
        const int sx = fmt.chroma == ChromaFormat::k420 ? x / 2 : x;
        f.at(c, x, y) = buf[off + static_cast<std::size_t>(sy) * cw + sx];
      }
    }
    off += static_cast<std::size_t>(cw) * ch;
  }
  return f;
}

inline void pack_frame(const Frame& f, ChromaFormat cf, std::vector<std::uint8_t>& buf) {
  const int w = f.width(), h = f.height();
  const int cw = chroma_dim(w, cf), ch = chroma_dim(h, cf);
  buf.assign(frame_bytes(w, h, cf), 0);
  std::copy(f.plane(0).samples().begin(), f.plane(0).samples().end(), buf.begin());
  std::size_t off = static_cast<std::size_t>(w) * h;
  for (int c = 1; c < kChannels; ++c) {
    for (int y = 0; y < ch; ++y) {
      for (int x = 0; x < cw; ++x) {
        if (cf == ChromaFormat::k444) {
          buf[off + static_cast<std::size_t>(y) * cw + x] = f.at(c, x, y);
          continue;
        }
        int sum = 0, n = 0;
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            const int sx = 2 * x + dx, sy = 2 * y + dy;
            if (sx < w && sy < h) { sum += f.at(c, sx, sy); ++n; }
          }
        buf[off + static_cast<std::size_t>(y) * cw + x] = static_cast<std::uint8_t>((sum + n / 2) / n);
      }
    }
    off += static_cast<std::size_t>(cw) * ch;
  }
}

}  // namespace detail

/// Reads a Y4M stream (fmt.y4m) or headerless planar stream described by `fmt`.
/// Truncation inside a frame payload is an error naming the last complete frame.
inline VideoSequence read_raw_video(std::istream& in, VideoFormat fmt = {}) {
  VideoSequence seq;
  if (fmt.y4m) {
    std::string header;
    if (!std::getline(in, header)) throw FormatError("empty stream: missing Y4M header");
    fmt = detail::parse_y4m_header(header);
    fmt.y4m = true;
  } else if (fmt.width < kMinFrameDim || fmt.height < kMinFrameDim) {
    throw FormatError("raw video descriptor needs width/height >= 16");
  }
  seq.fps = fmt.fps;

  const std::size_t nbytes = detail::frame_bytes(fmt.width, fmt.height, fmt.chroma);
  std::vector<std::uint8_t> buf(nbytes);
  for (std::int64_t t = 0;; ++t) {
    const auto last_complete = [&] {
      return t == 0 ? std::string("none") : std::to_string(t - 1);
    };
    if (fmt.y4m) {
      std::string marker;
      if (!std::getline(in, marker)) break;
      if (marker.rfind("FRAME", 0) != 0)
        throw FormatError("expected FRAME marker at frame " + std::to_string(t) +
                          " (last complete frame: " + last_complete() + ")");
    } else if (in.peek() == std::char_traits<char>::eof()) {
      break;
    }
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(nbytes));
    if (static_cast<std::size_t>(in.gcount()) != nbytes)
      throw FormatError("truncated frame payload at frame " + std::to_string(t) +
                        " (last complete frame: " + last_complete() + ")");
    seq.frames.push_back(detail::unpack_frame(buf, fmt, t));
  }
  return seq;
}

inline VideoSequence read_video_file(const std::string& path, VideoFormat fmt = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return read_raw_video(in, fmt);
}

/// Writes a 4:2:0 (default) or 4:4:4 Y4M stream.
inline void write_y4m(std::ostream& out, const VideoSequence& seq,
                      ChromaFormat cf = ChromaFormat::k420) {
  if (seq.frames.empty()) throw ConfigError("cannot write an empty sequence");
  out << "YUV4MPEG2 W" << seq.width() << " H" << seq.height() << " F" << seq.fps.num << ":"
      << seq.fps.den << " Ip A1:1 " << (cf == ChromaFormat::k420 ? "C420jpeg" : "C444") << "\n";
  std::vector<std::uint8_t> buf;
  for (const auto& f : seq.frames) {
    if (!f.same_shape(seq.frames.front())) throw ConfigError("frames differ in size");
    detail::pack_frame(f, cf, buf);
    out << "FRAME\n";
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  }
  if (!out) throw IoError("write failed");
}

inline void write_video_file(const std::string& path, const VideoSequence& seq,
                             ChromaFormat cf = ChromaFormat::k420) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_y4m(out, seq, cf);
}

/// BT.601 full-range Y'CbCr -> RGB, round half up. Used for PNG-style exports.
inline std::array<std::uint8_t, 3> ycbcr_to_rgb(int y, int cb, int cr) {
  const double r = y + 1.402 * (cr - 128);
  const double g = y - 0.344136 * (cb - 128) - 0.714136 * (cr - 128);
  const double b = y + 1.772 * (cb - 128);
  auto q = [](double v) { return clamp_u8(static_cast<int>(std::floor(v + 0.5))); };
  return {q(r), q(g), q(b)};
}

inline std::array<std::uint8_t, 3> rgb_to_ycbcr(int r, int g, int b) {
  const double y = 0.299 * r + 0.587 * g + 0.114 * b;
  const double cb = 128 - 0.168736 * r - 0.331264 * g + 0.5 * b;
  const double cr = 128 + 0.5 * r - 0.418688 * g - 0.081312 * b;
  auto q = [](double v) { return clamp_u8(static_cast<int>(std::floor(v + 0.5))); };
  return {q(y), q(cb), q(cr)};
}

/// Binary PPM (P6) export of a frame, for visual inspection.
inline void write_ppm(std::ostream& out, const Frame& f) {
  out << "P6\n" << f.width() << " " << f.height() << "\n255\n";
  for (int y = 0; y < f.height(); ++y)
    for (int x = 0; x < f.width(); ++x) {
      auto rgb = ycbcr_to_rgb(f.at(0, x, y), f.at(1, x, y), f.at(2, x, y));
      out.write(reinterpret_cast<const char*>(rgb.data()), 3);
    }
}

}  // namespace fbv
