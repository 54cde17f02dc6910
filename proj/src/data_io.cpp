#include "nvc/data_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "nvc/error.hpp"

namespace nvc {

namespace {

constexpr double kKr = 0.299;
constexpr double kKb = 0.114;
constexpr double kKg = 1.0 - kKr - kKb;

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v * 255.0), 0L, 255L));
}

// Chroma sample (i, j) sits at the centre of luma block (2i..2i+1, 2j..2j+1).
std::vector<double> upsample_chroma(const std::vector<std::uint8_t>& plane, int cw, int ch) {
  const int w = cw * 2;
  const int h = ch * 2;
  std::vector<double> out(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    const double sy = std::clamp(y / 2.0 - 0.25, 0.0, ch - 1.0);
    const int y0 = static_cast<int>(std::floor(sy));
    const int y1 = std::min(y0 + 1, ch - 1);
    const double fy = sy - y0;
    for (int x = 0; x < w; ++x) {
      const double sx = std::clamp(x / 2.0 - 0.25, 0.0, cw - 1.0);
      const int x0 = static_cast<int>(std::floor(sx));
      const int x1 = std::min(x0 + 1, cw - 1);
      const double fx = sx - x0;
      const double a = plane[static_cast<std::size_t>(y0) * cw + x0];
      const double b = plane[static_cast<std::size_t>(y0) * cw + x1];
      const double c = plane[static_cast<std::size_t>(y1) * cw + x0];
      const double d = plane[static_cast<std::size_t>(y1) * cw + x1];
      out[static_cast<std::size_t>(y) * w + x] =
          ((1 - fy) * ((1 - fx) * a + fx * b) + fy * ((1 - fx) * c + fx * d)) / 255.0;
    }
  }
  return out;
}

std::vector<std::uint8_t> downsample_chroma(const Frame& yuv, int c) {
  const int cw = yuv.width / 2;
  const int ch = yuv.height / 2;
  std::vector<std::uint8_t> out(static_cast<std::size_t>(cw) * ch);
  for (int y = 0; y < ch; ++y) {
    for (int x = 0; x < cw; ++x) {
      const double s = yuv.at(c, 2 * y, 2 * x) + yuv.at(c, 2 * y, 2 * x + 1) +
                       yuv.at(c, 2 * y + 1, 2 * x) + yuv.at(c, 2 * y + 1, 2 * x + 1);
      out[static_cast<std::size_t>(y) * cw + x] = to_byte(s / 4.0);
    }
  }
  return out;
}

void require_even(int width, int height) {
  if (width <= 0 || height <= 0 || width % 2 != 0 || height % 2 != 0) {
    throw Error(ErrorCode::kOddDimensions,
                "4:2:0 needs positive even dimensions, got " + std::to_string(width) + "x" +
                    std::to_string(height));
  }
}

}  // namespace

Frame frame_from_planes(const Yuv420Planes& planes) {
  Frame f(planes.width, planes.height, ColorSpace::kYuv);
  const std::size_t n = f.plane_size();
  for (std::size_t i = 0; i < n; ++i) f.data[i] = planes.y[i] / 255.0;
  const auto u = upsample_chroma(planes.u, planes.width / 2, planes.height / 2);
  const auto v = upsample_chroma(planes.v, planes.width / 2, planes.height / 2);
  std::copy(u.begin(), u.end(), f.data.begin() + n);
  std::copy(v.begin(), v.end(), f.data.begin() + 2 * n);
  f.native = planes;
  return f;
}

VideoSequence read_yuv420(const std::filesystem::path& path, int width, int height,
                          int n_frames) {
  require_even(width, height);
  const std::size_t luma = static_cast<std::size_t>(width) * height;
  const std::size_t chroma = luma / 4;
  const std::size_t frame_bytes = luma + 2 * chroma;

  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0, std::ios::beg);
  if (n_frames < 0 || size < frame_bytes * static_cast<std::size_t>(n_frames)) {
    throw Error(ErrorCode::kTruncatedFile,
                path.string() + " holds " + std::to_string(size) + " bytes, need " +
                    std::to_string(frame_bytes * static_cast<std::size_t>(std::max(n_frames, 0))));
  }

  VideoSequence seq;
  seq.name = path.stem().string();
  seq.frames.reserve(n_frames);
  for (int i = 0; i < n_frames; ++i) {
    Yuv420Planes p{width, height, std::vector<std::uint8_t>(luma), std::vector<std::uint8_t>(chroma),
                   std::vector<std::uint8_t>(chroma)};
    in.read(reinterpret_cast<char*>(p.y.data()), static_cast<std::streamsize>(luma));
    in.read(reinterpret_cast<char*>(p.u.data()), static_cast<std::streamsize>(chroma));
    in.read(reinterpret_cast<char*>(p.v.data()), static_cast<std::streamsize>(chroma));
    if (!in) throw Error(ErrorCode::kTruncatedFile, "short read in " + path.string());
    seq.frames.push_back(frame_from_planes(p));
  }
  return seq;
}

void write_yuv420(const std::filesystem::path& path, std::span<const Frame> frames) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  for (const Frame& f : frames) {
    const Yuv420Planes p = to_yuv420_planes(f);
    out.write(reinterpret_cast<const char*>(p.y.data()), static_cast<std::streamsize>(p.y.size()));
    out.write(reinterpret_cast<const char*>(p.u.data()), static_cast<std::streamsize>(p.u.size()));
    out.write(reinterpret_cast<const char*>(p.v.data()), static_cast<std::streamsize>(p.v.size()));
  }
}

Frame yuv_to_rgb(const Frame& frame) {
  if (frame.color_space == ColorSpace::kRgb) return frame;
  Frame out(frame.width, frame.height, ColorSpace::kRgb);
  out.native = frame.native;
  const std::size_t n = frame.plane_size();
  for (std::size_t i = 0; i < n; ++i) {
    const double yp = (255.0 * frame.data[i] - 16.0) / 219.0;
    const double pb = (255.0 * frame.data[n + i] - 128.0) / 224.0;
    const double pr = (255.0 * frame.data[2 * n + i] - 128.0) / 224.0;
    const double r = yp + 2.0 * (1.0 - kKr) * pr;
    const double b = yp + 2.0 * (1.0 - kKb) * pb;
    const double g = (yp - kKr * r - kKb * b) / kKg;
    out.data[i] = std::clamp(r, 0.0, 1.0);
    out.data[n + i] = std::clamp(g, 0.0, 1.0);
    out.data[2 * n + i] = std::clamp(b, 0.0, 1.0);
  }
  return out;
}

Frame rgb_to_yuv(const Frame& frame) {
  if (frame.color_space == ColorSpace::kYuv) return frame;
  Frame out(frame.width, frame.height, ColorSpace::kYuv);
  const std::size_t n = frame.plane_size();
  for (std::size_t i = 0; i < n; ++i) {
    const double r = frame.data[i];
    const double g = frame.data[n + i];
    const double b = frame.data[2 * n + i];
    const double yp = kKr * r + kKg * g + kKb * b;
    const double pb = (b - yp) / (2.0 * (1.0 - kKb));
    const double pr = (r - yp) / (2.0 * (1.0 - kKr));
    out.data[i] = (16.0 + 219.0 * yp) / 255.0;
    out.data[n + i] = (128.0 + 224.0 * pb) / 255.0;
    out.data[2 * n + i] = (128.0 + 224.0 * pr) / 255.0;
  }
  if (frame.width % 2 == 0 && frame.height % 2 == 0) {
    if (frame.native) {
      out.native = frame.native;
    } else {
      Yuv420Planes p{frame.width, frame.height, std::vector<std::uint8_t>(n), {}, {}};
      for (std::size_t i = 0; i < n; ++i) p.y[i] = to_byte(out.data[i]);
      p.u = downsample_chroma(out, 1);
      p.v = downsample_chroma(out, 2);
      out.native = std::move(p);
    }
  }
  return out;
}

Yuv420Planes to_yuv420_planes(const Frame& frame) {
  if (frame.native) return *frame.native;
  require_even(frame.width, frame.height);
  Frame yuv = frame.color_space == ColorSpace::kYuv ? frame : rgb_to_yuv(frame);
  if (yuv.native) return *yuv.native;
  Yuv420Planes p{frame.width, frame.height, std::vector<std::uint8_t>(frame.plane_size()), {}, {}};
  for (std::size_t i = 0; i < frame.plane_size(); ++i) p.y[i] = to_byte(yuv.data[i]);
  p.u = downsample_chroma(yuv, 1);
  p.v = downsample_chroma(yuv, 2);
  return p;
}

PaddedFrame pad_to_multiple(const Frame& frame, int m) {
  if (m < 1) throw Error(ErrorCode::kInvalidConfig, "pad multiple must be >= 1");
  const int w = (frame.width + m - 1) / m * m;
  const int h = (frame.height + m - 1) / m * m;
  PaddedFrame out{Frame(w, h, frame.color_space), frame.width, frame.height};
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < h; ++y) {
      const int sy = std::min(y, frame.height - 1);
      for (int x = 0; x < w; ++x) {
        out.frame.at(c, y, x) = frame.at(c, sy, std::min(x, frame.width - 1));
      }
    }
  }
  if (w == frame.width && h == frame.height) out.frame.native = frame.native;
  return out;
}

Frame crop_region(const Frame& frame, int x0, int y0, int width, int height) {
  if (x0 < 0 || y0 < 0 || width <= 0 || height <= 0 || x0 + width > frame.width ||
      y0 + height > frame.height) {
    throw Error(ErrorCode::kDimMismatch, "crop region outside frame");
  }
  Frame out(width, height, frame.color_space);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) out.at(c, y, x) = frame.at(c, y0 + y, x0 + x);
    }
  }
  return out;
}

Frame crop(const Frame& frame, int width, int height) {
  if (width == frame.width && height == frame.height) return frame;
  return crop_region(frame, 0, 0, width, height);
}

Frame read_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw Error(ErrorCode::kIoError, "cannot read png " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&image);
    throw Error(ErrorCode::kIoError, "cannot decode png " + path.string() + ": " + image.message);
  }
  Frame f(static_cast<int>(image.width), static_cast<int>(image.height), ColorSpace::kRgb);
  const std::size_t n = f.plane_size();
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) f.data[c * n + i] = buffer[3 * i + c] / 255.0;
  }
  return f;
}

void write_png_rgb8(const std::filesystem::path& path, int width, int height,
                    std::span<const std::uint8_t> rgb) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, rgb.data(), 0, nullptr)) {
    throw Error(ErrorCode::kIoError, "cannot write png " + path.string() + ": " + image.message);
  }
}

void write_png(const Frame& frame, const std::filesystem::path& path) {
  const Frame rgb = yuv_to_rgb(frame);
  const std::size_t n = rgb.plane_size();
  std::vector<std::uint8_t> buffer(3 * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) buffer[3 * i + c] = to_byte(rgb.data[c * n + i]);
  }
  write_png_rgb8(path, rgb.width, rgb.height, buffer);
}

DatasetManifest load_manifest(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw Error(ErrorCode::kManifestError, "cannot open " + manifest_path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kManifestError, manifest_path.string() + ": " + e.what());
  }
  DatasetManifest m;
  m.root = manifest_path.parent_path();
  if (!j.contains("sequences") || !j.at("sequences").is_array()) {
    throw Error(ErrorCode::kManifestError, "manifest needs a 'sequences' array");
  }
  try {
    for (const auto& s : j.at("sequences")) {
      SequenceEntry e;
      e.name = s.at("name").get<std::string>();
      e.format = s.value("format", std::string("yuv420"));
      e.path = s.at("path").get<std::string>();
      e.width = s.at("width").get<int>();
      e.height = s.at("height").get<int>();
      e.frames = s.at("frames").get<int>();
      e.fps = s.value("fps", 30.0);
      if (e.format != "yuv420" && e.format != "png") {
        throw Error(ErrorCode::kManifestError, "unknown format '" + e.format + "'");
      }
      m.sequences.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kManifestError, manifest_path.string() + ": " + e.what());
  }
  return m;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& manifest_path) {
  nlohmann::json seqs = nlohmann::json::array();
  for (const auto& e : manifest.sequences) {
    seqs.push_back({{"name", e.name}, {"format", e.format}, {"path", e.path}, {"width", e.width},
                    {"height", e.height}, {"frames", e.frames}, {"fps", e.fps}});
  }
  std::ofstream out(manifest_path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + manifest_path.string());
  out << nlohmann::json{{"sequences", seqs}}.dump(2) << '\n';
}

VideoSequence load_sequence(const DatasetManifest& manifest, const SequenceEntry& entry,
                            int max_frames) {
  const int n = max_frames < 0 ? entry.frames : std::min(entry.frames, max_frames);
  VideoSequence seq;
  if (entry.format == "yuv420") {
    seq = read_yuv420(manifest.root / entry.path, entry.width, entry.height, n);
    for (Frame& f : seq.frames) f = yuv_to_rgb(f);
  } else {
    for (int i = 0; i < n; ++i) {
      char name[512];
      std::snprintf(name, sizeof(name), entry.path.c_str(), i);
      Frame f = read_png(manifest.root / name);
      if (f.width != entry.width || f.height != entry.height) {
        throw Error(ErrorCode::kManifestError, std::string(name) + " has unexpected dimensions");
      }
      seq.frames.push_back(std::move(f));
    }
  }
  seq.name = entry.name;
  seq.fps = entry.fps;
  return seq;
}

ClipSampler::ClipSampler(std::vector<VideoSequence> sequences, int clip_len, int patch,
                         std::uint64_t seed)
    : sequences_(std::move(sequences)), clip_len_(clip_len), patch_(patch), rng_(seed) {
  if (clip_len < 1 || patch < 1) throw Error(ErrorCode::kInvalidConfig, "clip_len and patch must be >= 1");
  for (std::size_t i = 0; i < sequences_.size(); ++i) {
    const auto& s = sequences_[i];
    if (static_cast<int>(s.frames.size()) < clip_len) continue;
    if (s.frames.front().width < patch || s.frames.front().height < patch) continue;
    eligible_.push_back(i);
  }
  if (eligible_.empty()) {
    throw Error(ErrorCode::kEmptyDataset, "no sequence admits a " + std::to_string(clip_len) +
                                              "-frame clip of " + std::to_string(patch) + "x" +
                                              std::to_string(patch) + " patches");
  }
}

ClipCrop ClipSampler::next_crop() {
  ClipCrop c;
  c.sequence = eligible_[std::uniform_int_distribution<std::size_t>(0, eligible_.size() - 1)(rng_)];
  const auto& s = sequences_[c.sequence];
  const int frames = static_cast<int>(s.frames.size());
  c.first_frame = std::uniform_int_distribution<int>(0, frames - clip_len_)(rng_);
  c.x = std::uniform_int_distribution<int>(0, s.frames.front().width - patch_)(rng_);
  c.y = std::uniform_int_distribution<int>(0, s.frames.front().height - patch_)(rng_);
  return c;
}

Clip ClipSampler::next() {
  Clip clip;
  clip.crop = next_crop();
  const auto& s = sequences_[clip.crop.sequence];
  clip.frames.reserve(clip_len_);
  for (int t = 0; t < clip_len_; ++t) {
    clip.frames.push_back(crop_region(s.frames[clip.crop.first_frame + t], clip.crop.x,
                                      clip.crop.y, patch_, patch_));
  }
  return clip;
}

std::vector<Clip> ClipSampler::next_batch(int batch_size) {
  std::vector<Clip> out;
  out.reserve(batch_size);
  for (int i = 0; i < batch_size; ++i) out.push_back(next());
  return out;
}

ClipSampler sample_training_clips(const std::filesystem::path& dataset_root, int clip_len,
                                  int patch, std::uint64_t seed) {
  const auto manifest = load_manifest(dataset_root / "manifest.json");
  std::vector<VideoSequence> seqs;
  for (const auto& e : manifest.sequences) seqs.push_back(load_sequence(manifest, e));
  return ClipSampler(std::move(seqs), clip_len, patch, seed);
}

}  // namespace nvc
