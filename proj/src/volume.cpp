#include "volume.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace aepnet {

static_assert(std::endian::native == std::endian::little,
              "RVOL payloads are little-endian; big-endian hosts need byte swapping");

namespace {

namespace fs = std::filesystem;

std::string payload_name(const fs::path& header) {
  fs::path p = header.filename();
  p.replace_extension(".bin");
  return p.string();
}

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw std::runtime_error("RVOL " + path + ": " + what);
}

// caller errors (bad tensor handed to the writer), as opposed to file problems
[[noreturn]] void reject(const std::string& path, const std::string& what) {
  throw std::invalid_argument("RVOL " + path + ": " + what);
}

}  // namespace

void write_volume(const std::string& header_path, const Tensor& t, VolDtype dtype) {
  if (t.shape.size() != 3 && t.shape.size() != 4)
    reject(header_path, "tensor must be rank 3 or 4, got " + shape_str(t.shape));
  const int channels = t.shape.size() == 4 ? t.shape[0] : 1;
  const Shape spatial(t.shape.end() - 3, t.shape.end());

  const fs::path header(header_path);
  const std::string payload = payload_name(header);

  std::ofstream h(header, std::ios::trunc);
  if (!h) fail(header_path, "cannot open header for writing");
  h << "RVOL 1\n";
  h << "dims: " << spatial[0] << " " << spatial[1] << " " << spatial[2] << "\n";
  h << "channels: " << channels << "\n";
  h << "dtype: " << (dtype == VolDtype::f32 ? "f32" : "u8") << "\n";
  h << "byteorder: little-endian\n";
  h << "order: row-major\n";
  h << "payload: " << payload << "\n";
  if (!h.flush()) fail(header_path, "header write failed");

  std::ofstream b(header.parent_path() / payload, std::ios::binary | std::ios::trunc);
  if (!b) fail(header_path, "cannot open payload for writing");
  if (dtype == VolDtype::f32) {
    std::vector<float> buf(t.numel());
    for (std::size_t i = 0; i < t.numel(); ++i) buf[i] = static_cast<float>(t[i]);
    b.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
  } else {
    std::vector<std::uint8_t> buf(t.numel());
    for (std::size_t i = 0; i < t.numel(); ++i) {
      const double v = t[i];
      if (v != std::floor(v) || v < 0.0 || v > 255.0)
        reject(header_path, "u8 payload requires integral values in [0,255], found " +
                                std::to_string(v));
      buf[i] = static_cast<std::uint8_t>(v);
    }
    b.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
  }
  if (!b.flush()) fail(header_path, "payload write failed");
}

Tensor read_volume(const std::string& header_path) {
  std::ifstream h(header_path);
  if (!h) fail(header_path, "cannot open header");
  std::string magic;
  int version = 0;
  h >> magic >> version;
  if (magic != "RVOL" || version != 1)
    fail(header_path, "bad magic/version '" + magic + " " + std::to_string(version) + "'");

  Shape spatial;
  int channels = -1;
  std::string dtype, byteorder, order, payload;
  std::string line;
  std::getline(h, line);  // rest of the magic line
  while (std::getline(h, line)) {
    const std::size_t colon = line.find(':');
    if (colon == std::string::npos) {
      if (line.empty()) continue;
      fail(header_path, "malformed header line '" + line + "'");
    }
    const std::string key = line.substr(0, colon);
    std::istringstream val(line.substr(colon + 1));
    if (key == "dims") {
      int d, hh, w;
      if (!(val >> d >> hh >> w) || d < 1 || hh < 1 || w < 1)
        fail(header_path, "bad dims '" + line + "'");
      spatial = {d, hh, w};
    } else if (key == "channels") {
      if (!(val >> channels) || channels < 1) fail(header_path, "bad channels '" + line + "'");
    } else if (key == "dtype") {
      val >> dtype;
    } else if (key == "byteorder") {
      val >> byteorder;
    } else if (key == "order") {
      val >> order;
    } else if (key == "payload") {
      val >> payload;
    } else {
      fail(header_path, "unknown header key '" + key + "'");
    }
  }
  if (spatial.empty() || channels < 1 || dtype.empty() || payload.empty())
    fail(header_path, "header missing required keys");
  if (dtype != "f32" && dtype != "u8") fail(header_path, "unknown dtype '" + dtype + "'");
  if (byteorder != "little-endian") fail(header_path, "unsupported byteorder '" + byteorder + "'");
  if (order != "row-major") fail(header_path, "unsupported order '" + order + "'");

  const std::size_t numel = static_cast<std::size_t>(channels) * shape_numel(spatial);
  const std::size_t width = dtype == "f32" ? sizeof(float) : 1;
  const fs::path payload_path = fs::path(header_path).parent_path() / payload;

  std::error_code ec;
  const auto actual = fs::file_size(payload_path, ec);
  if (ec) fail(header_path, "payload '" + payload + "' missing");
  if (actual != numel * width)
    fail(header_path, "payload size mismatch: expected " + std::to_string(numel * width) +
                          " bytes, got " + std::to_string(actual));

  std::ifstream b(payload_path, std::ios::binary);
  if (!b) fail(header_path, "cannot open payload");
  Shape shape = spatial;
  if (channels > 1) shape.insert(shape.begin(), channels);
  Tensor t = Tensor::zeros(shape);
  if (dtype == "f32") {
    std::vector<float> buf(numel);
    b.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(numel * width));
    for (std::size_t i = 0; i < numel; ++i) t[i] = static_cast<double>(buf[i]);
  } else {
    std::vector<std::uint8_t> buf(numel);
    b.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(numel));
    for (std::size_t i = 0; i < numel; ++i) t[i] = static_cast<double>(buf[i]);
  }
  if (!b) fail(header_path, "payload read failed");
  return t;
}

}  // namespace aepnet
