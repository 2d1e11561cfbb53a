#include "swdl/nifti.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace swdl {

namespace {

constexpr std::int32_t kHeaderSize = 348;
constexpr std::int32_t kHeaderSizeSwapped = 0x5C010000;  // 348 byte-swapped
constexpr int kDatatypeInt16 = 4;
constexpr int kDatatypeFloat32 = 16;

template <typename T>
T read_raw(const std::vector<std::uint8_t>& b, size_t off, bool swap) {
  T v;
  std::memcpy(&v, b.data() + off, sizeof(T));
  if (swap) {
    auto* p = reinterpret_cast<std::uint8_t*>(&v);
    for (size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(p[i], p[sizeof(T) - 1 - i]);
  }
  return v;
}

template <typename T>
void write_raw(std::vector<std::uint8_t>& b, size_t off, T v) {
  std::memcpy(b.data() + off, &v, sizeof(T));
}

}  // namespace

NiftiHeader parse_nifti_header(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < size_t(kHeaderSize)) throw NiftiError("truncated header");

  const auto sizeof_hdr = read_raw<std::int32_t>(bytes, 0, false);
  bool swap = false;
  if (sizeof_hdr == kHeaderSize) {
    swap = false;
  } else if (sizeof_hdr == kHeaderSizeSwapped) {
    swap = true;
  } else {
    throw NiftiError("bad header size field " + std::to_string(sizeof_hdr));
  }

  char magic[4];
  std::memcpy(magic, bytes.data() + 344, 4);
  if (!(magic[0] == 'n' && magic[1] == '+' && magic[2] == '1' && magic[3] == '\0'))
    throw NiftiError("unsupported magic");

  NiftiHeader h;
  h.swapped = swap;
  const auto ndim = read_raw<std::int16_t>(bytes, 40, swap);
  if (ndim != 3) throw NiftiError("unsupported dim[0]=" + std::to_string(ndim));
  const int nx = read_raw<std::int16_t>(bytes, 42, swap);
  const int ny = read_raw<std::int16_t>(bytes, 44, swap);
  const int nz = read_raw<std::int16_t>(bytes, 46, swap);
  if (nx < 1 || ny < 1 || nz < 1) throw NiftiError("non-positive spatial dims");
  h.dims = Shape3{nz, ny, nx};

  h.datatype = read_raw<std::int16_t>(bytes, 70, swap);
  const auto bitpix = read_raw<std::int16_t>(bytes, 72, swap);
  if (h.datatype == kDatatypeInt16) {
    if (bitpix != 16) throw NiftiError("bitpix mismatch for int16");
  } else if (h.datatype == kDatatypeFloat32) {
    if (bitpix != 32) throw NiftiError("bitpix mismatch for float32");
  } else {
    throw NiftiError("unsupported datatype " + std::to_string(h.datatype));
  }

  const float px = read_raw<float>(bytes, 80, swap);
  const float py = read_raw<float>(bytes, 84, swap);
  const float pz = read_raw<float>(bytes, 88, swap);
  if (!(px > 0 && py > 0 && pz > 0)) throw NiftiError("non-positive pixdim");
  h.pixdim = Spacing3{double(pz), double(py), double(px)};

  h.vox_offset = read_raw<float>(bytes, 108, swap);
  if (!(h.vox_offset >= 352.f)) throw NiftiError("vox_offset below 352");
  h.scl_slope = read_raw<float>(bytes, 112, swap);
  h.scl_inter = read_raw<float>(bytes, 116, swap);
  return h;
}

Volume read_nifti(const std::vector<std::uint8_t>& bytes) {
  const NiftiHeader h = parse_nifti_header(bytes);
  const std::int64_t n = h.dims.voxels();
  const size_t elem = (h.datatype == kDatatypeInt16) ? 2 : 4;
  const size_t offset = size_t(h.vox_offset);
  if (bytes.size() < offset + size_t(n) * elem) throw NiftiError("truncated payload");

  Volume v(h.dims, h.pixdim);
  const bool apply_scale = h.scl_slope != 0.f;
  for (std::int64_t i = 0; i < n; ++i) {
    double raw;
    if (h.datatype == kDatatypeInt16)
      raw = double(read_raw<std::int16_t>(bytes, offset + size_t(i) * 2, h.swapped));
    else
      raw = double(read_raw<float>(bytes, offset + size_t(i) * 4, h.swapped));
    if (apply_scale) raw = raw * double(h.scl_slope) + double(h.scl_inter);
    if (!std::isfinite(raw)) throw NiftiError("non-finite voxel value");
    v.data[size_t(i)] = float(raw);
  }
  return v;
}

std::vector<std::uint8_t> write_nifti(const Volume& v) {
  v.validate();
  const std::int64_t n = v.shape.voxels();
  std::vector<std::uint8_t> b(352 + size_t(n) * 4, 0);

  write_raw<std::int32_t>(b, 0, kHeaderSize);
  b[39] = 'r';  // legacy "regular" flag
  write_raw<std::int16_t>(b, 40, 3);
  write_raw<std::int16_t>(b, 42, std::int16_t(v.shape.x));
  write_raw<std::int16_t>(b, 44, std::int16_t(v.shape.y));
  write_raw<std::int16_t>(b, 46, std::int16_t(v.shape.z));
  for (size_t d = 4; d <= 7; ++d) write_raw<std::int16_t>(b, 40 + 2 * d, 1);
  write_raw<std::int16_t>(b, 70, kDatatypeFloat32);
  write_raw<std::int16_t>(b, 72, 32);
  write_raw<float>(b, 80, float(v.spacing.x));
  write_raw<float>(b, 84, float(v.spacing.y));
  write_raw<float>(b, 88, float(v.spacing.z));
  write_raw<float>(b, 108, 352.f);
  write_raw<float>(b, 112, 1.f);  // scl_slope
  write_raw<float>(b, 116, 0.f);  // scl_inter
  b[344] = 'n';
  b[345] = '+';
  b[346] = '1';
  b[347] = '\0';

  for (std::int64_t i = 0; i < n; ++i) write_raw<float>(b, 352 + size_t(i) * 4, v.data[size_t(i)]);
  return b;
}

Volume load_nifti(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw NiftiError("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return read_nifti(bytes);
}

void save_nifti(const Volume& v, const std::string& path) {
  const auto bytes = write_nifti(v);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw NiftiError("cannot write " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!f) throw NiftiError("short write to " + path);
}

Mask load_mask_nifti(const std::string& path) {
  const Volume v = load_nifti(path);
  Mask m(v.shape);
  for (size_t i = 0; i < v.data.size(); ++i) m.data[i] = v.data[i] > 0.5f ? 1 : 0;
  return m;
}

void save_mask_nifti(const Mask& m, Spacing3 spacing, const std::string& path) {
  Volume v(m.shape, spacing);
  for (size_t i = 0; i < v.data.size(); ++i) v.data[i] = float(m.data[i]);
  save_nifti(v, path);
}

}  // namespace swdl
