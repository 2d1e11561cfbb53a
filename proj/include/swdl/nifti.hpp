#pragma once

// Minimal NIfTI-1 subset: uncompressed single-file .nii, 3 spatial dims,
// int16 / float32 payloads, little- or big-endian sources (detected through
// the header-size field). Writing always emits float32 little-endian with
// vox_offset 352. qform/sform are ignored; axis order is fixed to (z,y,x).

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "swdl/volume.hpp"

namespace swdl {

class NiftiError : public std::runtime_error {
 public:
  explicit NiftiError(const std::string& what) : std::runtime_error("nifti: " + what) {}
};

struct NiftiHeader {
  Shape3 dims;
  std::int16_t datatype = 16;  // 4 = int16, 16 = float32
  Spacing3 pixdim;
  float scl_slope = 1.f;
  float scl_inter = 0.f;
  float vox_offset = 352.f;
  bool swapped = false;  // source had opposite endianness
};

NiftiHeader parse_nifti_header(const std::vector<std::uint8_t>& bytes);

Volume read_nifti(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> write_nifti(const Volume& v);

Volume load_nifti(const std::string& path);
void save_nifti(const Volume& v, const std::string& path);

// Masks travel as float32 NIfTI with values 0/1.
Mask load_mask_nifti(const std::string& path);
void save_mask_nifti(const Mask& m, Spacing3 spacing, const std::string& path);

}  // namespace swdl
