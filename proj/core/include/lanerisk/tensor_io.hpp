#pragma once

#include <filesystem>
#include <iosfwd>

#include "lanerisk/tensor.hpp"

namespace lanerisk {

/// Raw tensor file format:
///   magic "TNSR", u8 version (=1), u8 dtype (1 = f32, 2 = f64), u8 rank,
///   rank x u32 little-endian extents, then row-major data little-endian.
enum class TensorDType : unsigned char { F32 = 1, F64 = 2 };

void write_tensor(std::ostream& os, const Tensor& t, TensorDType dtype = TensorDType::F64);
void write_tensor(const std::filesystem::path& path, const Tensor& t,
                  TensorDType dtype = TensorDType::F64);

/// FormatError messages name the byte offset of the first bad field.
Tensor read_tensor(std::istream& is);
Tensor read_tensor(const std::filesystem::path& path);

}  // namespace lanerisk
