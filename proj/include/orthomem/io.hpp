#pragma once

// On-disk formats.
//
// OST1 tensor file, all integers little-endian:
//   "OST1" | u16 version (= 1) | u16 ndim | ndim x u64 dims | payload
// where the payload is prod(dims) IEEE-754 doubles, little-endian, row-major.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "orthomem/apfe.hpp"
#include "orthomem/linalg.hpp"
#include "orthomem/metrics.hpp"

namespace orthomem {

struct Ost1Tensor {
  std::vector<std::uint64_t> dims;
  std::vector<double> data;

  std::uint64_t element_count() const;
};

std::vector<std::uint8_t> encode_ost1(const Ost1Tensor& t);
/// Throws InvalidArgument on bad magic, version, or payload length.
Ost1Tensor decode_ost1(std::span<const std::uint8_t> bytes);

Ost1Tensor read_ost1(const std::filesystem::path& path);
void write_ost1(const std::filesystem::path& path, const Ost1Tensor& t);

/// 2-D tensor to matrix; rejects other ranks and non-finite entries.
MatrixXd to_matrix(const Ost1Tensor& t);
Ost1Tensor from_matrix(const MatrixXd& m);
Tensor4 to_tensor4(const Ost1Tensor& t);
Ost1Tensor from_tensor4(const Tensor4& t);
VectorXd to_vector(const Ost1Tensor& t);
Ost1Tensor from_vector(const VectorXd& v);
/// 2-D tensor of exact 0/1 values.
BinaryMask to_mask(const Ost1Tensor& t);

/// Binary PGM (P5, maxval 255); pixels > 127 are foreground.
BinaryMask read_pgm_mask(const std::filesystem::path& path);
BinaryMask decode_pgm_mask(std::string_view bytes);
/// Foreground 255, background 0.
void write_pgm_mask(const std::filesystem::path& path, const BinaryMask& mask);

/// APFE weights as OST1 tensors plus a JSON manifest:
///   {"format": "OST1", "tensors": [{"name": "phi_plus.kernel",
///     "file": "phi_plus.kernel.ost1", "shape": [C, C, 3, 3]}, ...]}
/// Required names: phi_plus.{kernel,scale,shift}, phi_minus.{kernel,scale,shift},
/// gate.weight (C x 2C), gate.bias (C). Files resolve relative to the manifest.
BranchWeights load_weights(const std::filesystem::path& manifest);
/// Writes manifest.json and one .ost1 per tensor into `dir`; returns the manifest path.
std::filesystem::path save_weights(const std::filesystem::path& dir, const BranchWeights& weights);

/// Whole-file read; throws IoError.
std::string read_file(const std::filesystem::path& path);
/// Write to a temporary sibling and rename over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// 17 significant digits; "inf", "-inf" and "nan" for non-finite values.
std::string format_double(double x);

/// Quote a CSV field when it contains a comma, quote or line break.
std::string csv_field(std::string_view s);

}  // namespace orthomem
