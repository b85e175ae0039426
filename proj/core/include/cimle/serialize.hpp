#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "cimle/tensor.hpp"

namespace cimle {

/// Raised when a container or checkpoint fails its magic, structure, or
/// CRC check. The CLI maps this to exit code 4.
struct CorruptFileError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Binary container, magic "CIML1". Layout:
//   magic[5] | kind u8 | ndims u8 | dims i32le * ndims | payload
// kind 0: label map, dims (H, W, P), payload H*W class ids (u8)
// kind 1: tensor,    dims (H, W, C), payload H*W*C doubles (f64le, row-major)
// kind 2: dataset,   dims (N), payload N * (label-map record, tensor record)
// Records inside a dataset carry their own magic, so each is self-describing.

void save_layout(std::ostream& os, const SemanticLayout& layout);
void save_image(std::ostream& os, const ImageTensor& image);
void save_dataset(std::ostream& os, const Dataset& dataset);
SemanticLayout load_layout(std::istream& is);
ImageTensor load_image(std::istream& is);
Dataset load_dataset(std::istream& is);

void save_layout_file(const std::string& path, const SemanticLayout& layout);
void save_image_file(const std::string& path, const ImageTensor& image);
void save_dataset_file(const std::string& path, const Dataset& dataset);
SemanticLayout load_layout_file(const std::string& path);
ImageTensor load_image_file(const std::string& path);
Dataset load_dataset_file(const std::string& path);

/// 8-bit binary PPM (P6). Values are clamped to [0,1] and rounded; the
/// image must have 3 channels.
void write_ppm(const std::string& path, const ImageTensor& image);

/// CRC-32 (IEEE 802.3 polynomial, reflected). Used as the checkpoint trailer.
std::uint32_t crc32(const unsigned char* data, std::size_t n,
                    std::uint32_t seed = 0);

namespace io {
void put_u8(std::ostream& os, std::uint8_t v);
void put_i32(std::ostream& os, std::int32_t v);
void put_u32(std::ostream& os, std::uint32_t v);
void put_u64(std::ostream& os, std::uint64_t v);
void put_f64(std::ostream& os, double v);
std::uint8_t get_u8(std::istream& is);
std::int32_t get_i32(std::istream& is);
std::uint32_t get_u32(std::istream& is);
std::uint64_t get_u64(std::istream& is);
double get_f64(std::istream& is);
} // namespace io

} // namespace cimle
