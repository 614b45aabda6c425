#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ddci/phantom.hpp"
#include "ddci/tensor.hpp"
#include "ddci/training.hpp"

namespace ddci {

/// Tensor file format, magic "DDT1" (see docs/FORMATS.md):
///   magic(4) | dtype u8 (1 = f64 real, 2 = f64 complex interleaved) |
///   rank u8 | rank x u32 LE dims | payload f64 LE.
/// Every byte is fixed-endian, so files are platform-independent. Readers
/// validate the full header (and the implied payload length) before
/// allocating or reading the payload; all malformed inputs raise FormatError.
void write_tensor(const std::string& path, const RealTensor& t);
void write_tensor(const std::string& path, const ComplexImage& x);

RealTensor read_real_tensor(const std::string& path);
ComplexImage read_complex_image(const std::string& path);

/// In-memory encoders/decoders (used by the checkpoint container and tests).
std::vector<std::uint8_t> encode_tensor(const RealTensor& t);
std::vector<std::uint8_t> encode_tensor(const ComplexImage& x);
RealTensor decode_real_tensor(const std::uint8_t* data, std::size_t size);
ComplexImage decode_complex_image(const std::uint8_t* data, std::size_t size);

/// Checkpoint container, magic "DDCK" (layout in docs/FORMATS.md): header
/// with format version, FNV-1a digest of the embedded canonical config text,
/// training counters and Adam hyperparameters, then length-prefixed named
/// DDT1 blocks: for each parameter tensor <name>, <name>.m and <name>.v.
void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

/// 16-bit binary PGM (P5), linear min-max scaling to [0, 65535]; a constant
/// image maps to all zeros. Display artifact only.
void export_pgm(const RealTensor& img, const std::string& path);

/// FNV-1a 64-bit hash; the digest used for config compatibility.
std::uint64_t fnv1a64(const std::string& bytes);

/// Dataset directory layout: case_{idx}_{kfull|imgfull|sens}.ddt plus a
/// manifest.txt of config lines followed by one `case=` line per case.
void save_dataset(const std::string& dir, const std::vector<PhantomCase>& cases,
                  const std::vector<std::pair<std::string, std::string>>& config_lines);

struct StoredDataset {
    std::vector<PhantomCase> cases;
    std::vector<std::pair<std::string, std::string>> config;
};
StoredDataset load_dataset(const std::string& dir);

/// Writes bytes to "<path>.tmp" and renames into place, so failures never
/// leave partial outputs at the destination.
void atomic_write_file(const std::string& path, const std::vector<std::uint8_t>& bytes);
void atomic_write_text(const std::string& path, const std::string& text);

}  // namespace ddci
