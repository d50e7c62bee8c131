// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>

#include "binoise/tensor.hpp"

namespace binoise {

/// Writes a 1-channel tensor as binary PGM (P5) or a 3-channel tensor as
/// binary PPM (P6), maxval 255. The tensor's value range maps linearly onto
/// 0..255 with round-half-up. Throws std::domain_error for out-of-range values.
void write_image(const std::filesystem::path& path, const Tensor& image);

/// Encodes to the in-memory file representation used by write_image.
std::string encode_image(const Tensor& image);

/// Reads a binary PGM/PPM with any maxval in 1..255; codes map back linearly
/// into `range`. Parse errors name the byte offset.
Tensor read_image(const std::filesystem::path& path, ValueRange range = {});
Tensor decode_image(const std::string& bytes, ValueRange range = {});

}  // namespace binoise
