#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "binaural/signal.hpp"

namespace binaural {

// RIFF/WAVE, PCM 16-bit little endian, 1 or 2 channels. Samples map to
// [-1, 1) by division by 32768; writing clips and rounds to nearest, and
// rejects non-finite samples.

AudioBuffer decode_wav(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_wav(const AudioBuffer& audio);

AudioBuffer read_wav(const std::filesystem::path& path);
void write_wav(const AudioBuffer& audio, const std::filesystem::path& path);

}  // namespace binaural
