#pragma once

#include <cstddef>

/// Byte-level vocabulary shared by every task: ids 0..255 are raw bytes,
/// followed by three specials.
namespace fourier::tokens {
inline constexpr int pad = 256;
inline constexpr int bos = 257;
inline constexpr int eos = 258;
inline constexpr std::size_t vocab_size = 259;
}  // namespace fourier::tokens
