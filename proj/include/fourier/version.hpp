#pragma once

namespace fourier {

inline constexpr const char* version_string = "0.1.0";

}  // namespace fourier
