#pragma once

namespace polaritonkit {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace polaritonkit
