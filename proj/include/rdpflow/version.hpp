#pragma once

namespace rdpflow {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace rdpflow
