#pragma once

namespace mvtwin {

inline constexpr const char* library_name = "mvtwin";
inline constexpr const char* library_version = "1.0.0";

}  // namespace mvtwin
