#pragma once

#include <string_view>

namespace ddfh {

inline constexpr std::string_view kEngineName = "ddfh";
inline constexpr std::string_view kEngineVersion = "1.0.0";

}  // namespace ddfh
