#pragma once

namespace biastrace {

inline constexpr const char* kEngineVersion = "0.1.0";

}  // namespace biastrace
