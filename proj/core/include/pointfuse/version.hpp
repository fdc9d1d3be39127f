#pragma once

namespace pointfuse {

inline constexpr const char* kVersion = "0.1.0";

} // namespace pointfuse
