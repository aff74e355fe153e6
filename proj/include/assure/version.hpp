#pragma once

#define ASSURE_VERSION "0.1.0"

namespace assure {
inline constexpr const char* version() { return ASSURE_VERSION; }
}  // namespace assure
