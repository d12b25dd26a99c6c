#pragma once

namespace sbl {
inline constexpr const char* kVersion = "sbl 0.1.0";
}
