#pragma once

namespace pin {

inline constexpr const char* kLibraryVersion = "0.1.0";

/// Version tag written into model files; bumped on breaking format changes.
inline constexpr const char* kModelFormatVersion = "pin-model-v1";

} // namespace pin
