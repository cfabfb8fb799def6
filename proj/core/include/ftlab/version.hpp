#pragma once

namespace ftlab {

// Embedded in every artifact the pipeline writes. Bump on format changes.
inline constexpr const char* kVersion = "ftlab 0.1.0";

}  // namespace ftlab
