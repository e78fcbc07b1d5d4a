#pragma once

#include <functional>
#include <string>

namespace isek {

using WarnHandler = std::function<void(const std::string&)>;

// Non-fatal diagnostics (cold starts, degenerate embeddings, capped values).
// Default handler writes to stderr; tests install their own to capture.
void warn(const std::string& message);
void set_warn_handler(WarnHandler handler);

}  // namespace isek
