#include "isek/log.hpp"

#include <iostream>
#include <utility>

namespace isek {

namespace {

// Per-thread so concurrent simulations (e.g. `run --trials n`) can each
// capture their own diagnostics without clobbering one another.
WarnHandler& handler_slot() {
    thread_local WarnHandler handler;
    return handler;
}

}  // namespace

void set_warn_handler(WarnHandler handler) {
    handler_slot() = std::move(handler);
}

void warn(const std::string& message) {
    const WarnHandler& handler = handler_slot();
    if (handler) {
        handler(message);
    } else {
        std::cerr << "[warn] " << message << '\n';
    }
}

}  // namespace isek
