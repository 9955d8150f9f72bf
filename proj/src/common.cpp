#include "shelab/common.hpp"

#include <iostream>
#include <mutex>

namespace shelab {

namespace {
std::mutex g_warn_mu;
std::function<void(const std::string&)> g_warn_handler;
}  // namespace

void warn(const std::string& message) {
    std::lock_guard lock(g_warn_mu);
    if (g_warn_handler)
        g_warn_handler(message);
    else
        std::cerr << "warning: " << message << '\n';
}

void set_warning_handler(std::function<void(const std::string&)> handler) {
    std::lock_guard lock(g_warn_mu);
    g_warn_handler = std::move(handler);
}

}  // namespace shelab
