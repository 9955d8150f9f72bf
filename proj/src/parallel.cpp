#include "shelab/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace shelab {

namespace {
std::atomic<std::size_t> g_threads{0};
}

std::size_t thread_count() {
    if (auto n = g_threads.load()) return n;
    if (const char* env = std::getenv("SHELAB_THREADS")) {
        try {
            long v = std::stol(env);
            if (v > 0) return static_cast<std::size_t>(v);
        } catch (...) {
        }
    }
    return 1;
}

void set_thread_count(std::size_t n) { g_threads.store(n); }

}  // namespace shelab
