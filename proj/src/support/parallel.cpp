#include "mehler/support/parallel.hpp"

#include <atomic>

namespace mehler {

namespace {
std::atomic<unsigned> g_jobs{0};
}

void set_worker_count(unsigned jobs) { g_jobs.store(jobs); }

unsigned worker_count() {
    const unsigned j = g_jobs.load();
    if (j != 0) return j;
    return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace mehler
