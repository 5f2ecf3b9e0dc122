#include "npnet/common.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

namespace npnet {

int thread_count() {
    static const int cached = [] {
        const char* env = std::getenv("NPNET_THREADS");
        if (!env || !*env) return 0;
        char* end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (end == env || v < 0) return 0;
        return static_cast<int>(std::min<long>(v, 256));
    }();
    return cached;
}

void parallel_for(std::size_t n, std::size_t grain,
                  const std::function<void(std::size_t, std::size_t)>& fn) {
    const int workers = thread_count();
    if (workers <= 1 || n < 2 * grain) {
        fn(0, n);
        return;
    }
    const std::size_t chunks = std::min<std::size_t>(static_cast<std::size_t>(workers),
                                                     std::max<std::size_t>(1, n / grain));
    if (chunks <= 1) {
        fn(0, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(chunks);
    const std::size_t step = (n + chunks - 1) / chunks;
    for (std::size_t c = 0; c < chunks; ++c) {
        const std::size_t lo = c * step;
        const std::size_t hi = std::min(n, lo + step);
        if (lo >= hi) break;
        pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
    }
    for (auto& t : pool) t.join();
}

std::string version_string() { return "0.1.0"; }

} // namespace npnet
