#include "mixgen/common.hpp"

#include <cstdarg>
#include <mutex>

namespace mixgen {

std::atomic<uint64_t>& warn_count() {
    static std::atomic<uint64_t> counter{0};
    return counter;
}

void warn(const std::string& msg) {
    warn_count()++;
    std::fprintf(stderr, "[mixgen warn] %s\n", msg.c_str());
}

namespace {
int g_threads = 0;
}

int default_threads() {
    if (g_threads > 0) return g_threads;
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : int(hc);
}

void set_default_threads(int n) { g_threads = n; }

void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& body,
                  int n_threads) {
    if (n <= 0) return;
    int nt = n_threads > 0 ? n_threads : default_threads();
    if (nt > n) nt = int(n);
    if (nt <= 1) {
        body(0, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(size_t(nt));
    int64_t chunk = (n + nt - 1) / nt;
    std::exception_ptr err;
    std::mutex err_mtx;
    for (int t = 0; t < nt; ++t) {
        int64_t lo = t * chunk;
        int64_t hi = std::min<int64_t>(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&, lo, hi] {
            try {
                body(lo, hi);
            } catch (...) {
                std::lock_guard<std::mutex> g(err_mtx);
                if (!err) err = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

std::string format_str(const char* fmt, ...) {
    va_list args;
    va_start(args, fmt);
    char buf[1024];
    vsnprintf(buf, sizeof(buf), fmt, args);
    va_end(args);
    return std::string(buf);
}

}  // namespace mixgen
