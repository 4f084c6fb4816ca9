#include "sparc/nn/kernels.hpp"

#include <atomic>

namespace sparc::nn {

namespace {
std::atomic<int> g_kernel_threads{1};
}

void set_kernel_threads(int n) { g_kernel_threads.store(n < 1 ? 1 : n); }

int kernel_threads() { return g_kernel_threads.load(); }

}  // namespace sparc::nn
