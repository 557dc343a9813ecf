#include "sdae/common.hpp"

#include <atomic>

namespace sdae {

namespace {
std::atomic<int> g_threads{1};
std::atomic<bool> g_check_finite{false};
}  // namespace

void set_threads(int n) { g_threads.store(n < 1 ? 1 : n); }

int threads() { return g_threads.load(); }

void set_check_finite(bool on) { g_check_finite.store(on); }

bool check_finite() { return g_check_finite.load(); }

std::string shape_str(const std::vector<std::size_t>& shape) {
  if (shape.empty()) return "[]";
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  s += "]";
  return s;
}

}  // namespace sdae
