#include <cstdlib>
#include <string_view>

#include "kernels_impl.hpp"

namespace voxelforge::simd {

const Kernels* avx2_kernels() {
#if defined(VOXELFORGE_HAVE_AVX2)
  static const bool supported = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("sse4.2");
  }();
  return supported ? &detail::avx2_table() : nullptr;
#else
  return nullptr;
#endif
}

std::vector<const Kernels*> available_kernels() {
  std::vector<const Kernels*> out{&scalar_kernels()};
  if (const Kernels* k = avx2_kernels()) out.push_back(k);
  return out;
}

const Kernels& active() {
  static const Kernels& selected = []() -> const Kernels& {
    const char* env = std::getenv("VOXELFORGE_SIMD");
    if (env != nullptr && std::string_view(env) == "scalar") return scalar_kernels();
    if (const Kernels* k = avx2_kernels()) return *k;
    return scalar_kernels();
  }();
  return selected;
}

}  // namespace voxelforge::simd
