#include <cstdlib>
#include <string>

#include "rvcp/error.hpp"
#include "rvcp/simd/kernels.hpp"

namespace rvcp::simd {

std::string_view to_string(Backend backend) {
  switch (backend) {
    case Backend::scalar: return "scalar";
    case Backend::avx2: return "avx2";
    case Backend::neon: return "neon";
  }
  return "unknown";
}

bool backend_available(Backend backend) {
  switch (backend) {
    case Backend::scalar:
      return true;
    case Backend::avx2:
#if defined(__x86_64__) || defined(_M_X64)
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
    case Backend::neon:
#if defined(__aarch64__)
      return true;
#else
      return false;
#endif
  }
  return false;
}

std::vector<Backend> available_backends() {
  std::vector<Backend> out;
  for (Backend b : {Backend::scalar, Backend::avx2, Backend::neon}) {
    if (backend_available(b)) out.push_back(b);
  }
  return out;
}

const Kernels& kernels_for(Backend backend) {
  if (!backend_available(backend)) {
    throw Error(ErrorKind::invalid_argument,
                "SIMD backend '" + std::string(to_string(backend)) +
                    "' is not available on this CPU");
  }
  switch (backend) {
#if defined(__x86_64__) || defined(_M_X64)
    case Backend::avx2: return avx2::table();
#endif
#if defined(__aarch64__)
    case Backend::neon: return neon::table();
#endif
    default: return scalar::table();
  }
}

namespace {

const Kernels& select_from_env() {
  if (const char* env = std::getenv("RVCP_SIMD"); env != nullptr && *env != '\0') {
    const std::string name(env);
    for (Backend b : {Backend::scalar, Backend::avx2, Backend::neon}) {
      if (name == to_string(b)) return kernels_for(b);
    }
    if (name != "auto") {
      throw Error(ErrorKind::invalid_argument, "unknown RVCP_SIMD value: " + name);
    }
  }
  const auto backends = available_backends();
  return kernels_for(backends.back());
}

}  // namespace

const Kernels& active() {
  static const Kernels& k = select_from_env();
  return k;
}

}  // namespace rvcp::simd
