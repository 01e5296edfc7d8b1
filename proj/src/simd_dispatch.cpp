#include <atomic>
#include <cstdlib>

#include "ffep/simd.hpp"

namespace ffep::simd {

#if (defined(__x86_64__) || defined(_M_X64)) && !defined(FFEP_HAVE_AVX2)
const KernelTable* avx2_kernels() { return nullptr; }
#endif

namespace {

const KernelTable* available(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return &scalar_kernels();
    case Isa::kAvx2:
#if defined(__x86_64__) || defined(_M_X64)
      if (cpu_supports(Isa::kAvx2)) return avx2_kernels();
#endif
      return nullptr;
  }
  return nullptr;
}

const KernelTable* initial_selection() {
  Isa isa = detect_isa();
  if (const char* env = std::getenv("FFEP_SIMD")) {
    Isa requested{};
    if (parse_isa(env, requested) && available(requested) != nullptr) isa = requested;
  }
  return available(isa);
}

std::atomic<const KernelTable*>& selection() {
  static std::atomic<const KernelTable*> current{initial_selection()};
  return current;
}

}  // namespace

bool cpu_supports(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return true;
    case Isa::kAvx2:
#if defined(__GNUC__) && (defined(__x86_64__) || defined(_M_X64))
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
  }
  return false;
}

bool isa_available(Isa isa) { return available(isa) != nullptr; }

Isa detect_isa() {
#if defined(__x86_64__) || defined(_M_X64)
  if (cpu_supports(Isa::kAvx2) && avx2_kernels() != nullptr) return Isa::kAvx2;
#endif
  return Isa::kScalar;
}

const KernelTable& kernels_for(Isa isa) {
  const KernelTable* table = available(isa);
  return table != nullptr ? *table : scalar_kernels();
}

const KernelTable& active() { return *selection().load(std::memory_order_acquire); }

bool set_active_isa(Isa isa) {
  const KernelTable* table = available(isa);
  if (table == nullptr) return false;
  selection().store(table, std::memory_order_release);
  return true;
}

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return "scalar";
    case Isa::kAvx2:
      return "avx2";
  }
  return "unknown";
}

bool parse_isa(std::string_view name, Isa& out) {
  if (name == "scalar") {
    out = Isa::kScalar;
    return true;
  }
  if (name == "avx2") {
    out = Isa::kAvx2;
    return true;
  }
  return false;
}

}  // namespace ffep::simd
