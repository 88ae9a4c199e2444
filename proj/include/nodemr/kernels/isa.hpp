#pragma once

#include <string_view>

namespace nodemr::kernels {

/// Instruction-set variants of the float kernels.
enum class Isa { scalar, avx2, avx512 };

std::string_view to_string(Isa isa);

/// Accepts "scalar", "avx2", "avx512". Throws ConfigError otherwise.
Isa parse_isa(std::string_view name);

bool isa_supported(Isa isa);

/// Widest variant the running CPU supports.
Isa best_isa();

/// Variant used by the dispatched kernels. Defaults to best_isa(), or to the
/// value of the NODEMR_ISA environment variable when set.
Isa active_isa();

/// Throws ConfigError if the CPU lacks the requested instructions.
void set_active_isa(Isa isa);

/// Restores the previous ISA on destruction. Used by equivalence tests.
class ScopedIsa {
 public:
  explicit ScopedIsa(Isa isa) : previous_(active_isa()) { set_active_isa(isa); }
  ~ScopedIsa() { set_active_isa(previous_); }
  ScopedIsa(const ScopedIsa&) = delete;
  ScopedIsa& operator=(const ScopedIsa&) = delete;

 private:
  Isa previous_;
};

}  // namespace nodemr::kernels
