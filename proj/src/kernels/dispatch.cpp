#include <cstdlib>
#include <string>

#include "care/kernels.hpp"

namespace care::kernels {

std::string_view to_string(Isa isa) noexcept {
    switch (isa) {
        case Isa::Scalar: return "scalar";
        case Isa::Avx2: return "avx2";
    }
    return "unknown";
}

bool cpu_supports(Isa isa) noexcept {
    switch (isa) {
        case Isa::Scalar: return true;
        case Isa::Avx2:
#if defined(CARE_HAVE_AVX2_KERNELS) && (defined(__GNUC__) || defined(__clang__))
            return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
            return false;
#endif
    }
    return false;
}

const KernelTable* table_for(Isa isa) {
    if (!cpu_supports(isa)) return nullptr;
    switch (isa) {
        case Isa::Scalar: return &detail::kScalarTable;
        case Isa::Avx2:
#if defined(CARE_HAVE_AVX2_KERNELS)
            return &detail::kAvx2Table;
#else
            return nullptr;
#endif
    }
    return nullptr;
}

namespace {

const KernelTable& select() {
    if (const char* forced = std::getenv("CARE_KERNELS")) {
        if (std::string(forced) == "scalar") return detail::kScalarTable;
    }
    if (const KernelTable* t = table_for(Isa::Avx2)) return *t;
    return detail::kScalarTable;
}

}  // namespace

const KernelTable& active() {
    static const KernelTable& table = select();
    return table;
}

}  // namespace care::kernels
