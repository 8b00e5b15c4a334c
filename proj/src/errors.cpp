#include "vlcuav/errors.hpp"

namespace vlcuav {

int exit_code(ErrorCategory category) noexcept {
    switch (category) {
    case ErrorCategory::Usage: return 1;
    case ErrorCategory::Data: return 2;
    case ErrorCategory::Numerical: return 3;
    }
    return 3;
}

} // namespace vlcuav
