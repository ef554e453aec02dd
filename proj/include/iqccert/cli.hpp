#pragma once

#include <string>
#include <vector>

namespace iqccert::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumerical = 3;

/// Entry point for the iqc_cert binary. Errors go to stderr as
/// {"error": {"kind": ..., "message": ...}}.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

}  // namespace iqccert::cli
