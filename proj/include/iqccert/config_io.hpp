#pragma once

#include "iqccert/certifier.hpp"
#include "iqccert/gradient_bounds.hpp"
#include "iqccert/policy.hpp"
#include "iqccert/system_model.hpp"

#include <filesystem>
#include <initializer_list>
#include <string>
#include <vector>

#include "json.hpp"

namespace iqccert::config {

using Json = nlohmann::json;

Json load_json(const std::filesystem::path& path);
void save_json(const std::filesystem::path& path, const Json& j);
std::string read_text(const std::filesystem::path& path);

/// Rejects keys outside `allowed` (configs are fail-closed).
void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where);

Matrix matrix_from_json(const Json& j, const std::string& name);
Vector vector_from_json(const Json& j, const std::string& name);
Json to_json(const Matrix& m);
Json to_json(const Vector& v);

/// {"A", "B", "C"?, "nonlinear_blocks"?, "iqc"?}
///   nonlinear_blocks: [{"kind", "domain", "channels": [{"arg", "input", "domain"?}]}]
///   iqc: {"kind": "sector"|"l2"|"zames_falb", "channels"?: [idx], "params"?: {...}} or a list of them.
CertSetup plant_from_json(const Json& j);

/// Dense {"lower", "upper"} or pattern form
/// {"lipschitz", "sparsity"?, "one_sided"?: [{"i", "j", "sign", "margin"?}]}.
GradientBoundSet bounds_from_json(const Json& j, int n_a, int n_s);

struct PatternFile {
  std::vector<std::vector<std::string>> pattern;
  double eps = 0.1;
  double l = 1.0;
};
PatternFile pattern_from_json(const Json& j);
Json to_json(const PatternFile& p);

PolicyNet policy_from_json(const Json& j);
Json to_json(const PolicyNet& net);

Json to_json(const Certificate& c);

}  // namespace iqccert::config
