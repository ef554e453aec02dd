#include "iqccert/config_io.hpp"

#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace iqccert::config {

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json load_json(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ValidationError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

void save_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  out << j.dump(2) << "\n";
}

void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + ": expected a JSON object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items())
    if (!ok.count(k)) throw ValidationError(where + ": unknown key '" + k + "'");
}

namespace {

const Json& require(const Json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ValidationError(where + ": missing key '" + key + "'");
  return j.at(key);
}

double number(const Json& j, const std::string& name) {
  if (!j.is_number()) throw ValidationError(name + ": expected a number");
  return j.get<double>();
}

}  // namespace

Matrix matrix_from_json(const Json& j, const std::string& name) {
  if (j.is_number()) return Matrix::Constant(1, 1, j.get<double>());
  if (!j.is_array() || j.empty()) throw ValidationError(name + ": expected a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (!j[0].is_array()) {
    Matrix m(1, rows);
    for (Eigen::Index c = 0; c < rows; ++c) m(0, c) = number(j[static_cast<size_t>(c)], name);
    return m;
  }
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Json& row = j[static_cast<size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw ValidationError(name + ": rows have different lengths");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = number(row[static_cast<size_t>(c)], name);
  }
  if (!linalg::all_finite(m)) throw ValidationError(name + ": non-finite entry");
  return m;
}

Vector vector_from_json(const Json& j, const std::string& name) {
  if (!j.is_array()) throw ValidationError(name + ": expected an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number(j[i], name);
  return v;
}

Json to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

Json to_json(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

namespace {

NonlinearBlock nonlinear_from_json(const Json& blocks, int n_s) {
  if (!blocks.is_array()) throw ValidationError("nonlinear_blocks: expected an array");
  NonlinearBlock nl;
  for (size_t b = 0; b < blocks.size(); ++b) {
    const std::string where = "nonlinear_blocks[" + std::to_string(b) + "]";
    const Json& blk = blocks[b];
    check_keys(blk, {"kind", "domain", "channels"}, where);
    const NonlinearKind kind = parse_nonlinear_kind(require(blk, "kind", where).get<std::string>());
    const double domain = blk.contains("domain") ? number(blk["domain"], where + ".domain") : 0.0;
    const Json& chans = require(blk, "channels", where);
    if (!chans.is_array() || chans.empty()) throw ValidationError(where + ".channels: expected a non-empty array");
    for (size_t c = 0; c < chans.size(); ++c) {
      const std::string cw = where + ".channels[" + std::to_string(c) + "]";
      check_keys(chans[c], {"arg", "input", "domain"}, cw);
      NonlinearChannel ch;
      ch.kind = kind;
      ch.arg = vector_from_json(require(chans[c], "arg", cw), cw + ".arg");
      ch.input = vector_from_json(require(chans[c], "input", cw), cw + ".input");
      ch.domain = chans[c].contains("domain") ? number(chans[c]["domain"], cw + ".domain") : domain;
      if (ch.arg.size() != n_s || ch.input.size() != n_s) throw ValidationError(cw + ": arg/input must have n_s entries");
      if (!(ch.domain > 0.0)) throw ValidationError(cw + ": domain must be positive");
      nl.channels.push_back(ch);
    }
  }
  return nl;
}

IqcBlock channel_iqc(const Json& spec, const NonlinearChannel& ch, const std::string& where) {
  check_keys(spec, {"kind", "channels", "params"}, where);
  const std::string kind = require(spec, "kind", where).get<std::string>();
  const Json params = spec.contains("params") ? spec["params"] : Json::object();
  auto [lo, hi] = ch.slope_sector();
  if (kind == "sector" || kind == "zames_falb") {
    check_keys(params, {"lower", "upper", "pole"}, where + ".params");
    if (params.contains("lower")) lo = number(params["lower"], where + ".params.lower");
    if (params.contains("upper")) hi = number(params["upper"], where + ".params.upper");
    if (kind == "sector") return sector_iqc(lo, hi);
    const double pole = params.contains("pole") ? number(params["pole"], where + ".params.pole") : 1.0;
    return zames_falb_iqc(lo, hi, pole);
  }
  if (kind == "l2") {
    check_keys(params, {"gain"}, where + ".params");
    const double g = params.contains("gain") ? number(params["gain"], where + ".params.gain")
                                             : std::max(std::abs(lo), std::abs(hi));
    return l2_gain_iqc(g, 1, 1, 1.0);
  }
  throw ValidationError(where + ": unknown IQC kind '" + kind + "'");
}

}  // namespace

CertSetup plant_from_json(const Json& j) {
  check_keys(j, {"A", "B", "C", "nonlinear_blocks", "iqc"}, "plant");
  CertSetup s;
  const Matrix A = matrix_from_json(require(j, "A", "plant"), "plant.A");
  const Matrix B = matrix_from_json(require(j, "B", "plant"), "plant.B");
  Matrix C;
  if (j.contains("C")) C = matrix_from_json(j["C"], "plant.C");
  s.plant = LtiSystem(A, B, C);
  s.plant.validate();
  if (j.contains("nonlinear_blocks")) s.nonlinear = nonlinear_from_json(j["nonlinear_blocks"], s.plant.n_s());
  if (s.nonlinear.size() > 0) {
    const int nc = s.nonlinear.size();
    std::vector<Json> per_channel(static_cast<size_t>(nc), Json{{"kind", "zames_falb"}});
    if (j.contains("iqc")) {
      const Json specs = j["iqc"].is_array() ? j["iqc"] : Json::array({j["iqc"]});
      for (size_t k = 0; k < specs.size(); ++k) {
        const std::string where = "iqc[" + std::to_string(k) + "]";
        check_keys(specs[k], {"kind", "channels", "params"}, where);
        if (specs[k].contains("channels")) {
          for (const auto& idx : specs[k]["channels"]) {
            if (!idx.is_number_integer() || idx.get<int>() < 0 || idx.get<int>() >= nc)
              throw ValidationError(where + ".channels: index out of range");
            per_channel[static_cast<size_t>(idx.get<int>())] = specs[k];
          }
        } else {
          for (auto& pc : per_channel) pc = specs[k];
        }
      }
    }
    std::vector<IqcBlock> blocks;
    for (int c = 0; c < nc; ++c)
      blocks.push_back(channel_iqc(per_channel[static_cast<size_t>(c)], s.nonlinear.channels[static_cast<size_t>(c)],
                                   "iqc(channel " + std::to_string(c) + ")"));
    s.filter = combine(blocks, std::vector<double>(blocks.size(), 1.0));
  } else if (j.contains("iqc")) {
    throw ValidationError("plant.iqc given without nonlinear channels");
  }
  return s;
}

GradientBoundSet bounds_from_json(const Json& j, int n_a, int n_s) {
  if (!j.is_object()) throw ValidationError("bounds: expected a JSON object");
  GradientBoundSet b;
  if (j.contains("lower") || j.contains("upper")) {
    check_keys(j, {"lower", "upper"}, "bounds");
    b = GradientBoundSet(matrix_from_json(require(j, "lower", "bounds"), "bounds.lower"),
                         matrix_from_json(require(j, "upper", "bounds"), "bounds.upper"));
  } else {
    check_keys(j, {"lipschitz", "sparsity", "one_sided"}, "bounds");
    const double l = number(require(j, "lipschitz", "bounds"), "bounds.lipschitz");
    if (!(l >= 0.0)) throw ValidationError("bounds.lipschitz must be >= 0");
    b = j.contains("sparsity") ? GradientBoundSet::sparse(matrix_from_json(j["sparsity"], "bounds.sparsity"), l)
                               : GradientBoundSet::uniform(n_a, n_s, l);
    if (j.contains("one_sided")) {
      if (!j["one_sided"].is_array()) throw ValidationError("bounds.one_sided: expected an array");
      for (const auto& e : j["one_sided"]) {
        check_keys(e, {"i", "j", "sign", "margin"}, "bounds.one_sided[]");
        const int i = require(e, "i", "bounds.one_sided[]").get<int>();
        const int c = require(e, "j", "bounds.one_sided[]").get<int>();
        if (i < 0 || c < 0 || i >= b.n_a() || c >= b.n_s()) throw ValidationError("bounds.one_sided: index out of range");
        const double eps = e.contains("margin") ? number(e["margin"], "bounds.one_sided[].margin") : 0.1;
        const std::string sign = require(e, "sign", "bounds.one_sided[]").get<std::string>();
        if (b.is_zero(i, c)) throw ValidationError("bounds.one_sided: entry is masked by the sparsity pattern");
        if (sign == "+") {
          b.lower(i, c) = -eps * l;
        } else if (sign == "-" || sign == "−") {
          b.upper(i, c) = eps * l;
        } else {
          throw ValidationError("bounds.one_sided: sign must be '+' or '-'");
        }
      }
    }
  }
  if (b.n_a() != n_a || b.n_s() != n_s)
    throw ValidationError("bounds: expected " + std::to_string(n_a) + "x" + std::to_string(n_s) + " matrices");
  b.validate();
  return b;
}

PatternFile pattern_from_json(const Json& j) {
  check_keys(j, {"pattern", "eps", "l"}, "pattern file");
  PatternFile p;
  const Json& rows = require(j, "pattern", "pattern file");
  if (!rows.is_array() || rows.empty()) throw ValidationError("pattern: expected a non-empty matrix of symbols");
  for (const auto& r : rows) {
    if (!r.is_array() || (!p.pattern.empty() && r.size() != p.pattern.front().size()))
      throw ValidationError("pattern: rows have different lengths");
    std::vector<std::string> row;
    for (const auto& s : r) {
      const std::string sym = s.get<std::string>();
      if (sym != "+" && sym != "-" && sym != "−" && sym != "0" && sym != "±" && sym != "+-")
        throw ValidationError("pattern: unknown symbol '" + sym + "'");
      row.push_back(sym);
    }
    p.pattern.push_back(row);
  }
  if (j.contains("eps")) p.eps = number(j["eps"], "pattern.eps");
  if (j.contains("l")) p.l = number(j["l"], "pattern.l");
  if (!(p.eps > 0.0 && p.eps < 1.0)) throw ValidationError("pattern.eps must be in (0, 1)");
  return p;
}

Json to_json(const PatternFile& p) { return Json{{"pattern", p.pattern}, {"eps", p.eps}, {"l", p.l}}; }

PolicyNet policy_from_json(const Json& j) {
  check_keys(j, {"centered", "layers"}, "policy");
  const bool centered = j.value("centered", true);
  const Json& layers = require(j, "layers", "policy");
  if (!layers.is_array() || layers.empty()) throw ValidationError("policy.layers: expected a non-empty array");
  std::vector<Layer> out;
  for (size_t k = 0; k < layers.size(); ++k) {
    const std::string where = "policy.layers[" + std::to_string(k) + "]";
    const Json& l = layers[k];
    check_keys(l, {"rows", "cols", "weights", "bias", "mask"}, where);
    const int rows = require(l, "rows", where).get<int>();
    const int cols = require(l, "cols", where).get<int>();
    if (rows <= 0 || cols <= 0) throw ValidationError(where + ": rows and cols must be positive");
    const Vector w = vector_from_json(require(l, "weights", where), where + ".weights");
    const Vector m = l.contains("mask") ? vector_from_json(l["mask"], where + ".mask") : Vector::Ones(rows * cols);
    if (w.size() != rows * cols || m.size() != rows * cols)
      throw ValidationError(where + ": weights/mask must have rows*cols entries");
    Layer layer;
    layer.W = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(w.data(), rows, cols);
    layer.mask = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(m.data(), rows, cols);
    layer.b = l.contains("bias") ? vector_from_json(l["bias"], where + ".bias") : Vector::Zero(rows);
    out.push_back(std::move(layer));
  }
  return PolicyNet(std::move(out), centered);
}

Json to_json(const PolicyNet& net) {
  Json layers = Json::array();
  for (const auto& l : net.layers()) {
    Json w = Json::array(), m = Json::array();
    for (Eigen::Index r = 0; r < l.W.rows(); ++r)
      for (Eigen::Index c = 0; c < l.W.cols(); ++c) {
        w.push_back(l.W(r, c));
        m.push_back(l.mask(r, c));
      }
    layers.push_back(Json{{"rows", l.W.rows()}, {"cols", l.W.cols()}, {"weights", w}, {"bias", to_json(l.b)}, {"mask", m}});
  }
  return Json{{"centered", net.centered()}, {"layers", layers}};
}

Json to_json(const Certificate& c) {
  Json j;
  j["verdict"] = sdp::to_string(c.verdict);
  j["feasible"] = c.feasible;
  if (c.feasible) {
    j["gamma"] = c.gamma;
  } else {
    j["gamma"] = nullptr;
  }
  if (c.P.size() > 0) j["P"] = to_json(c.P);
  if (c.lambda.lambda.size() > 0) j["lambda"] = to_json(c.lambda.lambda);
  if (c.tau.size() > 0) j["tau"] = to_json(c.tau);
  j["stats"] = Json{{"iterations", c.stats.iterations}, {"solves", c.stats.solves},
                    {"max_eig", c.stats.max_eig},       {"min_eig_P", c.stats.min_eig_P},
                    {"solve_ms", c.stats.solve_ms},     {"message", c.stats.message}};
  return j;
}

}  // namespace iqccert::config
