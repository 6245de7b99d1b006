#include "dba/io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "dba/errors.hpp"
#include "json.hpp"

namespace dba {

namespace {

using Json = nlohmann::ordered_json;

// ------------------------------------------------------------- writing

Json num(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

Json vec_json(const Vec& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num(v(i)));
  return a;
}

Json map_json(const LinearMap& m) {
  Json t = Json::array();
  for (const Triplet& e : m.sparse().triplets()) t.push_back(Json::array({e.row, e.col, num(e.value)}));
  return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"triplets", std::move(t)}};
}

Json cone_json(const ConeSpec& k) {
  return std::visit(
      [](const auto& c) -> Json {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, NonnegOrthant>) return {{"type", "orthant"}, {"n", c.n}};
        if constexpr (std::is_same_v<T, Box>)
          return {{"type", "box"}, {"lower", vec_json(c.lower)}, {"upper", vec_json(c.upper)}};
        if constexpr (std::is_same_v<T, PsdCone>) return {{"type", "psd"}, {"order", c.order}};
        if constexpr (std::is_same_v<T, NonnegSymMatrices>) return {{"type", "nonneg_sym"}, {"order", c.order}};
        if constexpr (std::is_same_v<T, FreeSpace>) return {{"type", "free"}, {"n", c.n}};
      },
      k);
}

Json function_json(const SeparableFunction& f) {
  return std::visit(
      [](const auto& g) -> Json {
        using T = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<T, ZeroFunction>) return {{"type", "zero"}};
        if constexpr (std::is_same_v<T, DiagQuadratic>) return {{"type", "diag_quadratic"}, {"q", vec_json(g.diag)}};
        if constexpr (std::is_same_v<T, DenseQuadratic>) {
          Json lower = Json::array();
          for (double v : g.matrix().lower()) lower.push_back(num(v));
          return {{"type", "dense_quadratic"}, {"dim", g.matrix().dim()}, {"lower", std::move(lower)}};
        }
        if constexpr (std::is_same_v<T, IndicatorCone>) return {{"type", "indicator"}, {"cone", cone_json(g.cone)}};
      },
      f);
}

// ------------------------------------------------------------- reading

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ParseError("field '" + path + "': " + what);
}

const Json& field(const Json& j, const std::string& path, const char* key) {
  if (!j.is_object()) fail(path, "expected an object");
  const auto it = j.find(key);
  if (it == j.end()) fail(path.empty() ? key : path + "." + key, "missing");
  return *it;
}

std::string sub(const std::string& path, const char* key) { return path.empty() ? key : path + "." + key; }
std::string sub(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

double get_num(const Json& j, const std::string& path) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  fail(path, "expected a number");
}

int get_int(const Json& j, const std::string& path, int min = 0) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  const auto v = j.get<long long>();
  if (v < min || v > std::numeric_limits<int>::max()) fail(path, "integer out of range");
  return static_cast<int>(v);
}

std::string get_str(const Json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

Vec get_vec(const Json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array of numbers");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = get_num(j[i], sub(path, i));
  return v;
}

Vec get_vec_field(const Json& j, const std::string& path, const char* key) {
  return get_vec(field(j, path, key), sub(path, key));
}

LinearMap get_map(const Json& j, const std::string& path) {
  const int rows = get_int(field(j, path, "rows"), sub(path, "rows"));
  const int cols = get_int(field(j, path, "cols"), sub(path, "cols"));
  const Json& t = field(j, path, "triplets");
  const std::string tp = sub(path, "triplets");
  if (!t.is_array()) fail(tp, "expected an array of [row, col, value]");
  std::vector<Triplet> entries;
  entries.reserve(t.size());
  for (std::size_t k = 0; k < t.size(); ++k) {
    const std::string ep = sub(tp, k);
    if (!t[k].is_array() || t[k].size() != 3) fail(ep, "expected [row, col, value]");
    const int r = get_int(t[k][0], ep + "[0]");
    const int c = get_int(t[k][1], ep + "[1]");
    if (r >= rows || c >= cols) fail(ep, "index outside " + std::to_string(rows) + "x" + std::to_string(cols));
    entries.push_back({r, c, get_num(t[k][2], ep + "[2]")});
  }
  return LinearMap(SparseMat::from_triplets(rows, cols, entries));
}

ConeSpec get_cone(const Json& j, const std::string& path) {
  const std::string type = get_str(field(j, path, "type"), sub(path, "type"));
  if (type == "orthant") return NonnegOrthant{get_int(field(j, path, "n"), sub(path, "n"))};
  if (type == "free") return FreeSpace{get_int(field(j, path, "n"), sub(path, "n"))};
  if (type == "psd") return PsdCone{get_int(field(j, path, "order"), sub(path, "order"), 1)};
  if (type == "nonneg_sym") return NonnegSymMatrices{get_int(field(j, path, "order"), sub(path, "order"), 1)};
  if (type == "box") {
    Box b{get_vec_field(j, path, "lower"), get_vec_field(j, path, "upper")};
    if (b.lower.size() != b.upper.size()) fail(path, "lower and upper differ in length");
    return b;
  }
  fail(sub(path, "type"), "unknown cone '" + type + "'");
}

SeparableFunction get_function(const Json& j, const std::string& path) {
  const std::string type = get_str(field(j, path, "type"), sub(path, "type"));
  if (type == "zero") return ZeroFunction{};
  if (type == "diag_quadratic") return DiagQuadratic{get_vec_field(j, path, "q")};
  if (type == "indicator") return IndicatorCone{get_cone(field(j, path, "cone"), sub(path, "cone"))};
  if (type == "dense_quadratic") {
    const int dim = get_int(field(j, path, "dim"), sub(path, "dim"));
    const Vec lower = get_vec_field(j, path, "lower");
    if (static_cast<std::size_t>(lower.size()) != SymDense::packed_size(dim))
      fail(sub(path, "lower"), "expected " + std::to_string(SymDense::packed_size(dim)) + " entries");
    try {
      return DenseQuadratic(SymDense(dim, std::vector<double>(lower.data(), lower.data() + lower.size())));
    } catch (const NotPositiveDefinite& e) {
      fail(path, e.what());
    }
  }
  fail(sub(path, "type"), "unknown function '" + type + "'");
}

Json parse_json(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    const std::size_t byte = std::min<std::size_t>(e.byte, text.size());
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < byte; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::string what = e.what();
    const auto pos = what.find("syntax error");
    if (pos != std::string::npos) what = what.substr(pos);
    throw ParseError("line " + std::to_string(line) + ", column " + std::to_string(col) + ": " + what);
  }
}

void check_format(const Json& j, const char* expected) {
  const std::string fmt = get_str(field(j, "", "format"), "format");
  if (fmt != expected) fail("format", "expected '" + std::string(expected) + "', got '" + fmt + "'");
  if (j.contains("convention")) {
    const std::string conv = get_str(j["convention"], "convention");
    if (conv != kSvecConvention) fail("convention", "unsupported convention '" + conv + "'");
  }
}

// Objects one key per line; arrays of scalars on a single line.
void emit(const Json& j, int depth, std::string& out) {
  const std::string pad(static_cast<std::size_t>(depth + 1), ' ');
  const std::string close(static_cast<std::size_t>(depth), ' ');
  if (j.is_object()) {
    if (j.empty()) {
      out += "{}";
      return;
    }
    out += "{\n";
    bool first = true;
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!first) out += ",\n";
      first = false;
      out += pad + Json(it.key()).dump() + ": ";
      emit(it.value(), depth + 1, out);
    }
    out += "\n" + close + "}";
  } else if (j.is_array()) {
    bool flat = true;
    for (const auto& e : j) flat = flat && !e.is_structured();
    if (flat) {
      out += "[";
      for (std::size_t i = 0; i < j.size(); ++i) out += (i ? ", " : "") + j[i].dump();
      out += "]";
      return;
    }
    out += "[\n";
    for (std::size_t i = 0; i < j.size(); ++i) {
      if (i) out += ",\n";
      out += pad;
      emit(j[i], depth + 1, out);
    }
    out += "\n" + close + "]";
  } else {
    out += j.dump();
  }
}

std::string dump(const Json& j) {
  std::string out;
  emit(j, 0, out);
  return out + "\n";
}

}  // namespace

std::string write_problem(const DBAProblem& p) {
  Json meta = Json::object();
  for (const auto& [k, v] : p.metadata) meta[k] = v;
  Json first{{"A", p.A ? map_json(*p.A) : Json(nullptr)},
             {"b", vec_json(p.A ? p.b : Vec())},
             {"c", vec_json(p.c)},
             {"cone", cone_json(p.cone)},
             {"theta", function_json(p.theta)}};
  Json sc = Json::array();
  for (const ScenarioBlock& s : p.scenarios)
    sc.push_back({{"B", map_json(s.B)},
                  {"Bbar", map_json(s.Bbar)},
                  {"bbar", vec_json(s.bbar)},
                  {"cbar", vec_json(s.cbar)},
                  {"cone", cone_json(s.cone)},
                  {"theta", function_json(s.theta)}});
  Json doc{{"format", kProblemFormat},
           {"convention", kSvecConvention},
           {"header", {{"n0", p.n0()}, {"m0", p.m0()}, {"N", p.N()}, {"metadata", std::move(meta)}}},
           {"first_stage", std::move(first)},
           {"scenarios", std::move(sc)}};
  return dump(doc);
}

DBAProblem parse_problem(const std::string& text) {
  const Json j = parse_json(text);
  if (!j.is_object()) fail("", "expected a JSON object");
  check_format(j, kProblemFormat);
  DBAProblem p;
  const Json& h = field(j, "", "header");
  const int n0 = get_int(field(h, "header", "n0"), "header.n0");
  const int m0 = get_int(field(h, "header", "m0"), "header.m0");
  const int N = get_int(field(h, "header", "N"), "header.N");
  if (h.contains("metadata")) {
    const Json& m = h["metadata"];
    if (!m.is_object()) fail("header.metadata", "expected an object of strings");
    for (auto it = m.begin(); it != m.end(); ++it) p.metadata[it.key()] = get_str(it.value(), "header.metadata." + it.key());
  }
  const Json& f = field(j, "", "first_stage");
  const Json& a = field(f, "first_stage", "A");
  if (!a.is_null()) {
    p.A = get_map(a, "first_stage.A");
    p.b = get_vec_field(f, "first_stage", "b");
  }
  p.c = get_vec_field(f, "first_stage", "c");
  p.cone = get_cone(field(f, "first_stage", "cone"), "first_stage.cone");
  p.theta = get_function(field(f, "first_stage", "theta"), "first_stage.theta");
  const Json& sc = field(j, "", "scenarios");
  if (!sc.is_array()) fail("scenarios", "expected an array");
  for (std::size_t i = 0; i < sc.size(); ++i) {
    const std::string sp = sub("scenarios", i);
    ScenarioBlock s;
    s.B = get_map(field(sc[i], sp, "B"), sub(sp, "B"));
    s.Bbar = get_map(field(sc[i], sp, "Bbar"), sub(sp, "Bbar"));
    s.bbar = get_vec_field(sc[i], sp, "bbar");
    s.cbar = get_vec_field(sc[i], sp, "cbar");
    s.cone = get_cone(field(sc[i], sp, "cone"), sub(sp, "cone"));
    s.theta = get_function(field(sc[i], sp, "theta"), sub(sp, "theta"));
    p.scenarios.push_back(std::move(s));
  }
  if (p.n0() != n0) fail("header.n0", "does not match first_stage.c");
  if (p.m0() != m0) fail("header.m0", "does not match first_stage.A");
  if (static_cast<int>(p.N()) != N) fail("header.N", "does not match the scenario count");
  try {
    validate(p);
  } catch (const DimensionMismatch& e) {
    throw ParseError(e.what());
  }
  return p;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << text;
  if (!out) throw Error("write to '" + path + "' failed");
}

DBAProblem read_problem_file(const std::string& path) {
  try {
    return parse_problem(read_text_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

std::string write_solution(const Solution& s) {
  Json doc{{"format", kSolutionFormat},
           {"convention", kSvecConvention},
           {"status", s.status},
           {"x", vec_json(s.primal.x)},
           {"xbar", vec_json(s.primal.xbar)},
           {"y", vec_json(s.dual.y)},
           {"ybar", vec_json(s.dual.ybar)},
           {"z", vec_json(s.dual.z)},
           {"zbar", vec_json(s.dual.zbar)},
           {"v", vec_json(s.dual.v)},
           {"vbar", vec_json(s.dual.vbar)}};
  return dump(doc);
}

Solution parse_solution(const std::string& text) {
  const Json j = parse_json(text);
  if (!j.is_object()) fail("", "expected a JSON object");
  check_format(j, kSolutionFormat);
  Solution s;
  s.status = j.contains("status") ? get_str(j["status"], "status") : "";
  s.primal.x = get_vec_field(j, "", "x");
  s.primal.xbar = get_vec_field(j, "", "xbar");
  s.dual.y = get_vec_field(j, "", "y");
  s.dual.ybar = get_vec_field(j, "", "ybar");
  s.dual.z = get_vec_field(j, "", "z");
  s.dual.zbar = get_vec_field(j, "", "zbar");
  s.dual.v = get_vec_field(j, "", "v");
  s.dual.vbar = get_vec_field(j, "", "vbar");
  return s;
}

std::string write_summary(const SolveReport& r, const std::string& solver) {
  const KktResidues& k = r.residues;
  Json doc{{"solver", solver},
           {"status", to_string(r.status)},
           {"iterations", r.iterations},
           {"elapsed_seconds", num(r.elapsed_seconds)},
           {"sigma", num(r.sigma)},
           {"msolver", r.msolver},
           {"ssn_used", r.ssn_used},
           {"obj_P", num(k.obj_P)},
           {"obj_D", num(k.obj_D)},
           {"eta", num(k.eta)},
           {"eta_gap", num(k.eta_gap)},
           {"eta_P", num(k.eta_P)},
           {"eta_D", num(k.eta_D)},
           {"eta_K", num(k.eta_K)},
           {"eta_theta", num(k.eta_theta)},
           {"eta_Pbar", num(k.eta_Pbar)},
           {"eta_Dbar", num(k.eta_Dbar)},
           {"eta_Kbar", num(k.eta_Kbar)},
           {"eta_thetabar", num(k.eta_thetabar)}};
  if (r.unconverged_subsolves > 0) doc["unconverged_subsolves"] = r.unconverged_subsolves;
  return dump(doc);
}

UflInstance parse_ufl(const std::string& text) {
  const Json j = parse_json(text);
  UflInstance u;
  u.p = get_int(field(j, "", "p"), "p", 1);
  u.q = get_int(field(j, "", "q"), "q", 1);
  u.c = get_vec_field(j, "", "c");
  auto rows = [&](const char* key) {
    const Json& m = field(j, "", key);
    if (!m.is_array() || static_cast<int>(m.size()) != u.p) fail(key, "expected p rows");
    DenseMat out(u.p, u.q);
    for (int i = 0; i < u.p; ++i) {
      const Vec r = get_vec(m[static_cast<std::size_t>(i)], sub(key, static_cast<std::size_t>(i)));
      if (r.size() != u.q) fail(sub(key, static_cast<std::size_t>(i)), "expected q entries");
      out.row(i) = r.transpose();
    }
    return out;
  };
  u.P = rows("P");
  u.Q = rows("Q");
  try {
    validate_ufl(u);
  } catch (const Error& e) {
    throw ParseError(e.what());
  }
  return u;
}

std::string write_ufl(const UflInstance& u) {
  Json p = Json::array(), q = Json::array();
  for (int i = 0; i < u.p; ++i) {
    p.push_back(vec_json(u.P.row(i).transpose()));
    q.push_back(vec_json(u.Q.row(i).transpose()));
  }
  Json doc{{"p", u.p}, {"q", u.q}, {"c", vec_json(u.c)}, {"P", std::move(p)}, {"Q", std::move(q)}};
  return dump(doc);
}

}  // namespace dba
