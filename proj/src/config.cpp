#include "riglab/config.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace riglab::config {

namespace {

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

// Cuts a '#' comment, ignoring '#' inside double-quoted strings.
std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (c == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
    if (c == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

int bracket_balance(const std::string& s) {
  bool in_string = false;
  int depth = 0;
  for (size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (c == '"' && (i == 0 || s[i - 1] != '\\')) in_string = !in_string;
    if (in_string) continue;
    if (c == '[') ++depth;
    if (c == ']') --depth;
  }
  return depth;
}

struct ValueParser {
  const std::string& text;
  size_t i = 0;
  const std::string& where;

  void skip_ws() {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError(where + ": " + msg);
  }

  TomlValue parse() {
    skip_ws();
    if (i >= text.size()) fail("missing value");
    TomlValue v;
    const char c = text[i];
    if (c == '"') {
      v.kind = TomlValue::Kind::String;
      ++i;
      while (i < text.size() && text[i] != '"') {
        if (text[i] == '\\' && i + 1 < text.size() && (text[i + 1] == '"' || text[i + 1] == '\\'))
          ++i;
        v.str += text[i++];
      }
      if (i >= text.size()) fail("unterminated string");
      ++i;
      return v;
    }
    if (c == '[') {
      v.kind = TomlValue::Kind::Array;
      ++i;
      skip_ws();
      if (i < text.size() && text[i] == ']') {
        ++i;
        return v;
      }
      while (true) {
        v.items.push_back(parse());
        skip_ws();
        if (i < text.size() && text[i] == ',') {
          ++i;
          skip_ws();
          if (i < text.size() && text[i] == ']') {
            ++i;
            return v;
          }
          continue;
        }
        if (i < text.size() && text[i] == ']') {
          ++i;
          return v;
        }
        fail("expected ',' or ']' in array");
      }
    }
    if (text.compare(i, 4, "true") == 0) {
      v.kind = TomlValue::Kind::Boolean;
      v.boolean = true;
      i += 4;
      return v;
    }
    if (text.compare(i, 5, "false") == 0) {
      v.kind = TomlValue::Kind::Boolean;
      v.boolean = false;
      i += 5;
      return v;
    }
    size_t end = i;
    while (end < text.size() && text[end] != ',' && text[end] != ']' &&
           !std::isspace(static_cast<unsigned char>(text[end])))
      ++end;
    const std::string token = text.substr(i, end - i);
    try {
      size_t used = 0;
      v.num = std::stod(token, &used);
      if (used != token.size()) fail("malformed number '" + token + "'");
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception&) {
      fail("malformed number '" + token + "'");
    }
    v.kind = TomlValue::Kind::Number;
    i = end;
    return v;
  }
};

const char* kind_name(TomlValue::Kind k) {
  switch (k) {
    case TomlValue::Kind::String:
      return "string";
    case TomlValue::Kind::Number:
      return "number";
    case TomlValue::Kind::Boolean:
      return "boolean";
    case TomlValue::Kind::Array:
      return "array";
  }
  return "value";
}

}  // namespace

Toml Toml::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_text(buf.str(), path);
}

Toml Toml::parse_text(const std::string& text, const std::string& origin) {
  Toml toml;
  toml.origin_ = origin;
  std::istringstream in(text);
  std::string raw, logical;
  std::string section;
  int lineno = 0, start_line = 0;
  int depth = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const std::string piece = strip_comment(raw);
    if (depth == 0) {
      logical = piece;
      start_line = lineno;
    } else {
      logical += ' ';
      logical += piece;
    }
    depth = bracket_balance(logical);
    if (depth > 0) continue;
    if (depth < 0)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": unbalanced ']'");
    const std::string line = trim(logical);
    logical.clear();
    if (line.empty()) continue;
    const std::string at = origin + ":" + std::to_string(start_line);
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(at + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw ConfigError(at + ": empty section name");
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(at + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(at + ": empty key");
    for (char c : key)
      if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-')
        throw ConfigError(at + ": bad key '" + key + "'");
    const std::string value_text = line.substr(eq + 1);
    ValueParser vp{value_text, 0, at};
    TomlValue value = vp.parse();
    vp.skip_ws();
    if (vp.i != value_text.size()) throw ConfigError(at + ": trailing text after value");
    const std::string full = section.empty() ? key : section + "." + key;
    if (toml.values_.count(full)) throw ConfigError(at + ": duplicate key '" + full + "'");
    toml.values_[full] = std::move(value);
  }
  if (depth != 0) throw ConfigError(origin + ": unterminated array at end of file");
  return toml;
}

bool Toml::has(const std::string& key) const { return values_.count(key) > 0; }

const TomlValue& Toml::at(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError(origin_ + ": missing key '" + key + "'");
  return it->second;
}

std::string Toml::get_string(const std::string& key) const {
  const TomlValue& v = at(key);
  if (v.kind != TomlValue::Kind::String)
    throw ConfigError(origin_ + ": key '" + key + "' is a " + kind_name(v.kind) +
                      ", expected string");
  return v.str;
}

double Toml::get_number(const std::string& key) const {
  const TomlValue& v = at(key);
  if (v.kind != TomlValue::Kind::Number)
    throw ConfigError(origin_ + ": key '" + key + "' is a " + kind_name(v.kind) +
                      ", expected number");
  return v.num;
}

long long Toml::get_integer(const std::string& key) const {
  const double d = get_number(key);
  const long long n = std::llround(d);
  if (std::abs(d - static_cast<double>(n)) > 1e-9)
    throw ConfigError(origin_ + ": key '" + key + "' must be an integer");
  return n;
}

bool Toml::get_bool(const std::string& key) const {
  const TomlValue& v = at(key);
  if (v.kind != TomlValue::Kind::Boolean)
    throw ConfigError(origin_ + ": key '" + key + "' is a " + kind_name(v.kind) +
                      ", expected boolean");
  return v.boolean;
}

const std::vector<TomlValue>& Toml::get_array(const std::string& key) const {
  const TomlValue& v = at(key);
  if (v.kind != TomlValue::Kind::Array)
    throw ConfigError(origin_ + ": key '" + key + "' is a " + kind_name(v.kind) +
                      ", expected array");
  return v.items;
}

std::string Toml::get_string_or(const std::string& key, const std::string& fallback) const {
  return has(key) ? get_string(key) : fallback;
}

double Toml::get_number_or(const std::string& key, double fallback) const {
  return has(key) ? get_number(key) : fallback;
}

long long Toml::get_integer_or(const std::string& key, long long fallback) const {
  return has(key) ? get_integer(key) : fallback;
}

ManifoldSpec manifold_from(const Toml& toml) {
  const std::string kind = toml.get_string("manifold.kind");
  const int dim = static_cast<int>(toml.get_integer("manifold.dim"));
  if (dim < 1 || dim > 2) throw ConfigError("manifold.dim must be 1 or 2");
  if (kind == "euclidean") {
    if (toml.has("manifold.periods"))
      throw ConfigError("manifold.periods only applies to the torus");
    return ManifoldSpec::euclidean(dim);
  }
  if (kind != "torus") throw ConfigError("manifold.kind must be \"torus\" or \"euclidean\"");
  std::vector<double> periods;
  if (toml.has("manifold.periods")) {
    for (const TomlValue& v : toml.get_array("manifold.periods")) {
      if (v.kind != TomlValue::Kind::Number)
        throw ConfigError("manifold.periods must hold numbers");
      if (v.num <= 0.0) throw ConfigError("manifold.periods must be positive");
      periods.push_back(v.num);
    }
    if (periods.size() != static_cast<size_t>(dim))
      throw ConfigError("manifold.periods must list one period per axis");
  }
  return ManifoldSpec::torus(dim, periods);
}

expr::HamiltonianSequence sequence_from(const Toml& toml, const std::string& section,
                                        const ManifoldSpec& m) {
  const std::string family_key = section + ".family";
  const std::string limit_key = section + ".limit";
  const std::string family_text = toml.get_string(family_key);
  try {
    expr::HamiltonianExpr family = expr::parse(family_text, m);
    expr::HamiltonianExpr limit =
        toml.has(limit_key) ? expr::parse(toml.get_string(limit_key), m) : family;
    if (!toml.has(limit_key) && family.has_parameter())
      throw ConfigError(section + ": a parameterized family needs an explicit limit");
    return expr::HamiltonianSequence(std::move(family), std::move(limit));
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(section + ": " + e.what());
  }
}

experiment::RigidityExperiment experiment_from(const Toml& toml) {
  const ManifoldSpec m = manifold_from(toml);
  expr::HamiltonianSequence f = sequence_from(toml, "sequences.F", m);
  expr::HamiltonianSequence g = sequence_from(toml, "sequences.G", m);

  std::optional<expr::HamiltonianExpr> declared;
  if (toml.has("experiment.bracket_limit")) {
    try {
      declared = expr::parse(toml.get_string("experiment.bracket_limit"), m);
    } catch (const expr::ParseError& e) {
      throw ConfigError(std::string("experiment.bracket_limit: ") + e.what());
    }
    if (declared->has_parameter())
      throw ConfigError("experiment.bracket_limit must not depend on k");
  }

  std::vector<int> ks;
  for (const TomlValue& v : toml.get_array("experiment.ks")) {
    if (v.kind != TomlValue::Kind::Number || v.num < 1.0 ||
        std::abs(v.num - std::round(v.num)) > 1e-9)
      throw ConfigError("experiment.ks must hold positive integers");
    ks.push_back(static_cast<int>(std::llround(v.num)));
  }
  if (ks.size() < 2) throw ConfigError("experiment.ks needs at least two entries");

  const std::vector<TomlValue>& box = toml.get_array("experiment.box");
  if (box.size() != static_cast<size_t>(2 * m.dim))
    throw ConfigError("experiment.box must list one [lo, hi] pair per q axis then per p axis");
  Box q_range, p_range;
  for (size_t i = 0; i < box.size(); ++i) {
    const TomlValue& pair = box[i];
    if (pair.kind != TomlValue::Kind::Array || pair.items.size() != 2 ||
        pair.items[0].kind != TomlValue::Kind::Number ||
        pair.items[1].kind != TomlValue::Kind::Number)
      throw ConfigError("experiment.box entries must be [lo, hi] number pairs");
    const double lo = pair.items[0].num, hi = pair.items[1].num;
    if (!(lo < hi)) throw ConfigError("experiment.box entries need lo < hi");
    if (i < static_cast<size_t>(m.dim))
      q_range.push_back({lo, hi});
    else
      p_range.push_back({lo, hi});
  }

  std::vector<PhasePoint> base_points;
  for (const TomlValue& v : toml.get_array("experiment.base_points")) {
    if (v.kind != TomlValue::Kind::Array || v.items.size() != static_cast<size_t>(2 * m.dim))
      throw ConfigError("experiment.base_points entries must list q then p coordinates");
    Vec q = Vec::zero(m.dim), p = Vec::zero(m.dim);
    for (int a = 0; a < m.dim; ++a) {
      if (v.items[static_cast<size_t>(a)].kind != TomlValue::Kind::Number ||
          v.items[static_cast<size_t>(m.dim + a)].kind != TomlValue::Kind::Number)
        throw ConfigError("experiment.base_points entries must hold numbers");
      q[a] = v.items[static_cast<size_t>(a)].num;
      p[a] = v.items[static_cast<size_t>(m.dim + a)].num;
    }
    base_points.emplace_back(q, p, m);
  }
  if (base_points.empty()) throw ConfigError("experiment.base_points needs at least one entry");

  const std::string mode_text = toml.get_string_or("experiment.mode", "tonelli");
  experiment::Mode mode;
  if (mode_text == "tonelli")
    mode = experiment::Mode::TonelliTheorem;
  else if (mode_text == "c1")
    mode = experiment::Mode::C1Theorem;
  else
    throw ConfigError("experiment.mode must be \"tonelli\" or \"c1\"");

  const double tau = toml.get_number_or("experiment.tau", 0.2);
  const double T = toml.get_number_or("experiment.T", 1.0);
  if (tau <= 0.0 || T <= 0.0) throw ConfigError("experiment.tau and experiment.T must be positive");

  experiment::Tolerances tol;
  tol.conclusion = toml.get_number_or("experiment.tol_conclusion", tol.conclusion);
  tol.hyp_absolute = toml.get_number_or("experiment.tol_hyp_absolute", tol.hyp_absolute);
  tol.hyp_ratio = toml.get_number_or("experiment.tol_hyp_ratio", tol.hyp_ratio);
  tol.replay_identity = toml.get_number_or("experiment.tol_replay", tol.replay_identity);

  SampleScheme scheme;
  scheme.seed = static_cast<uint64_t>(toml.get_integer_or("experiment.seed", 20260801));
  scheme.grid_per_axis = static_cast<int>(toml.get_integer_or("experiment.grid_per_axis", 0));
  scheme.random_samples =
      static_cast<int>(toml.get_integer_or("experiment.random_samples", 1000));

  experiment::RigidityExperiment exp{std::move(f),
                                     std::move(g),
                                     std::move(declared),
                                     std::move(q_range),
                                     std::move(p_range),
                                     std::move(ks),
                                     std::move(base_points),
                                     tau,
                                     T,
                                     mode,
                                     tol,
                                     scheme,
                                     static_cast<int>(toml.get_integer_or(
                                         "experiment.minimizer_nodes", 201)),
                                     toml.get_number_or("experiment.dt", 1e-3),
                                     toml.get_number_or("experiment.c1_radius", 0.5)};
  if (exp.minimizer_nodes < 3) throw ConfigError("experiment.minimizer_nodes must be >= 3");
  if (exp.dt <= 0.0) throw ConfigError("experiment.dt must be positive");
  if (exp.c1_radius <= 0.0) throw ConfigError("experiment.c1_radius must be positive");
  return exp;
}

}  // namespace riglab::config
