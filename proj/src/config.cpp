#include "nlbound/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "nlbound/error.hpp"

namespace nlbound {

namespace {

void require_keys(const YAML::Node& node, const std::string& path, const std::set<std::string>& allowed) {
  if (!node.IsMap()) throw ConfigError(path, "expected a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.contains(key)) {
      throw ConfigError(path.empty() ? key : path + "." + key, "unknown key");
    }
  }
}

std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

bool parse_plain_double(const std::string& text, double& out) {
  if (text.empty()) return false;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

int parse_int(const YAML::Node& node, const std::string& key) {
  const double v = parse_real(node, key);
  if (v != std::floor(v) || std::abs(v) > 1e9) throw ConfigError(key, "expected an integer");
  return static_cast<int>(v);
}

// Parses a one-based index such as "2" and returns it zero-based.
int parse_index(const std::string& text, int dimension, const std::string& key) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError(key, "index must be an integer");
  }
  if (v < 1 || v > dimension) {
    throw ConfigError(key, fmt::format("index {} outside 1..{}", v, dimension));
  }
  return v - 1;
}

WaveKind parse_kind(const YAML::Node& node, const std::string& key) {
  if (!node.IsScalar()) throw ConfigError(key, "expected 'sin' or 'cos'");
  const auto s = node.as<std::string>();
  if (s == "sin") return WaveKind::Sin;
  if (s == "cos") return WaveKind::Cos;
  throw ConfigError(key, "expected 'sin' or 'cos', got '" + s + "'");
}

QuasiPeriodicScalar parse_qps(const YAML::Node& node, const std::string& path) {
  if (node.IsScalar()) return QuasiPeriodicScalar(parse_real(node, path));
  require_keys(node, path, {"offset", "term"});
  const double offset = node["offset"] ? parse_real(node["offset"], path + ".offset") : 0.0;
  std::vector<Harmonic> terms;
  if (const auto t = node["term"]) {
    if (!t.IsSequence()) throw ConfigError(path + ".term", "expected a list of terms");
    for (std::size_t i = 0; i < t.size(); ++i) {
      const auto item_path = fmt::format("{}.term[{}]", path, i);
      const auto& item = t[i];
      require_keys(item, item_path, {"amplitude", "frequency", "phase", "kind"});
      if (!item["amplitude"]) throw ConfigError(item_path + ".amplitude", "missing");
      if (!item["frequency"]) throw ConfigError(item_path + ".frequency", "missing");
      Harmonic h;
      h.amplitude = parse_real(item["amplitude"], item_path + ".amplitude");
      h.frequency = parse_real(item["frequency"], item_path + ".frequency");
      h.phase = item["phase"] ? parse_real(item["phase"], item_path + ".phase") : 0.0;
      h.kind = item["kind"] ? parse_kind(item["kind"], item_path + ".kind") : WaveKind::Sin;
      terms.push_back(h);
    }
  }
  return QuasiPeriodicScalar(offset, std::move(terms));
}

VdpParameters parse_preset(const YAML::Node& node) {
  VdpParameters p;
  if (node.IsScalar()) {
    if (node.as<std::string>() != "vdp") throw ConfigError("preset", "unknown preset '" + node.as<std::string>() + "'");
    return p;
  }
  require_keys(node, "preset",
               {"name", "omega0", "alpha1", "alpha2", "a1", "a2", "r1", "r2", "a", "omega2"});
  if (!node["name"]) throw ConfigError("preset.name", "missing");
  if (node["name"].as<std::string>() != "vdp") {
    throw ConfigError("preset.name", "unknown preset '" + node["name"].as<std::string>() + "'");
  }
  auto read = [&](const char* key, double& field) {
    if (node[key]) field = parse_real(node[key], std::string("preset.") + key);
  };
  read("omega0", p.omega0);
  read("alpha1", p.alpha1);
  read("alpha2", p.alpha2);
  read("a1", p.a1);
  read("a2", p.a2);
  read("r1", p.r1);
  read("r2", p.r2);
  read("a", p.a);
  read("omega2", p.omega2);
  return p;
}

YAML::Node qps_to_node(const QuasiPeriodicScalar& q) {
  if (q.terms().empty()) return YAML::Node(q.offset());
  YAML::Node n;
  n["offset"] = q.offset();
  for (const auto& h : q.terms()) {
    YAML::Node t;
    t["amplitude"] = h.amplitude;
    t["frequency"] = h.frequency;
    t["phase"] = h.phase;
    t["kind"] = h.kind == WaveKind::Sin ? "sin" : "cos";
    n["term"].push_back(t);
  }
  return n;
}

}  // namespace

double parse_real(const YAML::Node& node, const std::string& key) {
  if (!node.IsScalar()) throw ConfigError(key, "expected a number");
  const std::string raw = trim(node.as<std::string>());
  double v = 0.0;
  if (parse_plain_double(raw, v)) {
    if (!std::isfinite(v)) throw ConfigError(key, "value must be finite");
    return v;
  }
  if (raw.size() >= 2 && raw.ends_with("pi")) {
    std::string factor = trim(raw.substr(0, raw.size() - 2));
    if (!factor.empty() && factor.back() == '*') factor = trim(factor.substr(0, factor.size() - 1));
    double k = 1.0;
    if (factor == "-") {
      k = -1.0;
    } else if (!factor.empty() && !parse_plain_double(factor, k)) {
      throw ConfigError(key, "cannot parse '" + raw + "' as a number");
    }
    return k * std::numbers::pi;
  }
  throw ConfigError(key, "cannot parse '" + raw + "' as a number");
}

SystemSpec spec_from_node(const YAML::Node& root) {
  if (!root || root.IsNull()) throw ConfigError("<root>", "empty configuration");
  if (!root.IsMap()) throw ConfigError("<root>", "expected a mapping");

  if (root["preset"]) {
    require_keys(root, "", {"preset", "t0"});
    SystemSpec spec = vdp_preset(parse_preset(root["preset"]));
    if (root["t0"]) spec.t0 = parse_real(root["t0"], "t0");
    spec.validate();
    return spec;
  }

  require_keys(root, "", {"dimension", "t0", "linear", "nonlinear", "forcing"});
  if (!root["dimension"]) throw ConfigError("dimension", "missing");
  const int n = parse_int(root["dimension"], "dimension");
  if (n < 1) throw ConfigError("dimension", "must be a positive integer");

  SystemSpec spec;
  spec.t0 = root["t0"] ? parse_real(root["t0"], "t0") : 0.0;

  auto a = MatrixFunctionSpec::zero(n);
  if (const auto lin = root["linear"]; lin && !lin.IsNull()) {
    if (!lin.IsMap()) throw ConfigError("linear", "expected a mapping");
    for (const auto& kv : lin) {
      const auto key = kv.first.as<std::string>();
      const auto path = "linear." + key;
      if (!key.starts_with("entry.")) throw ConfigError(path, "unknown key");
      const auto rest = key.substr(6);
      const auto dot = rest.find('.');
      if (dot == std::string::npos) throw ConfigError(path, "expected entry.<row>.<col>");
      const int i = parse_index(rest.substr(0, dot), n, path);
      const int j = parse_index(rest.substr(dot + 1), n, path);
      a.entry(i, j) = parse_qps(kv.second, path);
    }
  }
  spec.linear = std::move(a);

  std::vector<Monomial> terms;
  if (const auto nl = root["nonlinear"]; nl && !nl.IsNull()) {
    require_keys(nl, "nonlinear", {"term"});
    const auto t = nl["term"];
    if (t && !t.IsNull()) {
      if (!t.IsSequence()) throw ConfigError("nonlinear.term", "expected a list of terms");
      for (std::size_t k = 0; k < t.size(); ++k) {
        const auto path = fmt::format("nonlinear.term[{}]", k);
        const auto& item = t[k];
        require_keys(item, path, {"component", "coefficient", "exponents"});
        for (const char* req : {"component", "coefficient", "exponents"}) {
          if (!item[req]) throw ConfigError(path + "." + req, "missing");
        }
        Monomial m;
        m.component = parse_index(item["component"].as<std::string>(), n, path + ".component");
        m.coefficient = parse_qps(item["coefficient"], path + ".coefficient");
        const auto ex = item["exponents"];
        if (!ex.IsSequence()) throw ConfigError(path + ".exponents", "expected an integer list");
        if (ex.size() != static_cast<std::size_t>(n)) {
          throw ConfigError(path + ".exponents", fmt::format("expected {} exponents, got {}", n, ex.size()));
        }
        for (std::size_t j = 0; j < ex.size(); ++j) {
          const int e = parse_int(ex[j], fmt::format("{}.exponents[{}]", path, j));
          if (e < 0) throw ConfigError(fmt::format("{}.exponents[{}]", path, j), "must be non-negative");
          m.exponents.push_back(e);
        }
        terms.push_back(std::move(m));
      }
    }
  }
  spec.nonlinear = PolynomialVectorField(n, std::move(terms));

  spec.forcing.assign(n, QuasiPeriodicScalar{});
  if (const auto fo = root["forcing"]; fo && !fo.IsNull()) {
    if (!fo.IsMap()) throw ConfigError("forcing", "expected a mapping");
    for (const auto& kv : fo) {
      const auto key = kv.first.as<std::string>();
      const auto path = "forcing." + key;
      spec.forcing[parse_index(key, n, path)] = parse_qps(kv.second, path);
    }
  }
  spec.validate();
  return spec;
}

SystemSpec parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError("<document>", std::string("malformed YAML: ") + e.what());
  }
  try {
    return spec_from_node(root);
  } catch (const YAML::Exception& e) {
    throw ConfigError("<document>", e.what());
  }
}

SystemSpec load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), "config not found");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

YAML::Node spec_to_node(const SystemSpec& spec) {
  YAML::Node root;
  if (spec.preset) {
    const auto& p = *spec.preset;
    YAML::Node pre;
    pre["name"] = "vdp";
    pre["omega0"] = p.omega0;
    pre["alpha1"] = p.alpha1;
    pre["alpha2"] = p.alpha2;
    pre["a1"] = p.a1;
    pre["a2"] = p.a2;
    pre["r1"] = p.r1;
    pre["r2"] = p.r2;
    pre["a"] = p.a;
    pre["omega2"] = p.omega2;
    root["preset"] = pre;
    root["t0"] = spec.t0;
    return root;
  }
  const int n = spec.dimension();
  root["dimension"] = n;
  root["t0"] = spec.t0;
  YAML::Node lin(YAML::NodeType::Map);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const auto& q = spec.linear.entry(i, j);
      if (q == QuasiPeriodicScalar{}) continue;
      lin[fmt::format("entry.{}.{}", i + 1, j + 1)] = qps_to_node(q);
    }
  root["linear"] = lin;
  YAML::Node nl(YAML::NodeType::Map);
  YAML::Node terms(YAML::NodeType::Sequence);
  for (const auto& m : spec.nonlinear.terms()) {
    YAML::Node t;
    t["component"] = m.component + 1;
    t["coefficient"] = qps_to_node(m.coefficient);
    YAML::Node ex(YAML::NodeType::Sequence);
    for (int e : m.exponents) ex.push_back(e);
    ex.SetStyle(YAML::EmitterStyle::Flow);
    t["exponents"] = ex;
    terms.push_back(t);
  }
  nl["term"] = terms;
  root["nonlinear"] = nl;
  YAML::Node fo(YAML::NodeType::Map);
  for (int i = 0; i < n; ++i) {
    if (spec.forcing[i] == QuasiPeriodicScalar{}) continue;
    fo[std::to_string(i + 1)] = qps_to_node(spec.forcing[i]);
  }
  root["forcing"] = fo;
  return root;
}

std::string to_config_text(const SystemSpec& spec) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << spec_to_node(spec);
  return std::string(out.c_str()) + "\n";
}

}  // namespace nlbound
