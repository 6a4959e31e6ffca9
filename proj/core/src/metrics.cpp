#include "polymass/metrics.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "polymass/error.hpp"

namespace polymass {

namespace {

int packed_size(int n) { return n * (n + 1) / 2; }

std::string radial_power(int e) {
  if (e == 1) return "r";
  return "r^" + std::to_string(e);
}

void check_decay(AsymType type, double decay, int n) {
  if (type == AsymType::AF && !(decay > (n - 2) / 2.0))
    throw Error("decay rate violates p > (n-2)/2: p = " +
                std::to_string(decay) + ", n = " + std::to_string(n));
  if ((type == AsymType::AHHyperboloid || type == AsymType::AHUpperHalfSpace) &&
      !(decay > n / 2.0))
    throw Error("decay rate violates q > n/2: q = " + std::to_string(decay) +
                ", n = " + std::to_string(n));
}

std::string type_name(AsymType t) {
  switch (t) {
    case AsymType::AF: return "AF";
    case AsymType::AHHyperboloid: return "AH-hyperboloid";
    case AsymType::AHUpperHalfSpace: return "AH-uhs";
    case AsymType::None: break;
  }
  return "AF";
}

Background background_for(AsymType t) {
  switch (t) {
    case AsymType::AF: return Background::Euclidean;
    case AsymType::AHHyperboloid: return Background::HyperbolicHyperboloid;
    case AsymType::AHUpperHalfSpace: return Background::HyperbolicUHS;
    case AsymType::None: break;
  }
  return Background::Euclidean;
}

std::string format_param(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

MetricField MetricSpec::field(const ParamMap& overrides) const {
  ParamMap params = param_defaults;
  for (const auto& [k, v] : overrides) params[k] = v;
  std::vector<Expr> packed;
  packed.reserve(comp_sources.size());
  for (const std::string& src : comp_sources)
    packed.push_back(Expr::parse(src, n));
  std::vector<Expr> pert;
  pert.reserve(pert_sources.size());
  for (const std::string& src : pert_sources)
    pert.push_back(Expr::parse(src, n));
  return MetricField(n, std::move(packed), background, type, decay, params,
                     std::move(pert));
}

std::string MetricSpec::serialize() const {
  std::ostringstream os;
  os << "# metric: " << name << "\n";
  if (!chart.empty()) os << "# chart: " << chart << "\n";
  os << "dim = " << n << "\n";
  os << "type = " << type_name(type) << "\n";
  os << "decay = " << format_param(decay) << "\n";
  for (const auto& [k, v] : param_defaults)
    os << "param " << k << " = " << format_param(v) << "\n";
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j)
      os << "g[" << (i + 1) << "][" << (j + 1)
         << "] = " << comp_sources[static_cast<std::size_t>(packed_index(n, i, j))]
         << "\n";
  return os.str();
}

std::vector<std::string> builtin_metric_names() {
  return {"euclidean",
          "schwarzschild-isotropic",
          "schwarzschild-areal-rect",
          "hyperbolic-hyperboloid",
          "hyperbolic-uhs",
          "ads-schwarzschild-hyperboloid",
          "conformal-custom",
          "perturbed-flat"};
}

MetricSpec builtin_metric(const std::string& name, int n,
                          const ParamMap& params, const ExprOptions& options) {
  if (n < 2 || n > kMaxDim)
    throw Error("metric dimension must be between 2 and " +
                std::to_string(kMaxDim));
  MetricSpec s;
  s.name = name;
  s.n = n;
  s.comp_sources.resize(static_cast<std::size_t>(packed_size(n)));
  auto set = [&](int i, int j, const std::string& src) {
    s.comp_sources[static_cast<std::size_t>(packed_index(n, i, j))] = src;
  };
  auto set_pert = [&](int i, int j, const std::string& src) {
    if (s.pert_sources.empty())
      s.pert_sources.resize(static_cast<std::size_t>(packed_size(n)));
    s.pert_sources[static_cast<std::size_t>(packed_index(n, i, j))] = src;
  };
  auto xi = [](int i) { return "x" + std::to_string(i + 1); };

  if (name == "euclidean") {
    s.chart = "cartesian";
    s.type = AsymType::AF;
    s.background = Background::Euclidean;
    s.decay = std::max(1.0, static_cast<double>(n - 2));
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        set(i, j, i == j ? "1" : "0");
        set_pert(i, j, "0");
      }
  } else if (name == "schwarzschild-isotropic") {
    s.chart = "isotropic-rectangular";
    s.type = AsymType::AF;
    s.background = Background::Euclidean;
    s.decay = n - 2;
    s.param_defaults["m"] = 1.0;
    std::string expnt;
    if (4 % (n - 2) == 0)
      expnt = std::to_string(4 / (n - 2));
    else
      expnt = "(4/" + std::to_string(n - 2) + ")";
    const std::string conf =
        "(1 + m/(2*" + radial_power(n - 2) + "))^" + expnt;
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        set(i, j, i == j ? conf : "0");
        set_pert(i, j, i == j ? "(" + conf + " - 1)" : "0");
      }
  } else if (name == "schwarzschild-areal-rect") {
    s.chart = "areal-rectangular";
    s.type = AsymType::AF;
    s.background = Background::Euclidean;
    s.decay = n - 2;
    s.param_defaults["m"] = 1.0;
    const std::string amp =
        "(2*m/(" + radial_power(n - 2) + " - 2*m))";
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        const std::string quad =
            amp + "*" + xi(i) + "*" + xi(j) + "/r^2";
        set(i, j, i == j ? "1 + " + quad : quad);
        set_pert(i, j, quad);
      }
  } else if (name == "hyperbolic-hyperboloid") {
    s.chart = "hyperboloid-z";
    s.type = AsymType::AHHyperboloid;
    s.background = Background::HyperbolicHyperboloid;
    s.decay = n;
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        const std::string quad = xi(i) + "*" + xi(j) + "/(1 + r^2)";
        set(i, j, i == j ? "1 - " + quad : "-" + quad);
        set_pert(i, j, "0");
      }
  } else if (name == "hyperbolic-uhs") {
    s.chart = "upper-half-space-y";
    s.type = AsymType::AHUpperHalfSpace;
    s.background = Background::HyperbolicUHS;
    s.decay = n;
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        set(i, j, i == j ? "1/x1^2" : "0");
        set_pert(i, j, "0");
      }
  } else if (name == "ads-schwarzschild-hyperboloid") {
    s.chart = "hyperboloid-z";
    s.type = AsymType::AHHyperboloid;
    s.background = Background::HyperbolicHyperboloid;
    s.decay = n;
    s.param_defaults["m"] = 1.0;
    const std::string eta = "(2*m/(" + radial_power(n - 2) +
                            "*(1 + r^2)*(1 + r^2 - 2*m/" +
                            radial_power(n - 2) + ")))";
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        const std::string bar = xi(i) + "*" + xi(j) + "/(1 + r^2)";
        const std::string corr =
            eta + "*" + xi(i) + "*" + xi(j) + "/r^2";
        set(i, j, i == j ? "1 - " + bar + " + " + corr
                         : "-" + bar + " + " + corr);
        set_pert(i, j, corr);
      }
  } else if (name == "conformal-custom") {
    s.chart = "cartesian";
    s.type = AsymType::AF;
    s.background = Background::Euclidean;
    auto it = options.find("phi");
    const std::string phi =
        it != options.end() ? it->second
                            : "c/" + radial_power(n - 2);
    if (it == options.end()) s.param_defaults["c"] = 0.1;
    auto dit = options.find("decay");
    s.decay = dit != options.end() ? std::stod(dit->second)
                                   : static_cast<double>(n - 2);
    const std::string conf = "exp(2*(" + phi + "))";
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        set(i, j, i == j ? conf : "0");
        set_pert(i, j, i == j ? "(" + conf + " - 1)" : "0");
      }
  } else if (name == "perturbed-flat") {
    s.chart = "cartesian";
    s.type = AsymType::AF;
    s.background = Background::Euclidean;
    s.param_defaults["eps"] = 0.01;
    double p = 1.0;
    if (auto it = params.find("p"); it != params.end()) p = it->second;
    s.param_defaults["p"] = p;
    s.decay = p;
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        std::string sij = i == j ? "1" : "0";
        const std::string key =
            "s" + std::to_string(i + 1) + std::to_string(j + 1);
        if (auto it = options.find(key); it != options.end()) sij = it->second;
        if (sij == "0") {
          set(i, j, i == j ? "1" : "0");
          set_pert(i, j, "0");
        } else {
          const std::string pert = "eps*(" + sij + ")/r^p";
          set(i, j, i == j ? "1 + " + pert : pert);
          set_pert(i, j, pert);
        }
      }
  } else {
    throw Error("unknown builtin metric '" + name + "'");
  }

  for (const auto& [k, v] : params) s.param_defaults[k] = v;
  check_decay(s.type, s.decay, n);

  // Components must parse; builtin strings are trusted but validated here.
  for (const std::string& src : s.comp_sources) Expr::parse(src, n);
  for (const std::string& src : s.pert_sources) Expr::parse(src, n);
  return s;
}

namespace {

void trim(std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  const auto e = s.find_last_not_of(" \t\r\n");
  s = (b == std::string::npos) ? "" : s.substr(b, e - b + 1);
}

}  // namespace

MetricSpec parse_metric_text(const std::string& text,
                             const std::string& origin) {
  MetricSpec s;
  s.name = origin;
  s.n = 0;
  s.type = AsymType::None;
  s.decay = std::nan("");
  std::map<std::pair<int, int>, std::pair<std::string, int>> comps;

  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& msg, int col = 1) {
    throw ParseError(origin + ":" + std::to_string(lineno) + ": " + msg,
                     0, lineno, col);
  };
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = line;
    trim(t);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) fail("expected 'key = value'");
    std::string key = t.substr(0, eq);
    std::string value = t.substr(eq + 1);
    trim(key);
    trim(value);
    if (key == "dim") {
      s.n = std::stoi(value);
      if (s.n < 2 || s.n > kMaxDim)
        fail("dimension must be between 2 and " + std::to_string(kMaxDim));
    } else if (key == "type") {
      if (value == "AF")
        s.type = AsymType::AF;
      else if (value == "AH-hyperboloid")
        s.type = AsymType::AHHyperboloid;
      else if (value == "AH-uhs")
        s.type = AsymType::AHUpperHalfSpace;
      else
        fail("unknown type '" + value + "' (AF | AH-hyperboloid | AH-uhs)");
    } else if (key == "decay") {
      s.decay = std::stod(value);
    } else if (key.rfind("param ", 0) == 0) {
      std::string pname = key.substr(6);
      trim(pname);
      if (pname.empty()) fail("param line needs a name");
      s.param_defaults[pname] = std::stod(value);
    } else if (key.size() > 1 && key[0] == 'g') {
      int i = 0, j = 0;
      if (std::sscanf(key.c_str(), "g[%d][%d]", &i, &j) != 2)
        fail("malformed component key '" + key + "'");
      if (s.n == 0) fail("dim must be declared before components");
      if (i < 1 || i > s.n || j < 1 || j > s.n)
        fail("component index out of range for dim " + std::to_string(s.n));
      if (i > j)
        fail("asymmetric specification: give only i <= j (got g[" +
             std::to_string(i) + "][" + std::to_string(j) + "])");
      if (comps.count({i, j}))
        fail("duplicate component g[" + std::to_string(i) + "][" +
             std::to_string(j) + "]");
      comps[{i, j}] = {value, lineno};
    } else {
      fail("unknown directive '" + key + "'");
    }
  }
  lineno = 0;
  if (s.n == 0) fail("missing 'dim'");
  if (s.type == AsymType::None) fail("missing 'type'");
  if (std::isnan(s.decay)) fail("missing 'decay'");

  std::string missing;
  for (int i = 1; i <= s.n; ++i)
    for (int j = i; j <= s.n; ++j)
      if (!comps.count({i, j}))
        missing += (missing.empty() ? "" : ", ") + std::string("g[") +
                   std::to_string(i) + "][" + std::to_string(j) + "]";
  if (!missing.empty()) fail("missing components: " + missing);

  s.comp_sources.resize(static_cast<std::size_t>(packed_size(s.n)));
  for (const auto& [ij, src_line] : comps) {
    lineno = src_line.second;
    try {
      Expr::parse(src_line.first, s.n);
    } catch (const ParseError& e) {
      throw ParseError(origin + ":" + std::to_string(lineno) + ": " +
                           e.what(),
                       e.offset, lineno,
                       static_cast<int>(e.offset) + 1);
    }
    s.comp_sources[static_cast<std::size_t>(
        packed_index(s.n, ij.first - 1, ij.second - 1))] = src_line.first;
  }

  try {
    check_decay(s.type, s.decay, s.n);
  } catch (const Error& e) {
    throw ParseError(origin + ": " + e.what(), 0, 0, 0);
  }
  s.background = background_for(s.type);
  return s;
}

MetricSpec load_metric_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open metric file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_metric_text(buf.str(), path);
}

void save_metric_file(const MetricSpec& spec, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write metric file '" + path + "'");
  out << spec.serialize();
}

MetricSpec resolve_metric(const std::string& name_or_path, int n,
                          const ParamMap& params, const ExprOptions& options) {
  for (const std::string& b : builtin_metric_names())
    if (b == name_or_path) return builtin_metric(name_or_path, n, params, options);
  MetricSpec s = load_metric_file(name_or_path);
  for (const auto& [k, v] : params) s.param_defaults[k] = v;
  return s;
}

std::vector<Expr> uhs_to_hyperboloid_map(int n) {
  // z_1 = (|y|^2 - 1)/(2 y_1), z_a = y_a / y_1 for a >= 2.
  std::vector<Expr> phi;
  phi.reserve(static_cast<std::size_t>(n));
  phi.push_back(Expr::parse("(r^2 - 1)/(2*x1)", n));
  for (int a = 1; a < n; ++a)
    phi.push_back(Expr::parse("x" + std::to_string(a + 1) + "/x1", n));
  return phi;
}

MetricField to_upper_half_space(const MetricSpec& spec,
                                const ParamMap& overrides) {
  if (spec.type != AsymType::AHHyperboloid)
    throw Error("to_upper_half_space expects a hyperboloid-chart AH metric");
  const MetricField g = spec.field(overrides);
  return pullback(g, uhs_to_hyperboloid_map(spec.n), Background::HyperbolicUHS,
                  AsymType::AHUpperHalfSpace);
}

}  // namespace polymass
