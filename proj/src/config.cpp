#include "qslin/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "qslin/error.hpp"

namespace qslin {

namespace {

#include "builtin_configs.inc"

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

bool is_identifier(std::string_view s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  return std::all_of(s.begin(), s.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; });
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

class Reader {
 public:
  Reader(std::string_view origin) : origin_(origin) {}

  [[noreturn]] void fail(const std::string& msg) const {
    std::string where = origin_ + ":" + std::to_string(line_);
    if (!section_.empty()) where += ": [" + section_ + "]";
    if (!key_.empty()) where += " " + key_;
    throw ValidationError(where + ": " + msg);
  }

  void set_line(int line) { line_ = line; }
  void set_section(std::string s) { section_ = std::move(s); }
  void set_key(std::string k) { key_ = std::move(k); }
  const std::string& section() const { return section_; }

  double number(std::string_view text) const {
    const std::string t = trim(text);
    double v = 0.0;
    auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size()) fail("'" + t + "' is not a number");
    return v;
  }

  std::uint64_t unsigned_integer(std::string_view text) const {
    const std::string t = trim(text);
    std::uint64_t v = 0;
    auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size()) {
      fail("'" + t + "' is not a non-negative integer");
    }
    return v;
  }

  long integer(std::string_view text) const {
    const std::string t = trim(text);
    long v = 0;
    auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size()) fail("'" + t + "' is not an integer");
    return v;
  }

  std::vector<std::string> list(std::string_view text) const {
    std::vector<std::string> out;
    std::string cur;
    std::stringstream ss{std::string(text)};
    while (std::getline(ss, cur, ',')) {
      std::string t = trim(cur);
      if (t.empty()) fail("empty list element");
      out.push_back(t);
    }
    return out;
  }

  std::vector<double> numbers(std::string_view text) const {
    std::vector<double> out;
    for (const auto& s : list(text)) out.push_back(number(s));
    return out;
  }

 private:
  std::string origin_;
  std::string section_;
  std::string key_;
  int line_ = 0;
};

// Splits "name[1,2]" into name and 1-based indices.
bool split_index(const std::string& key, std::string& base, std::vector<long>& idx) {
  const auto open = key.find('[');
  if (open == std::string::npos) {
    base = key;
    return false;
  }
  if (key.back() != ']') return false;
  base = trim(std::string_view(key).substr(0, open));
  std::stringstream ss(key.substr(open + 1, key.size() - open - 2));
  std::string part;
  while (std::getline(ss, part, ',')) {
    const std::string t = trim(part);
    long v = 0;
    auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size()) {
      idx.clear();
      return true;
    }
    idx.push_back(v);
  }
  return true;
}

void set_indexed(std::vector<std::string>& vec, long i, std::string value, const Reader& rd) {
  if (i < 1 || i > 64) rd.fail("index out of range");
  if (vec.size() < static_cast<std::size_t>(i)) vec.resize(static_cast<std::size_t>(i));
  if (!vec[static_cast<std::size_t>(i - 1)].empty()) rd.fail("duplicate entry");
  vec[static_cast<std::size_t>(i - 1)] = std::move(value);
}

}  // namespace

const std::vector<double>& ProjectConfig::named_equilibrium(const std::string& n) const {
  for (const auto& [key, y] : scenario) {
    if (key == n) return y;
  }
  std::string known;
  for (const auto& [key, _] : scenario) known += (known.empty() ? "" : ", ") + key;
  throw ValidationError("unknown equilibrium '" + n + "' (known: " + (known.empty() ? "none" : known) + ")");
}

ProjectConfig parse_config(std::string_view text, std::string_view origin) {
  ProjectConfig cfg;
  Reader rd(origin);
  static const std::set<std::string> sections{"parameters", "definitions", "system", "promotion",
                                              "flat",       "solver",      "scenario"};
  std::set<std::string> seen_keys;
  std::set<std::string> seen_sections;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    rd.set_line(++line);
    rd.set_key("");
    // Strip a comment outside quotes.
    bool quoted = false;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw[i] == '\\' && quoted) {
        ++i;
      } else if (raw[i] == '"') {
        quoted = !quoted;
      } else if (!quoted && (raw[i] == '#' || raw[i] == ';')) {
        raw.resize(i);
        break;
      }
    }
    const std::string s = trim(raw);
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') rd.fail("malformed section header");
      std::string name = trim(std::string_view(s).substr(1, s.size() - 2));
      if (!sections.count(name)) rd.fail("unknown section [" + name + "]");
      if (!seen_sections.insert(name).second) rd.fail("section [" + name + "] appears twice");
      rd.set_section(name);
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) rd.fail("expected 'key = value'");
    const std::string key = trim(std::string_view(s).substr(0, eq));
    std::string value = trim(std::string_view(s).substr(eq + 1));
    rd.set_key(key);
    if (key.empty()) rd.fail("empty key");
    if (!seen_keys.insert(rd.section() + "/" + key).second) rd.fail("duplicate key");
    if (!value.empty() && value.front() == '"') {
      std::string unq;
      std::size_t i = 1;
      bool closed = false;
      for (; i < value.size(); ++i) {
        if (value[i] == '\\' && i + 1 < value.size()) {
          unq += value[++i];
        } else if (value[i] == '"') {
          closed = true;
          ++i;
          break;
        } else {
          unq += value[i];
        }
      }
      if (!closed) rd.fail("unterminated string");
      if (!trim(std::string_view(value).substr(i)).empty()) rd.fail("unexpected text after string");
      value = unq;
    }
    if (value.empty()) rd.fail("empty value");

    const std::string& sec = rd.section();
    std::string base;
    std::vector<long> idx;
    const bool indexed = split_index(key, base, idx);
    if (sec.empty()) {
      if (key != "name") rd.fail("unknown key outside a section");
      cfg.name = value;
    } else if (sec == "parameters" || sec == "definitions") {
      if (!is_identifier(key)) rd.fail("not a valid identifier");
      (sec == "parameters" ? cfg.parameters : cfg.definitions).emplace_back(key, value);
    } else if (sec == "system") {
      if (key == "coordinates") {
        cfg.coordinates = rd.list(value);
      } else if (key == "velocities") {
        cfg.velocities = rd.list(value);
      } else if (key == "inputs") {
        cfg.inputs = rd.list(value);
      } else if (key == "potential") {
        cfg.potential = value;
      } else if (indexed && (base == "metric" || base == "input_matrix")) {
        if (idx.size() != 2 || idx[0] < 1 || idx[1] < 1) rd.fail("expected two 1-based indices");
        auto& target = base == "metric" ? cfg.metric : cfg.input_matrix;
        target[{static_cast<std::size_t>(idx[0] - 1), static_cast<std::size_t>(idx[1] - 1)}] = value;
      } else {
        rd.fail("unknown key");
      }
    } else if (sec == "promotion") {
      if (key != "pairs") rd.fail("unknown key");
      if (value == "none") continue;
      for (const auto& item : rd.list(value)) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) rd.fail("expected input:coordinate pairs");
        cfg.promotion.emplace_back(trim(std::string_view(item).substr(0, colon)),
                                   trim(std::string_view(item).substr(colon + 1)));
      }
    } else if (sec == "flat") {
      if (key == "equilibrium") {
        cfg.equilibrium = rd.numbers(value);
      } else if (indexed && (base == "outputs" || base == "Fq")) {
        if (idx.size() != 1) rd.fail("expected one 1-based index");
        set_indexed(base == "outputs" ? cfg.outputs : cfg.Fq, idx[0], value, rd);
      } else {
        rd.fail("unknown key");
      }
    } else if (sec == "solver") {
      auto& sv = cfg.solver;
      auto positive = [&](double x) {
        if (!(x > 0.0)) rd.fail("must be positive");
        return x;
      };
      if (key == "max_order") {
        sv.max_order = static_cast<int>(rd.integer(value));
        if (sv.max_order < 2 || sv.max_order > 12) rd.fail("must lie between 2 and 12");
      } else if (key == "residual_tol") {
        sv.residual_tol = positive(rd.number(value));
      } else if (key == "residual_points") {
        sv.residual_points = static_cast<int>(positive(static_cast<double>(rd.integer(value))));
      } else if (key == "rank_tol") {
        sv.rank_tol = positive(rd.number(value));
      } else if (key == "sample_radius") {
        sv.sample_radius = positive(rd.number(value));
      } else if (key == "samples") {
        sv.samples = static_cast<int>(rd.integer(value));
        if (sv.samples < 0) rd.fail("must not be negative");
      } else if (key == "seed") {
        sv.seed = rd.unsigned_integer(value);
      } else if (key == "newton_tol") {
        sv.newton_tol = positive(rd.number(value));
      } else if (key == "newton_max_iter") {
        sv.newton_max_iter = static_cast<int>(positive(static_cast<double>(rd.integer(value))));
      } else if (key == "newton_halvings") {
        sv.newton_halvings = static_cast<int>(rd.integer(value));
      } else if (key == "dt") {
        sv.dt = positive(rd.number(value));
      } else if (key == "T") {
        sv.T = rd.number(value);
        if (sv.T < 0.0) rd.fail("must not be negative");
      } else if (key == "boundary_order") {
        sv.boundary_order = static_cast<int>(rd.integer(value));
        if (sv.boundary_order < 1 || sv.boundary_order > 10) rd.fail("must lie between 1 and 10");
      } else if (key == "strategy") {
        if (value != "analytic" && value != "numeric") rd.fail("must be 'analytic' or 'numeric'");
        sv.strategy = value;
      } else if (key == "branch_factor") {
        sv.branch_factor = positive(rd.number(value));
      } else {
        rd.fail("unknown key");
      }
    } else if (sec == "scenario") {
      if (!is_identifier(key)) rd.fail("not a valid identifier");
      cfg.scenario.emplace_back(key, rd.numbers(value));
    }
  }

  // Cross-field checks.
  rd.set_line(line);
  auto fail = [&](const std::string& sec, const std::string& key, const std::string& msg) {
    throw ValidationError(std::string(origin) + ": [" + sec + "] " + key + ": " + msg);
  };
  const std::size_t p = cfg.coordinates.size();
  if (p == 0) fail("system", "coordinates", "missing");
  if (cfg.velocities.size() != p) fail("system", "velocities", "expected " + std::to_string(p) + " names");
  std::set<std::string> names;
  for (const auto* list : {&cfg.coordinates, &cfg.velocities, &cfg.inputs}) {
    for (const auto& n : *list) {
      if (!is_identifier(n)) fail("system", "coordinates", "'" + n + "' is not a valid identifier");
      if (!names.insert(n).second) fail("system", "coordinates", "duplicate name '" + n + "'");
    }
  }
  for (const auto& [pos, _] : cfg.metric) {
    if (pos.first >= p || pos.second >= p) {
      fail("system", "metric[" + std::to_string(pos.first + 1) + "," + std::to_string(pos.second + 1) + "]",
           "index outside " + std::to_string(p) + "x" + std::to_string(p));
    }
  }
  for (const auto& [pos, _] : cfg.input_matrix) {
    if (pos.first >= p || pos.second >= cfg.inputs.size()) {
      fail("system", "input_matrix[" + std::to_string(pos.first + 1) + "," + std::to_string(pos.second + 1) + "]",
           "index outside " + std::to_string(p) + "x" + std::to_string(cfg.inputs.size()));
    }
  }
  for (const auto& [u, q] : cfg.promotion) {
    if (std::find(cfg.inputs.begin(), cfg.inputs.end(), u) == cfg.inputs.end()) {
      fail("promotion", "pairs", "'" + u + "' is not an input");
    }
    if (std::find(cfg.coordinates.begin(), cfg.coordinates.end(), q) == cfg.coordinates.end()) {
      fail("promotion", "pairs", "'" + q + "' is not a coordinate");
    }
  }
  for (std::size_t j = 0; j < cfg.outputs.size(); ++j) {
    if (cfg.outputs[j].empty()) fail("flat", "outputs[" + std::to_string(j + 1) + "]", "missing");
  }
  if (cfg.outputs.empty()) fail("flat", "outputs", "missing");
  if (cfg.Fq.size() != p) fail("flat", "Fq", "expected " + std::to_string(p) + " rows");
  for (std::size_t i = 0; i < p; ++i) {
    if (cfg.Fq[i].empty()) fail("flat", "Fq[" + std::to_string(i + 1) + "]", "missing");
  }
  const std::size_t m = cfg.outputs.size();
  if (cfg.equilibrium.empty()) cfg.equilibrium.assign(m, 0.0);
  if (cfg.equilibrium.size() != m) fail("flat", "equilibrium", "expected " + std::to_string(m) + " values");
  for (const auto& [key, y] : cfg.scenario) {
    if (y.size() != m) fail("scenario", key, "expected " + std::to_string(m) + " values");
  }
  return cfg;
}

ProjectConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot read config file '" + path.string() + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), path.string());
}

std::string emit_config(const ProjectConfig& cfg) {
  std::ostringstream o;
  auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + v[i];
    return s;
  };
  auto join_numbers = [](const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + format_double(v[i]);
    return s;
  };
  if (!cfg.name.empty()) o << "name = " << quote(cfg.name) << "\n\n";
  o << "[parameters]\n";
  for (const auto& [k, v] : cfg.parameters) o << k << " = " << quote(v) << "\n";
  o << "\n[definitions]\n";
  for (const auto& [k, v] : cfg.definitions) o << k << " = " << quote(v) << "\n";
  o << "\n[system]\n";
  o << "coordinates = " << join(cfg.coordinates) << "\n";
  o << "velocities = " << join(cfg.velocities) << "\n";
  if (!cfg.inputs.empty()) o << "inputs = " << join(cfg.inputs) << "\n";
  o << "potential = " << quote(cfg.potential) << "\n";
  for (const auto& [pos, v] : cfg.metric) {
    o << "metric[" << pos.first + 1 << "," << pos.second + 1 << "] = " << quote(v) << "\n";
  }
  for (const auto& [pos, v] : cfg.input_matrix) {
    o << "input_matrix[" << pos.first + 1 << "," << pos.second + 1 << "] = " << quote(v) << "\n";
  }
  o << "\n[promotion]\n";
  if (cfg.promotion.empty()) {
    o << "pairs = none\n";
  } else {
    std::vector<std::string> items;
    for (const auto& [u, q] : cfg.promotion) items.push_back(u + ":" + q);
    o << "pairs = " << join(items) << "\n";
  }
  o << "\n[flat]\n";
  for (std::size_t j = 0; j < cfg.outputs.size(); ++j) o << "outputs[" << j + 1 << "] = " << quote(cfg.outputs[j]) << "\n";
  for (std::size_t i = 0; i < cfg.Fq.size(); ++i) o << "Fq[" << i + 1 << "] = " << quote(cfg.Fq[i]) << "\n";
  o << "equilibrium = " << join_numbers(cfg.equilibrium) << "\n";
  const auto& sv = cfg.solver;
  o << "\n[solver]\n"
    << "max_order = " << sv.max_order << "\n"
    << "residual_tol = " << format_double(sv.residual_tol) << "\n"
    << "residual_points = " << sv.residual_points << "\n"
    << "rank_tol = " << format_double(sv.rank_tol) << "\n"
    << "sample_radius = " << format_double(sv.sample_radius) << "\n"
    << "samples = " << sv.samples << "\n"
    << "seed = " << sv.seed << "\n"
    << "newton_tol = " << format_double(sv.newton_tol) << "\n"
    << "newton_max_iter = " << sv.newton_max_iter << "\n"
    << "newton_halvings = " << sv.newton_halvings << "\n"
    << "dt = " << format_double(sv.dt) << "\n"
    << "T = " << format_double(sv.T) << "\n"
    << "boundary_order = " << sv.boundary_order << "\n"
    << "strategy = " << sv.strategy << "\n"
    << "branch_factor = " << format_double(sv.branch_factor) << "\n";
  o << "\n[scenario]\n";
  for (const auto& [k, y] : cfg.scenario) o << k << " = " << join_numbers(y) << "\n";
  return o.str();
}

std::vector<std::string> builtin_names() {
  std::vector<std::string> out;
  for (const auto& b : kBuiltinConfigs) out.emplace_back(b.name);
  return out;
}

std::string builtin_config_text(const std::string& name) {
  for (const auto& b : kBuiltinConfigs) {
    if (name == b.name) return std::string(b.text);
  }
  std::string known;
  for (const auto& b : kBuiltinConfigs) known += (known.empty() ? "" : ", ") + std::string(b.name);
  throw ValidationError("unknown built-in config '" + name + "' (known: " + known + ")");
}

ProjectConfig resolve_config(const std::string& spec) {
  static const std::string prefix = "builtin:";
  if (spec.rfind(prefix, 0) == 0) {
    const std::string name = spec.substr(prefix.size());
    return parse_config(builtin_config_text(name), spec);
  }
  return load_config(spec);
}

}  // namespace qslin
