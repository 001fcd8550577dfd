#include "mfnn/config.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <variant>

namespace mfnn {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return r;
  } catch (...) {
    throw std::invalid_argument("config." + key + ": expected a number, got '" + v + "'");
  }
}

template <typename T>
T parse_int_like(const std::string& key, const std::string& v) {
  T r{};
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), r);
  if (ec != std::errc() || p != v.data() + v.size())
    throw std::invalid_argument("config." + key + ": expected an integer, got '" + v + "'");
  return r;
}

template <typename T, typename ParseOne>
std::vector<T> parse_list(const std::string& key, const std::string& v, ParseOne parse_one) {
  std::vector<T> out;
  if (trim(v).empty()) return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_one(key, trim(item)));
  return out;
}

struct Field {
  const char* name;
  std::variant<double ExperimentConfig::*, int ExperimentConfig::*, std::uint64_t ExperimentConfig::*,
               std::string ExperimentConfig::*, std::vector<double> ExperimentConfig::*,
               std::vector<int> ExperimentConfig::*>
      member;
};

// Schema order doubles as the canonical serialization order.
const Field kSchema[] = {
    {"teacher", &ExperimentConfig::teacher},
    {"teacher_params", &ExperimentConfig::teacher_params},
    {"d", &ExperimentConfig::d},
    {"samples", &ExperimentConfig::samples},
    {"x_lo", &ExperimentConfig::x_lo},
    {"x_hi", &ExperimentConfig::x_hi},
    {"y_lo", &ExperimentConfig::y_lo},
    {"y_hi", &ExperimentConfig::y_hi},
    {"activation", &ExperimentConfig::activation},
    {"depth", &ExperimentConfig::depth},
    {"n1", &ExperimentConfig::n1},
    {"n2", &ExperimentConfig::n2},
    {"n3", &ExperimentConfig::n3},
    {"ladder", &ExperimentConfig::ladder},
    {"schedule", &ExperimentConfig::schedule},
    {"constant_alpha", &ExperimentConfig::constant_alpha},
    {"c_lo", &ExperimentConfig::c_lo},
    {"c_hi", &ExperimentConfig::c_hi},
    {"w1_lo", &ExperimentConfig::w1_lo},
    {"w1_hi", &ExperimentConfig::w1_hi},
    {"w2_lo", &ExperimentConfig::w2_lo},
    {"w2_hi", &ExperimentConfig::w2_hi},
    {"w3_lo", &ExperimentConfig::w3_lo},
    {"w3_hi", &ExperimentConfig::w3_hi},
    {"mc", &ExperimentConfig::mc},
    {"mw", &ExperimentConfig::mw},
    {"mu", &ExperimentConfig::mu},
    {"mv", &ExperimentConfig::mv},
    {"mc_ref", &ExperimentConfig::mc_ref},
    {"n2_grid", &ExperimentConfig::n2_grid},
    {"dt", &ExperimentConfig::dt},
    {"scheme", &ExperimentConfig::scheme},
    {"horizon", &ExperimentConfig::horizon},
    {"max_horizon", &ExperimentConfig::max_horizon},
    {"snapshot_times", &ExperimentConfig::snapshot_times},
    {"ablation_horizon", &ExperimentConfig::ablation_horizon},
    {"grid_size", &ExperimentConfig::grid_size},
    {"seeds", &ExperimentConfig::seeds},
    {"seed", &ExperimentConfig::seed},
    {"workers", &ExperimentConfig::workers},
    {"output_dir", &ExperimentConfig::output_dir},
};

void assign(ExperimentConfig& cfg, const Field& f, const std::string& value) {
  const std::string key = f.name;
  std::visit(
      [&](auto member) {
        using M = std::remove_cvref_t<decltype(cfg.*member)>;
        if constexpr (std::is_same_v<M, double>)
          cfg.*member = parse_double(key, value);
        else if constexpr (std::is_same_v<M, int>)
          cfg.*member = parse_int_like<int>(key, value);
        else if constexpr (std::is_same_v<M, std::uint64_t>)
          cfg.*member = parse_int_like<std::uint64_t>(key, value);
        else if constexpr (std::is_same_v<M, std::string>)
          cfg.*member = value;
        else if constexpr (std::is_same_v<M, std::vector<double>>)
          cfg.*member = parse_list<double>(key, value, parse_double);
        else
          cfg.*member = parse_list<int>(key, value, parse_int_like<int>);
      },
      f.member);
}

std::string render(const ExperimentConfig& cfg, const Field& f) {
  return std::visit(
      [&](auto member) -> std::string {
        using M = std::remove_cvref_t<decltype(cfg.*member)>;
        if constexpr (std::is_same_v<M, double>) {
          return fmt_double(cfg.*member);
        } else if constexpr (std::is_same_v<M, int> || std::is_same_v<M, std::uint64_t>) {
          return std::to_string(cfg.*member);
        } else if constexpr (std::is_same_v<M, std::string>) {
          return cfg.*member;
        } else {
          std::string out;
          const auto& vec = cfg.*member;
          for (std::size_t i = 0; i < vec.size(); ++i) {
            if (i) out += ",";
            if constexpr (std::is_same_v<M, std::vector<double>>)
              out += fmt_double(vec[i]);
            else
              out += std::to_string(vec[i]);
          }
          return out;
        }
      },
      f.member);
}

void check(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw std::invalid_argument("config." + key + ": " + what);
}

}  // namespace

TeacherSpec ExperimentConfig::teacher_spec() const { return TeacherSpec::from_name(teacher, teacher_params); }

DomainBounds ExperimentConfig::domain_bounds() const { return {x_lo, x_hi, y_lo, y_hi}; }

InitDistribution ExperimentConfig::init_distribution() const {
  return {c_lo, c_hi, w1_lo, w1_hi, w2_lo, w2_hi, w3_lo, w3_hi};
}

Scheme ExperimentConfig::scheme_enum() const {
  if (scheme == "euler") return Scheme::Euler;
  if (scheme == "heun") return Scheme::Heun;
  throw std::invalid_argument("config.scheme: expected 'euler' or 'heun', got '" + scheme + "'");
}

ScheduleMode ExperimentConfig::schedule_mode() const {
  if (schedule == "scaled") return ScheduleMode::Scaled;
  if (schedule == "constant") return ScheduleMode::Constant;
  throw std::invalid_argument("config.schedule: expected 'scaled' or 'constant', got '" + schedule + "'");
}

std::string ExperimentConfig::canonical() const {
  std::string out;
  for (const Field& f : kSchema) {
    out += f.name;
    out += " = ";
    out += render(*this, f);
    out += "\n";
  }
  return out;
}

std::string ExperimentConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : canonical()) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
  ExperimentConfig cfg;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const std::size_t hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line.erase(hash_pos);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const Field* field = nullptr;
    for (const Field& f : kSchema)
      if (key == f.name) {
        field = &f;
        break;
      }
    if (!field) throw std::invalid_argument("config." + key + ": unknown key");
    assign(cfg, *field, value);
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

void ExperimentConfig::validate() const {
  teacher_spec();  // validates kind and parameter count
  Activation::from_name(activation);
  scheme_enum();
  schedule_mode();
  check(d >= 1, "d", "must be >= 1");
  check(samples >= 1, "samples", "must be >= 1");
  check(x_lo < x_hi, "x_lo", "input box is empty");
  check(y_lo < y_hi, "y_lo", "target range is empty");
  check(depth == 2 || depth == 3, "depth", "must be 2 or 3");
  check(n1 >= 1 && n2 >= 1 && n3 >= 1, "n1", "widths must be >= 1");
  check(!ladder.empty(), "ladder", "must list at least one width");
  for (int w : ladder) check(w >= 1, "ladder", "widths must be >= 1");
  check(constant_alpha > 0.0, "constant_alpha", "must be > 0");
  check(c_lo <= c_hi, "c_lo", "degenerate bounds");
  check(w1_lo <= w1_hi, "w1_lo", "degenerate bounds");
  check(w2_lo <= w2_hi, "w2_lo", "degenerate bounds");
  check(w3_lo <= w3_hi, "w3_lo", "degenerate bounds");
  check(mc >= 1 && mw >= 1 && mu >= 1 && mv >= 1, "mc", "particle counts must be >= 1");
  check(mc_ref >= 1, "mc_ref", "must be >= 1");
  check(n2_grid.size() >= 3, "n2_grid", "need at least 3 widths for a fit");
  for (int w : n2_grid) check(w >= 1 && w <= mc_ref, "n2_grid", "entries must lie in [1, mc_ref]");
  check(dt > 0.0, "dt", "must be > 0");
  check(horizon >= 0.0, "horizon", "must be >= 0");
  check(horizon <= max_horizon, "horizon", "exceeds max_horizon");
  check(ablation_horizon > 0.0 && ablation_horizon <= max_horizon, "ablation_horizon",
        "must lie in (0, max_horizon]");
  for (double t : snapshot_times)
    check(t >= 0.0 && t <= horizon, "snapshot_times", "entries must lie in [0, horizon]");
  check(grid_size >= 1, "grid_size", "must be >= 1");
  check(seeds >= 1, "seeds", "must be >= 1");
  check(workers >= 1, "workers", "must be >= 1");
  check(!output_dir.empty(), "output_dir", "must be nonempty");
}

}  // namespace mfnn
