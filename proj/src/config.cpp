#include "bdsde/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace bdsde {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(trim(cur));
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) {
    throw ConfigurationError("config key '" + key + "': '" + v + "' is not a number");
  }
  return out;
}

long long to_integer(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) {
    throw ConfigurationError("config key '" + key + "': '" + v + "' is not an integer");
  }
  return out;
}

int to_int(const std::string& key, const std::string& v) {
  const long long x = to_integer(key, v);
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
    throw ConfigurationError("config key '" + key + "' out of range");
  }
  return static_cast<int>(x);
}

std::vector<double> to_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  if (v.empty()) return out;
  for (const auto& part : split(v, ',')) out.push_back(to_double(key, part));
  return out;
}

std::string num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + num(v[i]);
  return out;
}

std::string join(const std::vector<std::string>& v, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? sep : "") + v[i];
  return out;
}

void default_coefficients(CoefficientExpressions& c, int dim) {
  c.dim = dim;
  c.drift.assign(static_cast<std::size_t>(dim), "0");
  c.diffusion.assign(static_cast<std::size_t>(dim * dim), "0");
  for (int i = 0; i < dim; ++i) c.diffusion[static_cast<std::size_t>(i * dim + i)] = "1";
  c.noise.assign(static_cast<std::size_t>(dim), "0");
}

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys{
      "id",          "kind",          "dim",           "horizon",          "x0",
      "n_steps",     "n_inner_paths", "n_outer_paths", "outer_id",         "seed",
      "regression_degree", "drift",   "diffusion",     "driver",           "noise",
      "terminal",    "lipschitz_K",   "ellipticity_c", "mollify_eps",      "partition",
      "noise_mode",  "noise_master_steps", "picard_iterations", "z_times", "ladder",
      "pde_spacing", "pde_time_steps", "output",       "threads"};
  return keys;
}

}  // namespace

ExperimentConfig default_config() {
  ExperimentConfig c;
  default_coefficients(c.coefficients, 1);
  c.coefficients.terminal = "x";
  return c;
}

ExperimentConfig parse_config(std::string_view text) {
  std::map<std::string, std::string> kv;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigurationError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(t.substr(0, eq));
    const auto& keys = known_keys();
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw ConfigurationError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    if (kv.count(key)) throw ConfigurationError("config key '" + key + "' given twice");
    kv[key] = trim(t.substr(eq + 1));
  }

  ExperimentConfig c = default_config();
  auto get = [&](const char* key) -> const std::string* {
    const auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };
  if (auto v = get("dim")) {
    const int d = to_int("dim", *v);
    if (d < 1 || d > kMaxDim) throw ConfigurationError("dim must be in 1.." + std::to_string(kMaxDim));
    default_coefficients(c.coefficients, d);
    c.x0.assign(static_cast<std::size_t>(d), 0.0);
  }
  const int d = c.coefficients.dim;
  if (auto v = get("id")) c.id = *v;
  if (auto v = get("kind")) {
    const auto& kinds = experiment_kinds();
    if (std::find(kinds.begin(), kinds.end(), *v) == kinds.end()) {
      throw ConfigurationError("unknown experiment kind '" + *v + "'");
    }
    c.kind = *v;
  }
  if (auto v = get("horizon")) c.horizon = to_double("horizon", *v);
  if (auto v = get("x0")) c.x0 = to_doubles("x0", *v);
  if (static_cast<int>(c.x0.size()) != d) throw ConfigurationError("x0 needs " + std::to_string(d) + " entries");
  if (auto v = get("n_steps")) c.n_steps = to_int("n_steps", *v);
  if (auto v = get("n_inner_paths")) c.n_inner_paths = to_int("n_inner_paths", *v);
  if (auto v = get("n_outer_paths")) c.n_outer_paths = to_int("n_outer_paths", *v);
  if (auto v = get("outer_id")) c.outer_id = to_int("outer_id", *v);
  if (auto v = get("seed")) {
    if (v->empty() || (*v)[0] == '-') throw ConfigurationError("seed must be a non-negative integer");
    std::uint64_t s = 0;
    const auto r = std::from_chars(v->data(), v->data() + v->size(), s);
    if (r.ec != std::errc() || r.ptr != v->data() + v->size()) throw ConfigurationError("seed is not an integer");
    c.seed = s;
  }
  if (auto v = get("regression_degree")) c.regression_degree = to_int("regression_degree", *v);
  auto exprs = [&](const char* key, std::size_t count, std::vector<std::string>& dst) {
    if (auto v = get(key)) {
      auto parts = split(*v, ';');
      if (parts.size() != count) {
        throw ConfigurationError(std::string("config key '") + key + "' needs " + std::to_string(count) +
                                 " entries separated by ';'");
      }
      dst = parts;
    }
  };
  exprs("drift", static_cast<std::size_t>(d), c.coefficients.drift);
  exprs("diffusion", static_cast<std::size_t>(d * d), c.coefficients.diffusion);
  exprs("noise", static_cast<std::size_t>(d), c.coefficients.noise);
  if (auto v = get("driver")) c.coefficients.driver = *v;
  if (auto v = get("terminal")) c.coefficients.terminal = *v;
  if (auto v = get("lipschitz_K")) c.coefficients.lipschitz_K = to_double("lipschitz_K", *v);
  if (auto v = get("ellipticity_c")) c.coefficients.ellipticity_c = to_double("ellipticity_c", *v);
  if (auto v = get("mollify_eps")) {
    if (!v->empty() && *v != "none") c.mollify_eps = to_double("mollify_eps", *v);
  }
  if (auto v = get("partition")) c.partition = to_doubles("partition", *v);
  c.coefficients.terminal_points = c.partition.empty() ? 1 : static_cast<int>(c.partition.size());
  if (auto v = get("noise_mode")) c.noise_mode = noise_mode_from_string(*v);
  if (auto v = get("noise_master_steps")) c.noise_master_steps = to_int("noise_master_steps", *v);
  if (auto v = get("picard_iterations")) c.picard_iterations = to_int("picard_iterations", *v);
  if (auto v = get("z_times")) c.z_times = to_doubles("z_times", *v);
  if (auto v = get("ladder")) {
    if (!v->empty()) {
      for (const auto& rung : split(*v, ',')) {
        const auto colon = rung.find(':');
        if (colon == std::string::npos) throw ConfigurationError("ladder rungs are written n_steps:n_inner_paths");
        c.ladder.push_back({to_int("ladder", trim(rung.substr(0, colon))), to_int("ladder", trim(rung.substr(colon + 1)))});
      }
    }
  }
  if (auto v = get("pde_spacing")) c.pde_spacing = to_double("pde_spacing", *v);
  if (auto v = get("pde_time_steps")) c.pde_time_steps = to_int("pde_time_steps", *v);
  if (auto v = get("output")) c.output = *v;
  if (auto v = get("threads")) c.threads = to_int("threads", *v);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string write_config(const ExperimentConfig& c) {
  std::ostringstream os;
  const auto& e = c.coefficients;
  os << "id = " << c.id << '\n';
  os << "kind = " << c.kind << '\n';
  os << "dim = " << e.dim << '\n';
  os << "horizon = " << num(c.horizon) << '\n';
  os << "x0 = " << join(c.x0) << '\n';
  os << "n_steps = " << c.n_steps << '\n';
  os << "n_inner_paths = " << c.n_inner_paths << '\n';
  os << "n_outer_paths = " << c.n_outer_paths << '\n';
  os << "outer_id = " << c.outer_id << '\n';
  os << "seed = " << c.seed << '\n';
  os << "regression_degree = " << c.regression_degree << '\n';
  os << "drift = " << join(e.drift, "; ") << '\n';
  os << "diffusion = " << join(e.diffusion, "; ") << '\n';
  os << "driver = " << e.driver << '\n';
  os << "noise = " << join(e.noise, "; ") << '\n';
  os << "terminal = " << e.terminal << '\n';
  os << "lipschitz_K = " << num(e.lipschitz_K) << '\n';
  os << "ellipticity_c = " << num(e.ellipticity_c) << '\n';
  os << "mollify_eps = " << (c.mollify_eps ? num(*c.mollify_eps) : std::string("none")) << '\n';
  os << "partition = " << join(c.partition) << '\n';
  os << "noise_mode = " << to_string(c.noise_mode) << '\n';
  os << "noise_master_steps = " << c.noise_master_steps << '\n';
  os << "picard_iterations = " << c.picard_iterations << '\n';
  os << "z_times = " << join(c.z_times) << '\n';
  os << "ladder = ";
  for (std::size_t i = 0; i < c.ladder.size(); ++i) {
    os << (i ? ", " : "") << c.ladder[i].n_steps << ':' << c.ladder[i].n_inner_paths;
  }
  os << '\n';
  os << "pde_spacing = " << num(c.pde_spacing) << '\n';
  os << "pde_time_steps = " << c.pde_time_steps << '\n';
  os << "output = " << c.output << '\n';
  os << "threads = " << c.threads << '\n';
  return os.str();
}

std::uint64_t params_hash(const ExperimentConfig& config) {
  ExperimentConfig c = config;
  c.output.clear();
  c.threads = 1;
  const std::string text = write_config(c);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

ProblemSpec to_problem(const ExperimentConfig& c) {
  if (c.kind == "jumps" || c.kind == "z-discrete") {
    if (c.partition.size() < 2) throw ConfigurationError("kind " + c.kind + " needs a partition");
  }
  if ((c.kind == "z-profile" || c.kind == "z-discrete") && c.z_times.empty()) {
    throw ConfigurationError("kind " + c.kind + " needs z_times");
  }
  if (c.kind == "convergence" && c.ladder.empty()) throw ConfigurationError("kind convergence needs a ladder");
  ProblemSpec s;
  s.coefficients = coefficients_from_expressions(c.coefficients);
  s.t = c.horizon;
  s.x = Eigen::Map<const Vec>(c.x0.data(), static_cast<Eigen::Index>(c.x0.size()));
  s.grid = make_grid(c.horizon, c.n_steps);
  if (!c.partition.empty()) s.partition = Partition::from_times(s.grid, c.partition);
  s.n_inner_paths = c.n_inner_paths;
  s.n_outer_paths = c.n_outer_paths;
  s.seed = c.seed;
  s.regression_degree = c.regression_degree;
  s.mollify_eps = c.mollify_eps;
  s.noise_mode = c.noise_mode;
  s.noise_master_steps = c.noise_master_steps;
  s.picard_iterations = c.picard_iterations;
  s.threads = c.threads;
  s.validate();
  return s;
}

std::string csv_header() {
  return "experiment_id,kind,params_hash,label,time,value,std_error,oracle,abs_error,n_samples,pass,wall_clock_s";
}

std::string csv_row(const ResultRecord& r) {
  auto opt = [](const std::optional<double>& v) { return v ? num(*v) : std::string(); };
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(r.params_hash));
  std::ostringstream os;
  os << r.experiment_id << ',' << r.kind << ',' << hash << ',' << r.label << ',' << num(r.time) << ','
     << num(r.value) << ',' << num(r.std_error) << ',' << opt(r.oracle) << ',' << opt(r.abs_error) << ','
     << r.n_samples << ',' << (r.pass ? (*r.pass ? "1" : "0") : "") << ',' << num(r.wall_clock_s);
  return os.str();
}

void write_records(std::ostream& os, const std::vector<ResultRecord>& records, bool header) {
  if (header) os << csv_header() << '\n';
  for (const auto& r : records) os << csv_row(r) << '\n';
}

}  // namespace bdsde
