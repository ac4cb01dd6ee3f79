#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "dislo/flowrule.hpp"

namespace dislo::flowrule {
namespace {

template <class T>
std::string join(const std::vector<T>& v) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? " " : "") << v[i];
  return os.str();
}

template <class T>
std::vector<T> split(const std::string& s) {
  std::istringstream is(s);
  std::vector<T> out;
  T v;
  while (is >> v) out.push_back(v);
  return out;
}

double parse_double(const std::string& s) {
  if (s == "nan" || s == "NaN" || s == "-nan") return std::numeric_limits<double>::quiet_NaN();
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw InvalidArgument("malformed number '" + s + "'");
  return v;
}

}  // namespace

void write_table_csv(std::ostream& out, const FlowRuleTable& table) {
  out.precision(17);
  out << "rho,tau,f\n";
  for (std::size_t r = 0; r < table.rows(); ++r)
    for (std::size_t c = 0; c < table.cols(); ++c) {
      out << table.rho_axis()[r] << ',' << table.tau_axis()[c] << ',';
      if (table.failed(r, c))
        out << "nan";
      else
        out << table.at(r, c);
      out << '\n';
    }
}

void write_metadata(std::ostream& out, const FlowRuleTable& table) {
  const auto& md = table.metadata;
  out.precision(17);
  out << "dt=" << md.dt << '\n'
      << "T=" << md.total_time << '\n'
      << "burn_in=" << md.burn_in << '\n'
      << "A=" << md.amplitude << '\n'
      << "lambda_p=" << md.period << '\n'
      << "l=" << md.cell_length << '\n'
      << "mu_bar=" << md.mu_bar << '\n'
      << "B=" << md.B << '\n'
      << "b=" << md.b << '\n'
      << "f_tol=" << md.f_tol << '\n'
      << "noise_floor=" << md.noise_floor << '\n'
      << "N_list=" << join(md.n_list) << '\n'
      << "rho_list=" << join(table.rho_axis()) << '\n'
      << "tau_list=" << join(table.tau_axis()) << '\n'
      << "failed_cells=" << table.failed_count() << '\n'
      << "code_version=" << md.code_version << '\n';
  std::vector<double> noise;
  for (std::size_t r = 0; r < table.rows(); ++r)
    for (std::size_t c = 0; c < table.cols(); ++c) noise.push_back(table.noise(r, c));
  out << "cell_noise=" << join(noise) << '\n';
}

void write_matrix_csv(std::ostream& out, const FlowRuleTable& table, const double* zero_sentinel) {
  out.precision(17);
  out << "rho\\tau";
  for (double t : table.tau_axis()) out << ',' << t;
  out << '\n';
  for (std::size_t r = 0; r < table.rows(); ++r) {
    out << table.rho_axis()[r];
    for (std::size_t c = 0; c < table.cols(); ++c) {
      out << ',';
      if (table.failed(r, c)) {
        out << "nan";
        continue;
      }
      const double f = table.at(r, c);
      if (zero_sentinel != nullptr && f == 0.0)
        out << *zero_sentinel;
      else
        out << f;
    }
    out << '\n';
  }
}

FlowRuleTable read_table_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("rho,tau,f", 0) != 0)
    throw InvalidArgument("flow-rule table must start with the header rho,tau,f");
  struct Cell {
    double rho, tau, f;
  };
  std::vector<Cell> cells;
  std::vector<double> rho, tau;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string a, b, c;
    if (!std::getline(ls, a, ',') || !std::getline(ls, b, ',') || !std::getline(ls, c))
      throw InvalidArgument("malformed flow-rule row: " + line);
    cells.push_back({parse_double(a), parse_double(b), parse_double(c)});
    rho.push_back(cells.back().rho);
    tau.push_back(cells.back().tau);
  }
  auto uniq = [](std::vector<double>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  };
  uniq(rho);
  uniq(tau);
  FlowRuleTable table(rho, tau);
  std::vector<char> seen(rho.size() * tau.size(), 0);
  for (const auto& cell : cells) {
    const auto r = static_cast<std::size_t>(std::lower_bound(rho.begin(), rho.end(), cell.rho) - rho.begin());
    const auto c = static_cast<std::size_t>(std::lower_bound(tau.begin(), tau.end(), cell.tau) - tau.begin());
    table.at(r, c) = cell.f;
    table.set_failed(r, c, !std::isfinite(cell.f));
    seen[r * tau.size() + c] = 1;
  }
  for (std::size_t r = 0; r < rho.size(); ++r)
    for (std::size_t c = 0; c < tau.size(); ++c)
      if (!seen[r * tau.size() + c]) {
        table.at(r, c) = std::numeric_limits<double>::quiet_NaN();
        table.set_failed(r, c, true);
      }
  return table;
}

void read_metadata(std::istream& in, FlowRuleTable& table) {
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InvalidArgument("metadata line without '=': " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto& md = table.metadata;
  auto num = [&](const char* key, double& dst) {
    if (auto it = kv.find(key); it != kv.end()) dst = parse_double(it->second);
  };
  num("dt", md.dt);
  num("T", md.total_time);
  num("burn_in", md.burn_in);
  num("A", md.amplitude);
  num("lambda_p", md.period);
  num("l", md.cell_length);
  num("mu_bar", md.mu_bar);
  num("B", md.B);
  num("b", md.b);
  num("f_tol", md.f_tol);
  num("noise_floor", md.noise_floor);
  if (auto it = kv.find("N_list"); it != kv.end()) md.n_list = split<std::size_t>(it->second);
  if (auto it = kv.find("code_version"); it != kv.end()) md.code_version = it->second;
  if (auto it = kv.find("cell_noise"); it != kv.end()) {
    const auto noise = split<double>(it->second);
    if (noise.size() == table.rows() * table.cols())
      for (std::size_t r = 0; r < table.rows(); ++r)
        for (std::size_t c = 0; c < table.cols(); ++c)
          table.set_noise(r, c, noise[r * table.cols() + c]);
  }
}

FlowRuleTable load_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open flow-rule table '" + path + "'");
  auto table = read_table_csv(in);
  if (std::ifstream meta(path + ".meta"); meta) read_metadata(meta, table);
  return table;
}

void save_table(const std::string& path, const FlowRuleTable& table) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  write_table_csv(out, table);
  std::ofstream meta(path + ".meta");
  if (!meta) throw std::runtime_error("cannot write '" + path + ".meta'");
  write_metadata(meta, table);
}

}  // namespace dislo::flowrule
