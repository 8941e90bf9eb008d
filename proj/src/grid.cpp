#include "mtd/grid.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace mtd {
namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(0, "cannot open file: " + path.string());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

GridCase::GridCase(std::vector<Bus> buses, std::vector<Branch> branches,
                   std::vector<Generator> generators, double dfacts_eta, int ref_bus)
    : buses_(std::move(buses)),
      branches_(std::move(branches)),
      generators_(std::move(generators)),
      dfacts_eta_(dfacts_eta),
      ref_bus_(ref_bus) {
  if (buses_.empty()) throw ModelError("case has no buses");
  std::set<int> ids;
  for (const auto& b : buses_) {
    if (!ids.insert(b.id).second)
      throw ModelError("duplicate bus id " + std::to_string(b.id));
    if (b.load_mw < 0.0)
      throw ModelError("negative load at bus " + std::to_string(b.id));
  }
  for (const auto& br : branches_) {
    if (!ids.count(br.from_bus) || !ids.count(br.to_bus))
      throw ModelError("branch references unknown bus " +
                       std::to_string(ids.count(br.from_bus) ? br.to_bus : br.from_bus));
    if (br.from_bus == br.to_bus)
      throw ModelError("self-loop at bus " + std::to_string(br.from_bus));
    if (br.reactance <= 0.0) throw ModelError("nonpositive branch reactance");
    if (br.flow_limit_mw <= 0.0) throw ModelError("nonpositive flow limit");
  }
  double cap = 0.0;
  for (const auto& g : generators_) {
    if (!ids.count(g.bus))
      throw ModelError("generator references unknown bus " + std::to_string(g.bus));
    if (g.min_mw > g.max_mw) throw ModelError("generator min exceeds max");
    cap += g.max_mw;
  }
  if (!generators_.empty() && cap < total_load())
    throw ModelError("total generation capacity below total load");
  if (dfacts_eta_ < 0.0 || dfacts_eta_ >= 1.0)
    throw ModelError("dfacts_eta must lie in [0, 1)");
  if (!ids.count(ref_bus_))
    throw ModelError("reference bus " + std::to_string(ref_bus_) + " does not exist");
}

int GridCase::bus_index(int bus_id) const {
  for (int i = 0; i < n_buses(); ++i)
    if (buses_[i].id == bus_id) return i;
  throw ModelError("unknown bus id " + std::to_string(bus_id));
}

Eigen::VectorXd GridCase::default_reactances() const {
  Eigen::VectorXd x(n_branches());
  for (int l = 0; l < n_branches(); ++l) x[l] = branches_[l].reactance;
  return x;
}

Eigen::VectorXd GridCase::default_loads() const {
  Eigen::VectorXd load(n_buses());
  for (int i = 0; i < n_buses(); ++i) load[i] = buses_[i].load_mw;
  return load;
}

double GridCase::total_load() const { return default_loads().sum(); }

Eigen::VectorXd GridCase::reactance_lower() const {
  Eigen::VectorXd lo = default_reactances();
  for (int l = 0; l < n_branches(); ++l)
    if (branches_[l].has_dfacts) lo[l] *= (1.0 - dfacts_eta_);
  return lo;
}

Eigen::VectorXd GridCase::reactance_upper() const {
  Eigen::VectorXd hi = default_reactances();
  for (int l = 0; l < n_branches(); ++l)
    if (branches_[l].has_dfacts) hi[l] *= (1.0 + dfacts_eta_);
  return hi;
}

std::vector<int> GridCase::dfacts_branches() const {
  std::vector<int> out;
  for (int l = 0; l < n_branches(); ++l)
    if (branches_[l].has_dfacts) out.push_back(l);
  return out;
}

Eigen::VectorXd GridCase::flow_limits() const {
  Eigen::VectorXd f(n_branches());
  for (int l = 0; l < n_branches(); ++l) f[l] = branches_[l].flow_limit_mw;
  return f;
}

bool GridCase::operator==(const GridCase& other) const {
  auto bus_eq = [](const Bus& a, const Bus& b) {
    return a.id == b.id && a.load_mw == b.load_mw;
  };
  auto br_eq = [](const Branch& a, const Branch& b) {
    return a.from_bus == b.from_bus && a.to_bus == b.to_bus &&
           a.reactance == b.reactance && a.flow_limit_mw == b.flow_limit_mw &&
           a.has_dfacts == b.has_dfacts;
  };
  auto gen_eq = [](const Generator& a, const Generator& b) {
    return a.bus == b.bus && a.min_mw == b.min_mw && a.max_mw == b.max_mw &&
           a.cost_per_mwh == b.cost_per_mwh;
  };
  return std::equal(buses_.begin(), buses_.end(), other.buses_.begin(),
                    other.buses_.end(), bus_eq) &&
         std::equal(branches_.begin(), branches_.end(), other.branches_.begin(),
                    other.branches_.end(), br_eq) &&
         std::equal(generators_.begin(), generators_.end(), other.generators_.begin(),
                    other.generators_.end(), gen_eq) &&
         dfacts_eta_ == other.dfacts_eta_ && ref_bus_ == other.ref_bus_;
}

GridCase parse_case(std::string_view text) {
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Generator> gens;
  double eta = 0.0;
  bool have_ref = false;
  int ref = 0;

  std::istringstream stream{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(stream, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    std::string line = hash == std::string::npos ? raw : raw.substr(0, hash);
    std::istringstream ls(line);
    std::string kind;
    if (!(ls >> kind)) continue;  // blank or comment-only

    auto want = [&](auto&... field) {
      if (!((ls >> field) && ...))
        throw ParseError(line_no, "malformed '" + kind + "' record");
      std::string extra;
      if (ls >> extra) throw ParseError(line_no, "trailing tokens after '" + kind + "'");
    };

    if (kind == "bus") {
      Bus b;
      want(b.id, b.load_mw);
      buses.push_back(b);
    } else if (kind == "branch") {
      Branch br;
      int dfacts = 0;
      want(br.from_bus, br.to_bus, br.reactance, br.flow_limit_mw, dfacts);
      if (dfacts != 0 && dfacts != 1)
        throw ParseError(line_no, "dfacts flag must be 0 or 1");
      br.has_dfacts = dfacts == 1;
      branches.push_back(br);
    } else if (kind == "gen") {
      Generator g;
      want(g.bus, g.min_mw, g.max_mw, g.cost_per_mwh);
      gens.push_back(g);
    } else if (kind == "ref") {
      want(ref);
      have_ref = true;
    } else if (kind == "dfacts_eta") {
      want(eta);
    } else {
      throw ParseError(line_no, "unknown record '" + kind + "'");
    }
  }
  if (buses.empty()) throw ParseError(0, "no bus records");
  if (!have_ref) ref = buses.front().id;
  try {
    return GridCase(std::move(buses), std::move(branches), std::move(gens), eta, ref);
  } catch (const ModelError& e) {
    throw ParseError(0, e.what());
  }
}

std::string serialize_case(const GridCase& grid) {
  std::ostringstream out;
  for (const auto& b : grid.buses())
    out << "bus " << b.id << ' ' << fmt_double(b.load_mw) << '\n';
  for (const auto& br : grid.branches())
    out << "branch " << br.from_bus << ' ' << br.to_bus << ' '
        << fmt_double(br.reactance) << ' ' << fmt_double(br.flow_limit_mw) << ' '
        << (br.has_dfacts ? 1 : 0) << '\n';
  for (const auto& g : grid.generators())
    out << "gen " << g.bus << ' ' << fmt_double(g.min_mw) << ' '
        << fmt_double(g.max_mw) << ' ' << fmt_double(g.cost_per_mwh) << '\n';
  out << "ref " << grid.ref_bus() << '\n';
  out << "dfacts_eta " << fmt_double(grid.dfacts_eta()) << '\n';
  return out.str();
}

GridCase load_case_file(const std::filesystem::path& path) {
  return parse_case(read_file(path));
}

Eigen::MatrixXd incidence_matrix(const GridCase& grid) {
  const int n = grid.n_buses();
  const int l = grid.n_branches();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, l);
  for (int j = 0; j < l; ++j) {
    const auto& br = grid.branches()[j];
    a(grid.bus_index(br.from_bus), j) = 1.0;
    a(grid.bus_index(br.to_bus), j) = -1.0;
  }
  return a;
}

Susceptance susceptance_matrices(const GridCase& grid, const Eigen::VectorXd& x) {
  if (x.size() != grid.n_branches())
    throw ModelError("reactance vector length does not match branch count");
  if ((x.array() <= 0.0).any()) throw ModelError("nonpositive reactance");
  Susceptance s;
  s.d = x.cwiseInverse();
  const Eigen::MatrixXd a = incidence_matrix(grid);
  s.b = a * s.d.asDiagonal() * a.transpose();
  return s;
}

Eigen::VectorXd disaggregate_load(const GridCase& grid, double aggregate_mw) {
  if (aggregate_mw <= 0.0) throw ModelError("aggregate load must be positive");
  const Eigen::VectorXd base = grid.default_loads();
  const double total = base.sum();
  if (total <= 0.0) throw ModelError("case has zero default load");
  return base * (aggregate_mw / total);
}

LoadTrace parse_load_trace(std::string_view csv) {
  LoadTrace trace;
  std::istringstream stream{std::string(csv)};
  std::string raw;
  int line_no = 0;
  while (std::getline(stream, raw)) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (raw.empty()) continue;
    const auto comma = raw.find(',');
    if (comma == std::string::npos)
      throw ParseError(line_no, "expected 'timestamp,load_MW'");
    TracePoint p;
    p.timestamp = raw.substr(0, comma);
    const std::string value = raw.substr(comma + 1);
    try {
      std::size_t used = 0;
      p.load_mw = std::stod(value, &used);
      while (used < value.size() && std::isspace(static_cast<unsigned char>(value[used])))
        ++used;
      if (used != value.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      if (line_no == 1) continue;  // header row
      throw ParseError(line_no, "bad load value '" + value + "'");
    }
    if (p.load_mw <= 0.0) throw ParseError(line_no, "load must be positive");
    if (!trace.points.empty() && trace.points.back().timestamp >= p.timestamp)
      throw ParseError(line_no, "timestamps must be strictly increasing");
    trace.points.push_back(std::move(p));
  }
  return trace;
}

LoadTrace load_trace_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(0, "cannot open file: " + path.string());
  std::ostringstream out;
  out << in.rdbuf();
  return parse_load_trace(out.str());
}

}  // namespace mtd
