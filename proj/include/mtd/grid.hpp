#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mtd {

// Raised on malformed input files; line is 1-based, 0 when not applicable.
class ParseError : public std::runtime_error {
 public:
  ParseError(int line, const std::string& message)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + message
                                    : message),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Bus {
  int id = 0;
  double load_mw = 0.0;
};

struct Branch {
  int from_bus = 0;
  int to_bus = 0;
  double reactance = 0.0;      // p.u.
  double flow_limit_mw = 0.0;  // symmetric |f| limit
  bool has_dfacts = false;
};

struct Generator {
  int bus = 0;
  double min_mw = 0.0;
  double max_mw = 0.0;
  double cost_per_mwh = 0.0;
};

// Static network description. Immutable once constructed; all derived
// matrices index branches and buses in file order.
class GridCase {
 public:
  GridCase(std::vector<Bus> buses, std::vector<Branch> branches,
           std::vector<Generator> generators, double dfacts_eta, int ref_bus);

  const std::vector<Bus>& buses() const { return buses_; }
  const std::vector<Branch>& branches() const { return branches_; }
  const std::vector<Generator>& generators() const { return generators_; }
  double dfacts_eta() const { return dfacts_eta_; }
  int ref_bus() const { return ref_bus_; }

  int n_buses() const { return static_cast<int>(buses_.size()); }
  int n_branches() const { return static_cast<int>(branches_.size()); }
  int n_generators() const { return static_cast<int>(generators_.size()); }

  // 0-based position of a bus id; throws ModelError for unknown ids.
  int bus_index(int bus_id) const;
  int ref_index() const { return bus_index(ref_bus_); }

  Eigen::VectorXd default_reactances() const;
  Eigen::VectorXd default_loads() const;  // per bus, file order
  double total_load() const;

  // Per-branch reactance bounds; equal to the default value on
  // branches without D-FACTS devices.
  Eigen::VectorXd reactance_lower() const;
  Eigen::VectorXd reactance_upper() const;
  std::vector<int> dfacts_branches() const;  // 0-based branch indices

  Eigen::VectorXd flow_limits() const;

  bool operator==(const GridCase& other) const;

 private:
  std::vector<Bus> buses_;
  std::vector<Branch> branches_;
  std::vector<Generator> generators_;
  double dfacts_eta_;
  int ref_bus_;
};

// Case-file grammar (one record per line, '#' starts a comment):
//   bus <id> <load_MW>
//   branch <from> <to> <x_pu> <fmax_MW> <dfacts 0|1>
//   gen <bus> <gmin_MW> <gmax_MW> <cost_per_MWh>
//   ref <bus>
//   dfacts_eta <fraction>
GridCase parse_case(std::string_view text);
std::string serialize_case(const GridCase& grid);
GridCase load_case_file(const std::filesystem::path& path);

// Branch-bus incidence matrix A (N x L): column l has +1 at the from bus
// and -1 at the to bus of branch l.
Eigen::MatrixXd incidence_matrix(const GridCase& grid);

struct Susceptance {
  Eigen::VectorXd d;  // diagonal of D = diag(1/x_l)
  Eigen::MatrixXd b;  // B = A D A^T
};
Susceptance susceptance_matrices(const GridCase& grid, const Eigen::VectorXd& x);

// Scale the case's default bus loads so they sum to aggregate_mw.
Eigen::VectorXd disaggregate_load(const GridCase& grid, double aggregate_mw);

struct TracePoint {
  std::string timestamp;
  double load_mw = 0.0;
};

struct LoadTrace {
  std::vector<TracePoint> points;
};

// CSV with rows "timestamp,load_MW"; a header row is permitted.
LoadTrace parse_load_trace(std::string_view csv);
LoadTrace load_trace_file(const std::filesystem::path& path);

}  // namespace mtd
