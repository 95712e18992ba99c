#pragma once

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cityq/dynamics.hpp"
#include "cityq/equilibrium.hpp"
#include "cityq/scenario.hpp"
#include "cityq/transport.hpp"

namespace cityq {

// 17 significant digits: round-trips doubles exactly.
inline std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace csvdetail {

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("csv: cannot open \"" + path + "\" for writing");
  return out;
}

}  // namespace csvdetail

// Columns: cell_index, center coordinates, mass, assigned_site, individual_cost.
inline void write_partition_csv(const Scenario& s, const Partition& part,
                                const std::string& path) {
  std::ofstream out = csvdetail::open_out(path);
  bool two_d = s.grid.dim() == 2;
  out << (two_d ? "cell_index,center_x,center_y,mass,assigned_site,individual_cost\n"
                : "cell_index,center_x,mass,assigned_site,individual_cost\n");
  std::vector<double> cost = individual_cost_field(s, part);
  for (std::size_t i = 0; i < s.grid.size(); ++i) {
    out << i << ',' << format_full(s.grid.cells[i].center.x);
    if (two_d) out << ',' << format_full(s.grid.cells[i].center.y);
    out << ',' << format_full(s.density.mass[i]) << ',' << part.assign[i] << ','
        << format_full(cost[i]) << '\n';
  }
  if (!out) throw std::runtime_error("csv: write failed for \"" + path + "\"");
}

// Columns: day, t, m, queue1, queue2, S1, S2.
inline void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
  std::ofstream out = csvdetail::open_out(path);
  out << "day,t,m,queue1,queue2,S1,S2\n";
  for (const auto& row : trajectory_export(traj)) {
    out << static_cast<long long>(row[0]);
    for (std::size_t c = 1; c < row.size(); ++c) out << ',' << format_full(row[c]);
    out << '\n';
  }
  if (!out) throw std::runtime_error("csv: write failed for \"" + path + "\"");
}

// Long format for external plotting tools: series,index,value.
inline void write_partition_plot_csv(const Scenario& s, const Partition& part,
                                     const std::string& path) {
  std::ofstream out = csvdetail::open_out(path);
  out << "series,index,value\n";
  std::vector<double> cost = individual_cost_field(s, part);
  for (std::size_t i = 0; i < s.grid.size(); ++i)
    out << "mass," << i << ',' << format_full(s.density.mass[i]) << '\n';
  for (std::size_t i = 0; i < s.grid.size(); ++i)
    out << "assigned_site," << i << ',' << part.assign[i] << '\n';
  for (std::size_t i = 0; i < s.grid.size(); ++i)
    out << "individual_cost," << i << ',' << format_full(cost[i]) << '\n';
  if (!out) throw std::runtime_error("csv: write failed for \"" + path + "\"");
}

inline void write_trajectory_plot_csv(const Trajectory& traj, const std::string& path) {
  std::ofstream out = csvdetail::open_out(path);
  out << "series,index,value\n";
  static const char* names[] = {"t", "m", "queue1", "queue2", "S1", "S2"};
  for (const auto& row : trajectory_export(traj))
    for (std::size_t c = 1; c < row.size(); ++c)
      out << names[c - 1] << ',' << static_cast<long long>(row[0]) << ','
          << format_full(row[c]) << '\n';
  if (!out) throw std::runtime_error("csv: write failed for \"" + path + "\"");
}

}  // namespace cityq
