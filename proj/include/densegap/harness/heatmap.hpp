#pragma once

// Success-rate sweeps over (number of vehicles, gap) with CSV and SVG output.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "densegap/harness/episode.hpp"

namespace densegap::harness {

struct HeatmapGrid {
  std::vector<int> n_vehicles;              // rows
  std::vector<double> gaps;                 // columns, m
  std::vector<std::vector<std::optional<double>>> success;  // NA when infeasible
};

/// One evaluation per cell with n_vehicles overridden and the gap range
/// collapsed to a single value. Cells whose scenario cannot be packed are NA.
inline HeatmapGrid sweep_heatmap(const ControllerFactory& factory,
                                 const std::vector<int>& n_vehicles_list,
                                 const std::vector<double>& gap_list,
                                 const env::ScenarioConfig& base, int episodes_per_cell,
                                 std::uint64_t seed0, const EvalOptions& opt = {}) {
  if (n_vehicles_list.empty() || gap_list.empty())
    throw std::invalid_argument("heatmap needs non-empty vehicle and gap lists");
  HeatmapGrid g{n_vehicles_list, gap_list, {}};
  for (int n : n_vehicles_list) {
    std::vector<std::optional<double>> row;
    for (double gap : gap_list) {
      env::ScenarioConfig cfg = base;
      cfg.n_vehicles = n;
      cfg.gap_min = cfg.gap_max = gap;
      env::validate(cfg);
      try {
        EvalOptions o = opt;
        o.log_dir.reset();
        row.push_back(evaluate(factory, cfg, episodes_per_cell, seed0, o).summary.success_rate);
      } catch (const env::ScenarioError&) {
        row.push_back(std::nullopt);
      }
    }
    g.success.push_back(std::move(row));
  }
  return g;
}

inline std::string format_rate(const std::optional<double>& v) {
  if (!v) return "NA";
  std::ostringstream s;
  s << *v;
  return s.str();
}

inline void write_heatmap_csv(const std::filesystem::path& path, const HeatmapGrid& g) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "n_vehicles";
  for (double gap : g.gaps) out << ",gap_" << gap;
  out << '\n';
  for (std::size_t r = 0; r < g.n_vehicles.size(); ++r) {
    out << g.n_vehicles[r];
    for (const auto& v : g.success[r]) out << ',' << format_rate(v);
    out << '\n';
  }
}

/// Reads a grid back from write_heatmap_csv output.
inline HeatmapGrid read_heatmap_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  auto split = [](const std::string& line) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string x;
    while (std::getline(ss, x, ',')) f.push_back(x);
    return f;
  };
  HeatmapGrid g;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty heatmap csv");
  const auto head = split(line);
  for (std::size_t i = 1; i < head.size(); ++i) g.gaps.push_back(std::stod(head[i].substr(4)));
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != head.size()) throw std::runtime_error("ragged heatmap csv");
    g.n_vehicles.push_back(std::stoi(f[0]));
    std::vector<std::optional<double>> row;
    for (std::size_t i = 1; i < f.size(); ++i)
      row.push_back(f[i] == "NA" ? std::nullopt : std::optional<double>(std::stod(f[i])));
    g.success.push_back(std::move(row));
  }
  return g;
}

/// White (0) to dark blue (1); NA cells hatched grey.
inline void write_heatmap_svg(const std::filesystem::path& path, const HeatmapGrid& g,
                              const std::string& title = "success rate") {
  const int cell = 60, left = 90, top = 50;
  const int w = left + cell * static_cast<int>(g.gaps.size()) + 20;
  const int h = top + cell * static_cast<int>(g.n_vehicles.size()) + 50;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << left << "\" y=\"20\" font-size=\"14\">" << title << "</text>\n";
  for (std::size_t r = 0; r < g.n_vehicles.size(); ++r) {
    const int y = top + cell * static_cast<int>(r);
    out << "<text x=\"10\" y=\"" << y + cell / 2 + 4 << "\">N=" << g.n_vehicles[r] << "</text>\n";
    for (std::size_t c = 0; c < g.gaps.size(); ++c) {
      const int x = left + cell * static_cast<int>(c);
      const auto& v = g.success[r][c];
      std::string fill = "#bbbbbb";
      if (v) {
        const int shade = static_cast<int>(std::lround(255.0 * (1.0 - *v)));
        char buf[8];
        std::snprintf(buf, sizeof buf, "#%02x%02xff", shade, shade);
        fill = buf;
      }
      out << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\""
          << cell << "\" fill=\"" << fill << "\" stroke=\"black\"/>\n";
      out << "<text x=\"" << x + cell / 2 << "\" y=\"" << y + cell / 2 + 4
          << "\" text-anchor=\"middle\">" << format_rate(v) << "</text>\n";
    }
  }
  const int yb = top + cell * static_cast<int>(g.n_vehicles.size()) + 20;
  for (std::size_t c = 0; c < g.gaps.size(); ++c) {
    out << "<text x=\"" << left + cell * static_cast<int>(c) + cell / 2 << "\" y=\"" << yb
        << "\" text-anchor=\"middle\">gap " << g.gaps[c] << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace densegap::harness
