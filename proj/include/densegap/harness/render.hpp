#pragma once

// SVG frames from an episode log: one frame per logged step.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "densegap/harness/episode.hpp"

namespace densegap::harness {

/// Colour of a rule-based vehicle: grey at p_c = 0, pure green at p_c = 1.
inline std::array<int, 3> cooperation_colour(double p_c) {
  const double t = std::clamp(p_c, 0.0, 1.0);
  auto mix = [t](int a, int b) { return static_cast<int>(std::lround(a + t * (b - a))); };
  return {mix(200, 0), mix(200, 170), mix(200, 0)};
}

inline std::string hex_colour(const std::array<int, 3>& c) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c[0], c[1], c[2]);
  return buf;
}

inline constexpr const char* kEgoColour = "#d62728";

struct RenderReport {
  int frames = 0;
  int skipped = 0;
  std::vector<std::string> warnings;
};

inline std::string frame_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%05d.svg", index);
  return buf;
}

namespace detail {

struct RoadInfo {
  int lane_count = 3;
  double lane_width = 3.0;
  double deadend_s = 0.0;
  int deadend_lane = 0;
  double deadend_length = 4.0;
};

inline void write_frame(const std::filesystem::path& path, const RoadInfo& road,
                        const std::vector<double>& p_c, const nlohmann::json& rec) {
  constexpr double kScale = 10.0;     // px per m
  constexpr double kHalfWindow = 40.0;  // m either side of the ego
  // Extract everything first so a malformed record leaves no partial file.
  const auto poses = rec.at("poses").get<std::vector<std::array<double, 3>>>();
  if (poses.empty()) throw std::invalid_argument("record without poses");
  const double t = rec.at("t").get<double>();
  const auto outcome = rec.at("outcome").get<std::string>();
  const double ex = poses[0][0];
  const double x0 = ex - kHalfWindow;
  const double road_w = road.lane_count * road.lane_width;
  const double W = 2 * kHalfWindow * kScale, H = road_w * kScale + 40;
  auto px = [&](double x) { return (x - x0) * kScale; };
  auto py = [&](double y) { return 20 + (road_w - y) * kScale; };

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<rect x=\"0\" y=\"" << py(road_w) << "\" width=\"" << W << "\" height=\""
      << road_w * kScale << "\" fill=\"#eeeeee\"/>\n";
  for (int l = 0; l <= road.lane_count; ++l) {
    const double y = py(l * road.lane_width);
    const bool edge = l == 0 || l == road.lane_count;
    out << "<line x1=\"0\" y1=\"" << y << "\" x2=\"" << W << "\" y2=\"" << y
        << "\" stroke=\"#555555\" stroke-width=\"" << (edge ? 2 : 1) << "\""
        << (edge ? "" : " stroke-dasharray=\"8,6\"") << "/>\n";
  }
  out << "<rect x=\"" << px(road.deadend_s) << "\" y=\""
      << py((road.deadend_lane + 1) * road.lane_width) << "\" width=\""
      << road.deadend_length * kScale << "\" height=\"" << road.lane_width * kScale
      << "\" fill=\"black\"/>\n";
  const double len = 4.0, wid = 1.8;
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const auto [x, y, psi] = poses[i];
    if (std::abs(x - ex) > kHalfWindow + len) continue;
    const std::string fill =
        i == 0 ? kEgoColour : hex_colour(cooperation_colour(i < p_c.size() ? p_c[i] : 0.0));
    const double deg = -psi * 180.0 / 3.14159265358979323846;
    out << "<rect x=\"" << -len / 2 * kScale << "\" y=\"" << -wid / 2 * kScale
        << "\" width=\"" << len * kScale << "\" height=\"" << wid * kScale << "\" fill=\""
        << fill << "\" stroke=\"black\" stroke-width=\"0.5\" transform=\"translate(" << px(x)
        << "," << py(y) << ") rotate(" << deg << ")\"/>\n";
  }
  out << "<text x=\"6\" y=\"14\">t = " << t << " s  " << outcome << "</text>\n";
  out << "</svg>\n";
}

}  // namespace detail

/// Writes frame_00000.svg, frame_00001.svg, ... into out_dir. Malformed
/// step lines are skipped with a warning; a bad header is an error.
inline RenderReport render_episode(const std::filesystem::path& log_path,
                                   const std::filesystem::path& out_dir) {
  std::ifstream in(log_path);
  if (!in) throw LogError("cannot open " + log_path.string());
  std::string line;
  if (!std::getline(in, line)) throw LogError("empty log");
  nlohmann::json header;
  detail::RoadInfo road;
  std::vector<double> p_c;
  try {
    header = nlohmann::json::parse(line);
    if (header.value("format", "") != kLogFormat) throw LogError("not a densegap-log/1 file");
    const auto& r = header.at("road");
    road.lane_count = r.at("lane_count").get<int>();
    road.lane_width = r.at("lane_width").get<double>();
    road.deadend_s = r.at("deadend_s").get<double>();
    road.deadend_lane = r.at("deadend_lane").get<int>();
    road.deadend_length = r.at("deadend_length").get<double>();
    p_c = header.at("p_c").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw LogError(std::string("bad header: ") + e.what());
  }
  std::filesystem::create_directories(out_dir);
  RenderReport rep;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto rec = nlohmann::json::parse(line);
      if (rec.contains("result")) continue;
      detail::write_frame(out_dir / frame_name(rep.frames), road, p_c, rec);
      rep.frames += 1;
    } catch (const nlohmann::json::exception& e) {
      rep.skipped += 1;
      rep.warnings.push_back("line " + std::to_string(lineno) + ": " + e.what());
    } catch (const std::invalid_argument& e) {
      rep.skipped += 1;
      rep.warnings.push_back("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rep;
}

}  // namespace densegap::harness
