#pragma once

// Summary statistics, convergence curves and minimal SVG charts.

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "routeshape/training.hpp"
#include "routeshape/format.hpp"

namespace routeshape {

struct GroupStats {
  double mean = 0.0;
  double std = 0.0;  // population
  std::size_t n = 0;
};

/// Pooled over every (episode, agent of `kind`) pair.
inline GroupStats group_stats(const Scenario& sc, std::span<const EpisodeLog> logs, AgentKind kind) {
  GroupStats g;
  const auto pos = sc.positions_of(kind);
  double sum = 0.0;
  for (const auto& log : logs)
    for (std::size_t p : pos) sum += log.times.at(p), ++g.n;
  if (g.n == 0) return {NAN, NAN, 0};
  g.mean = sum / static_cast<double>(g.n);
  double ss = 0.0;
  for (const auto& log : logs)
    for (std::size_t p : pos) ss += (log.times.at(p) - g.mean) * (log.times.at(p) - g.mean);
  g.std = std::sqrt(ss / static_cast<double>(g.n));
  return g;
}

inline constexpr std::string_view kSummaryCsvHeader = "group,mean,std";

inline void write_summary_csv(std::ostream& os, const GroupStats& avs, const GroupStats& humans) {
  os << kSummaryCsvHeader << '\n'
     << "AVs," << format_number(avs.mean) << ',' << format_number(avs.std) << '\n'
     << "Humans," << format_number(humans.mean) << ',' << format_number(humans.std) << '\n';
}

inline std::vector<double> proportion_curve(const Scenario& sc, std::span<const EpisodeLog> logs,
                                            const JointAction& optimal) {
  std::vector<double> c;
  c.reserve(logs.size());
  for (const auto& log : logs) c.push_back(optimal_proportion(sc, log, optimal));
  return c;
}

inline constexpr std::size_t kConvergenceWindow = 20;
inline constexpr double kConvergenceThreshold = 0.9;

/// First index i >= window-1 whose trailing `window`-point mean reaches
/// `threshold`, or nothing.
inline std::optional<std::size_t> first_reach(std::span<const double> curve, double threshold = kConvergenceThreshold,
                                              std::size_t window = kConvergenceWindow) {
  if (window == 0 || curve.size() < window) return std::nullopt;
  double acc = 0.0;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    acc += curve[i];
    if (i >= window) acc -= curve[i - window];
    if (i + 1 >= window && acc / static_cast<double>(window) >= threshold - 1e-12) return i;
  }
  return std::nullopt;
}

inline double mean_of(std::span<const double> v) {
  if (v.empty()) return NAN;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

/// Pointwise mean of equally long curves.
inline std::vector<double> mean_curve(const std::vector<std::vector<double>>& curves) {
  if (curves.empty()) return {};
  std::vector<double> m(curves.front().size(), 0.0);
  for (const auto& c : curves) {
    if (c.size() != m.size()) throw Error("curves differ in length");
    for (std::size_t i = 0; i < m.size(); ++i) m[i] += c[i];
  }
  for (double& x : m) x /= static_cast<double>(curves.size());
  return m;
}

inline constexpr std::string_view kConvergenceCsvHeader = "episode,phase,proportion";

/// `first_episode` is the episode index of curve[0]; the first `train` points
/// are training, the rest evaluation.
inline void write_convergence_csv(std::ostream& os, std::span<const double> curve, std::size_t first_episode,
                                  std::size_t train) {
  os << kConvergenceCsvHeader << '\n';
  for (std::size_t i = 0; i < curve.size(); ++i)
    os << first_episode + i << ',' << (i < train ? "train" : "eval") << ',' << format_number(curve[i]) << '\n';
}

// ---------------------------------------------------------------------------
// SVG

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

namespace detail {

inline const char* palette(std::size_t k) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"};
  return colors[k % 8];
}

inline std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

inline std::string fmt2(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

}  // namespace detail

/// Line chart. `marker_x`, when set, draws a dashed vertical line there.
inline void write_line_svg(std::ostream& os, const std::vector<Series>& series, const std::string& title,
                           const std::string& xlabel, const std::string& ylabel, std::optional<double> marker_x = {},
                           double ymin = 0.0, double ymax = 1.0) {
  const double W = 720, H = 420, L = 60, R = 170, T = 40, B = 50;
  double xmin = INFINITY, xmax = -INFINITY;
  for (const auto& s : series)
    for (double x : s.x) xmin = std::min(xmin, x), xmax = std::max(xmax, x);
  if (!(xmax > xmin)) xmin = 0, xmax = 1;
  auto px = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
  auto py = [&](double y) { return H - B - (std::clamp(y, ymin, ymax) - ymin) / (ymax - ymin) * (H - T - B); };

  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << detail::xml_escape(title) << "</text>\n";
  for (int k = 0; k <= 5; ++k) {
    const double y = ymin + (ymax - ymin) * k / 5.0;
    os << "<line x1=\"" << L << "\" x2=\"" << W - R << "\" y1=\"" << py(y) << "\" y2=\"" << py(y) << "\" stroke=\"#ddd\"/>\n"
       << "<text x=\"" << L - 6 << "\" y=\"" << py(y) + 4 << "\" text-anchor=\"end\">" << detail::fmt2(y) << "</text>\n";
    const double x = xmin + (xmax - xmin) * k / 5.0;
    os << "<text x=\"" << px(x) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << detail::fmt2(std::round(x)) << "</text>\n";
  }
  os << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B << "\" fill=\"none\" stroke=\"black\"/>\n"
     << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << detail::xml_escape(xlabel) << "</text>\n"
     << "<text transform=\"translate(16," << (T + H - B) / 2 << ") rotate(-90)\" text-anchor=\"middle\">" << detail::xml_escape(ylabel) << "</text>\n";
  if (marker_x)
    os << "<line x1=\"" << px(*marker_x) << "\" x2=\"" << px(*marker_x) << "\" y1=\"" << T << "\" y2=\"" << H - B
       << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    os << "<polyline fill=\"none\" stroke-width=\"1.2\" stroke=\"" << detail::palette(k) << "\" points=\"";
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i)
      os << (i ? " " : "") << detail::fmt2(px(s.x[i])) << ',' << detail::fmt2(py(s.y[i]));
    os << "\"/>\n";
    const double ly = T + 14 + 18.0 * static_cast<double>(k);
    os << "<line x1=\"" << W - R + 10 << "\" x2=\"" << W - R + 30 << "\" y1=\"" << ly << "\" y2=\"" << ly << "\" stroke=\""
       << detail::palette(k) << "\" stroke-width=\"2\"/>\n"
       << "<text x=\"" << W - R + 36 << "\" y=\"" << ly + 4 << "\">" << detail::xml_escape(s.label) << "</text>\n";
  }
  os << "</svg>\n";
}

inline void write_bar_svg(std::ostream& os, const std::vector<std::string>& labels, const std::vector<double>& values,
                          const std::string& title, const std::string& ylabel) {
  const double W = std::max(360.0, 90.0 + 70.0 * static_cast<double>(labels.size())), H = 380, L = 60, T = 40, B = 70;
  double ymax = 1.0;
  for (double v : values) ymax = std::max(ymax, v);
  ymax = std::ceil(ymax);
  const double slot = (W - L - 20) / std::max<double>(1.0, static_cast<double>(labels.size()));
  auto py = [&](double y) { return H - B - y / ymax * (H - T - B); };
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << detail::xml_escape(title) << "</text>\n"
     << "<line x1=\"" << L << "\" x2=\"" << W - 20 << "\" y1=\"" << py(0) << "\" y2=\"" << py(0) << "\" stroke=\"black\"/>\n"
     << "<text transform=\"translate(16," << (T + H - B) / 2 << ") rotate(-90)\" text-anchor=\"middle\">" << detail::xml_escape(ylabel) << "</text>\n";
  const int ticks = static_cast<int>(std::min(ymax, 5.0));
  for (int k = 0; k <= ticks; ++k) {
    const double y = ymax * k / ticks;
    os << "<text x=\"" << L - 6 << "\" y=\"" << py(y) + 4 << "\" text-anchor=\"end\">" << detail::fmt2(y) << "</text>\n";
  }
  for (std::size_t k = 0; k < labels.size(); ++k) {
    const double x = L + slot * static_cast<double>(k) + slot * 0.2;
    const double v = k < values.size() ? values[k] : 0.0;
    os << "<rect x=\"" << x << "\" y=\"" << py(v) << "\" width=\"" << slot * 0.6 << "\" height=\"" << py(0) - py(v)
       << "\" fill=\"" << detail::palette(0) << "\"/>\n"
       << "<text x=\"" << x + slot * 0.3 << "\" y=\"" << py(v) - 4 << "\" text-anchor=\"middle\">" << detail::fmt2(v) << "</text>\n"
       << "<text x=\"" << x + slot * 0.3 << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">" << detail::xml_escape(labels[k]) << "</text>\n";
  }
  os << "</svg>\n";
}

}  // namespace routeshape
