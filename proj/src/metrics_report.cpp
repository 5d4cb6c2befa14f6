#include <algorithm>
#include <charconv>
#include <cstdio>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "cassi/errors.hpp"
#include "cassi/metrics.hpp"

namespace cassi {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw ValidationError("trailing characters in number '" + s + "'");
    return v;
  } catch (const std::logic_error&) {
    throw ValidationError("malformed number '" + s + "' in metrics CSV");
  }
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double mean_of(const std::vector<ScoredScene>& scenes, double MetricReport::*field) {
  double s = 0.0;
  for (const auto& sc : scenes) s += sc.report.*field;
  return scenes.empty() ? 0.0 : s / static_cast<double>(scenes.size());
}

std::size_t max_bands(const std::vector<ScoredScene>& scenes) {
  std::size_t n = 0;
  for (const auto& sc : scenes) n = std::max(n, sc.report.per_band_psnr.size());
  return n;
}

}  // namespace

std::string metrics_table_csv(const std::vector<ScoredScene>& scenes) {
  std::ostringstream os;
  os << "Metrics";
  for (const auto& sc : scenes) os << ',' << sc.name;
  os << ",Avg\n";

  auto row = [&](const char* label, double MetricReport::*field) {
    os << label;
    for (const auto& sc : scenes) os << ',' << fmt(sc.report.*field);
    os << ',' << fmt(mean_of(scenes, field)) << '\n';
  };
  row("PSNR", &MetricReport::psnr_db);
  row("SSIM", &MetricReport::ssim);
  row("SAM", &MetricReport::sam_degrees);

  os << "SAM_excluded";
  Index excluded = 0;
  for (const auto& sc : scenes) {
    os << ',' << sc.report.sam_excluded_pixels;
    excluded += sc.report.sam_excluded_pixels;
  }
  os << ',' << excluded << '\n';

  os << "Peak";
  for (const auto& sc : scenes) os << ',' << fmt(sc.report.peak);
  os << ",\n";
  os << "PeakConvention";
  for (const auto& sc : scenes) os << ',' << to_string(sc.report.peak_convention);
  os << ",\n";

  const std::size_t bands = max_bands(scenes);
  for (std::size_t b = 0; b < bands; ++b) {
    os << "PSNR_band_" << (b + 1);
    double sum = 0.0;
    int count = 0;
    for (const auto& sc : scenes) {
      os << ',';
      if (b < sc.report.per_band_psnr.size()) {
        os << fmt(sc.report.per_band_psnr[b]);
        sum += sc.report.per_band_psnr[b];
        ++count;
      }
    }
    os << ',' << (count ? fmt(sum / count) : std::string()) << '\n';
  }
  return os.str();
}

std::vector<ScoredScene> parse_metrics_table_csv(const std::string& csv) {
  std::istringstream is(csv);
  std::string line;
  if (!std::getline(is, line)) throw ValidationError("metrics CSV is empty");
  const auto header = split(line, ',');
  if (header.size() < 2 || header.front() != "Metrics" || header.back() != "Avg") {
    throw ValidationError("metrics CSV header must read 'Metrics,<scenes>,Avg'");
  }
  const std::size_t n = header.size() - 2;
  std::vector<ScoredScene> scenes(n);
  for (std::size_t i = 0; i < n; ++i) scenes[i].name = header[i + 1];

  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != header.size()) throw ValidationError("metrics CSV row has wrong column count: " + line);
    const std::string& label = cells.front();
    for (std::size_t i = 0; i < n; ++i) {
      const std::string& c = cells[i + 1];
      auto& r = scenes[i].report;
      if (label == "PSNR") {
        r.psnr_db = parse_double(c);
      } else if (label == "SSIM") {
        r.ssim = parse_double(c);
      } else if (label == "SAM") {
        r.sam_degrees = parse_double(c);
      } else if (label == "SAM_excluded") {
        r.sam_excluded_pixels = static_cast<Index>(parse_double(c));
      } else if (label == "Peak") {
        r.peak = parse_double(c);
      } else if (label == "PeakConvention") {
        r.peak_convention = c == "unit" ? PeakConvention::Unit : PeakConvention::ReferenceMax;
      } else if (label.rfind("PSNR_band_", 0) == 0) {
        if (!c.empty()) r.per_band_psnr.push_back(parse_double(c));
      } else {
        throw ValidationError("unknown metrics CSV row '" + label + "'");
      }
    }
  }
  return scenes;
}

std::string per_band_psnr_csv(const std::vector<ScoredScene>& scenes) {
  std::ostringstream os;
  os << "band";
  for (const auto& sc : scenes) os << ',' << sc.name;
  os << '\n';
  const std::size_t bands = max_bands(scenes);
  for (std::size_t b = 0; b < bands; ++b) {
    os << (b + 1);
    for (const auto& sc : scenes) {
      os << ',';
      if (b < sc.report.per_band_psnr.size()) os << fmt(sc.report.per_band_psnr[b]);
    }
    os << '\n';
  }
  return os.str();
}

std::string metrics_table_text(const std::vector<ScoredScene>& scenes) {
  std::ostringstream os;
  const int w = 12;
  os << std::left << std::setw(10) << "Metrics";
  for (const auto& sc : scenes) os << std::right << std::setw(w) << sc.name;
  os << std::right << std::setw(w) << "Avg" << '\n';
  auto row = [&](const char* label, double MetricReport::*field, int precision) {
    os << std::left << std::setw(10) << label << std::right << std::fixed << std::setprecision(precision);
    for (const auto& sc : scenes) os << std::setw(w) << sc.report.*field;
    os << std::setw(w) << mean_of(scenes, field) << '\n';
  };
  row("PSNR", &MetricReport::psnr_db, 2);
  row("SSIM", &MetricReport::ssim, 3);
  row("SAM", &MetricReport::sam_degrees, 3);
  if (!scenes.empty()) {
    os << "peak: " << to_string(scenes.front().report.peak_convention) << '\n';
  }
  return os.str();
}

}  // namespace cassi
