#include "semamba/eval/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace semamba::eval {

namespace fs = std::filesystem;

namespace {

// Shortest representation that round-trips, so re-reading is exact.
std::string num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s, const fs::path& path) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw DataError(path.string() + ": bad number '" + s + "'");
  }
  return v;
}

void check_field(const std::string& s) {
  if (s.find_first_of(",\n\r\"") != std::string::npos) {
    throw DataError("report: field '" + s + "' contains a delimiter");
  }
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("report: cannot write " + path.string());
  return out;
}

std::string row_fields(const MetricRow& r) {
  return num(r.dice) + "," + num(r.accuracy) + "," + num(r.precision) + "," +
         num(r.sensitivity) + "," + num(r.specificity) + "," + num(r.hd95) + "," + num(r.asd);
}

double median_sorted(const std::vector<double>& v, std::size_t lo, std::size_t hi) {
  const std::size_t n = hi - lo;
  const std::size_t mid = lo + n / 2;
  return n % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

const char* kPalette[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860"};

void write_histogram_svg(const std::vector<MethodEvaluation>& methods,
                         const std::vector<Histogram>& hists, const fs::path& path) {
  const double w = 480, h = 300, left = 50, bottom = 40, top = 20, right = 20;
  int64_t peak = 1;
  for (const auto& hist : hists) {
    for (auto c : hist.counts) peak = std::max(peak, c);
  }
  auto out = open_out(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  const double plot_w = w - left - right, plot_h = h - top - bottom;
  const std::size_t bins = hists.front().counts.size();
  const double group = plot_w / static_cast<double>(bins);
  const double bar = group / static_cast<double>(hists.size() + 1);
  for (std::size_t m = 0; m < hists.size(); ++m) {
    for (std::size_t b = 0; b < bins; ++b) {
      const double bh = plot_h * static_cast<double>(hists[m].counts[b]) / static_cast<double>(peak);
      out << "<rect x=\"" << num(left + group * b + bar * (m + 0.5)) << "\" y=\""
          << num(top + plot_h - bh) << "\" width=\"" << num(bar) << "\" height=\"" << num(bh)
          << "\" fill=\"" << kPalette[m % 6] << "\"/>\n";
    }
    out << "<text x=\"" << num(left + 5) << "\" y=\"" << num(top + 12 + 14 * m)
        << "\" font-size=\"11\" fill=\"" << kPalette[m % 6] << "\">" << methods[m].method
        << "</text>\n";
  }
  out << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << w - right
      << "\" y2=\"" << top + plot_h << "\" stroke=\"black\"/>\n";
  for (std::size_t b = 0; b <= bins; b += 2) {
    out << "<text x=\"" << num(left + group * b) << "\" y=\"" << num(h - bottom + 15)
        << "\" font-size=\"10\" text-anchor=\"middle\">" << num(hists.front().edges[b])
        << "</text>\n";
  }
  out << "<text x=\"" << num(left + plot_w / 2) << "\" y=\"" << num(h - 5)
      << "\" font-size=\"11\" text-anchor=\"middle\">IoU</text>\n</svg>\n";
}

void write_box_svg(const std::vector<MethodEvaluation>& methods, const std::vector<BoxStats>& boxes,
                   const fs::path& path) {
  const double w = 120.0 * static_cast<double>(boxes.size()) + 80, h = 300, top = 20, bottom = 40;
  const double plot_h = h - top - bottom;
  auto y = [&](double v) { return num(top + plot_h * (1.0 - std::clamp(v, 0.0, 1.0))); };
  auto out = open_out(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t m = 0; m < boxes.size(); ++m) {
    const auto& b = boxes[m];
    const double cx = 80 + 120.0 * m + 40;
    const auto colour = kPalette[m % 6];
    out << "<line x1=\"" << cx << "\" y1=\"" << y(b.min) << "\" x2=\"" << cx << "\" y2=\""
        << y(b.max) << "\" stroke=\"black\"/>\n";
    out << "<rect x=\"" << cx - 25 << "\" y=\"" << y(b.q3) << "\" width=\"50\" height=\""
        << num(plot_h * (std::clamp(b.q3, 0.0, 1.0) - std::clamp(b.q1, 0.0, 1.0)))
        << "\" fill=\"" << colour << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << cx - 25 << "\" y1=\"" << y(b.median) << "\" x2=\"" << cx + 25
        << "\" y2=\"" << y(b.median) << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << cx << "\" y=\"" << num(h - 15)
        << "\" font-size=\"11\" text-anchor=\"middle\">" << methods[m].method << "</text>\n";
  }
  for (double t : {0.0, 0.5, 1.0}) {
    out << "<text x=\"40\" y=\"" << y(t) << "\" font-size=\"10\" text-anchor=\"end\">" << num(t)
        << "</text>\n";
  }
  out << "<text x=\"15\" y=\"" << num(top + plot_h / 2)
      << "\" font-size=\"11\" transform=\"rotate(-90 15 " << num(top + plot_h / 2)
      << ")\" text-anchor=\"middle\">Dice</text>\n</svg>\n";
}

}  // namespace

BoxStats box_stats(std::vector<double> values) {
  if (values.empty()) throw DomainError("box_stats: no values");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  BoxStats b;
  b.min = values.front();
  b.max = values.back();
  b.median = median_sorted(values, 0, n);
  if (n == 1) {
    b.q1 = b.q3 = b.median;
  } else {
    b.q1 = median_sorted(values, 0, n / 2);
    b.q3 = median_sorted(values, n - n / 2, n);
  }
  return b;
}

Histogram unit_histogram(const std::vector<double>& values, int bins) {
  if (bins < 1) throw DomainError("unit_histogram: bins must be positive");
  Histogram h;
  for (int i = 0; i <= bins; ++i) h.edges.push_back(static_cast<double>(i) / bins);
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  for (double v : values) {
    auto idx = static_cast<int>(std::floor(std::clamp(v, 0.0, 1.0) * bins));
    ++h.counts[static_cast<std::size_t>(std::min(idx, bins - 1))];
  }
  return h;
}

void write_metrics_csv(const std::vector<MethodEvaluation>& methods, const fs::path& path) {
  auto out = open_out(path);
  out << kMetricsHeader << '\n';
  for (const auto& m : methods) {
    check_field(m.method);
    out << "aggregate," << m.method << ",,," << row_fields(m.evaluation.aggregate) << ','
        << num(m.evaluation.mean_iou) << '\n';
    for (const auto& img : m.evaluation.images) {
      check_field(img.case_id);
      out << "image," << m.method << ',' << img.case_id << ',' << img.slice_index << ','
          << row_fields(img.row) << ',' << num(img.iou) << '\n';
    }
  }
  if (!out) throw DataError("report: write failed for " + path.string());
}

std::vector<MethodEvaluation> read_metrics_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open metrics file " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) {
    throw DataError(path.string() + ": unexpected header");
  }
  std::vector<MethodEvaluation> methods;
  std::map<std::string, std::size_t> index;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != 12) throw DataError(path.string() + ": expected 12 fields in '" + line + "'");
    if (f[0] == "aggregate") continue;
    if (f[0] != "image") throw DataError(path.string() + ": unknown row kind '" + f[0] + "'");
    auto [it, inserted] = index.try_emplace(f[1], methods.size());
    if (inserted) methods.push_back({f[1], {}});
    ImageResult r;
    r.case_id = f[2];
    r.slice_index = static_cast<int>(parse_double(f[3], path));
    r.row = {parse_double(f[4], path), parse_double(f[5], path), parse_double(f[6], path),
             parse_double(f[7], path), parse_double(f[8], path), parse_double(f[9], path),
             parse_double(f[10], path)};
    r.iou = parse_double(f[11], path);
    methods[it->second].evaluation.images.push_back(std::move(r));
  }
  for (auto& m : methods) {
    std::vector<MetricRow> rows;
    double iou = 0.0;
    for (const auto& img : m.evaluation.images) {
      rows.push_back(img.row);
      iou += img.iou;
    }
    m.evaluation.aggregate = mean_row(rows);
    m.evaluation.mean_iou = iou / static_cast<double>(rows.size());
  }
  return methods;
}

void emit_report(const std::vector<MethodEvaluation>& methods, const fs::path& out_dir, bool svg) {
  if (methods.empty()) throw DataError("report: no methods");
  for (const auto& m : methods) {
    if (m.evaluation.images.empty()) throw DataError("report: method '" + m.method + "' has no rows");
  }
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw DataError("report: cannot create " + out_dir.string() + ": " + ec.message());

  write_metrics_csv(methods, out_dir / "metrics.csv");

  std::vector<Histogram> hists;
  std::vector<BoxStats> boxes;
  for (const auto& m : methods) {
    std::vector<double> ious, dices;
    for (const auto& img : m.evaluation.images) {
      ious.push_back(img.iou);
      dices.push_back(img.row.dice);
    }
    hists.push_back(unit_histogram(ious));
    boxes.push_back(box_stats(dices));
  }

  {
    auto out = open_out(out_dir / "iou_histogram.csv");
    out << "method,bin_lower,bin_upper,count\n";
    for (std::size_t m = 0; m < methods.size(); ++m) {
      for (std::size_t b = 0; b < hists[m].counts.size(); ++b) {
        out << methods[m].method << ',' << num(hists[m].edges[b]) << ','
            << num(hists[m].edges[b + 1]) << ',' << hists[m].counts[b] << '\n';
      }
    }
  }
  {
    auto out = open_out(out_dir / "dice_boxplot.csv");
    out << "method,min,q1,median,q3,max\n";
    for (std::size_t m = 0; m < methods.size(); ++m) {
      const auto& b = boxes[m];
      out << methods[m].method << ',' << num(b.min) << ',' << num(b.q1) << ',' << num(b.median)
          << ',' << num(b.q3) << ',' << num(b.max) << '\n';
    }
  }
  if (svg) {
    write_histogram_svg(methods, hists, out_dir / "iou_histogram.svg");
    write_box_svg(methods, boxes, out_dir / "dice_boxplot.svg");
  }
}

}  // namespace semamba::eval
