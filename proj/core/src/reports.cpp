#include "unoranic/reports.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace unoranic::eval {
namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string short_fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

// Plot frame shared by both chart kinds.
struct Frame {
  double width = 720, height = 420, left = 70, right = 170, top = 40, bottom = 80;
  double lo = 0, hi = 1;

  double plot_w() const { return width - left - right; }
  double plot_h() const { return height - top - bottom; }
  double y(double v) const { return top + plot_h() * (1.0 - (v - lo) / (hi - lo)); }
};

Frame make_frame(const Chart& chart, bool include_zero) {
  Frame f;
  double lo = include_zero ? 0.0 : INFINITY, hi = -INFINITY;
  for (const auto& s : chart.series)
    for (double v : s.values)
      if (std::isfinite(v)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
  if (!std::isfinite(lo) || !std::isfinite(hi)) lo = 0, hi = 1;
  if (hi - lo < 1e-9) hi = lo + 1;
  const double pad = 0.05 * (hi - lo);
  f.lo = include_zero ? lo : lo - pad;
  f.hi = hi + pad;
  return f;
}

void open_svg(std::ostringstream& o, const Chart& chart, const Frame& f) {
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f.width << "\" height=\"" << f.height
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << f.width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
    << escape_xml(chart.title) << "</text>\n";
  for (int t = 0; t <= 5; ++t) {
    const double v = f.lo + (f.hi - f.lo) * t / 5.0;
    const double y = f.y(v);
    o << "<line x1=\"" << f.left << "\" x2=\"" << f.left + f.plot_w() << "\" y1=\"" << y << "\" y2=\"" << y
      << "\" stroke=\"#ddd\"/>\n";
    o << "<text x=\"" << f.left - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">" << short_fmt(v)
      << "</text>\n";
  }
  o << "<rect x=\"" << f.left << "\" y=\"" << f.top << "\" width=\"" << f.plot_w() << "\" height=\""
    << f.plot_h() << "\" fill=\"none\" stroke=\"black\"/>\n";
  o << "<text x=\"" << f.left + f.plot_w() / 2 << "\" y=\"" << f.height - 12
    << "\" text-anchor=\"middle\">" << escape_xml(chart.x_label) << "</text>\n";
  o << "<text transform=\"translate(16," << f.top + f.plot_h() / 2
    << ") rotate(-90)\" text-anchor=\"middle\">" << escape_xml(chart.y_label) << "</text>\n";
}

void category_labels(std::ostringstream& o, const Chart& chart, const Frame& f,
                     const std::vector<double>& xs) {
  for (std::size_t i = 0; i < chart.categories.size(); ++i) {
    const double y = f.top + f.plot_h() + 14;
    o << "<text x=\"" << xs[i] << "\" y=\"" << y << "\" text-anchor=\"end\" transform=\"rotate(-30 "
      << xs[i] << ' ' << y << ")\">" << escape_xml(chart.categories[i]) << "</text>\n";
  }
}

void legend(std::ostringstream& o, const Chart& chart, const Frame& f) {
  for (std::size_t s = 0; s < chart.series.size(); ++s) {
    const double x = f.left + f.plot_w() + 12, y = f.top + 10 + 18.0 * s;
    o << "<rect x=\"" << x << "\" y=\"" << y - 9 << "\" width=\"12\" height=\"12\" fill=\""
      << kPalette[s % 10] << "\"/>\n";
    o << "<text x=\"" << x + 18 << "\" y=\"" << y + 1 << "\">" << escape_xml(chart.series[s].name)
      << "</text>\n";
  }
}

}  // namespace

Json json_number(double value) {
  if (std::isfinite(value)) return value;
  return fmt(value);
}

Json to_json(const PsnrReport& r) {
  Json per = Json::array();
  for (double v : r.per_sample) per.push_back(json_number(v));
  return Json{{"dataset", r.dataset},
              {"model_kind", std::string(model::to_string(r.model_kind))},
              {"mean_psnr", json_number(r.mean_psnr)},
              {"infinite_count", r.infinite_count},
              {"per_sample_psnr", per}};
}

Json to_json(const RevisionReport& r) {
  Json entries = Json::array();
  for (const auto& e : r.entries)
    entries.push_back(Json{{"corruption", std::string(augment::to_string(e.kind))},
                           {"severity", e.severity},
                           {"psnr_corrupted", json_number(e.psnr_corrupted)},
                           {"psnr_revised", json_number(e.psnr_revised)}});
  return Json{{"dataset", r.dataset},
              {"psnr_clean_reference", json_number(r.psnr_clean_reference)},
              {"entries", entries}};
}

Json to_json(const std::vector<ProbeResult>& results) {
  Json out = Json::array();
  for (const auto& p : results)
    out.push_back(Json{{"task", std::string(to_string(p.task))},
                       {"source", std::string(to_string(p.source))},
                       {"auc", json_number(p.auc)},
                       {"acc", json_number(p.acc)},
                       {"class_count", p.class_count}});
  return out;
}

Json to_json(const RobustnessReport& r) {
  Json cells = Json::array();
  for (const auto& c : r.cells)
    cells.push_back(Json{{"model", c.model},
                         {"corruption", c.severity == 0 ? "clean" : std::string(augment::to_string(c.kind))},
                         {"severity", c.severity},
                         {"auc", json_number(c.auc)}});
  return Json{{"dataset", r.dataset}, {"cells", cells}};
}

std::string to_csv(const std::vector<PsnrReport>& reports) {
  std::ostringstream o;
  o << "dataset,model_kind,sample,psnr\n";
  for (const auto& r : reports) {
    o << r.dataset << ',' << model::to_string(r.model_kind) << ",mean," << fmt(r.mean_psnr) << '\n';
    for (std::size_t i = 0; i < r.per_sample.size(); ++i)
      o << r.dataset << ',' << model::to_string(r.model_kind) << ',' << i << ',' << fmt(r.per_sample[i]) << '\n';
  }
  return o.str();
}

std::string to_csv(const RevisionReport& r) {
  std::ostringstream o;
  o << "dataset,corruption,severity,psnr_corrupted,psnr_revised,psnr_clean_reference\n";
  for (const auto& e : r.entries)
    o << r.dataset << ',' << augment::to_string(e.kind) << ',' << e.severity << ',' << fmt(e.psnr_corrupted)
      << ',' << fmt(e.psnr_revised) << ',' << fmt(r.psnr_clean_reference) << '\n';
  return o.str();
}

std::string to_csv(const std::vector<ProbeResult>& results) {
  std::ostringstream o;
  o << "task,source,auc,acc,class_count\n";
  for (const auto& p : results)
    o << to_string(p.task) << ',' << to_string(p.source) << ',' << fmt(p.auc) << ',' << fmt(p.acc) << ','
      << p.class_count << '\n';
  return o.str();
}

std::string to_csv(const RobustnessReport& r) {
  std::ostringstream o;
  o << "dataset,model,corruption,severity,auc\n";
  for (const auto& c : r.cells)
    o << r.dataset << ',' << c.model << ',' << (c.severity == 0 ? "clean" : augment::to_string(c.kind)) << ','
      << c.severity << ',' << fmt(c.auc) << '\n';
  return o.str();
}

std::string render_line_chart(const Chart& chart) {
  const auto f = make_frame(chart, false);
  std::ostringstream o;
  open_svg(o, chart, f);
  const auto n = chart.categories.size();
  std::vector<double> xs(n);
  for (std::size_t i = 0; i < n; ++i)
    xs[i] = f.left + (n == 1 ? f.plot_w() / 2 : f.plot_w() * (0.04 + 0.92 * i / double(n - 1)));
  category_labels(o, chart, f, xs);
  for (std::size_t s = 0; s < chart.series.size(); ++s) {
    const auto& values = chart.series[s].values;
    std::ostringstream path;
    bool pen_down = false;
    for (std::size_t i = 0; i < std::min(n, values.size()); ++i) {
      if (!std::isfinite(values[i])) {
        pen_down = false;
        continue;
      }
      path << (pen_down ? " L" : " M") << xs[i] << ' ' << f.y(values[i]);
      pen_down = true;
      o << "<circle cx=\"" << xs[i] << "\" cy=\"" << f.y(values[i]) << "\" r=\"3\" fill=\"" << kPalette[s % 10]
        << "\"/>\n";
    }
    o << "<path d=\"" << path.str() << "\" fill=\"none\" stroke=\"" << kPalette[s % 10]
      << "\" stroke-width=\"2\"/>\n";
  }
  legend(o, chart, f);
  o << "</svg>\n";
  return o.str();
}

std::string render_bar_chart(const Chart& chart) {
  const auto f = make_frame(chart, true);
  std::ostringstream o;
  open_svg(o, chart, f);
  const auto n = chart.categories.size();
  const auto k = std::max<std::size_t>(1, chart.series.size());
  const double slot = f.plot_w() / std::max<std::size_t>(1, n);
  const double bar = 0.8 * slot / k;
  std::vector<double> xs(n);
  for (std::size_t i = 0; i < n; ++i) xs[i] = f.left + slot * (i + 0.5);
  category_labels(o, chart, f, xs);
  for (std::size_t s = 0; s < chart.series.size(); ++s)
    for (std::size_t i = 0; i < std::min(n, chart.series[s].values.size()); ++i) {
      const double v = chart.series[s].values[i];
      if (!std::isfinite(v)) continue;
      const double x = f.left + slot * i + 0.1 * slot + bar * s;
      o << "<rect x=\"" << x << "\" y=\"" << f.y(v) << "\" width=\"" << bar << "\" height=\"" << f.y(f.lo) - f.y(v)
        << "\" fill=\"" << kPalette[s % 10] << "\"/>\n";
    }
  legend(o, chart, f);
  o << "</svg>\n";
  return o.str();
}

Chart revision_chart(const RevisionReport& r) {
  Chart c{"Corruption revision (" + r.dataset + ")", "corruption", "PSNR (dB)", {}, {}};
  Series corrupted{"corrupted input", {}}, revised{"revised", {}}, clean{"clean reference", {}};
  for (const auto& e : r.entries) {
    c.categories.emplace_back(augment::to_string(e.kind));
    corrupted.values.push_back(e.psnr_corrupted);
    revised.values.push_back(e.psnr_revised);
    clean.values.push_back(r.psnr_clean_reference);
  }
  c.series = {corrupted, revised, clean};
  return c;
}

Chart robustness_chart(const RobustnessReport& r, const std::vector<augment::CorruptionKind>& kinds,
                       const std::string& title) {
  Chart c{title, "severity", "AUC", {"0", "1", "2", "3", "4", "5"}, {}};
  std::vector<std::string> models;
  for (const auto& cell : r.cells)
    if (std::find(models.begin(), models.end(), cell.model) == models.end()) models.push_back(cell.model);
  for (const auto& m : models) {
    Series s{m, {r.auc(m, augment::CorruptionKind::identity, 0)}};
    for (int sev = 1; sev <= 5; ++sev) s.values.push_back(r.mean_auc(m, kinds, sev));
    c.series.push_back(s);
  }
  return c;
}

Chart reconstruction_chart(const std::vector<PsnrReport>& reports) {
  Chart c{"Reconstruction quality", "model", "mean PSNR (dB)", {}, {{"mean PSNR", {}}}};
  for (const auto& r : reports) {
    c.categories.push_back(r.dataset + " / " + std::string(model::to_string(r.model_kind)));
    c.series[0].values.push_back(r.mean_psnr);
  }
  return c;
}

}  // namespace unoranic::eval
