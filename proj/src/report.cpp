#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "blm/analysis.hpp"

namespace blm {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text, std::vector<fs::path>& written) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
  if (!f) throw IoError("write failed: " + path.string());
  written.push_back(path);
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string bar_chart_svg(const std::string& title, const std::vector<std::pair<std::string, double>>& bars) {
  const int bar_w = 48, gap = 16, left = 50, top = 40, plot_h = 200;
  const int width = left + static_cast<int>(bars.size()) * (bar_w + gap) + gap;
  const int height = top + plot_h + 60;
  double vmax = 1.0;
  for (const auto& b : bars) vmax = std::max(vmax, b.second);
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s << "<text x=\"" << left << "\" y=\"20\" font-size=\"13\">" << xml_escape(title) << "</text>\n";
  s << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << width << "\" y2=\"" << top + plot_h
    << "\" stroke=\"black\"/>\n";
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const double h = plot_h * bars[i].second / vmax;
    const int x = left + gap + static_cast<int>(i) * (bar_w + gap);
    s << "<rect x=\"" << x << "\" y=\"" << fmt6(top + plot_h - h) << "\" width=\"" << bar_w << "\" height=\""
      << fmt6(h) << "\" fill=\"#4a78b0\"/>\n";
    s << "<text x=\"" << x + bar_w / 2 << "\" y=\"" << fmt6(top + plot_h - h - 4)
      << "\" text-anchor=\"middle\">" << fmt6(bars[i].second).substr(0, 5) << "</text>\n";
    s << "<text x=\"" << x + bar_w / 2 << "\" y=\"" << top + plot_h + 16 << "\" text-anchor=\"middle\">"
      << xml_escape(bars[i].first) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

std::string heatmap_svg(const KappaMatrix& k) {
  const int cell = 56, left = 140, top = 40;
  const int n = static_cast<int>(k.variants.size());
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << left + n * cell + 10 << "\" height=\""
    << top + n * cell + 140 << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s << "<text x=\"10\" y=\"20\" font-size=\"13\">Cohen's kappa between masking variants</text>\n";
  for (int i = 0; i < n; ++i) {
    s << "<text x=\"" << left - 6 << "\" y=\"" << top + i * cell + cell / 2 + 4 << "\" text-anchor=\"end\">"
      << xml_escape(k.variants[static_cast<std::size_t>(i)]) << "</text>\n";
    s << "<text transform=\"translate(" << left + i * cell + cell / 2 << "," << top + n * cell + 8
      << ") rotate(60)\">" << xml_escape(k.variants[static_cast<std::size_t>(i)]) << "</text>\n";
    for (int j = 0; j < n; ++j) {
      const double v = k.kappa[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      // white at kappa <= 0, dark blue at kappa = 1
      const double t = std::clamp(v, 0.0, 1.0);
      const int r = static_cast<int>(255 - 200 * t), g = static_cast<int>(255 - 150 * t), b = 255 - static_cast<int>(80 * t);
      s << "<rect x=\"" << left + j * cell << "\" y=\"" << top + i * cell << "\" width=\"" << cell << "\" height=\""
        << cell << "\" fill=\"rgb(" << r << "," << g << "," << b << ")\" stroke=\"white\"/>\n";
      s << "<text x=\"" << left + j * cell + cell / 2 << "\" y=\"" << top + i * cell + cell / 2 + 4
        << "\" text-anchor=\"middle\" fill=\"" << (t > 0.6 ? "white" : "black") << "\">" << fmt6(v).substr(0, v < 0 ? 6 : 5)
        << "</text>\n";
    }
  }
  s << "</svg>\n";
  return s.str();
}

std::string safe_name(const std::string& s) {
  std::string out;
  for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.') ? c : '_';
  return out.empty() ? "setting" : out;
}

}  // namespace

std::vector<fs::path> emit_report(std::span<const SettingSummary> settings, const KappaMatrix* kappa,
                                  const fs::path& out_dir) {
  if (kappa && kappa->variants.empty()) throw ValidationError("no masking runs");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  std::vector<fs::path> written;

  std::string f1 = "setting,mean_f1,std_f1,runs\n";
  json summary = {{"settings", json::array()}};
  for (const auto& s : settings) {
    f1 += s.setting + "," + fmt6(s.mean_f1) + "," + fmt6(s.std_f1) + "," + std::to_string(s.runs) + "\n";
    std::string csv = "label,percentage,group\n";
    std::vector<std::pair<std::string, double>> bars;
    json rows = json::array();
    for (const auto& r : s.breakdown.rows) {
      const std::string label(to_string(r.label));
      const char* group = r.lexical ? "lexical" : "structural";
      csv += label + "," + fmt6(r.percentage) + "," + group + "\n";
      bars.emplace_back(label, r.percentage);
      rows.push_back({{"label", label}, {"percentage", r.percentage}, {"group", group}});
    }
    const std::string name = safe_name(s.setting);
    write_text(out_dir / ("errors_" + name + ".csv"), csv, written);
    write_text(out_dir / ("errors_" + name + ".svg"),
               bar_chart_svg("Error percentages: " + s.setting + " (" + std::string(to_string(s.breakdown.dataset)) + ")",
                             bars),
               written);
    summary["settings"].push_back({{"setting", s.setting},
                                   {"dataset", to_string(s.breakdown.dataset)},
                                   {"mean_f1", s.mean_f1},
                                   {"std_f1", s.std_f1},
                                   {"runs", s.runs},
                                   {"errors", rows}});
  }
  if (!settings.empty()) write_text(out_dir / "f1_summary.csv", f1, written);

  if (kappa) {
    std::string csv = "variant";
    for (const auto& v : kappa->variants) csv += "," + v;
    csv += "\n";
    for (std::size_t i = 0; i < kappa->variants.size(); ++i) {
      csv += kappa->variants[i];
      for (double v : kappa->kappa[i]) csv += "," + fmt6(v);
      csv += "\n";
    }
    write_text(out_dir / "kappa.csv", csv, written);
    write_text(out_dir / "kappa.svg", heatmap_svg(*kappa), written);
    summary["kappa"] = {{"over", "chosen answer labels"}, {"variants", kappa->variants}, {"matrix", kappa->kappa}};
  }
  write_text(out_dir / "summary.json", summary.dump(2) + "\n", written);
  return written;
}

}  // namespace blm
