#include "opbench/cli/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>

#include "opbench/cli/container.hpp"
#include "opbench/errors.hpp"
#include "opbench/train/train.hpp"

namespace opbench::cli {

namespace fs = std::filesystem;
using harness::ExperimentRecord;

namespace {

std::string printf_string(const char* fmt, double a, double b) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, a, b);
  return buf;
}

std::string exact(double v) {
  if (!std::isfinite(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::size_t display_width(const std::string& s) {
  std::size_t n = 0;
  for (unsigned char c : s)
    if ((c & 0xC0) != 0x80) ++n;
  return n;
}

std::string pad(const std::string& s, std::size_t w) { return s + std::string(w - std::min(w, display_width(s)), ' '); }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

bool numeric(const std::string& s, double& v) {
  if (s.empty()) return false;
  char* end = nullptr;
  v = std::strtod(s.c_str(), &end);
  return end && *end == '\0';
}

/// Labels in numeric order when they all parse, otherwise in first-seen order.
void order_labels(std::vector<std::string>& labels) {
  std::vector<std::pair<double, std::string>> keyed;
  for (const auto& l : labels) {
    double v;
    if (!numeric(l, v)) return;
    keyed.emplace_back(v, l);
  }
  std::stable_sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = keyed[i].second;
}

void add_unique(std::vector<std::string>& v, const std::string& s) {
  if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
}

struct Table {
  std::string title;
  std::string stem;
  std::string corner;
  std::vector<std::string> rows, cols;
  std::map<std::pair<std::string, std::string>, std::vector<const ExperimentRecord*>> groups;
  std::map<std::pair<std::string, std::string>, Cell> cells;
  bool rank_columns = true;
  bool ranked = true;
  bool seconds = false;
  std::function<double(const ExperimentRecord&)> value = [](const ExperimentRecord& r) { return r.mean; };
  std::function<std::string(const std::string&)> row_label = [](const std::string& s) { return s; };
  std::function<std::string(const std::string&)> col_label = [](const std::string& s) { return s; };

  void add(const std::string& row, const std::string& col, const ExperimentRecord& r) {
    add_unique(rows, row);
    add_unique(cols, col);
    groups[{row, col}].push_back(&r);
  }

  void finish() {
    for (const auto& [key, recs] : groups) {
      Cell c;
      std::vector<double> v;
      for (const auto* r : recs) {
        const double x = value(*r);
        if (r->failed || !std::isfinite(x))
          ++c.failed;
        else
          v.push_back(x);
      }
      c.seeds = recs.size();
      if (!v.empty()) {
        const auto ms = train::mean_std(v);
        c.mean = ms.mean;
        c.std = ms.std;
      }
      cells[key] = c;
    }
    if (!ranked) return;
    const auto& outer = rank_columns ? cols : rows;
    const auto& inner = rank_columns ? rows : cols;
    for (const auto& o : outer) {
      std::vector<std::pair<double, std::string>> cand;
      for (const auto& i : inner) {
        auto it = cells.find(rank_columns ? std::make_pair(i, o) : std::make_pair(o, i));
        if (i == "oracle") continue;
        if (it != cells.end() && it->second.failed < it->second.seeds) cand.emplace_back(it->second.mean, i);
      }
      std::stable_sort(cand.begin(), cand.end());
      for (std::size_t k = 0; k < cand.size() && k < 3; ++k)
        cells[rank_columns ? std::make_pair(cand[k].second, o) : std::make_pair(o, cand[k].second)].rank = int(k + 1);
    }
  }

  std::string cell_text(const std::string& r, const std::string& c) const {
    auto it = cells.find({r, c});
    if (it == cells.end()) return "-";
    const Cell& cell = it->second;
    if (!seconds) return format_cell(cell);
    if (cell.failed == cell.seeds) return "failed";
    std::string s = printf_string("%.4g±%.2g", cell.mean, cell.std);
    if (cell.rank) s += " [" + std::to_string(cell.rank) + "]";
    if (cell.failed) s += " !";
    return s;
  }

  std::string text() const {
    std::vector<std::vector<std::string>> grid;
    std::vector<std::string> head{corner};
    for (const auto& c : cols) head.push_back(col_label(c));
    grid.push_back(head);
    for (const auto& r : rows) {
      std::vector<std::string> line{row_label(r)};
      for (const auto& c : cols) line.push_back(cell_text(r, c));
      grid.push_back(line);
    }
    std::vector<std::size_t> w(head.size(), 0);
    for (const auto& line : grid)
      for (std::size_t k = 0; k < line.size(); ++k) w[k] = std::max(w[k], display_width(line[k]));
    std::ostringstream out;
    out << title << "\n";
    out << (seconds ? "Wall-clock seconds, mean±std over seeds."
                    : "Relative L2 error (x10^-2), mean±std over seeds.");
    if (ranked) out << " [1] best, [2] second, [3] third" << (rank_columns ? " per column." : " per row.");
    out << " '!' marks cells with failed seeds.\n\n";
    for (std::size_t i = 0; i < grid.size(); ++i) {
      for (std::size_t k = 0; k < grid[i].size(); ++k)
        out << (k ? " | " : "") << (k + 1 < grid[i].size() ? pad(grid[i][k], w[k]) : grid[i][k]);
      out << "\n";
      if (i == 0) {
        for (std::size_t k = 0; k < w.size(); ++k) out << (k ? "-+-" : "") << std::string(w[k], '-');
        out << "\n";
      }
    }
    return out.str();
  }

  std::string csv() const {
    std::ostringstream out;
    out << "row,column,mean,std,seeds,failed,rank,cell\n";
    for (const auto& r : rows)
      for (const auto& c : cols) {
        auto it = cells.find({r, c});
        if (it == cells.end()) continue;
        const Cell& cell = it->second;
        const bool ok = cell.failed < cell.seeds;
        out << csv_field(row_label(r)) << ',' << csv_field(col_label(c)) << ',' << (ok ? exact(cell.mean) : "") << ','
            << (ok ? exact(cell.std) : "") << ',' << cell.seeds << ',' << cell.failed << ',' << cell.rank << ','
            << csv_field(cell_text(r, c)) << "\n";
      }
    return out.str();
  }
};

const char* kPalette[] = {"#1f3a93", "#c0392b", "#27ae60", "#8e44ad", "#d35400", "#16a085",
                          "#2c3e50", "#7f8c8d", "#f39c12", "#2980b9", "#e84393", "#6ab04c"};

std::string svg_number(double v) { return printf_string("%.2f", v, 0.0); }

std::string svg_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

/// One polyline per table row over the columns (evenly spaced).
std::string line_plot(const Table& t, const std::string& xlabel, const std::string& ylabel) {
  const double W = 640, H = 400, L = 70, R = 170, T = 40, B = 60;
  double ymax = 0.0;
  for (const auto& [k, c] : t.cells)
    if (c.failed < c.seeds) ymax = std::max(ymax, 100.0 * (c.mean + c.std));
  if (ymax <= 0.0) ymax = 1.0;
  const std::size_t n = t.cols.size();
  auto x_at = [&](std::size_t i) { return L + (n > 1 ? double(i) / double(n - 1) : 0.5) * (W - L - R); };
  auto y_at = [&](double v) { return H - B - (100.0 * v / ymax) * (H - T - B); };
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << L << "\" y=\"22\" font-size=\"14\">" << svg_escape(t.title) << "</text>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = ymax * k / 4.0 / 100.0;
    s << "<text x=\"" << L - 6 << "\" y=\"" << svg_number(y_at(v) + 4) << "\" text-anchor=\"end\">"
      << printf_string("%.3g", 100.0 * v, 0) << "</text>\n";
  }
  for (std::size_t i = 0; i < n; ++i)
    s << "<text x=\"" << svg_number(x_at(i)) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">"
      << svg_escape(t.col_label(t.cols[i])) << "</text>\n";
  s << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 16 << "\" text-anchor=\"middle\">" << svg_escape(xlabel)
    << "</text>\n";
  s << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" transform=\"rotate(-90 16 " << (T + H - B) / 2
    << ")\" text-anchor=\"middle\">" << svg_escape(ylabel) << "</text>\n";
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const char* color = kPalette[r % std::size(kPalette)];
    std::string pts;
    for (std::size_t i = 0; i < n; ++i) {
      auto it = t.cells.find({t.rows[r], t.cols[i]});
      if (it == t.cells.end() || it->second.failed == it->second.seeds) continue;
      pts += (pts.empty() ? "" : " ") + svg_number(x_at(i)) + "," + svg_number(y_at(it->second.mean));
    }
    if (!pts.empty())
      s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"" << pts << "\"/>\n";
    const double ly = T + 16.0 * double(r);
    s << "<rect x=\"" << W - R + 12 << "\" y=\"" << svg_number(ly - 9) << "\" width=\"12\" height=\"10\" fill=\""
      << color << "\"/>\n";
    s << "<text x=\"" << W - R + 30 << "\" y=\"" << svg_number(ly) << "\">" << svg_escape(t.row_label(t.rows[r]))
      << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

/// Horizontal bars of one column of a table.
std::string bar_plot(const Table& t, const std::string& col, const std::string& xlabel) {
  const double W = 640, L = 140, R = 40, T = 40, bar = 22;
  const double H = T + bar * 1.5 * double(t.rows.size()) + 50;
  double vmax = 0.0;
  for (const auto& r : t.rows)
    if (auto it = t.cells.find({r, col}); it != t.cells.end() && it->second.failed < it->second.seeds)
      vmax = std::max(vmax, it->second.mean);
  if (vmax <= 0.0) vmax = 1.0;
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << L << "\" y=\"22\" font-size=\"14\">" << svg_escape(t.title) << "</text>\n";
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const double y = T + bar * 1.5 * double(i);
    s << "<text x=\"" << L - 8 << "\" y=\"" << svg_number(y + bar * 0.7) << "\" text-anchor=\"end\">"
      << svg_escape(t.rows[i]) << "</text>\n";
    auto it = t.cells.find({t.rows[i], col});
    if (it == t.cells.end() || it->second.failed == it->second.seeds) continue;
    const double w = it->second.mean / vmax * (W - L - R - 60);
    s << "<rect x=\"" << L << "\" y=\"" << svg_number(y) << "\" width=\"" << svg_number(w) << "\" height=\"" << bar
      << "\" fill=\"" << kPalette[i % std::size(kPalette)] << "\"/>\n";
    s << "<text x=\"" << svg_number(L + w + 6) << "\" y=\"" << svg_number(y + bar * 0.7) << "\">"
      << printf_string("%.4g", it->second.mean, 0) << "</text>\n";
  }
  s << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << svg_number(H - 12) << "\" text-anchor=\"middle\">"
    << svg_escape(xlabel) << "</text>\n";
  s << "</svg>\n";
  return s.str();
}

std::string percent_label(const std::string& s) {
  double v;
  if (!numeric(s, v)) return s;
  return printf_string("%g%%", 100.0 * v, 0);
}

}  // namespace

Filter Filter::parse(const std::vector<std::string>& exprs) {
  static const std::set<std::string> keys{"model", "dataset", "task", "parameter", "seed"};
  Filter f;
  for (const auto& e : exprs) {
    const auto eq = e.find('=');
    if (eq == std::string::npos || eq == 0)
      throw UsageError("filter term '" + e + "' is not key=value");
    const std::string key = e.substr(0, eq);
    if (!keys.count(key))
      throw UsageError("unknown filter key '" + key + "' (expected model, dataset, task, parameter or seed)");
    std::stringstream values(e.substr(eq + 1));
    for (std::string v; std::getline(values, v, ',');) f.terms[key].insert(v);
    if (!f.terms.count(key)) f.terms[key].insert("");
  }
  return f;
}

bool Filter::matches(const ExperimentRecord& r) const {
  for (const auto& [key, values] : terms) {
    const std::string v = key == "model"     ? r.model
                          : key == "dataset" ? r.dataset
                          : key == "task"    ? r.task
                          : key == "seed"    ? std::to_string(r.seed)
                                             : r.parameter;
    if (!values.count(v)) return false;
  }
  return true;
}

std::string format_error(double mean, double std) {
  const double m = 100.0 * mean, s = 100.0 * std;
  return printf_string(std::abs(m) >= 1.0 || m == 0.0 ? "%.2f±%.2f" : "%.3f±%.3f", m, s);
}

std::string format_cell(const Cell& c) {
  if (c.empty()) return "-";
  if (c.failed == c.seeds) return "failed";
  std::string s = format_error(c.mean, c.std);
  if (c.rank) s += " [" + std::to_string(c.rank) + "]";
  if (c.failed) s += " !";
  return s;
}

ReportResult render_report(const std::vector<ExperimentRecord>& records, const fs::path& dir,
                           const nlohmann::json& config_echo) {
  ReportResult res;
  res.records = records.size();
  if (fs::exists(dir / "index.txt")) fs::remove_all(dir);
  fs::create_directories(dir);
  std::vector<Table> tables;
  std::map<std::string, std::size_t> index;
  auto table = [&](const std::string& stem, auto&& init) -> Table& {
    auto it = index.find(stem);
    if (it != index.end()) return tables[it->second];
    index[stem] = tables.size();
    tables.emplace_back();
    tables.back().stem = stem;
    init(tables.back());
    return tables.back();
  };

  std::vector<std::string> timing_stems, noise_stems;
  for (const auto& r : records) {
    if (r.task == "accuracy") {
      table("accuracy", [](Table& t) {
        t.title = "Accuracy";
        t.corner = "Model";
      }).add(r.model, r.dataset, r);
    } else if (r.task == "noise") {
      const std::string stem = "noise-" + r.dataset;
      add_unique(noise_stems, stem);
      table(stem, [&](Table& t) {
        t.title = "Noise robustness on " + r.dataset + " (test inputs corrupted at level gamma)";
        t.corner = "Model \\ gamma";
      }).add(r.model, r.parameter, r);
    } else if (r.task == "data-efficiency") {
      table("data-efficiency-" + r.dataset, [&](Table& t) {
        t.title = "Data efficiency on " + r.dataset;
        t.corner = "Dataset size";
        t.rank_columns = false;
        t.row_label = percent_label;
      }).add(r.parameter, r.model, r);
    } else if (r.task == "super-resolution") {
      table("super-resolution-" + r.dataset, [&](Table& t) {
        t.title = "Zero-shot super-resolution on " + r.dataset;
        t.corner = "Resolution";
        t.ranked = false;
      }).add(r.parameter, r.model, r);
    } else if (r.task == "ood-swap") {
      const std::string trained = r.parameter.rfind("train=", 0) == 0 ? r.parameter.substr(6) : r.parameter;
      table("ood-swap", [](Table& t) {
        t.title = "Out-of-distribution swap";
        t.corner = "Train -> Test";
        t.rank_columns = false;
      }).add(trained + " -> " + r.dataset, r.model, r);
    } else if (r.task == "timing") {
      const std::string stem = "timing-" + r.dataset;
      add_unique(timing_stems, stem);
      const std::string title = "Time efficiency on " + r.dataset + " (" + r.parameter + ")";
      table(stem + "-inference", [&](Table& t) {
        t.title = title + ": inference";
        t.seconds = true;
        t.corner = "Model";
        t.value = [](const ExperimentRecord& x) { return x.inference_seconds; };
      }).add(r.model, "inference (median) [s]", r);
      table(stem + "-training", [&](Table& t) {
        t.title = title + ": training";
        t.seconds = true;
        t.corner = "Model";
        t.value = [](const ExperimentRecord& x) { return x.train_seconds; };
      }).add(r.model, "training [s]", r);
    } else {
      res.warnings.push_back("skipping record with unknown task '" + r.task + "'");
    }
  }

  for (auto& t : tables) {
    if (t.corner == "Model \\ gamma" || t.corner == "Resolution") order_labels(t.cols);
    if (t.corner == "Dataset size" || t.corner == "Resolution") order_labels(t.rows);
    if (t.corner == "Model \\ gamma") order_labels(t.cols);
    t.finish();
    write_text_atomic(dir / (t.stem + ".txt"), t.text());
    write_text_atomic(dir / (t.stem + ".csv"), t.csv());
    res.files.push_back(dir / (t.stem + ".txt"));
    res.files.push_back(dir / (t.stem + ".csv"));
  }
  for (const auto& stem : noise_stems) {
    const Table& t = tables[index.at(stem)];
    write_text_atomic(dir / (stem + ".svg"), line_plot(t, "noise level gamma", "relative L2 error (x10^-2)"));
    res.files.push_back(dir / (stem + ".svg"));
  }
  for (const auto& stem : timing_stems) {
    const Table& t = tables[index.at(stem + "-inference")];
    write_text_atomic(dir / (stem + ".svg"), bar_plot(t, t.cols.at(0), "median inference time [s]"));
    res.files.push_back(dir / (stem + ".svg"));
  }

  if (records.empty()) res.warnings.push_back("no records selected; the report is empty");
  std::ostringstream idx;
  idx << "Benchmark report\n\nrecords: " << records.size() << "\n";
  std::map<std::string, std::size_t> per_task;
  for (const auto& r : records) ++per_task[r.task];
  for (const auto& [task, n] : per_task) idx << "  " << task << ": " << n << "\n";
  std::size_t failed = 0;
  for (const auto& r : records) failed += r.failed;
  idx << "failed records: " << failed << "\n\nfiles:\n";
  for (const auto& f : res.files) idx << "  " << f.filename().string() << "\n";
  if (!config_echo.is_null()) idx << "\nconfig:\n" << config_echo.dump(2) << "\n";
  write_text_atomic(dir / "index.txt", idx.str());
  res.files.insert(res.files.begin(), dir / "index.txt");
  return res;
}

}  // namespace opbench::cli
