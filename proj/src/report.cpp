#include "ercl/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace ercl {

namespace {

std::string fmt(double v)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string tick(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

struct PlotSeries
{
  std::string model;
  std::string metric;
  std::vector<double> x; // tasks completed at the end of each bin
  std::vector<double> mean;
  std::vector<double> se;
};

std::string colour(std::string const &model)
{
  if (model == "mlp") {
    return "#1f77b4";
  }
  if (model == "ermlp") {
    return "#2ca02c";
  }
  if (model == "rnn") {
    return "#9467bd";
  }
  if (model == "transformer") {
    return "#d62728";
  }
  return "#555555";
}

std::string render_svg(std::string const &benchmark, std::vector<PlotSeries> const &series)
{
  double const width = 800, height = 450, left = 70, right = 150, top = 30, bottom = 50;
  double xmin = 0, xmax = 1, ymin = INFINITY, ymax = -INFINITY;
  for (auto const &s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.mean[i] - s.se[i]);
      ymax = std::max(ymax, s.mean[i] + s.se[i]);
    }
  }
  if (!std::isfinite(ymin)) {
    ymin = 0;
    ymax = 1;
  }
  if (ymax - ymin < 1e-12) {
    ymax = ymin + 1;
  }
  double const pad = 0.05 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;
  double const pw = width - left - right, ph = height - top - bottom;
  auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return top + (1.0 - (y - ymin) / (ymax - ymin)) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << left << "\" y=\"18\" font-size=\"14\">" << benchmark << "</text>\n";
  o << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    double const xv = xmin + (xmax - xmin) * i / 5.0;
    double const yv = ymin + (ymax - ymin) * i / 5.0;
    o << "<text x=\"" << px(xv) << "\" y=\"" << top + ph + 16 << "\" text-anchor=\"middle\">" << tick(xv)
      << "</text>\n";
    o << "<text x=\"" << left - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << tick(yv)
      << "</text>\n";
  }
  o << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 10 << "\" text-anchor=\"middle\">task</text>\n";
  if (!series.empty()) {
    o << "<text transform=\"translate(14," << top + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
      << series.front().metric << "</text>\n";
  }
  for (std::size_t k = 0; k < series.size(); ++k) {
    auto const &s = series[k];
    std::string const c = colour(s.model);
    std::ostringstream band, line;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      band << px(s.x[i]) << ',' << py(s.mean[i] + s.se[i]) << ' ';
      line << px(s.x[i]) << ',' << py(s.mean[i]) << ' ';
    }
    for (std::size_t i = s.x.size(); i-- > 0;) {
      band << px(s.x[i]) << ',' << py(s.mean[i] - s.se[i]) << ' ';
    }
    o << "<polygon points=\"" << band.str() << "\" fill=\"" << c << "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
    o << "<polyline points=\"" << line.str() << "\" fill=\"none\" stroke=\"" << c << "\" stroke-width=\"1.5\"/>\n";
    double const ly = top + 10 + 18.0 * static_cast<double>(k);
    o << "<line x1=\"" << left + pw + 10 << "\" y1=\"" << ly << "\" x2=\"" << left + pw + 30 << "\" y2=\"" << ly
      << "\" stroke=\"" << c << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << left + pw + 36 << "\" y=\"" << ly + 4 << "\">" << s.model << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

void write_file(std::filesystem::path const &path, std::string const &text)
{
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << text;
  if (!out) {
    throw std::runtime_error("write failed for " + path.string());
  }
}

PlotSeries to_plot(std::string const &model, std::string const &metric, std::int64_t steps_per_task,
                   AggregateSeries const &agg)
{
  PlotSeries p{model, metric, {}, agg.mean, agg.std_error};
  for (auto e : agg.step_end) {
    p.x.push_back(static_cast<double>(e) / static_cast<double>(steps_per_task));
  }
  return p;
}

std::map<std::string, std::string> header_fields(std::string const &line)
{
  std::map<std::string, std::string> out;
  std::istringstream in(line.substr(1));
  std::string tok;
  while (in >> tok) {
    auto const eq = tok.find('=');
    if (eq != std::string::npos) {
      out[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
  }
  return out;
}

} // namespace

std::string csv_text(ExperimentConfig const &config, std::string const &model, AggregateSeries const &agg)
{
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(config_hash(config)));
  std::ostringstream o;
  o << "# benchmark=" << to_string(config.benchmark) << " model=" << model
    << " metric=" << to_string(metric_kind(config.benchmark)) << " config_hash=" << hash << '\n';
  o << "# loss_timing=pre-update eval_every=" << record_interval(config) << " bin_width=" << config.bin_width
    << " steps_per_task=" << config.steps_per_task << " tasks=" << config.tasks << '\n';
  o << "benchmark,model,seed_count,bin_index,step_start,step_end,mean,stderr\n";
  for (std::size_t b = 0; b < agg.bins(); ++b) {
    o << to_string(config.benchmark) << ',' << model << ',' << agg.seed_count << ',' << b << ',' << agg.step_start[b]
      << ',' << agg.step_end[b] << ',' << fmt(agg.mean[b]) << ',' << fmt(agg.std_error[b]) << '\n';
  }
  return o.str();
}

std::vector<std::filesystem::path> emit_outputs(ExperimentConfig const &config, std::vector<ModelRuns> const &runs,
                                                std::filesystem::path const &dir)
{
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  std::vector<PlotSeries> plots;
  std::string const bench = to_string(config.benchmark);
  for (auto const &mr : runs) {
    AggregateSeries const agg = summarize(config, mr);
    auto const path = dir / (bench + "_" + mr.model.name() + ".csv");
    write_file(path, csv_text(config, mr.model.name(), agg));
    written.push_back(path);
    plots.push_back(to_plot(mr.model.name(), to_string(metric_kind(config.benchmark)), config.steps_per_task, agg));
  }
  auto const svg = dir / (bench + ".svg");
  write_file(svg, render_svg(bench, plots));
  written.push_back(svg);
  return written;
}

std::vector<std::filesystem::path> plot_directory(std::filesystem::path const &dir)
{
  std::map<std::string, std::vector<PlotSeries>> by_bench;
  std::vector<std::filesystem::path> csvs;
  for (auto const &entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") {
      csvs.push_back(entry.path());
    }
  }
  std::sort(csvs.begin(), csvs.end());
  for (auto const &path : csvs) {
    std::ifstream in(path);
    std::map<std::string, std::string> fields;
    std::string line;
    AggregateSeries agg;
    bool header_seen = false;
    while (std::getline(in, line)) {
      if (line.empty()) {
        continue;
      }
      if (line[0] == '#') {
        auto const f = header_fields(line);
        fields.insert(f.begin(), f.end());
        continue;
      }
      if (!header_seen) {
        header_seen = true;
        continue;
      }
      std::vector<std::string> cells;
      std::istringstream row(line);
      std::string cell;
      while (std::getline(row, cell, ',')) {
        cells.push_back(cell);
      }
      if (cells.size() != 8) {
        throw std::runtime_error(path.string() + ": malformed row: " + line);
      }
      agg.seed_count = std::stoul(cells[2]);
      agg.step_start.push_back(std::stoll(cells[4]));
      agg.step_end.push_back(std::stoll(cells[5]));
      agg.mean.push_back(std::stod(cells[6]));
      agg.std_error.push_back(std::stod(cells[7]));
    }
    if (!fields.contains("benchmark") || !fields.contains("model") || !fields.contains("steps_per_task")) {
      throw std::runtime_error(path.string() + ": missing header fields; not an ercl results file");
    }
    by_bench[fields["benchmark"]].push_back(
      to_plot(fields["model"], fields["metric"], std::stoll(fields["steps_per_task"]), agg));
  }
  std::vector<std::filesystem::path> written;
  for (auto const &[bench, plots] : by_bench) {
    auto const svg = dir / (bench + ".svg");
    write_file(svg, render_svg(bench, plots));
    written.push_back(svg);
  }
  return written;
}

} // namespace ercl
