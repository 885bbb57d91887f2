#include "forgeguard/training/history.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <opencv2/imgproc.hpp>
#include <sstream>

#include "forgeguard/codec/codec.hpp"
#include "forgeguard/core/error.hpp"

namespace forgeguard::training {

namespace {

constexpr const char* kHeader = "epoch,train_loss,train_acc,val_loss,val_acc";

}  // namespace

std::string format_history(const TrainingHistory& history) {
  std::string out = std::string(kHeader) + "\n";
  char line[256];
  for (const auto& r : history.records) {
    std::snprintf(line, sizeof line, "%d,%.6g,%.6g,%.6g,%.6g\n", r.epoch, r.train_loss, r.train_acc, r.val_loss,
                  r.val_acc);
    out += line;
  }
  return out;
}

void write_history(const TrainingHistory& history, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write history " + path.string());
  out << format_history(history);
  if (!out) throw Error(ErrorKind::kIo, "failed writing history " + path.string());
}

TrainingHistory parse_history(std::string_view text, std::string_view origin) {
  TrainingHistory history;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) {
    throw Error(ErrorKind::kParse, std::string(origin) + ":" + std::to_string(line_no) + ": " + what);
  };
  bool header = false;
  double best = std::numeric_limits<double>::infinity();
  while (std::getline(in, raw)) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (raw.empty()) continue;
    if (!header) {
      if (raw != kHeader) fail("expected header '" + std::string(kHeader) + "'");
      header = true;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream row(raw);
    std::string cell;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (cells.size() != 5) fail("expected 5 columns, got " + std::to_string(cells.size()));
    EpochRecord r;
    double* fields[] = {&r.train_loss, &r.train_acc, &r.val_loss, &r.val_acc};
    try {
      std::size_t used = 0;
      r.epoch = std::stoi(cells[0], &used);
      if (used != cells[0].size()) fail("malformed epoch '" + cells[0] + "'");
      for (int i = 0; i < 4; ++i) {
        *fields[i] = std::stod(cells[i + 1], &used);
        if (used != cells[i + 1].size() || !std::isfinite(*fields[i])) fail("malformed value '" + cells[i + 1] + "'");
      }
    } catch (const std::logic_error&) {
      fail("malformed row '" + raw + "'");
    }
    const int expected = static_cast<int>(history.records.size()) + 1;
    if (r.epoch != expected) {
      fail("epoch " + std::to_string(r.epoch) + " out of sequence (expected " + std::to_string(expected) + ")");
    }
    if (r.val_loss < best) {
      best = r.val_loss;
      history.best_epoch = r.epoch;
    }
    history.records.push_back(r);
  }
  if (!header) throw Error(ErrorKind::kParse, std::string(origin) + ": missing header");
  return history;
}

TrainingHistory read_history(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot read history " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_history(buf.str(), path.string());
}

std::vector<CurvePanel> curve_panels(const TrainingHistory& history) {
  CurveSeries tl{"train", {}, {}}, vl{"validation", {}, {}}, ta{"train", {}, {}}, va{"validation", {}, {}};
  for (const auto& r : history.records) {
    for (auto* s : {&tl, &vl, &ta, &va}) s->x.push_back(r.epoch);
    tl.y.push_back(r.train_loss);
    vl.y.push_back(r.val_loss);
    ta.y.push_back(r.train_acc);
    va.y.push_back(r.val_acc);
  }
  return {{"Loss", "loss", {tl, vl}}, {"Accuracy", "accuracy", {ta, va}}};
}

namespace {

const cv::Scalar kSeriesColors[] = {{31, 119, 180}, {255, 127, 14}};  // RGB

void draw_panel(cv::Mat& canvas, int x0, const CurvePanel& panel) {
  const int left = x0 + 70, right = x0 + kPanelWidth - 20, top = 40, bottom = kPanelHeight - 50;
  const auto ink = cv::Scalar(0, 0, 0);
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  for (const auto& s : panel.series) {
    for (double v : s.x) xmin = std::min(xmin, v), xmax = std::max(xmax, v);
    for (double v : s.y) ymin = std::min(ymin, v), ymax = std::max(ymax, v);
  }
  if (xmax == xmin) xmin -= 0.5, xmax += 0.5;
  if (ymax == ymin) ymin -= 0.05, ymax += 0.05;
  const double pad = 0.05 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;
  auto px = [&](double x, double y) {
    return cv::Point(static_cast<int>(std::lround(left + (x - xmin) / (xmax - xmin) * (right - left))),
                     static_cast<int>(std::lround(bottom - (y - ymin) / (ymax - ymin) * (bottom - top))));
  };

  cv::rectangle(canvas, {left, top}, {right, bottom}, ink, 1);
  const auto font = cv::FONT_HERSHEY_SIMPLEX;
  char label[32];
  for (int t = 0; t <= 4; ++t) {
    const double y = ymin + (ymax - ymin) * t / 4.0;
    const auto p = px(xmin, y);
    cv::line(canvas, {left - 4, p.y}, {left, p.y}, ink, 1);
    std::snprintf(label, sizeof label, "%.3g", y);
    cv::putText(canvas, label, {x0 + 8, p.y + 4}, font, 0.4, ink, 1, cv::LINE_AA);
  }
  const int xticks = std::min(5, static_cast<int>(xmax - xmin) + 1);
  for (int t = 0; t < std::max(xticks, 2); ++t) {
    const double x = std::round(xmin + (xmax - xmin) * t / std::max(xticks - 1, 1));
    const auto p = px(x, ymin);
    cv::line(canvas, {p.x, bottom}, {p.x, bottom + 4}, ink, 1);
    std::snprintf(label, sizeof label, "%g", x);
    cv::putText(canvas, label, {p.x - 6, bottom + 18}, font, 0.4, ink, 1, cv::LINE_AA);
  }
  cv::putText(canvas, panel.title, {left, top - 14}, font, 0.6, ink, 1, cv::LINE_AA);
  cv::putText(canvas, "epoch", {(left + right) / 2 - 20, kPanelHeight - 12}, font, 0.45, ink, 1, cv::LINE_AA);

  for (std::size_t si = 0; si < panel.series.size(); ++si) {
    const auto& s = panel.series[si];
    const auto color = kSeriesColors[si % 2];
    std::vector<cv::Point> pts;
    for (std::size_t i = 0; i < s.x.size(); ++i) pts.push_back(px(s.x[i], s.y[i]));
    if (pts.size() > 1) cv::polylines(canvas, pts, false, color, 2, cv::LINE_AA);
    for (const auto& p : pts) cv::circle(canvas, p, 3, color, cv::FILLED, cv::LINE_AA);
    const int ly = top + 18 + 18 * static_cast<int>(si);
    cv::line(canvas, {right - 120, ly - 4}, {right - 100, ly - 4}, color, 2);
    cv::putText(canvas, s.name, {right - 94, ly}, font, 0.4, ink, 1, cv::LINE_AA);
  }
}

}  // namespace

void emit_curves(const TrainingHistory& history, const std::filesystem::path& out_path) {
  if (history.records.empty()) throw Error(ErrorKind::kInvalidArgument, "cannot plot an empty history");
  const auto panels = curve_panels(history);
  cv::Mat canvas(kPanelHeight, kPanelWidth * static_cast<int>(panels.size()), CV_8UC3, cv::Scalar(255, 255, 255));
  for (std::size_t i = 0; i < panels.size(); ++i) draw_panel(canvas, static_cast<int>(i) * kPanelWidth, panels[i]);
  imaging::ImageBuffer image(canvas.cols, canvas.rows, 3,
                             std::vector<std::uint8_t>(canvas.data, canvas.data + canvas.total() * 3));
  codec::write_png(image, out_path);
}

}  // namespace forgeguard::training
