#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "forgeguard/training/trainer.hpp"

namespace forgeguard::training {

// CSV: epoch,train_loss,train_acc,val_loss,val_acc with 6 significant digits.
void write_history(const TrainingHistory& history, const std::filesystem::path& path);
std::string format_history(const TrainingHistory& history);

// Error(kParse) with the line number on malformed rows or non-contiguous
// epochs. best_epoch is recomputed; stopped_early is not stored and reads
// back false.
TrainingHistory read_history(const std::filesystem::path& path);
TrainingHistory parse_history(std::string_view text, std::string_view origin = "history");

struct CurveSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct CurvePanel {
  std::string title;
  std::string y_label;
  std::vector<CurveSeries> series;
};

// Loss panel (train, validation) and accuracy panel (train, validation).
std::vector<CurvePanel> curve_panels(const TrainingHistory& history);

inline constexpr int kPanelWidth = 640;
inline constexpr int kPanelHeight = 480;

// Renders the panels side by side into a PNG. Error(kInvalidArgument) for an
// empty history.
void emit_curves(const TrainingHistory& history, const std::filesystem::path& out_path);

}  // namespace forgeguard::training
