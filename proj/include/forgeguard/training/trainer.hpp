#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "forgeguard/dataset/manifest.hpp"
#include "forgeguard/model_zoo/classifier.hpp"

namespace forgeguard::training {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
};

// Monitors val_loss: an epoch improves when val_loss < best - min_delta.
struct EarlyStopConfig {
  int patience = 10;
  double min_delta = 0.0;
};

struct TrainConfig {
  int epochs = 15;
  int batch_size = 32;
  AdamConfig adam;
  EarlyStopConfig early_stop;
  std::uint64_t seed = 0;
};

// Epoch budget the reference runs used: 15 for EfficientNet-B4, 100 otherwise.
int default_epochs(model_zoo::BackboneVariant variant);

void validate(const TrainConfig& config);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainingHistory {
  std::vector<EpochRecord> records;
  bool stopped_early = false;
  int best_epoch = 0;

  friend bool operator==(const TrainingHistory&, const TrainingHistory&) = default;
};

// Keras-style EarlyStopping bookkeeping.
class EarlyStopping {
 public:
  explicit EarlyStopping(EarlyStopConfig config) : config_(config) {}
  // Returns true when training should stop after this epoch.
  bool update(int epoch, double val_loss);
  int best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_loss_; }
  bool improved_last() const { return improved_last_; }

 private:
  EarlyStopConfig config_;
  double best_loss_ = 0.0;
  int best_epoch_ = 0;
  int wait_ = 0;
  bool improved_last_ = false;
};

// Drives epoch_fn(1..epochs) under early stopping. on_best runs after every
// epoch that becomes the new best. best_epoch is the first epoch with the
// minimum val_loss.
TrainingHistory run_epochs(const TrainConfig& config, const std::function<EpochRecord(int)>& epoch_fn,
                           const std::function<void(int)>& on_best = {});

// Cross-entropy of one example and its gradient with respect to the head
// (weights [F][K] then bias [K]), in double precision.
double head_loss(std::span<const double> weights, std::span<const double> bias, std::span<const float> features,
                 int label);
double head_loss_and_gradient(std::span<const double> weights, std::span<const double> bias,
                              std::span<const float> features, int label, std::span<double> grad_weights,
                              std::span<double> grad_bias);

// Backbone outputs for one split, computed once.
struct FeatureSet {
  std::vector<std::string> paths;
  std::vector<std::vector<float>> features;
  std::vector<int> labels;  // indices into the model's class_names
};

// Class index of every manifest label; Error(kManifest) names the first
// label the model does not know.
std::vector<int> label_indices(const model_zoo::ClassifierModel& model, const dataset::DatasetManifest& manifest);

// Reads images relative to root. Error(kEvaluation) names unreadable files.
FeatureSet extract_features(const model_zoo::ClassifierModel& model, const dataset::DatasetManifest& manifest,
                            const std::filesystem::path& root, dataset::Split split);

struct TrainResult {
  TrainingHistory history;
  std::optional<std::filesystem::path> checkpoint;
};

// Trains the head only; on return the model holds the best-epoch head. When
// checkpoint is set it is (re)written at every new best epoch.
TrainResult train(model_zoo::ClassifierModel& model, const dataset::DatasetManifest& manifest,
                  const std::filesystem::path& root, const TrainConfig& config,
                  const std::optional<std::filesystem::path>& checkpoint = std::nullopt);

// Same loop over precomputed features.
TrainResult train_on_features(model_zoo::ClassifierModel& model, const FeatureSet& train_set, const FeatureSet& val_set,
                              const TrainConfig& config,
                              const std::optional<std::filesystem::path>& checkpoint = std::nullopt);

struct Prediction {
  int true_label = 0;
  int predicted_label = 0;
  std::vector<double> probabilities;
};

struct SplitEvaluation {
  double loss = 0.0;
  double accuracy = 0.0;
  std::vector<Prediction> predictions;
};

// argmax with first-index tie-break.
int argmax(std::span<const double> values);

SplitEvaluation evaluate_features(const model_zoo::ClassifierModel& model, const FeatureSet& set);
SplitEvaluation evaluate_split(const model_zoo::ClassifierModel& model, const dataset::DatasetManifest& manifest,
                               const std::filesystem::path& root, dataset::Split split);

}  // namespace forgeguard::training
