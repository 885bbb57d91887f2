#include "forgeguard/training/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "forgeguard/codec/codec.hpp"
#include "forgeguard/core/error.hpp"

namespace forgeguard::training {

using model_zoo::ClassifierModel;

int default_epochs(model_zoo::BackboneVariant variant) {
  return variant == model_zoo::BackboneVariant::kEfficientNetB4 ? 15 : 100;
}

void validate(const TrainConfig& c) {
  if (c.epochs < 1) throw Error(ErrorKind::kConfiguration, "epochs must be >= 1");
  if (c.batch_size < 1) throw Error(ErrorKind::kConfiguration, "batch_size must be >= 1");
  if (!(c.adam.learning_rate > 0)) throw Error(ErrorKind::kConfiguration, "learning_rate must be > 0");
  if (!(c.adam.beta1 >= 0 && c.adam.beta1 < 1 && c.adam.beta2 >= 0 && c.adam.beta2 < 1)) {
    throw Error(ErrorKind::kConfiguration, "Adam betas must be in [0, 1)");
  }
  if (!(c.adam.epsilon > 0)) throw Error(ErrorKind::kConfiguration, "Adam epsilon must be > 0");
  if (c.early_stop.patience < 1) throw Error(ErrorKind::kConfiguration, "patience must be >= 1");
  if (!(c.early_stop.min_delta >= 0)) throw Error(ErrorKind::kConfiguration, "min_delta must be >= 0");
}

bool EarlyStopping::update(int epoch, double val_loss) {
  if (best_epoch_ == 0 || val_loss < best_loss_ - config_.min_delta) {
    best_loss_ = val_loss;
    best_epoch_ = epoch;
    wait_ = 0;
    improved_last_ = true;
    return false;
  }
  improved_last_ = false;
  return ++wait_ >= config_.patience;
}

TrainingHistory run_epochs(const TrainConfig& config, const std::function<EpochRecord(int)>& epoch_fn,
                           const std::function<void(int)>& on_best) {
  validate(config);
  TrainingHistory history;
  EarlyStopping stopper(config.early_stop);
  double best = std::numeric_limits<double>::infinity();
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    EpochRecord rec = epoch_fn(epoch);
    rec.epoch = epoch;
    history.records.push_back(rec);
    if (rec.val_loss < best) {
      best = rec.val_loss;
      history.best_epoch = epoch;
      if (on_best) on_best(epoch);
    }
    if (stopper.update(epoch, rec.val_loss) && epoch < config.epochs) {
      history.stopped_early = true;
      break;
    }
  }
  return history;
}

namespace {

// logits = x W + b in double.
std::vector<double> logits_of(std::span<const double> w, std::span<const double> b, std::span<const float> x) {
  const std::size_t k = b.size();
  if (w.size() != x.size() * k) throw Error(ErrorKind::kInvalidArgument, "head and feature sizes disagree");
  std::vector<double> l(b.begin(), b.end());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    const double* row = w.data() + i * k;
    for (std::size_t j = 0; j < k; ++j) l[j] += xi * row[j];
  }
  return l;
}

double log_sum_exp(std::span<const double> l) {
  const double top = *std::max_element(l.begin(), l.end());
  double s = 0.0;
  for (double v : l) s += std::exp(v - top);
  return top + std::log(s);
}

}  // namespace

double head_loss(std::span<const double> weights, std::span<const double> bias, std::span<const float> features,
                 int label) {
  const auto l = logits_of(weights, bias, features);
  return log_sum_exp(l) - l[label];
}

double head_loss_and_gradient(std::span<const double> weights, std::span<const double> bias,
                              std::span<const float> features, int label, std::span<double> grad_weights,
                              std::span<double> grad_bias) {
  const auto l = logits_of(weights, bias, features);
  const double lse = log_sum_exp(l);
  const std::size_t k = bias.size();
  // d loss / d logit_j = softmax_j - [j == label]
  std::vector<double> delta(k);
  for (std::size_t j = 0; j < k; ++j) delta[j] = std::exp(l[j] - lse) - (static_cast<int>(j) == label ? 1.0 : 0.0);
  for (std::size_t i = 0; i < features.size(); ++i) {
    const double xi = features[i];
    if (xi == 0.0) continue;
    double* row = grad_weights.data() + i * k;
    for (std::size_t j = 0; j < k; ++j) row[j] += xi * delta[j];
  }
  for (std::size_t j = 0; j < k; ++j) grad_bias[j] += delta[j];
  return lse - l[label];
}

std::vector<int> label_indices(const ClassifierModel& model, const dataset::DatasetManifest& manifest) {
  std::vector<int> out;
  out.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) {
    const auto name = dataset::to_string(e.label);
    const auto it = std::find(model.class_names.begin(), model.class_names.end(), name);
    if (it == model.class_names.end()) {
      throw Error(ErrorKind::kManifest, "label '" + std::string(name) + "' of " + e.path +
                                            " is not one of the model's classes");
    }
    out.push_back(static_cast<int>(it - model.class_names.begin()));
  }
  return out;
}

FeatureSet extract_features(const ClassifierModel& model, const dataset::DatasetManifest& manifest,
                            const std::filesystem::path& root, dataset::Split split) {
  const auto labels = label_indices(model, manifest);
  FeatureSet set;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& e = manifest.entries[i];
    if (e.split != split) continue;
    imaging::ImageBuffer image(1, 1, 3);
    try {
      image = codec::read_image(root / e.path);
    } catch (const Error& err) {
      throw Error(ErrorKind::kEvaluation, "cannot read " + (root / e.path).string() + ": " + err.what());
    }
    set.paths.push_back(e.path);
    set.features.push_back(model.extract(image));
    set.labels.push_back(labels[i]);
  }
  return set;
}

int argmax(std::span<const double> values) {
  int best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = static_cast<int>(i);
  }
  return best;
}

namespace {

struct HeadParams {
  std::vector<double> w;
  std::vector<double> b;

  static HeadParams from(const model_zoo::DenseHead& h) {
    return {{h.weights.begin(), h.weights.end()}, {h.bias.begin(), h.bias.end()}};
  }
  void store(model_zoo::DenseHead& h) const {
    h.weights.assign(w.begin(), w.end());
    h.bias.assign(b.begin(), b.end());
  }
};

SplitEvaluation evaluate_params(const HeadParams& p, const FeatureSet& set, bool keep_predictions) {
  SplitEvaluation ev;
  if (set.features.empty()) return ev;
  double loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < set.features.size(); ++i) {
    const auto l = logits_of(p.w, p.b, set.features[i]);
    loss += log_sum_exp(l) - l[set.labels[i]];
    auto probs = model_zoo::head_probabilities(l);
    const int pred = argmax(probs);
    correct += pred == set.labels[i];
    if (keep_predictions) ev.predictions.push_back({set.labels[i], pred, std::move(probs)});
  }
  ev.loss = loss / static_cast<double>(set.features.size());
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(set.features.size());
  return ev;
}

double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    const std::uint64_t r = rng();
    if (r >= threshold) return r % bound;
  }
}

}  // namespace

SplitEvaluation evaluate_features(const ClassifierModel& model, const FeatureSet& set) {
  if (set.features.empty()) throw Error(ErrorKind::kEvaluation, "cannot evaluate an empty split");
  return evaluate_params(HeadParams::from(model.head), set, true);
}

SplitEvaluation evaluate_split(const ClassifierModel& model, const dataset::DatasetManifest& manifest,
                               const std::filesystem::path& root, dataset::Split split) {
  return evaluate_features(model, extract_features(model, manifest, root, split));
}

TrainResult train_on_features(ClassifierModel& model, const FeatureSet& train_set, const FeatureSet& val_set,
                              const TrainConfig& config, const std::optional<std::filesystem::path>& checkpoint) {
  validate(config);
  if (train_set.features.empty()) throw Error(ErrorKind::kConfiguration, "the train split is empty");
  if (val_set.features.empty()) throw Error(ErrorKind::kConfiguration, "the validation split is empty");

  HeadParams p = HeadParams::from(model.head);
  HeadParams best = p;
  std::vector<double> m_w(p.w.size()), v_w(p.w.size()), m_b(p.b.size()), v_b(p.b.size());
  std::vector<double> g_w(p.w.size()), g_b(p.b.size());
  const double drop = model.head.dropout;
  const auto& adam = config.adam;
  std::int64_t step = 0;
  std::mt19937_64 rng(config.seed ^ 0xA0761D6478BD642Full);

  std::vector<std::size_t> order(train_set.features.size());
  std::vector<float> dropped;

  auto epoch_fn = [&](int) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[bounded(rng, i + 1)]);

    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      std::fill(g_w.begin(), g_w.end(), 0.0);
      std::fill(g_b.begin(), g_b.end(), 0.0);
      for (std::size_t k = start; k < end; ++k) {
        const auto& x = train_set.features[order[k]];
        std::span<const float> input = x;
        if (drop > 0.0) {
          // Inverted dropout on the pooled features, as in the reference head.
          dropped.resize(x.size());
          const float keep_scale = static_cast<float>(1.0 / (1.0 - drop));
          for (std::size_t i = 0; i < x.size(); ++i) dropped[i] = unit_uniform(rng) < drop ? 0.0f : x[i] * keep_scale;
          input = dropped;
        }
        head_loss_and_gradient(p.w, p.b, input, train_set.labels[order[k]], g_w, g_b);
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      ++step;
      const double alpha = adam.learning_rate * std::sqrt(1.0 - std::pow(adam.beta2, static_cast<double>(step))) /
                           (1.0 - std::pow(adam.beta1, static_cast<double>(step)));
      auto update = [&](std::vector<double>& w, std::vector<double>& g, std::vector<double>& m, std::vector<double>& v) {
        for (std::size_t i = 0; i < w.size(); ++i) {
          const double grad = g[i] * inv;
          m[i] += (grad - m[i]) * (1.0 - adam.beta1);
          v[i] += (grad * grad - v[i]) * (1.0 - adam.beta2);
          w[i] -= alpha * m[i] / (std::sqrt(v[i]) + adam.epsilon);
        }
      };
      update(p.w, g_w, m_w, v_w);
      update(p.b, g_b, m_b, v_b);
    }
    const auto tr = evaluate_params(p, train_set, false);
    const auto va = evaluate_params(p, val_set, false);
    return EpochRecord{0, tr.loss, tr.accuracy, va.loss, va.accuracy};
  };

  auto on_best = [&](int) {
    best = p;
    if (checkpoint) {
      best.store(model.head);
      model_zoo::save_checkpoint(model, *checkpoint);
    }
  };

  TrainResult result;
  result.history = run_epochs(config, epoch_fn, on_best);
  best.store(model.head);
  result.checkpoint = checkpoint;
  return result;
}

TrainResult train(ClassifierModel& model, const dataset::DatasetManifest& manifest, const std::filesystem::path& root,
                  const TrainConfig& config, const std::optional<std::filesystem::path>& checkpoint) {
  validate(config);
  label_indices(model, manifest);  // every label must be known before any work
  const auto train_entries = dataset::entries_in(manifest, dataset::Split::kTrain);
  const auto val_entries = dataset::entries_in(manifest, dataset::Split::kValidation);
  if (train_entries.empty()) throw Error(ErrorKind::kConfiguration, "the train split is empty");
  if (val_entries.empty()) throw Error(ErrorKind::kConfiguration, "the validation split is empty");
  const auto train_set = extract_features(model, manifest, root, dataset::Split::kTrain);
  const auto val_set = extract_features(model, manifest, root, dataset::Split::kValidation);
  return train_on_features(model, train_set, val_set, config, checkpoint);
}

}  // namespace forgeguard::training
