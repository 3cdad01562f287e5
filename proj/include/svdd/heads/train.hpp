// SPDX-FileCopyrightText: Copyright (c) 2026 The svdd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "svdd/encoder/archive.hpp"
#include "svdd/eval/eer.hpp"
#include "svdd/features/types.hpp"
#include "svdd/heads/models.hpp"

#include <filesystem>
#include <memory>
#include <numeric>
#include <optional>

namespace svdd {

// ---- optimiser -----------------------------------------------------------------

struct TrainConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int batch_size = 32;
  int max_epochs = 50;
  int patience = 5;  // epochs without validation improvement before stopping
  std::uint64_t seed = 0;

  void require_valid() const {
    if (!(lr >= 0.0)) throw ValidationError("train config: lr must be non-negative");
    if (batch_size < 1) throw ValidationError("train config: batch_size must be >= 1");
    if (max_epochs < 1) throw ValidationError("train config: max_epochs must be >= 1");
    if (patience < 1) throw ValidationError("train config: patience must be >= 1");
    if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1 && eps > 0)) {
      throw ValidationError("train config: Adam betas must lie in [0, 1) and eps must be positive");
    }
  }
};

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"lr", c.lr},           {"beta1", c.beta1},           {"beta2", c.beta2},
          {"eps", c.eps},         {"batch_size", c.batch_size}, {"max_epochs", c.max_epochs},
          {"patience", c.patience}, {"seed", c.seed}};
}

// Missing keys keep their defaults.
inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.lr = j.value("lr", c.lr);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.eps = j.value("eps", c.eps);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.patience = j.value("patience", c.patience);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("train config: ") + e.what());
  }
  c.require_valid();
  return c;
}

template <class T>
class Adam {
 public:
  Adam(double lr, double beta1, double beta2, double eps) : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}
  explicit Adam(const TrainConfig& c) : Adam(c.lr, c.beta1, c.beta2, c.eps) {}

  void step(const std::vector<nn::Param<T>*>& params) {
    if (m_.empty()) {
      for (auto* p : params) {
        m_.emplace_back(p->value.size(), 0.0);
        v_.emplace_back(p->value.size(), 0.0);
      }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto& p = *params[k];
      auto& m = m_[k];
      auto& v = v_[k];
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const double g = static_cast<double>(p.grad[i]);
        m[i] = b1_ * m[i] + (1.0 - b1_) * g;
        v[i] = b2_ * v[i] + (1.0 - b2_) * g * g;
        const double update = lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
        p.value[i] = static_cast<T>(static_cast<double>(p.value[i]) - update);
      }
    }
  }

  long steps() const { return t_; }

 private:
  double lr_, b1_, b2_, eps_;
  long t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// ---- input layout --------------------------------------------------------------

// Bilinear resize with half-pixel centres and edge clamping. Same-size input
// is copied exactly.
inline MatrixD resize_bilinear(const MatrixD& in, int height, int width) {
  if (in.rows() < 1 || in.cols() < 1) throw ShapeError("resize: empty input");
  if (in.rows() == height && in.cols() == width) return in;
  MatrixD out(height, width);
  const double sy = static_cast<double>(in.rows()) / height;
  const double sx = static_cast<double>(in.cols()) / width;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(in.rows() - 1));
    const auto y0 = static_cast<Eigen::Index>(std::floor(fy));
    const Eigen::Index y1 = std::min<Eigen::Index>(y0 + 1, in.rows() - 1);
    const double wy = fy - static_cast<double>(y0);
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(in.cols() - 1));
      const auto x0 = static_cast<Eigen::Index>(std::floor(fx));
      const Eigen::Index x1 = std::min<Eigen::Index>(x0 + 1, in.cols() - 1);
      const double wx = fx - static_cast<double>(x0);
      out(y, x) = (1 - wy) * ((1 - wx) * in(y0, x0) + wx * in(y0, x1)) + wy * ((1 - wx) * in(y1, x0) + wx * in(y1, x1));
    }
  }
  return out;
}

// P(bonafide) from the two logits.
inline double bonafide_probability(double logit_bonafide, double logit_deepfake) {
  return 1.0 / (1.0 + std::exp(logit_deepfake - logit_bonafide));
}

// ---- trained head --------------------------------------------------------------

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_eer = 0.0;
};

struct TrainingHistory {
  double initial_loss = 0.0;
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
};

inline nlohmann::json to_json(const TrainingHistory& h) {
  nlohmann::json e = nlohmann::json::array();
  for (const auto& r : h.epochs) e.push_back({{"epoch", r.epoch}, {"train_loss", r.train_loss}, {"val_eer", r.val_eer}});
  return {{"initial_loss", h.initial_loss}, {"best_epoch", h.best_epoch}, {"epochs", e}};
}

inline TrainingHistory training_history_from_json(const nlohmann::json& j) {
  TrainingHistory h;
  h.initial_loss = j.at("initial_loss").get<double>();
  h.best_epoch = j.at("best_epoch").get<int>();
  for (const auto& e : j.at("epochs")) {
    h.epochs.push_back({e.at("epoch").get<int>(), e.at("train_loss").get<double>(), e.at("val_eer").get<double>()});
  }
  return h;
}

class TrainingDiverged : public NumericError {
 public:
  TrainingDiverged(int epoch, int batch)
      : NumericError("training diverged: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                     std::to_string(batch)),
        epoch_(epoch), batch_(batch) {}
  int epoch() const { return epoch_; }
  int batch() const { return batch_; }

 private:
  int epoch_, batch_;
};

// A head network plus the input mapping it was trained with: the feature
// matrix is resized to the network's input size and standardised per column
// with statistics taken from the training set.
struct TrainedHead {
  std::unique_ptr<nn::Head<float>> net;
  int feature_dims = 0;
  std::vector<float> column_mean;
  std::vector<float> column_std;
  TrainConfig train_config;
  TrainingHistory history;

  std::string arch() const { return net->arch(); }

  std::vector<float> prepare(const FeatureMatrix& f) const {
    if (f.dims() != feature_dims) {
      throw ShapeError("head expects " + std::to_string(feature_dims) + "-dimensional features, clip '" +
                       f.source_clip + "' has " + std::to_string(f.dims()));
    }
    const int H = net->input_height(), W = net->input_width();
    const MatrixD r = resize_bilinear(f.values, H, W);
    std::vector<float> out(static_cast<std::size_t>(H) * W);
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        const auto xu = static_cast<std::size_t>(x);
        out[static_cast<std::size_t>(y) * W + xu] = static_cast<float>((r(y, x) - column_mean[xu]) / column_std[xu]);
      }
    }
    return out;
  }

  nn::Tensor4<float> batch(const std::vector<const std::vector<float>*>& maps) const {
    const int H = net->input_height(), W = net->input_width();
    nn::Tensor4<float> x(static_cast<int>(maps.size()), 1, H, W);
    for (std::size_t i = 0; i < maps.size(); ++i) std::copy(maps[i]->begin(), maps[i]->end(), x.sample(static_cast<int>(i)));
    return x;
  }

  // Inference-mode logits for prepared maps, in batches of `batch_size`.
  std::vector<std::array<float, 2>> logits(const std::vector<std::vector<float>>& maps, int batch_size = 32) const {
    std::vector<std::array<float, 2>> out;
    for (std::size_t s = 0; s < maps.size(); s += static_cast<std::size_t>(batch_size)) {
      std::vector<const std::vector<float>*> ptrs;
      for (std::size_t i = s; i < std::min(maps.size(), s + static_cast<std::size_t>(batch_size)); ++i) ptrs.push_back(&maps[i]);
      const nn::Tensor4<float> z = net->forward(batch(ptrs), false);
      for (int i = 0; i < z.n; ++i) out.push_back({z.at(i, 0, 0, 0), z.at(i, 1, 0, 0)});
    }
    return out;
  }

  std::vector<double> scores(const std::vector<std::vector<float>>& maps) const {
    std::vector<double> s;
    for (const auto& z : logits(maps)) {
      if (!std::isfinite(z[0]) || !std::isfinite(z[1])) throw NumericError("head produced non-finite logits");
      s.push_back(bonafide_probability(z[0], z[1]));
    }
    return s;
  }

  double score(const FeatureMatrix& f) const { return scores({prepare(f)}).front(); }
};

// Builds an untrained head sized for `feature_dims`-wide features. The CNN
// sees a 256 x feature_dims map, ResNet34 a 224 x 224 map. `overrides` may
// replace any field of the architecture config.
inline TrainedHead make_trained_head(const std::string& arch, int feature_dims,
                                     const nlohmann::json& overrides = nlohmann::json::object()) {
  if (feature_dims < 1) throw ValidationError("feature dimension must be positive");
  nlohmann::json cfg;
  const std::string a = to_lower(arch);
  if (a == "cnn") {
    nn::CnnConfig c;
    c.input_width = feature_dims;
    cfg = nn::to_json(c);
  } else if (a == "resnet34" || a == "resnet") {
    cfg = nn::to_json(nn::resnet34_config());
  } else {
    throw ValidationError("unknown head architecture '" + arch + "' (expected CNN or ResNet34)");
  }
  if (!overrides.is_null()) cfg.update(overrides);
  TrainedHead h;
  h.net = nn::make_head<float>(arch, cfg);
  h.feature_dims = feature_dims;
  h.column_mean.assign(static_cast<std::size_t>(h.net->input_width()), 0.0f);
  h.column_std.assign(static_cast<std::size_t>(h.net->input_width()), 1.0f);
  return h;
}

struct LabeledSet {
  std::vector<FeatureMatrix> features;
  std::vector<Label> labels;

  void require_trainable(const std::string& what) const {
    if (features.size() != labels.size()) throw ValidationError(what + ": features and labels differ in length");
    bool bona = false, fake = false;
    for (Label l : labels) (l == Label::Bonafide ? bona : fake) = true;
    if (!bona || !fake) throw ValidationError(what + " must contain both bonafide and deepfake clips");
  }
};

namespace detail {

inline std::vector<std::vector<float>> prepare_all(const TrainedHead& h, const std::vector<FeatureMatrix>& f) {
  std::vector<std::vector<float>> out;
  out.reserve(f.size());
  for (const auto& m : f) out.push_back(h.prepare(m));
  return out;
}

inline double eer_of(const std::vector<double>& scores, const std::vector<Label>& labels) {
  std::vector<ScoredTrial> t;
  for (std::size_t i = 0; i < scores.size(); ++i) t.push_back({std::to_string(i), labels[i], scores[i]});
  return compute_eer(t).eer;
}

inline std::vector<std::vector<float>> snapshot(nn::Head<float>& net) {
  std::vector<std::vector<float>> s;
  for (auto* p : net.state()) s.push_back(p->value);
  return s;
}

inline void restore(nn::Head<float>& net, const std::vector<std::vector<float>>& s) {
  const auto st = net.state();
  for (std::size_t i = 0; i < st.size(); ++i) st[i]->value = s[i];
}

}  // namespace detail

// Mini-batch Adam on mean cross-entropy. Validation EER is measured after
// every epoch; the weights of the best epoch are kept, and training stops
// after `patience` epochs without improvement. Single-threaded and fully
// determined by cfg.seed.
inline void train(TrainedHead& head, const LabeledSet& train_set, const LabeledSet& val_set, const TrainConfig& cfg) {
  cfg.require_valid();
  train_set.require_trainable("training set");
  val_set.require_trainable("validation set");
  head.train_config = cfg;
  head.history = {};
  const int W = head.net->input_width();

  // Column statistics of the resized training maps.
  head.column_mean.assign(static_cast<std::size_t>(W), 0.0f);
  head.column_std.assign(static_cast<std::size_t>(W), 1.0f);
  auto train_maps = detail::prepare_all(head, train_set.features);
  {
    std::vector<double> sum(static_cast<std::size_t>(W), 0.0), sq(static_cast<std::size_t>(W), 0.0);
    double rows = 0;
    for (const auto& m : train_maps) {
      for (std::size_t i = 0; i < m.size(); ++i) {
        sum[i % static_cast<std::size_t>(W)] += m[i];
        sq[i % static_cast<std::size_t>(W)] += static_cast<double>(m[i]) * m[i];
      }
      rows += static_cast<double>(m.size()) / W;
    }
    for (std::size_t c = 0; c < static_cast<std::size_t>(W); ++c) {
      const double mean = sum[c] / rows;
      const double var = std::max(0.0, sq[c] / rows - mean * mean);
      head.column_mean[c] = static_cast<float>(mean);
      head.column_std[c] = static_cast<float>(std::sqrt(var) > 1e-6 ? std::sqrt(var) : 1.0);
    }
    for (auto& m : train_maps) {
      for (std::size_t i = 0; i < m.size(); ++i) {
        const std::size_t c = i % static_cast<std::size_t>(W);
        m[i] = (m[i] - head.column_mean[c]) / head.column_std[c];
      }
    }
  }
  const auto val_maps = detail::prepare_all(head, val_set.features);

  nn::Head<float>& net = *head.net;
  net.init(cfg.seed);
  std::vector<int> labels(train_set.labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(train_set.labels[i]);

  {
    double total = 0.0;
    const auto z = head.logits(train_maps, cfg.batch_size);
    for (std::size_t i = 0; i < z.size(); ++i) {
      nn::Tensor4<float> one(1, 2, 1, 1);
      one.data = {z[i][0], z[i][1]};
      total += nn::softmax_cross_entropy(one, {labels[i]}, nullptr);
    }
    head.history.initial_loss = total / static_cast<double>(z.size());
  }

  Adam<float> opt(cfg);
  std::mt19937_64 rng(cfg.seed ^ 0x5eedda7aULL);
  std::vector<std::size_t> order(train_maps.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto best = detail::snapshot(net);
  double best_eer = std::numeric_limits<double>::infinity();
  int since_best = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    deterministic_shuffle(order, rng);
    double loss_sum = 0.0;
    int batch_index = 0;
    for (std::size_t s = 0; s < order.size(); s += static_cast<std::size_t>(cfg.batch_size), ++batch_index) {
      const std::size_t e = std::min(order.size(), s + static_cast<std::size_t>(cfg.batch_size));
      std::vector<const std::vector<float>*> ptrs;
      std::vector<int> y;
      for (std::size_t i = s; i < e; ++i) {
        ptrs.push_back(&train_maps[order[i]]);
        y.push_back(labels[order[i]]);
      }
      net.zero_grad();
      const nn::Tensor4<float> z = net.forward(head.batch(ptrs), true);
      nn::Tensor4<float> dz;
      const double loss = nn::softmax_cross_entropy(z, y, &dz);
      if (!std::isfinite(loss)) throw TrainingDiverged(epoch, batch_index);
      net.backward(dz);
      opt.step(net.parameters());
      loss_sum += loss * static_cast<double>(e - s);
    }
    const double val_eer = detail::eer_of(head.scores(val_maps), val_set.labels);
    head.history.epochs.push_back({epoch, loss_sum / static_cast<double>(order.size()), val_eer});
    if (val_eer < best_eer) {
      best_eer = val_eer;
      best = detail::snapshot(net);
      head.history.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  detail::restore(net, best);
}

// ---- gradient check ------------------------------------------------------------

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;        // entries compared
  std::size_t kink_crossings = 0;  // entries skipped, see grad_check
  std::string worst_parameter;
};

// Compares backprop gradients of the mean cross-entropy with central finite
// differences on `n_checks` randomly chosen parameter entries. The relative
// error of one entry is |a - n| / max(|a|, |n|, floor); the floor keeps
// entries whose true gradient is essentially zero from dominating.
//
// ReLU and max pooling are not differentiable everywhere. When w +- h moves
// some activation across a switch point the difference quotient mixes two
// linear pieces and says nothing about the derivative, so such entries are
// counted in kink_crossings and replaced by further random entries.
template <class T>
GradCheckResult grad_check(nn::Head<T>& net, const nn::Tensor4<T>& x, const std::vector<int>& labels,
                           std::size_t n_checks, std::uint64_t seed, double h = 1e-3, double floor = 1e-6) {
  net.zero_grad();
  nn::Tensor4<T> dz;
  nn::softmax_cross_entropy(net.forward(x, true), labels, &dz);
  const std::uint64_t base_signature = net.activation_signature();
  net.backward(dz);

  const auto params = net.parameters();
  std::vector<std::pair<std::size_t, std::size_t>> entries;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t i = 0; i < params[p]->value.size(); ++i) entries.emplace_back(p, i);
  }
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> idx(entries.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  deterministic_shuffle(idx, rng);

  GradCheckResult r;
  for (std::size_t k : idx) {
    if (r.checked == n_checks) break;
    auto [p, i] = entries[k];
    T& w = params[p]->value[i];
    const T original = w;
    w = static_cast<T>(original + h);
    const double up = nn::softmax_cross_entropy(net.forward(x, true), labels, nullptr);
    const bool up_same = net.activation_signature() == base_signature;
    w = static_cast<T>(original - h);
    const double down = nn::softmax_cross_entropy(net.forward(x, true), labels, nullptr);
    const bool down_same = net.activation_signature() == base_signature;
    w = original;
    if (!up_same || !down_same) {
      ++r.kink_crossings;
      continue;
    }
    const double numeric = (up - down) / (2.0 * h);
    const double analytic = static_cast<double>(params[p]->grad[i]);
    const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
    if (rel > r.max_relative_error) {
      r.max_relative_error = rel;
      r.worst_parameter = params[p]->name + "[" + std::to_string(i) + "]";
    }
    ++r.checked;
  }
  return r;
}

// ---- persistence ---------------------------------------------------------------

// Weights (and input statistics) go into a tensor archive; the architecture,
// training config and history go both into the archive metadata and into a
// JSON sidecar next to it (`<path>.json`) for human inspection.
inline nlohmann::json head_description(const TrainedHead& h) {
  return {{"kind", "head"},
          {"arch", h.arch()},
          {"config", h.net->config_json()},
          {"feature_dims", h.feature_dims},
          {"train", to_json(h.train_config)},
          {"history", to_json(h.history)}};
}

inline void save_head(const std::filesystem::path& path, const TrainedHead& h) {
  TensorArchive a;
  a.metadata = head_description(h);
  for (auto* p : h.net->state()) a.tensors[p->name] = {p->shape, p->value};
  const std::int64_t W = static_cast<std::int64_t>(h.column_mean.size());
  a.tensors["input.mean"] = {{W}, h.column_mean};
  a.tensors["input.std"] = {{W}, h.column_std};
  save_archive(path, a);
  write_file_atomic(path.string() + ".json", a.metadata.dump(2) + "\n");
}

inline TrainedHead load_head(const std::filesystem::path& path) {
  const TensorArchive a = load_archive(path);
  const auto& m = a.metadata;
  if (m.value("kind", "") != "head") throw FormatError(path.string() + ": not a trained head archive");
  TrainedHead h;
  try {
    h.net = nn::make_head<float>(m.at("arch").get<std::string>(), m.at("config"));
    h.feature_dims = m.at("feature_dims").get<int>();
    h.train_config = train_config_from_json(m.at("train"));
    h.history = training_history_from_json(m.at("history"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  std::vector<TensorSpec> layout;
  for (auto* p : h.net->state()) layout.push_back({p->name, p->shape});
  const std::int64_t W = h.net->input_width();
  layout.push_back({"input.mean", {W}});
  layout.push_back({"input.std", {W}});
  validate_against_layout(a, layout);
  for (auto* p : h.net->state()) p->value = a.tensors.at(p->name).data;
  h.column_mean = a.tensors.at("input.mean").data;
  h.column_std = a.tensors.at("input.std").data;
  return h;
}

}  // namespace svdd
