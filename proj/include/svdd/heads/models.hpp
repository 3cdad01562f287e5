// SPDX-FileCopyrightText: Copyright (c) 2026 The svdd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "svdd/heads/layers.hpp"

#include "json.hpp"

#include <array>
#include <memory>

namespace svdd::nn {

// Classifier over a single-channel H x W map, two logits out (class 0 is
// bonafide).
template <class T>
class Head {
 public:
  virtual ~Head() = default;
  virtual std::string arch() const = 0;
  virtual nlohmann::json config_json() const = 0;
  virtual int input_height() const = 0;
  virtual int input_width() const = 0;
  // `train` selects batch statistics for normalisation and keeps the
  // activations needed by backward().
  virtual Tensor4<T> forward(const Tensor4<T>& x, bool train) = 0;
  virtual void backward(const Tensor4<T>& dlogits) = 0;
  // Every tensor of state, trainable or not, in a fixed order.
  virtual std::vector<Param<T>*> state() = 0;
  virtual void init(std::uint64_t seed) = 0;
  // Hash of every ReLU on/off state and max-pool selection in the last
  // training-mode forward. Two forwards with equal signatures lie on the same
  // linear piece of the network's non-smooth parts.
  virtual std::uint64_t activation_signature() const = 0;

  std::vector<Param<T>*> parameters() {
    std::vector<Param<T>*> out;
    for (auto* p : state()) {
      if (p->trainable) out.push_back(p);
    }
    return out;
  }
  void zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
  }
  std::size_t parameter_count() {
    std::size_t n = 0;
    for (auto* p : parameters()) n += p->value.size();
    return n;
  }
};

// ---- two-layer CNN -------------------------------------------------------------

struct CnnConfig {
  int input_height = 256;
  int input_width = 80;
  int channels1 = 16;
  int channels2 = 32;
  int kernel = 5;

  void require_valid() const {
    if (kernel != 5) throw ValidationError("cnn head: kernel size must be 5");
    if (channels1 < 1 || channels2 < 1) throw ValidationError("cnn head: channel counts must be positive");
    if (input_height < 4 || input_width < 4) throw ValidationError("cnn head: input must be at least 4x4");
  }
  bool operator==(const CnnConfig&) const = default;
};

inline nlohmann::json to_json(const CnnConfig& c) {
  return {{"input_height", c.input_height}, {"input_width", c.input_width}, {"channels1", c.channels1},
          {"channels2", c.channels2},       {"kernel", c.kernel}};
}

inline CnnConfig cnn_config_from_json(const nlohmann::json& j) {
  CnnConfig c;
  c.input_height = j.at("input_height").get<int>();
  c.input_width = j.at("input_width").get<int>();
  c.channels1 = j.at("channels1").get<int>();
  c.channels2 = j.at("channels2").get<int>();
  c.kernel = j.at("kernel").get<int>();
  c.require_valid();
  return c;
}

// conv5x5 -> ReLU -> maxpool2 -> conv5x5 -> ReLU -> maxpool2 -> FC(2).
template <class T>
class CnnHead final : public Head<T> {
 public:
  explicit CnnHead(const CnnConfig& cfg)
      : cfg_((cfg.require_valid(), cfg)),
        conv1_("conv1", 1, cfg.channels1, cfg.kernel, 1, cfg.kernel / 2, true),
        conv2_("conv2", cfg.channels1, cfg.channels2, cfg.kernel, 1, cfg.kernel / 2, true),
        pool1_(2, 2),
        pool2_(2, 2),
        fc_("fc", cfg.channels2 * (cfg.input_height / 4) * (cfg.input_width / 4), 2) {}

  std::string arch() const override { return "CNN"; }
  nlohmann::json config_json() const override { return to_json(cfg_); }
  int input_height() const override { return cfg_.input_height; }
  int input_width() const override { return cfg_.input_width; }
  const CnnConfig& config() const { return cfg_; }

  Tensor4<T> forward(const Tensor4<T>& x, bool train) override {
    if (x.c != 1 || x.h != cfg_.input_height || x.w != cfg_.input_width) {
      throw ShapeError("cnn head: expected 1x" + std::to_string(cfg_.input_height) + "x" +
                       std::to_string(cfg_.input_width) + " input");
    }
    Tensor4<T> h = pool1_.forward(relu1_.forward(conv1_.forward(x, train), train), train);
    h = pool2_.forward(relu2_.forward(conv2_.forward(h, train), train), train);
    return fc_.forward(h, train);
  }

  void backward(const Tensor4<T>& dlogits) override {
    Tensor4<T> g = fc_.backward(dlogits);
    g = conv2_.backward(relu2_.backward(pool2_.backward(g)));
    conv1_.backward(relu1_.backward(pool1_.backward(g)));
  }

  std::vector<Param<T>*> state() override {
    std::vector<Param<T>*> s;
    for (auto* p : conv1_.state()) s.push_back(p);
    for (auto* p : conv2_.state()) s.push_back(p);
    for (auto* p : fc_.state()) s.push_back(p);
    return s;
  }

  void init(std::uint64_t seed) override {
    std::mt19937_64 rng(seed);
    conv1_.init(rng);
    conv2_.init(rng);
    fc_.init(rng);
  }

  std::uint64_t activation_signature() const override {
    std::uint64_t h = 14695981039346656037ULL;
    relu1_.signature(h);
    pool1_.signature(h);
    relu2_.signature(h);
    pool2_.signature(h);
    return h;
  }

  Dense<T>& fc() { return fc_; }

 private:
  CnnConfig cfg_;
  Conv2d<T> conv1_, conv2_;
  Relu<T> relu1_, relu2_;
  MaxPool2d<T> pool1_, pool2_;
  Dense<T> fc_;
};

// ---- ResNet --------------------------------------------------------------------

struct ResNetConfig {
  int input_height = 224;
  int input_width = 224;
  int stem_channels = 64;
  std::array<int, 4> widths = {64, 128, 256, 512};
  std::array<int, 4> blocks = {3, 4, 6, 3};

  void require_valid() const {
    if (input_height < 1 || input_width < 1 || stem_channels < 1) throw ValidationError("resnet head: bad dimensions");
    for (int i = 0; i < 4; ++i) {
      if (widths[i] < 1 || blocks[i] < 1) throw ValidationError("resnet head: every stage needs a width and a block");
    }
  }
  // Stem conv + two convs per basic block + the FC layer; projection
  // shortcuts are not counted.
  int weighted_layers() const { return 2 + 2 * (blocks[0] + blocks[1] + blocks[2] + blocks[3]); }
  bool operator==(const ResNetConfig&) const = default;
};

inline ResNetConfig resnet34_config() { return {}; }

inline nlohmann::json to_json(const ResNetConfig& c) {
  return {{"input_height", c.input_height}, {"input_width", c.input_width}, {"stem_channels", c.stem_channels},
          {"widths", c.widths},             {"blocks", c.blocks}};
}

inline ResNetConfig resnet_config_from_json(const nlohmann::json& j) {
  ResNetConfig c;
  c.input_height = j.at("input_height").get<int>();
  c.input_width = j.at("input_width").get<int>();
  c.stem_channels = j.at("stem_channels").get<int>();
  c.widths = j.at("widths").get<std::array<int, 4>>();
  c.blocks = j.at("blocks").get<std::array<int, 4>>();
  c.require_valid();
  return c;
}

// 3x3 conv -> BN -> ReLU -> 3x3 conv -> BN, plus the shortcut, then ReLU.
// The shortcut is the identity unless the block changes resolution or width,
// in which case it is a 1x1 strided conv followed by BN.
template <class T>
class BasicBlock {
 public:
  BasicBlock(const std::string& name, int in, int out, int stride)
      : conv1_(name + ".conv1", in, out, 3, stride, 1, false),
        bn1_(name + ".bn1", out),
        conv2_(name + ".conv2", out, out, 3, 1, 1, false),
        bn2_(name + ".bn2", out) {
    if (stride != 1 || in != out) {
      proj_ = std::make_unique<Conv2d<T>>(name + ".downsample.0", in, out, 1, stride, 0, false);
      proj_bn_ = std::make_unique<BatchNorm2d<T>>(name + ".downsample.1", out);
    }
  }

  bool has_projection() const { return proj_ != nullptr; }

  Tensor4<T> forward(const Tensor4<T>& x, bool train) {
    Tensor4<T> h = relu1_.forward(bn1_.forward(conv1_.forward(x, train), train), train);
    h = bn2_.forward(conv2_.forward(h, train), train);
    if (proj_) {
      const Tensor4<T> s = proj_bn_->forward(proj_->forward(x, train), train);
      for (std::size_t i = 0; i < h.size(); ++i) h.data[i] += s.data[i];
    } else {
      for (std::size_t i = 0; i < h.size(); ++i) h.data[i] += x.data[i];
    }
    return relu_out_.forward(std::move(h), train);
  }

  Tensor4<T> backward(const Tensor4<T>& dy) {
    const Tensor4<T> g = relu_out_.backward(dy);
    Tensor4<T> dx = conv1_.backward(bn1_.backward(relu1_.backward(conv2_.backward(bn2_.backward(g)))));
    const Tensor4<T> ds = proj_ ? proj_->backward(proj_bn_->backward(g)) : g;
    for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] += ds.data[i];
    return dx;
  }

  void state(std::vector<Param<T>*>& s) {
    for (auto* p : conv1_.state()) s.push_back(p);
    for (auto* p : bn1_.state()) s.push_back(p);
    for (auto* p : conv2_.state()) s.push_back(p);
    for (auto* p : bn2_.state()) s.push_back(p);
    if (proj_) {
      for (auto* p : proj_->state()) s.push_back(p);
      for (auto* p : proj_bn_->state()) s.push_back(p);
    }
  }

  void init(std::mt19937_64& rng) {
    conv1_.init(rng);
    conv2_.init(rng);
    if (proj_) proj_->init(rng);
  }

  void signature(std::uint64_t& h) const {
    relu1_.signature(h);
    relu_out_.signature(h);
  }

  Conv2d<T>& conv1() { return conv1_; }
  Conv2d<T>& conv2() { return conv2_; }

 private:
  Conv2d<T> conv1_;
  BatchNorm2d<T> bn1_;
  Relu<T> relu1_;
  Conv2d<T> conv2_;
  BatchNorm2d<T> bn2_;
  std::unique_ptr<Conv2d<T>> proj_;
  std::unique_ptr<BatchNorm2d<T>> proj_bn_;
  Relu<T> relu_out_;
};

// 7x7/2 conv -> BN -> ReLU -> 3x3/2 max pool -> four stages of basic blocks
// (the first block of stages 2-4 has stride 2) -> global average pool -> FC(2).
template <class T>
class ResNetHead final : public Head<T> {
 public:
  explicit ResNetHead(const ResNetConfig& cfg)
      : cfg_((cfg.require_valid(), cfg)),
        stem_("conv1", 1, cfg.stem_channels, 7, 2, 3, false),
        stem_bn_("bn1", cfg.stem_channels),
        pool_(3, 2, 1),
        fc_("fc", cfg.widths[3], 2) {
    int in = cfg.stem_channels;
    for (int s = 0; s < 4; ++s) {
      for (int b = 0; b < cfg.blocks[static_cast<std::size_t>(s)]; ++b) {
        const int stride = (s > 0 && b == 0) ? 2 : 1;
        const int out = cfg.widths[static_cast<std::size_t>(s)];
        blocks_.push_back(std::make_unique<BasicBlock<T>>(
            "layer" + std::to_string(s + 1) + "." + std::to_string(b), in, out, stride));
        in = out;
      }
    }
  }

  std::string arch() const override { return "ResNet34"; }
  nlohmann::json config_json() const override { return to_json(cfg_); }
  int input_height() const override { return cfg_.input_height; }
  int input_width() const override { return cfg_.input_width; }
  const ResNetConfig& config() const { return cfg_; }
  const std::vector<std::unique_ptr<BasicBlock<T>>>& blocks() const { return blocks_; }

  Tensor4<T> forward(const Tensor4<T>& x, bool train) override {
    if (x.c != 1 || x.h != cfg_.input_height || x.w != cfg_.input_width) {
      throw ShapeError("resnet head: expected 1x" + std::to_string(cfg_.input_height) + "x" +
                       std::to_string(cfg_.input_width) + " input");
    }
    Tensor4<T> h = pool_.forward(stem_relu_.forward(stem_bn_.forward(stem_.forward(x, train), train), train), train);
    for (auto& b : blocks_) h = b->forward(h, train);
    if (train) {
      pooled_h_ = h.h;
      pooled_w_ = h.w;
    }
    return fc_.forward(global_avg_pool(h), train);
  }

  void backward(const Tensor4<T>& dlogits) override {
    Tensor4<T> g = global_avg_pool_backward(fc_.backward(dlogits), pooled_h_, pooled_w_);
    for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) g = (*it)->backward(g);
    stem_.backward(stem_bn_.backward(stem_relu_.backward(pool_.backward(g))));
  }

  std::vector<Param<T>*> state() override {
    std::vector<Param<T>*> s;
    for (auto* p : stem_.state()) s.push_back(p);
    for (auto* p : stem_bn_.state()) s.push_back(p);
    for (auto& b : blocks_) b->state(s);
    for (auto* p : fc_.state()) s.push_back(p);
    return s;
  }

  std::uint64_t activation_signature() const override {
    std::uint64_t h = 14695981039346656037ULL;
    stem_relu_.signature(h);
    pool_.signature(h);
    for (const auto& b : blocks_) b->signature(h);
    return h;
  }

  void init(std::uint64_t seed) override {
    std::mt19937_64 rng(seed);
    stem_.init(rng);
    for (auto& b : blocks_) b->init(rng);
    fc_.init(rng);
  }

 private:
  ResNetConfig cfg_;
  Conv2d<T> stem_;
  BatchNorm2d<T> stem_bn_;
  Relu<T> stem_relu_;
  MaxPool2d<T> pool_;
  std::vector<std::unique_ptr<BasicBlock<T>>> blocks_;
  Dense<T> fc_;
  int pooled_h_ = 0, pooled_w_ = 0;
};

template <class T>
std::unique_ptr<Head<T>> make_head(const std::string& arch, const nlohmann::json& config) {
  try {
    const std::string a = to_lower(arch);
    if (a == "cnn") return std::make_unique<CnnHead<T>>(cnn_config_from_json(config));
    if (a == "resnet34" || a == "resnet") return std::make_unique<ResNetHead<T>>(resnet_config_from_json(config));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("head config: " + std::string(e.what()));
  }
  throw ValidationError("unknown head architecture '" + arch + "' (expected CNN or ResNet34)");
}

}  // namespace svdd::nn
