#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "twoview/errors.hpp"

namespace twoview::netforge {

// One MBConv stage: `repeats` blocks; the configured stride applies to the
// first block of the stage, later repeats run at stride 1.
struct BlockSpec {
  int expand_ratio = 1;
  int out_channels = 16;
  int kernel = 3;
  int stride = 1;
  double se_ratio = 0.25;  // 0 disables squeeze-excite
  int repeats = 1;
};

struct BackboneConfig {
  std::string name = "mini";
  int input_channels = 1;  // grayscale replicated to this many channels
  int stem_stride = 2;
  int stem_channels = 16;
  std::vector<BlockSpec> stages;
  int feature_channels = 128;  // channels of the top pointwise conv
  int declared_total_stride = 32;

  int stride_product() const {
    int s = stem_stride;
    for (const auto& b : stages) s *= b.stride;
    return s;
  }
  void validate() const {
    if (stages.empty()) throw ConfigError("backbone '" + name + "' has no stages");
    if (stride_product() != declared_total_stride)
      throw ConfigError("backbone '" + name + "': stride product " +
                        std::to_string(stride_product()) + " != declared_total_stride " +
                        std::to_string(declared_total_stride));
    for (const auto& b : stages) {
      if (b.stride != 1 && b.stride != 2) throw ConfigError("block stride must be 1 or 2");
      if (b.kernel % 2 == 0) throw ConfigError("block kernel must be odd");
      if (b.expand_ratio < 1 || b.repeats < 1) throw ConfigError("bad block spec");
      if (b.se_ratio < 0 || b.se_ratio > 1) throw ConfigError("se_ratio must be in [0,1]");
    }
  }
};

enum class HeadKind { Patch5, SingleView2, TwoView2 };
enum class FusionMode { BeforePool, AfterPool };

inline const char* to_string(HeadKind k) {
  switch (k) {
    case HeadKind::Patch5: return "patch5";
    case HeadKind::SingleView2: return "single_view2";
    default: return "two_view2";
  }
}
inline const char* to_string(FusionMode m) {
  return m == FusionMode::BeforePool ? "before_pool" : "after_pool";
}

struct HeadSpec {
  HeadKind kind = HeadKind::Patch5;
  std::vector<BlockSpec> new_blocks;       // empty for patch5; up to 2 otherwise
  FusionMode fusion = FusionMode::BeforePool;  // two_view2 only
  std::vector<int> hidden_dims;            // after-pool fusion dense stack

  int dense_out() const { return kind == HeadKind::Patch5 ? 5 : 2; }
  void validate() const {
    if (kind == HeadKind::Patch5 && !new_blocks.empty())
      throw ConfigError("patch head takes no new blocks");
    if (new_blocks.size() > 2) throw ConfigError("head supports at most 2 new blocks");
  }
};

// Everything needed to rebuild a model graph with identical topology and
// names; stored in checkpoints.
struct Recipe {
  std::string stage = "backbone";  // backbone | patch | single_view | two_view
  BackboneConfig backbone;
  HeadSpec head;
  int input_height = 0;
  int input_width = 0;
};

// ---- JSON (de)serialization ----

inline void to_json(nlohmann::json& j, const BlockSpec& b) {
  j = {{"expand_ratio", b.expand_ratio}, {"out_channels", b.out_channels},
       {"kernel", b.kernel},             {"stride", b.stride},
       {"se_ratio", b.se_ratio},         {"repeats", b.repeats}};
}
inline void from_json(const nlohmann::json& j, BlockSpec& b) {
  b.expand_ratio = j.value("expand_ratio", 1);
  b.out_channels = j.at("out_channels").get<int>();
  b.kernel = j.value("kernel", 3);
  b.stride = j.value("stride", 1);
  b.se_ratio = j.value("se_ratio", 0.25);
  b.repeats = j.value("repeats", 1);
}

inline void to_json(nlohmann::json& j, const BackboneConfig& c) {
  j = {{"name", c.name},
       {"input_channels", c.input_channels},
       {"stem_stride", c.stem_stride},
       {"stem_channels", c.stem_channels},
       {"stages", c.stages},
       {"feature_channels", c.feature_channels},
       {"declared_total_stride", c.declared_total_stride}};
}
inline void from_json(const nlohmann::json& j, BackboneConfig& c) {
  c.name = j.value("name", "custom");
  c.input_channels = j.value("input_channels", 1);
  c.stem_stride = j.value("stem_stride", 2);
  c.stem_channels = j.at("stem_channels").get<int>();
  c.stages = j.at("stages").get<std::vector<BlockSpec>>();
  c.feature_channels = j.at("feature_channels").get<int>();
  c.declared_total_stride = j.value("declared_total_stride", 32);
}

inline void to_json(nlohmann::json& j, const HeadSpec& h) {
  j = {{"kind", to_string(h.kind)},
       {"new_blocks", h.new_blocks},
       {"fusion", to_string(h.fusion)},
       {"hidden_dims", h.hidden_dims}};
}
inline void from_json(const nlohmann::json& j, HeadSpec& h) {
  const std::string k = j.at("kind").get<std::string>();
  if (k == "patch5")
    h.kind = HeadKind::Patch5;
  else if (k == "single_view2")
    h.kind = HeadKind::SingleView2;
  else if (k == "two_view2")
    h.kind = HeadKind::TwoView2;
  else
    throw ConfigError("unknown head kind: " + k);
  h.new_blocks = j.value("new_blocks", std::vector<BlockSpec>{});
  h.fusion = j.value("fusion", std::string("before_pool")) == "after_pool" ? FusionMode::AfterPool
                                                                           : FusionMode::BeforePool;
  h.hidden_dims = j.value("hidden_dims", std::vector<int>{});
}

inline void to_json(nlohmann::json& j, const Recipe& r) {
  j = {{"stage", r.stage},
       {"backbone", r.backbone},
       {"head", r.head},
       {"input_height", r.input_height},
       {"input_width", r.input_width}};
}
inline void from_json(const nlohmann::json& j, Recipe& r) {
  r.stage = j.at("stage").get<std::string>();
  r.backbone = j.at("backbone").get<BackboneConfig>();
  r.head = j.at("head").get<HeadSpec>();
  r.input_height = j.at("input_height").get<int>();
  r.input_width = j.at("input_width").get<int>();
}

// ---- named configurations ----

// EfficientNet-B0-shaped: 224x224 -> 1280 maps of 7x7.
inline BackboneConfig b0_parity_config() {
  BackboneConfig c;
  c.name = "b0_parity";
  c.input_channels = 3;
  c.stem_stride = 2;
  c.stem_channels = 32;
  c.stages = {{1, 16, 3, 1, 0.25, 1},  {6, 24, 3, 2, 0.25, 2}, {6, 40, 5, 2, 0.25, 2},
              {6, 80, 3, 2, 0.25, 3},  {6, 112, 5, 1, 0.25, 3}, {6, 192, 5, 2, 0.25, 4},
              {6, 320, 3, 1, 0.25, 1}};
  c.feature_channels = 1280;
  c.declared_total_stride = 32;
  return c;
}

// EfficientNet-B4-shaped: 224x224 -> 1792 maps of 7x7; 1152x896 -> 36x28.
inline BackboneConfig b4_parity_config() {
  BackboneConfig c;
  c.name = "b4_parity";
  c.input_channels = 3;
  c.stem_stride = 2;
  c.stem_channels = 48;
  c.stages = {{1, 24, 3, 1, 0.25, 2},  {6, 32, 3, 2, 0.25, 4}, {6, 56, 5, 2, 0.25, 4},
              {6, 112, 3, 2, 0.25, 6}, {6, 160, 5, 1, 0.25, 6}, {6, 272, 5, 2, 0.25, 8},
              {6, 448, 3, 1, 0.25, 2}};
  c.feature_channels = 1792;
  c.declared_total_stride = 32;
  return c;
}

// Desk-scale default: stem 16, five MBConv stages, total stride 32.
inline BackboneConfig mini_config() {
  BackboneConfig c;
  c.name = "mini";
  c.input_channels = 1;
  c.stem_stride = 2;
  c.stem_channels = 16;
  c.stages = {{1, 16, 3, 1, 0.25, 1},
              {2, 24, 3, 2, 0.25, 1},
              {2, 40, 3, 2, 0.25, 1},
              {2, 64, 3, 2, 0.25, 1},
              {2, 96, 3, 2, 0.25, 1}};
  c.feature_channels = 128;
  c.declared_total_stride = 32;
  return c;
}

inline BackboneConfig named_backbone(const std::string& name) {
  if (name == "mini") return mini_config();
  if (name == "b0_parity") return b0_parity_config();
  if (name == "b4_parity") return b4_parity_config();
  throw ConfigError("unknown backbone config: " + name);
}

}  // namespace twoview::netforge
