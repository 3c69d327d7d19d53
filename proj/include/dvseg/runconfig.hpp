#pragma once

#include <filesystem>

#include "dvseg/pipeline.hpp"

namespace dvseg {

/// Class-label override: which integer in the input label files means left /
/// right. Internally everything runs on the canonical 0/1/2 convention;
/// inputs are remapped on load and predictions mapped back on write.
struct LabelMap {
  int left = 1;
  int right = 2;

  bool identity() const { return left == 1 && right == 2; }
  void validate() const {
    if (left == right || left < 1 || right < 1 || left > 255 || right > 255) {
      throw ConfigError("label_map entries must be distinct positive labels");
    }
  }
};

LabelMask remap_to_canonical(const LabelMask& raw, const LabelMap& map);
LabelMask remap_from_canonical(const LabelMask& canonical, const LabelMap& map);

/// The structured config file: TrainConfig plus the label map. Every key is
/// optional and defaults to the values documented in the README; unknown
/// keys are rejected by name.
struct RunConfig {
  TrainConfig train;
  LabelMap label_map;
};

/// Parse and validate. Syntax errors report the line; unknown or ill-typed
/// keys report their full dotted path.
RunConfig parse_run_config(const std::filesystem::path& path);

/// Apply a JSON snippet (already parsed) over an existing config; used for
/// tests and for echoing.
void apply_json(RunConfig& cfg, const std::string& text,
                const std::string& origin);

std::string serialize_run_config(const RunConfig& cfg);

/// Echo the effective configuration into an output directory for provenance.
void write_effective_config(const RunConfig& cfg,
                            const std::filesystem::path& out_dir);

}  // namespace dvseg
