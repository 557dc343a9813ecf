#pragma once

#include <string>
#include <vector>

#include "sdae/data.hpp"
#include "sdae/eval.hpp"
#include "sdae/training.hpp"
#include "sdae/vit.hpp"

namespace sdae {

// Everything a run needs, addressable by flat snake_case keys that mirror
// the field names (precedence: built-in defaults < config file < flags).
struct RunConfig {
  VitConfig model;
  TrainConfig train;
  DatasetManifest data;
  ProbeConfig probe;
  std::size_t holdout = 1000;  // held-out probe/eval images
  int threads = 1;

  RunConfig();
};

// "toy" (the defaults) or "paper" (the full-scale recipe).
void apply_preset(RunConfig& cfg, const std::string& preset);

// Known keys in canonical order.
std::vector<std::string> config_keys();

// Assign one key; unknown keys or unparseable values throw ConfigError.
void set_config_value(RunConfig& cfg, const std::string& key,
                      const std::string& value);
std::string get_config_value(const RunConfig& cfg, const std::string& key);

// Flat "key = value" file; '#' starts a comment.
void load_config_file(RunConfig& cfg, const std::string& path);
std::string serialize_config(const RunConfig& cfg);
void write_resolved_config(const RunConfig& cfg, const std::string& out_dir);

}  // namespace sdae
