#pragma once

#include <map>
#include <string>

#include "pgc/model.hpp"
#include "pgc/train.hpp"

namespace pgc {

using ConfigMap = std::map<std::string, std::string>;

// Flat "key = value" text; '#' starts a comment, blank lines are skipped.
ConfigMap parse_config_file(const std::string& path);
ConfigMap parse_config_text(const std::string& text);

// A full run description: where the data lives and how to build and train
// the model. Unknown keys are rejected.
struct RunConfig {
  std::string dataset;
  std::string meta;
  std::string out_dir;
  ModelSpec model;
  TrainConfig train;
};

RunConfig run_config_from(const ConfigMap& map);

// Writes to path + ".tmp" and renames, so readers never observe a partial
// file.
void atomic_write_text(const std::string& path, const std::string& content);

}  // namespace pgc
