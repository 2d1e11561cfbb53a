#pragma once

// JSON config surface shared by the CLI subcommands. Flags override file
// values; the effective config is echoed to a resolved-config snapshot in the
// output directory before any work starts.

#include <string>

#include "swdl/phantom.hpp"
#include "swdl/preprocess.hpp"
#include "swdl/trainer.hpp"

namespace swdl {

struct RunConfig {
  TrainConfig train;
  PhantomSpec phantom;
  PreprocessConfig preprocess;
  bool eval_use_spacing = false;  // report surface distances in mm instead of voxels
};

RunConfig config_from_json(const std::string& json_text);
std::string config_to_json(const RunConfig& cfg);

RunConfig load_config_file(const std::string& path);
void write_resolved_config(const RunConfig& cfg, const std::string& out_dir);

}  // namespace swdl
