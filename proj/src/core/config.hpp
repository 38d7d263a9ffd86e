#pragma once

#include <string>

#include "core/train.hpp"

namespace scnn {

// Parses a run-config document into a TrainConfig. Unknown keys anywhere in
// the tree are rejected with a message naming the key; relative paths
// (data_root, out_dir, model.spec_file, stats.file) resolve against the
// config file's directory. `override_out` / `override_seed` take precedence
// over the file values when set.
TrainConfig load_run_config(const std::string& path, const std::string& override_out = {},
                            const int64_t* override_seed = nullptr);

TrainConfig parse_run_config(const std::string& text, const std::string& base_dir,
                             const std::string& override_out = {}, const int64_t* override_seed = nullptr);

} // namespace scnn
