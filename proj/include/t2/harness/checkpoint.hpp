#pragma once

#include <string>

#include "t2/model/model.hpp"

namespace t2 {

struct CheckpointMeta {
  int epoch = 0;
  std::string config_echo;  // json produced by config_echo()
};

// Binary container of every parameter (value + optimizer momentum) and BN
// running buffer, integrity-checked with a trailing crc32. Loading restores
// into an already-assembled model and refuses name/shape mismatches and
// corrupted files.
void save_checkpoint(const std::string& path, Model<float>& model,
                     const CheckpointMeta& meta);
CheckpointMeta load_checkpoint(const std::string& path, Model<float>& model);

// Reads only the embedded config echo (topology must be rebuilt before a
// full load).
std::string peek_checkpoint_config(const std::string& path);

}  // namespace t2
