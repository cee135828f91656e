#pragma once

#include <string>
#include <vector>

#include "qpart/model.hpp"

// Checkpoint format: <prefix>.json manifest (config, seed, group tags,
// tensor index) plus <prefix>.bin, a raw little-endian float32 blob holding
// parameter values and batch-norm running statistics in manifest order.

namespace qpart::qpnet {

// Flat in-memory snapshot of params + buffers, for episodic restore.
struct ModelState {
  std::vector<float> values;
};

ModelState dump_state(Model& m);

// Restores values/buffers and clears grads and momentum.
void load_state(Model& m, const ModelState& st);

void save_checkpoint(Model& m, const std::string& prefix);
Model load_checkpoint(const std::string& prefix);

std::string checkpoint_manifest_path(const std::string& prefix);
std::string checkpoint_blob_path(const std::string& prefix);

}  // namespace qpart::qpnet
