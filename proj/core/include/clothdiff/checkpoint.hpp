#pragma once

#include <memory>
#include <string>
#include <vector>

#include "clothdiff/ddm.hpp"
#include "clothdiff/dpm.hpp"

namespace clothdiff {

// Checkpoint layout: <dir>/manifest.json + one tensor file per parameter
// plus the canonical template as canonical.obj. The manifest maps parameter
// names to tensor entries in creation order.
void save_dpm_checkpoint(const std::string& dir, const DpmModel& model);
void save_ddm_checkpoint(const std::string& dir, const DdmModel& model);

std::string checkpoint_kind(const std::string& dir);  // "dpm" | "ddm"

std::unique_ptr<DpmModel> load_dpm_checkpoint(const std::string& dir);
std::unique_ptr<DdmModel> load_ddm_checkpoint(const std::string& dir);

}  // namespace clothdiff
