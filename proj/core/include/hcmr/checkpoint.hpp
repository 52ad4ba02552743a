#pragma once

// JSON checkpoints: model configuration, every named parameter tensor and
// the digest of the constraint set used in training.

#include "hcmr/constraints.hpp"
#include "hcmr/model.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace hcmr {

struct Checkpoint {
  ModelParameters params;
  std::string constraints_text;  // empty when trained without constraints
  std::uint64_t constraints_digest = 0;

  // Rebuilds the constraint set (nullopt when none was stored).
  std::optional<ConstraintSet> constraints() const;
};

std::string checkpoint_to_json(const ModelParameters& params, const ConstraintSet* constraints);
Checkpoint checkpoint_from_json(std::string_view text);

void save_checkpoint(const std::filesystem::path& path, const ModelParameters& params,
                     const ConstraintSet* constraints);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace hcmr
