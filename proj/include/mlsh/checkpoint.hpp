#pragma once

#include <optional>
#include <string>

#include "mlsh/hierarchy.hpp"

namespace mlsh {

/// Binary checkpoint: "MLSHCKPT", u32 version, u32 flags (bit 0 = master
/// present), u32 sub count, u32 obs dim, u32 action count, u32 hidden, then
/// each sub-policy as u64 length + flat float64 array; when present, the
/// master follows as u32 obs dim, u32 action count, u32 hidden, u64 length +
/// floats. All integers and floats little-endian.
struct Checkpoint {
  SubPolicySet subs;
  std::optional<MasterPolicy> master;
};

void save_checkpoint(const std::string& path, const SubPolicySet& subs,
                     const MasterPolicy* master = nullptr);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace mlsh
