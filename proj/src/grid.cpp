#include "cellpeel/grid.hpp"

#include <string>

namespace cellpeel {

void VolumeMeta::validate() const {
  if (dims.nx < 1 || dims.ny < 1 || dims.nz < 1)
    throw InvalidArgument("volume-io", "volume dimensions must all be >= 1");
  if (!(spacing.x > 0.0) || !(spacing.y > 0.0) || !(spacing.z > 0.0))
    throw InvalidArgument("volume-io", "voxel spacing must be positive");
  if (frame_interval && !(*frame_interval > 0.0))
    throw InvalidArgument("volume-io", "frame interval must be positive");
}

}  // namespace cellpeel
