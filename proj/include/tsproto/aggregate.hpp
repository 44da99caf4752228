#pragma once

#include <string>
#include <vector>

#include "tsproto/types.hpp"

namespace tsproto {

/**
 * Rasters are integer matrices. Label rasters use -1 for void pixels;
 * instance rasters use non-negative ids with 0 reserved for "remaining"
 * (pixels outside any instance).
 */

/**
 * Majority vote inside each instance: every labeled pixel of instance i
 * receives the modal label over i's non-void pixels (ties to the lowest
 * label). Void pixels take no part in the vote and stay void; pixels with
 * instance id 0 are left unchanged. Idempotent.
 */
IntMatrix aggregate_instances(const IntMatrix& labels, const IntMatrix& instances);

/**
 * Sliding modal filter: each pixel takes the most frequent non-void label
 * inside the centered window (odd size), clipped at the borders; ties to
 * the lowest label; all-void windows stay void.
 */
IntMatrix aggregate_sliding_window(const IntMatrix& labels, int window = 5);

/**
 * Combines instance maps of the same scene: pixels belong to the same
 * output instance iff their per-frame id tuples agree and they touch within
 * 4-connectivity. Output ids start at 1 in scan order; the result refines
 * every input partition.
 */
IntMatrix intersect_instance_maps(const std::vector<IntMatrix>& frames);

/**
 * Keeps the instances of `fine` that survive erosion by a solid 3x3 kernel
 * (pixels outside the image count as background). Every pixel of a dropped
 * instance joins the surviving instance whose per-frame id tuple differs
 * from its own in the fewest frames; ties resolve to the lowest instance
 * id. If nothing survives, all pixels collapse into one instance and a
 * warning is printed. `fine` must come from intersect_instance_maps over
 * the same frames.
 */
IntMatrix filter_and_assign(const IntMatrix& fine,
                            const std::vector<IntMatrix>& frames);

/**
 * Raster file formats: text is a `H=<int>,W=<int>` header followed by H
 * CSV rows; binary starts with magic `PTR1` and little-endian int32 fields.
 * Reading sniffs the magic bytes.
 */
IntMatrix read_raster(const std::string& path);
void write_raster(const IntMatrix& raster, const std::string& path);
void write_raster_binary(const IntMatrix& raster, const std::string& path);

}  // namespace tsproto
