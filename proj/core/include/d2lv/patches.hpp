#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "d2lv/image.hpp"
#include "d2lv/types.hpp"

namespace d2lv {

// One step of a patch plan. Deterministic rules produce fixed boxes;
// proposals/detector-boxes are deterministic given the image.
enum class PatchRule {
  kIdentity,
  kRotate90,
  kRotate180,
  kRotate270,
  kCenterExact,
  kCenterThird,
  kGrid2x2,
  kGrid3x3,
  kProposals,
  kDetectorBoxes,
};

std::string_view to_string(PatchRule rule);
PatchRule parse_patch_rule(std::string_view name);

struct PatchPlan {
  std::string name;
  std::vector<PatchRule> steps;
  int max_proposals = 4;   // K for the proposals rule; 0 disables it
  int min_query_side = 32; // min-size filter, applied to query patches only
  double center_exact_ratio = 0.5;
  double center_third_ratio = 1.0 / 3.0;

  // orig + 3 rotations + 2 center crops + proposals + detector boxes.
  static PatchPlan default_query();
  // orig + 3 rotations + 2x2 grid + 3x3 grid + 2 center crops = 19 patches.
  static PatchPlan default_reference();
};

struct Patch {
  ImageId source;
  std::string patch_id; // "orig", "rot90", "c-exact", "g4-2", "prop-0", "det-1", ...
  BoundingBox box;      // source-frame coordinates (pre-rotation)
  int rotation = 0;     // degrees, one of {0, 90, 180, 270}
  bool whole_frame = false;
  ImageBuffer pixels;
};

// Whole-frame patch ids ("orig" and the right-angle rotations) carry global
// features; everything else is local. The trick stage and the matcher key off
// this split.
bool is_whole_frame_patch(std::string_view patch_id);

enum class CenterMode { kExact, kOneThird };

// Centered box of ratio x ratio of the frame (exact: 1/2, one-third: 1/3);
// sides clamp up to 1 px.
BoundingBox center_crop(const ImageBuffer& img, CenterMode mode);
BoundingBox center_crop_box(int frame_w, int frame_h, double ratio);

// n x n partition with integer boundaries i*dim/n: disjoint, full coverage.
std::vector<BoundingBox> grid_boxes(int frame_w, int frame_h, int n);

// Deterministic region proposer: gradient-magnitude saliency, threshold at
// the 75th percentile (strict >), 8-connected components, merge IoU > 0.5,
// keep the max_k largest by area with min side >= min_side.
std::vector<BoundingBox> proposal_regions(const ImageBuffer& img, int max_k, int min_side);

// Overlay detector hook. An empty function is the stub (no boxes). A hook
// that throws degrades to zero boxes with a stderr warning. Returned boxes
// are clipped to the frame and deduplicated.
using DetectorHook = std::function<std::vector<BoundingBox>(const ImageBuffer&)>;

std::vector<Patch> query_patches(const ImageId& id, const ImageBuffer& img,
                                 const PatchPlan& plan, const DetectorHook& detector = {});

std::vector<Patch> reference_patches(const ImageId& id, const ImageBuffer& img,
                                     const PatchPlan& plan);

// CSV dump: header "image_id,patch_id,x,y,w,h,rot".
void write_patch_boxes(const std::vector<Patch>& patches, std::ostream& sink);

} // namespace d2lv
