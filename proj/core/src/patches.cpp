#include "d2lv/patches.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <ostream>

#include "d2lv/errors.hpp"

namespace d2lv {
namespace {

constexpr std::string_view kRuleNames[] = {
    "identity",     "rot90",    "rot180",    "rot270",    "center-exact",
    "center-third", "grid-2x2", "grid-3x3",  "proposals", "detector-boxes",
};

ImageBuffer rotated_pixels(const ImageBuffer& img, int degrees) {
  return degrees == 0 ? img : img::rotate_right_angle(img, degrees);
}

Patch whole_frame_patch(const ImageId& id, const ImageBuffer& img, std::string patch_id,
                        int degrees) {
  Patch p;
  p.source = id;
  p.patch_id = std::move(patch_id);
  p.box = BoundingBox{0, 0, img.width, img.height};
  p.rotation = degrees;
  p.whole_frame = true;
  p.pixels = rotated_pixels(img, degrees);
  return p;
}

Patch box_patch(const ImageId& id, const ImageBuffer& img, std::string patch_id,
                const BoundingBox& box) {
  Patch p;
  p.source = id;
  p.patch_id = std::move(patch_id);
  p.box = box;
  p.rotation = 0;
  p.whole_frame = false;
  p.pixels = img::crop(img, box);
  return p;
}

// 8-connected components over a boolean mask, explicit stack.
std::vector<BoundingBox> component_boxes(const std::vector<char>& mask, int w, int h) {
  std::vector<char> seen(mask.size(), 0);
  std::vector<BoundingBox> boxes;
  std::vector<std::pair<int, int>> stack;
  for (int y0 = 0; y0 < h; ++y0) {
    for (int x0 = 0; x0 < w; ++x0) {
      const std::size_t start = static_cast<std::size_t>(y0) * w + x0;
      if (!mask[start] || seen[start]) continue;
      int min_x = x0, max_x = x0, min_y = y0, max_y = y0;
      seen[start] = 1;
      stack.clear();
      stack.emplace_back(x0, y0);
      while (!stack.empty()) {
        const auto [x, y] = stack.back();
        stack.pop_back();
        min_x = std::min(min_x, x);
        max_x = std::max(max_x, x);
        min_y = std::min(min_y, y);
        max_y = std::max(max_y, y);
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            const int nx = x + dx, ny = y + dy;
            if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
            const std::size_t ni = static_cast<std::size_t>(ny) * w + nx;
            if (!mask[ni] || seen[ni]) continue;
            seen[ni] = 1;
            stack.emplace_back(nx, ny);
          }
        }
      }
      boxes.push_back(BoundingBox{min_x, min_y, max_x - min_x + 1, max_y - min_y + 1});
    }
  }
  return boxes;
}

BoundingBox union_box(const BoundingBox& a, const BoundingBox& b) {
  const int x0 = std::min(a.x, b.x);
  const int y0 = std::min(a.y, b.y);
  const int x1 = std::max(a.x + a.w, b.x + b.w);
  const int y1 = std::max(a.y + a.h, b.y + b.h);
  return BoundingBox{x0, y0, x1 - x0, y1 - y0};
}

void append_min_filtered(std::vector<Patch>& out, std::vector<Patch>&& candidates,
                         int min_side) {
  for (Patch& p : candidates) {
    if (!p.whole_frame && std::min(p.box.w, p.box.h) < min_side) continue;
    out.push_back(std::move(p));
  }
}

std::vector<Patch> run_plan(const ImageId& id, const ImageBuffer& img, const PatchPlan& plan,
                            const DetectorHook* detector) {
  if (!img.valid()) throw DomainError("patches: invalid image");
  std::vector<Patch> out;
  for (PatchRule rule : plan.steps) {
    switch (rule) {
      case PatchRule::kIdentity:
        out.push_back(whole_frame_patch(id, img, "orig", 0));
        break;
      case PatchRule::kRotate90:
        out.push_back(whole_frame_patch(id, img, "rot90", 90));
        break;
      case PatchRule::kRotate180:
        out.push_back(whole_frame_patch(id, img, "rot180", 180));
        break;
      case PatchRule::kRotate270:
        out.push_back(whole_frame_patch(id, img, "rot270", 270));
        break;
      case PatchRule::kCenterExact:
        out.push_back(box_patch(id, img, "c-exact",
                                center_crop_box(img.width, img.height, plan.center_exact_ratio)));
        break;
      case PatchRule::kCenterThird:
        out.push_back(box_patch(id, img, "c-third",
                                center_crop_box(img.width, img.height, plan.center_third_ratio)));
        break;
      case PatchRule::kGrid2x2: {
        int i = 0;
        for (const BoundingBox& b : grid_boxes(img.width, img.height, 2)) {
          out.push_back(box_patch(id, img, "g4-" + std::to_string(i++), b));
        }
        break;
      }
      case PatchRule::kGrid3x3: {
        int i = 0;
        for (const BoundingBox& b : grid_boxes(img.width, img.height, 3)) {
          out.push_back(box_patch(id, img, "g9-" + std::to_string(i++), b));
        }
        break;
      }
      case PatchRule::kProposals: {
        if (plan.max_proposals <= 0) break;
        int i = 0;
        for (const BoundingBox& b :
             proposal_regions(img, plan.max_proposals, plan.min_query_side)) {
          out.push_back(box_patch(id, img, "prop-" + std::to_string(i++), b));
        }
        break;
      }
      case PatchRule::kDetectorBoxes: {
        if (detector == nullptr || !*detector) break; // stub: no boxes
        std::vector<BoundingBox> boxes;
        try {
          boxes = (*detector)(img);
        } catch (const std::exception& e) {
          std::cerr << "warning: overlay detector failed, continuing without boxes: "
                    << e.what() << "\n";
          break;
        }
        std::vector<BoundingBox> kept;
        int i = 0;
        for (const BoundingBox& raw : boxes) {
          const BoundingBox b = raw.clipped(img.width, img.height);
          if (b.w < 1 || b.h < 1) continue;
          if (std::find(kept.begin(), kept.end(), b) != kept.end()) continue;
          kept.push_back(b);
          out.push_back(box_patch(id, img, "det-" + std::to_string(i++), b));
        }
        break;
      }
    }
  }
  return out;
}

} // namespace

std::string_view to_string(PatchRule rule) { return kRuleNames[static_cast<int>(rule)]; }

PatchRule parse_patch_rule(std::string_view name) {
  for (std::size_t i = 0; i < std::size(kRuleNames); ++i) {
    if (kRuleNames[i] == name) return static_cast<PatchRule>(i);
  }
  throw ConfigError("unknown patch rule: " + std::string(name));
}

PatchPlan PatchPlan::default_query() {
  PatchPlan plan;
  plan.name = "default-query";
  plan.steps = {PatchRule::kIdentity,    PatchRule::kRotate90,  PatchRule::kRotate180,
                PatchRule::kRotate270,   PatchRule::kCenterExact, PatchRule::kCenterThird,
                PatchRule::kProposals,   PatchRule::kDetectorBoxes};
  return plan;
}

PatchPlan PatchPlan::default_reference() {
  PatchPlan plan;
  plan.name = "default-reference";
  plan.steps = {PatchRule::kIdentity,  PatchRule::kRotate90,    PatchRule::kRotate180,
                PatchRule::kRotate270, PatchRule::kGrid2x2,     PatchRule::kGrid3x3,
                PatchRule::kCenterExact, PatchRule::kCenterThird};
  return plan;
}

bool is_whole_frame_patch(std::string_view patch_id) {
  return patch_id == "orig" || patch_id == "rot90" || patch_id == "rot180" ||
         patch_id == "rot270";
}

BoundingBox center_crop_box(int frame_w, int frame_h, double ratio) {
  const int w = std::max(1, static_cast<int>(std::lround(frame_w * ratio)));
  const int h = std::max(1, static_cast<int>(std::lround(frame_h * ratio)));
  return BoundingBox{(frame_w - w) / 2, (frame_h - h) / 2, w, h};
}

BoundingBox center_crop(const ImageBuffer& img, CenterMode mode) {
  if (!img.valid()) throw DomainError("center_crop: invalid image");
  const double ratio = mode == CenterMode::kExact ? 0.5 : 1.0 / 3.0;
  return center_crop_box(img.width, img.height, ratio);
}

std::vector<BoundingBox> grid_boxes(int frame_w, int frame_h, int n) {
  if (n < 1 || frame_w < n || frame_h < n) {
    throw DomainError("grid_boxes: frame smaller than grid");
  }
  std::vector<BoundingBox> out;
  out.reserve(static_cast<std::size_t>(n) * n);
  for (int row = 0; row < n; ++row) {
    const int y0 = row * frame_h / n;
    const int y1 = (row + 1) * frame_h / n;
    for (int col = 0; col < n; ++col) {
      const int x0 = col * frame_w / n;
      const int x1 = (col + 1) * frame_w / n;
      out.push_back(BoundingBox{x0, y0, x1 - x0, y1 - y0});
    }
  }
  return out;
}

std::vector<BoundingBox> proposal_regions(const ImageBuffer& img, int max_k, int min_side) {
  if (!img.valid()) throw DomainError("proposal_regions: invalid image");
  if (max_k <= 0) return {};
  const int w = img.width, h = img.height;
  const std::vector<float> luma = img::luma_f32(img);

  // Central-difference gradient magnitude; borders contribute zero.
  std::vector<float> mag(luma.size(), 0.0f);
  for (int y = 1; y + 1 < h; ++y) {
    for (int x = 1; x + 1 < w; ++x) {
      const float gx = (luma[static_cast<std::size_t>(y) * w + x + 1] -
                        luma[static_cast<std::size_t>(y) * w + x - 1]) * 0.5f;
      const float gy = (luma[(static_cast<std::size_t>(y) + 1) * w + x] -
                        luma[(static_cast<std::size_t>(y) - 1) * w + x]) * 0.5f;
      mag[static_cast<std::size_t>(y) * w + x] = std::sqrt(gx * gx + gy * gy);
    }
  }

  std::vector<float> sorted = mag;
  std::sort(sorted.begin(), sorted.end());
  // Floor at ~2/255 so quantization dither on near-flat regions never counts
  // as edge evidence (luma is scaled to [0, 1]).
  const float threshold = std::max(sorted[(sorted.size() - 1) * 3 / 4], 0.008f);

  std::vector<char> mask(mag.size(), 0);
  bool any = false;
  for (std::size_t i = 0; i < mag.size(); ++i) {
    mask[i] = mag[i] > threshold ? 1 : 0;
    any = any || mask[i];
  }
  if (!any) return {};

  std::vector<BoundingBox> boxes = component_boxes(mask, w, h);

  // Merge overlapping boxes (IoU > 0.5) to a fixpoint.
  bool merged = true;
  while (merged) {
    merged = false;
    for (std::size_t i = 0; i < boxes.size() && !merged; ++i) {
      for (std::size_t j = i + 1; j < boxes.size() && !merged; ++j) {
        if (boxes[i].iou(boxes[j]) > 0.5) {
          boxes[i] = union_box(boxes[i], boxes[j]);
          boxes.erase(boxes.begin() + static_cast<std::ptrdiff_t>(j));
          merged = true;
        }
      }
    }
  }

  boxes.erase(std::remove_if(boxes.begin(), boxes.end(),
                             [&](const BoundingBox& b) {
                               return std::min(b.w, b.h) < min_side;
                             }),
              boxes.end());

  // The mask marks boundary pixels and the central difference spreads them one
  // more pixel outward, so tighten each box by that halo when it stays legal.
  for (BoundingBox& b : boxes) {
    const BoundingBox inset{b.x + 2, b.y + 2, b.w - 4, b.h - 4};
    if (std::min(inset.w, inset.h) >= min_side) b = inset;
  }
  std::sort(boxes.begin(), boxes.end(), [](const BoundingBox& a, const BoundingBox& b) {
    if (a.area() != b.area()) return a.area() > b.area();
    if (a.x != b.x) return a.x < b.x;
    return a.y < b.y;
  });
  if (boxes.size() > static_cast<std::size_t>(max_k)) boxes.resize(static_cast<std::size_t>(max_k));
  return boxes;
}

std::vector<Patch> query_patches(const ImageId& id, const ImageBuffer& img,
                                 const PatchPlan& plan, const DetectorHook& detector) {
  std::vector<Patch> raw = run_plan(id, img, plan, &detector);
  std::vector<Patch> out;
  out.reserve(raw.size());
  append_min_filtered(out, std::move(raw), plan.min_query_side);
  return out;
}

std::vector<Patch> reference_patches(const ImageId& id, const ImageBuffer& img,
                                     const PatchPlan& plan) {
  if (img.width < 3 || img.height < 3) {
    throw DomainError("reference_patches: image must be at least 3x3");
  }
  return run_plan(id, img, plan, nullptr);
}

void write_patch_boxes(const std::vector<Patch>& patches, std::ostream& sink) {
  sink << "image_id,patch_id,x,y,w,h,rot\n";
  for (const Patch& p : patches) {
    sink << p.source.str() << ',' << p.patch_id << ',' << p.box.x << ',' << p.box.y << ','
         << p.box.w << ',' << p.box.h << ',' << p.rotation << '\n';
  }
}

} // namespace d2lv
