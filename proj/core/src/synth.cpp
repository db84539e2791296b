#include "d2lv/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "d2lv/errors.hpp"
#include "d2lv/image.hpp"
#include "d2lv/io.hpp"
#include "d2lv/parallel.hpp"
#include "d2lv/rng.hpp"

namespace fs = std::filesystem;

namespace d2lv {
namespace {

std::string ref_id(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "R%06d", i);
  return buf;
}

std::string query_id(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "Q%06d", i);
  return buf;
}

void fill_circle(ImageBuffer& img, int cx, int cy, int radius, std::uint8_t r, std::uint8_t g,
                 std::uint8_t b) {
  const std::int64_t r2 = static_cast<std::int64_t>(radius) * radius;
  const int y0 = std::max(0, cy - radius), y1 = std::min(img.height - 1, cy + radius);
  const int x0 = std::max(0, cx - radius), x1 = std::min(img.width - 1, cx + radius);
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const std::int64_t dx = x - cx, dy = y - cy;
      if (dx * dx + dy * dy <= r2) {
        img.at(x, y, 0) = r;
        img.at(x, y, 1) = g;
        img.at(x, y, 2) = b;
      }
    }
  }
}

ImageBuffer gradient_background(int side, Rng& rng) {
  std::uint8_t c0[3], c1[3];
  for (auto& c : c0) c = static_cast<std::uint8_t>(rng.index(256));
  for (auto& c : c1) c = static_cast<std::uint8_t>(rng.index(256));
  const bool horizontal = rng.chance(0.5);
  ImageBuffer img(side, side);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const double t = side > 1 ? static_cast<double>(horizontal ? x : y) / (side - 1) : 0.0;
      for (int c = 0; c < 3; ++c) {
        img.at(x, y, c) = static_cast<std::uint8_t>(
            std::lround(c0[c] + (static_cast<double>(c1[c]) - c0[c]) * t));
      }
    }
  }
  return img;
}

// Random colored shape composition drawn from the given stream.
ImageBuffer composition(int side, Rng& rng) {
  ImageBuffer img = gradient_background(side, rng);
  const int shapes = rng.uniform_int(4, 8);
  for (int s = 0; s < shapes; ++s) {
    const std::uint8_t r = static_cast<std::uint8_t>(rng.index(256));
    const std::uint8_t g = static_cast<std::uint8_t>(rng.index(256));
    const std::uint8_t b = static_cast<std::uint8_t>(rng.index(256));
    if (rng.chance(0.5)) {
      const int w = std::max(4, static_cast<int>(std::lround(rng.uniform(0.1, 0.4) * side)));
      const int h = std::max(4, static_cast<int>(std::lround(rng.uniform(0.1, 0.4) * side)));
      const int x = static_cast<int>(rng.index(static_cast<std::size_t>(std::max(1, side - w + 1))));
      const int y = static_cast<int>(rng.index(static_cast<std::size_t>(std::max(1, side - h + 1))));
      img::fill_rect(img, BoundingBox{x, y, w, h}, r, g, b);
    } else {
      const int radius = std::max(3, static_cast<int>(std::lround(rng.uniform(0.05, 0.2) * side)));
      const int cx = static_cast<int>(rng.index(static_cast<std::size_t>(side)));
      const int cy = static_cast<int>(rng.index(static_cast<std::size_t>(side)));
      fill_circle(img, cx, cy, radius, r, g, b);
    }
  }
  return img;
}

ImageBuffer make_reference(const SynthConfig& cfg, int index) {
  Rng rng(derive_stream_seed(cfg.seed, ref_id(index), 0));
  return composition(cfg.side, rng);
}

BoundingBox draw_subwindow(Rng& rng, int side, double area_min, double area_max) {
  const double area = rng.uniform(area_min, area_max) * side * side;
  const double aspect = rng.uniform(0.8, 1.25);
  int w = static_cast<int>(std::lround(std::sqrt(area * aspect)));
  int h = static_cast<int>(std::lround(std::sqrt(area / aspect)));
  w = std::clamp(w, 16, side);
  h = std::clamp(h, 16, side);
  const int x = static_cast<int>(rng.index(static_cast<std::size_t>(side - w) + 1));
  const int y = static_cast<int>(rng.index(static_cast<std::size_t>(side - h) + 1));
  return BoundingBox{x, y, w, h};
}

} // namespace

void SynthConfig::validate() const {
  if (n_refs < 0 || n_overlay_queries < 0 || n_crop_queries < 0 || n_distractors < 0) {
    throw ConfigError("synth config: counts must be >= 0");
  }
  if ((n_overlay_queries > 0 || n_crop_queries > 0) && n_refs == 0) {
    throw ConfigError("synth config: matched queries require at least one reference");
  }
  if (side < 32) throw ConfigError("synth config: side must be >= 32");
}

SynthResult synth_bench(const SynthConfig& config, const fs::path& out_dir) {
  config.validate();
  const fs::path refs_dir = out_dir / "refs";
  const fs::path queries_dir = out_dir / "queries";
  fs::create_directories(refs_dir);
  fs::create_directories(queries_dir);

  SynthResult result;
  result.references.reserve(static_cast<std::size_t>(config.n_refs));
  for (int i = 0; i < config.n_refs; ++i) {
    result.references.emplace_back(ImageId(ref_id(i)), refs_dir / (ref_id(i) + ".ppm"));
  }

  parallel_for(static_cast<std::size_t>(config.n_refs), config.jobs,
               [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      io::save_ppm(make_reference(config, static_cast<int>(i)), result.references[i].second);
    }
  });

  const int n_queries = config.n_overlay_queries + config.n_crop_queries + config.n_distractors;
  result.queries.reserve(static_cast<std::size_t>(n_queries));
  for (int i = 0; i < n_queries; ++i) {
    result.queries.emplace_back(ImageId(query_id(i)), queries_dir / (query_id(i) + ".ppm"));
  }
  std::vector<SynthResult::OverlayBox> boxes(static_cast<std::size_t>(config.n_overlay_queries));
  std::vector<std::pair<ImageId, ImageId>> gt(
      static_cast<std::size_t>(config.n_overlay_queries + config.n_crop_queries));

  parallel_for(static_cast<std::size_t>(n_queries), config.jobs,
               [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const int qi = static_cast<int>(i);
      const std::string qid = query_id(qi);
      Rng rng(derive_stream_seed(config.seed, qid, 0));
      ImageBuffer img;
      if (qi < config.n_overlay_queries) {
        // Plain backdrop: the pasted region stays the dominant gradient blob,
        // which is what overlay copies look like in the wild (solid walls,
        // paper, screenshots).
        img = gradient_background(config.side, rng);
        const int target = static_cast<int>(rng.index(static_cast<std::size_t>(config.n_refs)));
        const BoundingBox box = draw_subwindow(rng, config.side, 0.15, 0.35);
        const ImageBuffer pasted =
            img::resize_bilinear(make_reference(config, target), box.w, box.h);
        img::paste(img, pasted, box.x, box.y);
        boxes[i] = SynthResult::OverlayBox{ImageId(qid), box};
        gt[i] = {ImageId(qid), ImageId(ref_id(target))};
      } else if (qi < config.n_overlay_queries + config.n_crop_queries) {
        const int target = static_cast<int>(rng.index(static_cast<std::size_t>(config.n_refs)));
        const BoundingBox box = draw_subwindow(rng, config.side, 0.25, 0.50);
        img = img::crop(make_reference(config, target), box);
        gt[i] = {ImageId(qid), ImageId(ref_id(target))};
      } else {
        img = composition(config.side, rng);
      }
      io::save_ppm(img, result.queries[i].second);
    }
  });

  result.overlay_boxes = std::move(boxes);
  result.ground_truth = std::move(gt);

  result.gt_csv = out_dir / "gt.csv";
  {
    std::ofstream out(result.gt_csv);
    if (!out) throw IoError("cannot write ground truth: " + result.gt_csv.string());
    io::write_ground_truth(result.ground_truth, out);
  }

  result.boxes_csv = out_dir / "overlay_boxes.csv";
  {
    std::ofstream out(result.boxes_csv);
    if (!out) throw IoError("cannot write overlay boxes: " + result.boxes_csv.string());
    out << "query_id,x,y,w,h\n";
    for (const auto& ob : result.overlay_boxes) {
      out << ob.query.str() << ',' << ob.box.x << ',' << ob.box.y << ',' << ob.box.w << ','
          << ob.box.h << '\n';
    }
  }
  return result;
}

} // namespace d2lv
