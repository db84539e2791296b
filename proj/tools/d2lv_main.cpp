// d2lv command-line front end: thin deterministic wrappers over the library
// modules. Exit codes: 0 success, 2 usage/config problems (bad flags, missing
// files, invalid config), 1 runtime failures. Errors are single lines on
// stderr; data goes to files or stdout, progress counters to stderr.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"

#include "d2lv/augment.hpp"
#include "d2lv/config.hpp"
#include "d2lv/errors.hpp"
#include "d2lv/evaluation.hpp"
#include "d2lv/features.hpp"
#include "d2lv/io.hpp"
#include "d2lv/learncore.hpp"
#include "d2lv/matching.hpp"
#include "d2lv/patches.hpp"
#include "d2lv/synth.hpp"
#include "d2lv/types.hpp"

namespace fs = std::filesystem;

namespace {

const char* kAugmentKeys =
    "Config keys read ([augment]): side, probability, crop_scale_min/max,\n"
    "crop_aspect_min/max, rotation_max_degrees, rotation_discrete_prob,\n"
    "pixelize_block_min/max, shuffle_grid, perspective_strength, pad_min/max,\n"
    "underlay_scale_min/max, overlay_scale_min/max, jitter_brightness,\n"
    "jitter_contrast, jitter_saturation, jitter_hue, blur_sigma_min/max,\n"
    "emoji_count_min/max, emoji_scale_min/max, text_len_min/max,\n"
    "text_scale_min/max, super_blur_sigma_min/max, super_color_factor,\n"
    "super_dark_min/max, super_face_scale_min/max, super_opaque_min/max,\n"
    "occlude_count_min/max, occlude_area_max, underlay_dir, overlay_dir,\n"
    "face_dir; ([pipeline]): seed, jobs.";

const char* kPatchKeys =
    "Config keys read ([patches]): query_plan, reference_plan, max_proposals,\n"
    "min_query_side, center_exact_ratio, center_third_ratio.";

const char* kFeatureKeys =
    "Config keys read ([features]): model, grid, scales, pca, whiten;\n"
    "([patches]): query_plan, reference_plan, max_proposals, min_query_side,\n"
    "center_exact_ratio, center_third_ratio; ([pipeline]): jobs.";

const char* kMatchKeys =
    "Config keys read ([matching]): specs, partial_penalty, top2_average,\n"
    "top_t; ([pipeline]): jobs.";

d2lv::PipelineConfig load_config(const std::string& path) {
  d2lv::PipelineConfig cfg =
      path.empty() ? d2lv::PipelineConfig{} : d2lv::PipelineConfig::load(path);
  cfg.validate();
  return cfg;
}

std::vector<fs::path> list_ppms(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw d2lv::IoError("not a directory: " + dir.string());
  }
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".ppm") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::pair<d2lv::ImageId, fs::path>> id_paths(const std::vector<fs::path>& files) {
  std::vector<std::pair<d2lv::ImageId, fs::path>> out;
  out.reserve(files.size());
  for (const auto& f : files) out.emplace_back(d2lv::ImageId(f.stem().string()), f);
  return out;
}

d2lv::AssetPools load_pools(const d2lv::PipelineConfig& cfg) {
  d2lv::AssetPools pools;
  if (!cfg.underlay_dir.empty()) pools.underlays = d2lv::AssetPool::from_directory(cfg.underlay_dir);
  if (!cfg.overlay_dir.empty()) pools.overlays = d2lv::AssetPool::from_directory(cfg.overlay_dir);
  if (!cfg.face_dir.empty()) pools.faces = d2lv::AssetPool::from_directory(cfg.face_dir);
  return pools;
}

std::ofstream open_sink(const std::string& path) {
  std::ofstream sink(path, std::ios::binary);
  if (!sink) throw d2lv::IoError("cannot open for writing: " + path);
  return sink;
}

// --- subcommand state -------------------------------------------------------

struct CorpusArgs {
  std::string sources, out, set_name = "basic", config;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int jobs = -1;
};

struct PatchArgs {
  std::string ref, query, config, out;
};

struct ExtractArgs {
  std::string images, manifest, out, config, pca;
  bool queries = false;
  int jobs = -1;
};

struct PcaFitArgs {
  std::string store, out;
  unsigned dim = 256;
  bool whiten = false;
};

struct PcaApplyArgs {
  std::string store, model, out;
};

struct MatchArgs {
  std::string queries, refs, out, config, specs;
  long long top_t = -1;
  double partial_penalty = -1.0;
  bool top2 = false;
  int jobs = -1;
};

struct EvalArgs {
  std::string pairs, gt, curve;
  std::uint64_t total = 0;
};

struct ScheduleArgs {
  d2lv::learncore::ScheduleConfig cfg;
  std::string out;
};

struct SynthArgs {
  std::string out;
  d2lv::SynthConfig cfg;
  int jobs = 0;
};

// --- subcommand bodies ------------------------------------------------------

int run_corpus(const CorpusArgs& a) {
  d2lv::PipelineConfig cfg = load_config(a.config);
  if (a.seed_set) cfg.seed = a.seed;
  if (a.jobs >= 0) cfg.jobs = static_cast<unsigned>(a.jobs);

  const auto sets = d2lv::enumerate_sets(cfg.augment);
  const d2lv::AugmentationSet* chosen = nullptr;
  for (const auto& s : sets) {
    if (s.name == a.set_name) chosen = &s;
  }
  if (!chosen) throw d2lv::ConfigError("unknown augmentation set '" + a.set_name + "'");

  const auto sources = list_ppms(a.sources);
  if (sources.empty()) throw d2lv::IoError("no .ppm sources under " + a.sources);

  const d2lv::AssetPools pools = load_pools(cfg);
  const d2lv::SeedPolicy policy{cfg.seed};
  const auto manifest = d2lv::generate_corpus(sources, *chosen, cfg.augment, pools, policy,
                                              a.out, static_cast<int>(cfg.jobs));
  manifest.write(fs::path(a.out) / "manifest.csv");
  std::cerr << "corpus: " << manifest.entries.size() << " files, "
            << manifest.entries.size() / d2lv::kVariantsPerIdentity << " identities, "
            << manifest.skipped.size() << " skipped\n";
  return 0;
}

int run_patches(const PatchArgs& a) {
  if (a.ref.empty() == a.query.empty()) {
    throw d2lv::ConfigError("exactly one of --ref / --query is required");
  }
  const d2lv::PipelineConfig cfg = load_config(a.config);
  const fs::path img_path = a.ref.empty() ? a.query : a.ref;
  const d2lv::ImageBuffer img = d2lv::io::load_ppm(img_path);
  const d2lv::ImageId id(img_path.stem().string());

  const auto patches = a.ref.empty()
                           ? d2lv::query_patches(id, img, cfg.query_plan)
                           : d2lv::reference_patches(id, img, cfg.reference_plan);
  if (a.out.empty()) {
    d2lv::write_patch_boxes(patches, std::cout);
  } else {
    auto sink = open_sink(a.out);
    d2lv::write_patch_boxes(patches, sink);
  }
  return 0;
}

int run_extract(const ExtractArgs& a) {
  if (a.images.empty() == a.manifest.empty()) {
    throw d2lv::ConfigError("exactly one of --images / --manifest is required");
  }
  d2lv::PipelineConfig cfg = load_config(a.config);
  if (a.jobs >= 0) cfg.jobs = static_cast<unsigned>(a.jobs);
  if (!a.pca.empty()) cfg.pca_path = a.pca;

  std::vector<std::pair<d2lv::ImageId, fs::path>> images;
  if (!a.images.empty()) {
    images = id_paths(list_ppms(a.images));
  } else {
    const auto manifest = d2lv::CorpusManifest::read(a.manifest);
    for (const auto& e : manifest.entries) {
      images.emplace_back(d2lv::ImageId(fs::path(e.path).stem().string()), e.path);
    }
  }
  if (images.empty()) throw d2lv::IoError("no input images");

  const d2lv::TiledDescriptor model(cfg.model_id, cfg.descriptor_grid);
  std::optional<d2lv::PcaModel> pca;
  if (!cfg.pca_path.empty()) pca = d2lv::PcaModel::load(cfg.pca_path);

  d2lv::ExtractOptions opt;
  opt.scales = cfg.scales;
  opt.pca = pca ? &*pca : nullptr;
  opt.queries = a.queries;
  opt.jobs = cfg.jobs;

  const auto& plan = a.queries ? cfg.query_plan : cfg.reference_plan;
  const auto store = d2lv::extract_all(images, plan, model, opt);
  d2lv::io::save_feature_store(store, a.out);
  std::cerr << "extract: " << store.size() << " records, dim " << store.dim() << "\n";
  return 0;
}

int run_pca_fit(const PcaFitArgs& a) {
  const auto store = d2lv::io::load_feature_store(a.store);
  std::vector<std::vector<float>> samples;
  samples.reserve(store.size());
  for (const auto& r : store.records()) samples.push_back(r.vector);
  const auto model = d2lv::pca_fit(samples, a.dim, a.whiten);
  model.save(a.out);
  std::cerr << "pca-fit: " << model.d_raw << " -> " << model.d_out << "\n";
  return 0;
}

int run_pca_apply(const PcaApplyArgs& a) {
  const auto store = d2lv::io::load_feature_store(a.store);
  const auto model = d2lv::PcaModel::load(a.model);
  d2lv::FeatureStore projected(model.d_out);
  std::size_t flagged = 0;
  for (const auto& r : store.records()) {
    auto proj = d2lv::pca_project(model, r.vector);
    flagged += proj.flagged_zero ? 1 : 0;
    d2lv::FeatureRecord out = r;
    out.vector = std::move(proj.vector);
    projected.append(std::move(out));
  }
  d2lv::io::save_feature_store(projected, a.out);
  std::cerr << "pca-apply: " << projected.size() << " records, " << flagged
            << " flagged near-zero\n";
  return 0;
}

int run_match(const MatchArgs& a) {
  d2lv::PipelineConfig cfg = load_config(a.config);
  if (a.jobs >= 0) cfg.jobs = static_cast<unsigned>(a.jobs);
  if (!a.specs.empty()) cfg.specs_path = a.specs;
  if (a.top_t >= 0) cfg.top_t = static_cast<std::size_t>(a.top_t);
  if (a.partial_penalty >= 0.0) cfg.tricks.partial_penalty = a.partial_penalty;
  if (a.top2) cfg.tricks.top2_average = true;
  cfg.tricks.validate();

  const auto queries = d2lv::io::load_feature_store(a.queries);
  const auto refs = d2lv::io::load_feature_store(a.refs);

  d2lv::MatchOptions opt;
  if (!cfg.specs_path.empty()) opt.specs = d2lv::EnsembleSpec::parse_file(cfg.specs_path);
  opt.tricks = cfg.tricks;
  opt.top_t = cfg.top_t;
  opt.jobs = cfg.jobs;

  const auto ranked = d2lv::match_pipeline(queries, refs, opt);
  if (a.out.empty()) {
    d2lv::io::write_pairs(ranked.pairs(), std::cout);
  } else {
    auto sink = open_sink(a.out);
    d2lv::io::write_pairs(ranked.pairs(), sink);
  }
  std::cerr << "match: " << ranked.size() << " pairs\n";
  return 0;
}

int run_eval(const EvalArgs& a) {
  const auto pairs = d2lv::io::load_pairs(a.pairs);
  const auto gt_rows = d2lv::io::load_ground_truth(a.gt);
  const auto ranked = d2lv::eval::RankedPairList::from_pairs(pairs);
  const auto gt = d2lv::eval::GroundTruth::from_pairs(gt_rows, a.total);

  std::printf("uAP=%.6f\n", d2lv::eval::micro_ap(ranked, gt));
  std::printf("R@P90=%.6f\n", d2lv::eval::recall_at_precision(ranked, gt, 0.90));
  if (!a.curve.empty()) {
    auto sink = open_sink(a.curve);
    sink << "rank,recall,precision\n";
    const auto curve = d2lv::eval::pr_curve(ranked, gt);
    char line[96];
    for (std::size_t i = 0; i < curve.size(); ++i) {
      std::snprintf(line, sizeof line, "%zu,%.6f,%.6f\n", i + 1, curve[i].first,
                    curve[i].second);
      sink << line;
    }
  }
  return 0;
}

int run_schedule(const ScheduleArgs& a) {
  a.cfg.validate();
  std::ostream* out = &std::cout;
  std::ofstream sink;
  if (!a.out.empty()) {
    sink = open_sink(a.out);
    out = &sink;
  }
  *out << "epoch,ratio\n";
  char line[64];
  for (int e = 0; e < static_cast<int>(a.cfg.total); ++e) {
    std::snprintf(line, sizeof line, "%d,%.12f\n", e,
                  d2lv::learncore::lr_ratio(static_cast<double>(e), a.cfg));
    *out << line;
  }
  return 0;
}

int run_synth(const SynthArgs& a) {
  d2lv::SynthConfig cfg = a.cfg;
  cfg.jobs = static_cast<unsigned>(std::max(0, a.jobs));
  cfg.validate();
  const auto result = d2lv::synth_bench(cfg, a.out);
  std::cerr << "synth-bench: " << result.references.size() << " refs, "
            << result.queries.size() << " queries, " << result.ground_truth.size()
            << " gt rows\n";
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"d2lv: copy-detection pipeline (corpus synthesis, patch plans,\n"
               "descriptor extraction, PCA, ensemble matching, evaluation)"};
  app.require_subcommand(1);

  CorpusArgs corpus;
  auto* c = app.add_subcommand("corpus", "Generate an augmented corpus from source images");
  c->add_option("--sources", corpus.sources, "directory of source .ppm images")->required();
  c->add_option("--out", corpus.out, "output directory")->required();
  c->add_option("--set", corpus.set_name, "augmentation set name (default: basic)");
  c->add_option("--config", corpus.config, "pipeline config file");
  c->add_option("--seed", corpus.seed, "global seed override")
      ->each([&corpus](const std::string&) { corpus.seed_set = true; });
  c->add_option("--jobs", corpus.jobs, "worker count (0 = auto, env D2LV_JOBS)");
  c->footer(kAugmentKeys);

  PatchArgs patch;
  auto* p = app.add_subcommand("patches", "Print the patch plan boxes for one image");
  p->add_option("--ref", patch.ref, "run the reference plan on this image");
  p->add_option("--query", patch.query, "run the query plan on this image");
  p->add_option("--config", patch.config, "pipeline config file");
  p->add_option("--out", patch.out, "output CSV (default stdout)");
  p->footer(kPatchKeys);

  ExtractArgs extract;
  auto* x = app.add_subcommand("extract", "Extract patch descriptors into a feature store");
  x->add_option("--images", extract.images, "directory of .ppm images");
  x->add_option("--manifest", extract.manifest, "corpus manifest CSV");
  x->add_option("--out", extract.out, "output feature store")->required();
  x->add_flag("--queries", extract.queries, "use the query plan (default: reference plan)");
  x->add_option("--config", extract.config, "pipeline config file");
  x->add_option("--pca", extract.pca, "PCA model applied before storage");
  x->add_option("--jobs", extract.jobs, "worker count (0 = auto, env D2LV_JOBS)");
  x->footer(kFeatureKeys);

  PcaFitArgs pca_fit_args;
  auto* pf = app.add_subcommand("pca-fit", "Fit a PCA model on a feature store");
  pf->add_option("--store", pca_fit_args.store, "input feature store")->required();
  pf->add_option("--out", pca_fit_args.out, "output model file")->required();
  pf->add_option("--dim", pca_fit_args.dim, "output dimensionality (default 256)");
  pf->add_flag("--whiten", pca_fit_args.whiten, "bake whitening into the projection");
  pf->footer("Reads no config file.");

  PcaApplyArgs pca_apply_args;
  auto* pa = app.add_subcommand("pca-apply", "Project a feature store through a PCA model");
  pa->add_option("--store", pca_apply_args.store, "input feature store")->required();
  pa->add_option("--model", pca_apply_args.model, "PCA model file")->required();
  pa->add_option("--out", pca_apply_args.out, "output feature store")->required();
  pa->footer("Reads no config file.");

  MatchArgs match;
  auto* m = app.add_subcommand("match", "Score queries against references, print ranked pairs");
  m->add_option("--queries", match.queries, "query feature store")->required();
  m->add_option("--refs", match.refs, "reference feature store")->required();
  m->add_option("--out", match.out, "output pairs CSV (default stdout)");
  m->add_option("--config", match.config, "pipeline config file");
  m->add_option("--specs", match.specs, "ensemble spec file override");
  m->add_option("--top-t", match.top_t, "candidate references per query patch (0 = unlimited)");
  m->add_option("--partial-penalty", match.partial_penalty, "partial-patch score multiplier");
  m->add_flag("--top2-average", match.top2, "average the two best patch scores");
  m->add_option("--jobs", match.jobs, "worker count (0 = auto, env D2LV_JOBS)");
  m->footer(kMatchKeys);

  EvalArgs eval_args;
  auto* e = app.add_subcommand("eval", "Evaluate ranked pairs against ground truth");
  e->add_option("--pairs", eval_args.pairs, "ranked pairs CSV")->required();
  e->add_option("--gt", eval_args.gt, "ground-truth CSV")->required();
  e->add_option("--total", eval_args.total, "total positives override (default: |gt|)");
  e->add_option("--curve", eval_args.curve, "write the PR curve to this CSV");
  e->footer("Reads no config file. Prints uAP=%.6f and R@P90=%.6f to stdout.");

  ScheduleArgs sched;
  auto* s = app.add_subcommand("schedule", "Print the learning-rate schedule as epoch,ratio CSV");
  s->add_option("--warmup-end", sched.cfg.warmup_end, "end of linear warmup (default 5)");
  s->add_option("--hold-end", sched.cfg.hold_end, "end of the hold plateau (default 10)");
  s->add_option("--total", sched.cfg.total, "total epochs (default 25)");
  s->add_option("--floor", sched.cfg.floor, "decay floor ratio (default 0.01)");
  s->add_option("--out", sched.out, "output CSV (default stdout)");
  s->footer("Reads no config file.");

  SynthArgs synth;
  auto* b = app.add_subcommand("synth-bench", "Generate the synthetic copy-detection benchmark");
  b->add_option("--out", synth.out, "output directory")->required();
  b->add_option("--refs", synth.cfg.n_refs, "reference count (default 200)");
  b->add_option("--overlay", synth.cfg.n_overlay_queries, "overlay query count (default 50)");
  b->add_option("--crop", synth.cfg.n_crop_queries, "crop query count (default 50)");
  b->add_option("--distractors", synth.cfg.n_distractors, "distractor query count (default 100)");
  b->add_option("--seed", synth.cfg.seed, "generator seed (default 7)");
  b->add_option("--side", synth.cfg.side, "image side length (default 256)");
  b->add_option("--jobs", synth.jobs, "worker count (0 = auto, env D2LV_JOBS)");
  b->footer("Reads no config file.");

  try {
    app.parse(argc, argv);
    if (c->parsed()) return run_corpus(corpus);
    if (p->parsed()) return run_patches(patch);
    if (x->parsed()) return run_extract(extract);
    if (pf->parsed()) return run_pca_fit(pca_fit_args);
    if (pa->parsed()) return run_pca_apply(pca_apply_args);
    if (m->parsed()) return run_match(match);
    if (e->parsed()) return run_eval(eval_args);
    if (s->parsed()) return run_schedule(sched);
    if (b->parsed()) return run_synth(synth);
    return 0;
  } catch (const CLI::CallForHelp& help) {
    return app.exit(help);
  } catch (const CLI::ParseError& pe) {
    std::cerr << "error: " << pe.what() << "\n";
    return 2;
  } catch (const d2lv::ConfigError& ce) {
    std::cerr << "error: " << ce.what() << "\n";
    return 2;
  } catch (const d2lv::IoError& ioe) {
    std::cerr << "error: " << ioe.what() << "\n";
    return 2;
  } catch (const d2lv::Error& de) {
    std::cerr << "error: " << de.what() << "\n";
    return 1;
  } catch (const std::exception& se) {
    std::cerr << "error: " << se.what() << "\n";
    return 1;
  }
}
