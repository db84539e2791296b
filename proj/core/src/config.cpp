#include "d2lv/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "d2lv/errors.hpp"

namespace d2lv {
namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::vector<PatchRule> parse_rule_list(const std::string& csv) {
  std::vector<PatchRule> rules;
  std::istringstream in(csv);
  std::string item;
  while (std::getline(in, item, ',')) {
    const std::string name = trim(item);
    if (name.empty()) continue;
    rules.push_back(parse_patch_rule(name));
  }
  if (rules.empty()) throw ConfigError("patch plan rule list is empty");
  return rules;
}

} // namespace

Ini Ini::parse(std::istream& source) {
  Ini ini;
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(source, line)) {
    ++line_no;
    const std::size_t comment = line.find_first_of("#;");
    if (comment != std::string::npos) line.resize(comment);
    const std::string text = trim(line);
    if (text.empty()) continue;
    if (text.front() == '[') {
      if (text.back() != ']' || text.size() < 3) {
        throw ConfigError("config line " + std::to_string(line_no) + ": malformed section header");
      }
      section = trim(text.substr(1, text.size() - 2));
      if (section.empty()) {
        throw ConfigError("config line " + std::to_string(line_no) + ": empty section name");
      }
      continue;
    }
    const std::size_t eq = text.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(text.substr(0, eq));
    if (key.empty()) {
      throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    }
    ini.sections_[section][key] = trim(text.substr(eq + 1));
  }
  return ini;
}

Ini Ini::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path.string());
  return parse(in);
}

bool Ini::has(const std::string& section, const std::string& key) const {
  const auto s = sections_.find(section);
  return s != sections_.end() && s->second.count(key) > 0;
}

std::string Ini::get(const std::string& section, const std::string& key,
                     const std::string& fallback) const {
  const auto s = sections_.find(section);
  if (s == sections_.end()) return fallback;
  const auto k = s->second.find(key);
  return k == s->second.end() ? fallback : k->second;
}

double Ini::get_double(const std::string& section, const std::string& key,
                       double fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = get(section, key);
  try {
    std::size_t consumed = 0;
    const double out = std::stod(v, &consumed);
    if (consumed != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config [" + section + "] " + key + ": expected a number, got '" + v + "'");
  }
}

int Ini::get_int(const std::string& section, const std::string& key, int fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = get(section, key);
  try {
    std::size_t consumed = 0;
    const long out = std::stol(v, &consumed);
    if (consumed != v.size()) throw std::invalid_argument(v);
    return static_cast<int>(out);
  } catch (const std::exception&) {
    throw ConfigError("config [" + section + "] " + key + ": expected an integer, got '" + v +
                      "'");
  }
}

bool Ini::get_bool(const std::string& section, const std::string& key, bool fallback) const {
  if (!has(section, key)) return fallback;
  std::string v = get(section, key);
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config [" + section + "] " + key + ": expected a boolean, got '" + v + "'");
}

std::uint64_t Ini::get_u64(const std::string& section, const std::string& key,
                           std::uint64_t fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = get(section, key);
  try {
    std::size_t consumed = 0;
    const unsigned long long out = std::stoull(v, &consumed);
    if (consumed != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config [" + section + "] " + key +
                      ": expected an unsigned integer, got '" + v + "'");
  }
}

std::vector<int> Ini::get_int_list(const std::string& section, const std::string& key,
                                   const std::vector<int>& fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = get(section, key);
  std::vector<int> out;
  std::istringstream in(v);
  std::string item;
  while (std::getline(in, item, ',')) {
    const std::string text = trim(item);
    if (text.empty()) continue;
    try {
      std::size_t consumed = 0;
      out.push_back(static_cast<int>(std::stol(text, &consumed)));
      if (consumed != text.size()) throw std::invalid_argument(text);
    } catch (const std::exception&) {
      throw ConfigError("config [" + section + "] " + key + ": bad list element '" + text + "'");
    }
  }
  if (out.empty()) {
    throw ConfigError("config [" + section + "] " + key + ": list is empty");
  }
  return out;
}

PipelineConfig PipelineConfig::from_ini(const Ini& ini) {
  PipelineConfig cfg;

  AugmentConfig& a = cfg.augment;
  a.side = ini.get_int("augment", "side", a.side);
  a.probability = ini.get_double("augment", "probability", a.probability);
  a.crop_scale_min = ini.get_double("augment", "crop_scale_min", a.crop_scale_min);
  a.crop_scale_max = ini.get_double("augment", "crop_scale_max", a.crop_scale_max);
  a.crop_aspect_min = ini.get_double("augment", "crop_aspect_min", a.crop_aspect_min);
  a.crop_aspect_max = ini.get_double("augment", "crop_aspect_max", a.crop_aspect_max);
  a.rotation_max_degrees = ini.get_double("augment", "rotation_max_degrees", a.rotation_max_degrees);
  a.rotation_discrete_prob =
      ini.get_double("augment", "rotation_discrete_prob", a.rotation_discrete_prob);
  a.pixelize_block_min = ini.get_int("augment", "pixelize_block_min", a.pixelize_block_min);
  a.pixelize_block_max = ini.get_int("augment", "pixelize_block_max", a.pixelize_block_max);
  a.shuffle_grid = ini.get_int("augment", "shuffle_grid", a.shuffle_grid);
  a.perspective_strength =
      ini.get_double("augment", "perspective_strength", a.perspective_strength);
  a.pad_min = ini.get_double("augment", "pad_min", a.pad_min);
  a.pad_max = ini.get_double("augment", "pad_max", a.pad_max);
  a.underlay_scale_min = ini.get_double("augment", "underlay_scale_min", a.underlay_scale_min);
  a.underlay_scale_max = ini.get_double("augment", "underlay_scale_max", a.underlay_scale_max);
  a.overlay_scale_min = ini.get_double("augment", "overlay_scale_min", a.overlay_scale_min);
  a.overlay_scale_max = ini.get_double("augment", "overlay_scale_max", a.overlay_scale_max);
  a.jitter_brightness = ini.get_double("augment", "jitter_brightness", a.jitter_brightness);
  a.jitter_contrast = ini.get_double("augment", "jitter_contrast", a.jitter_contrast);
  a.jitter_saturation = ini.get_double("augment", "jitter_saturation", a.jitter_saturation);
  a.jitter_hue = ini.get_double("augment", "jitter_hue", a.jitter_hue);
  a.blur_sigma_min = ini.get_double("augment", "blur_sigma_min", a.blur_sigma_min);
  a.blur_sigma_max = ini.get_double("augment", "blur_sigma_max", a.blur_sigma_max);
  a.emoji_count_min = ini.get_int("augment", "emoji_count_min", a.emoji_count_min);
  a.emoji_count_max = ini.get_int("augment", "emoji_count_max", a.emoji_count_max);
  a.emoji_scale_min = ini.get_double("augment", "emoji_scale_min", a.emoji_scale_min);
  a.emoji_scale_max = ini.get_double("augment", "emoji_scale_max", a.emoji_scale_max);
  a.text_len_min = ini.get_int("augment", "text_len_min", a.text_len_min);
  a.text_len_max = ini.get_int("augment", "text_len_max", a.text_len_max);
  a.text_scale_min = ini.get_double("augment", "text_scale_min", a.text_scale_min);
  a.text_scale_max = ini.get_double("augment", "text_scale_max", a.text_scale_max);
  a.super_blur_sigma_min =
      ini.get_double("augment", "super_blur_sigma_min", a.super_blur_sigma_min);
  a.super_blur_sigma_max =
      ini.get_double("augment", "super_blur_sigma_max", a.super_blur_sigma_max);
  a.super_color_factor = ini.get_double("augment", "super_color_factor", a.super_color_factor);
  a.super_dark_min = ini.get_double("augment", "super_dark_min", a.super_dark_min);
  a.super_dark_max = ini.get_double("augment", "super_dark_max", a.super_dark_max);
  a.super_face_scale_min =
      ini.get_double("augment", "super_face_scale_min", a.super_face_scale_min);
  a.super_face_scale_max =
      ini.get_double("augment", "super_face_scale_max", a.super_face_scale_max);
  a.super_opaque_min = ini.get_double("augment", "super_opaque_min", a.super_opaque_min);
  a.super_opaque_max = ini.get_double("augment", "super_opaque_max", a.super_opaque_max);
  a.occlude_count_min = ini.get_int("augment", "occlude_count_min", a.occlude_count_min);
  a.occlude_count_max = ini.get_int("augment", "occlude_count_max", a.occlude_count_max);
  a.occlude_area_max = ini.get_double("augment", "occlude_area_max", a.occlude_area_max);

  cfg.underlay_dir = ini.get("augment", "underlay_dir");
  cfg.overlay_dir = ini.get("augment", "overlay_dir");
  cfg.face_dir = ini.get("augment", "face_dir");

  if (ini.has("patches", "query_plan")) {
    cfg.query_plan.steps = parse_rule_list(ini.get("patches", "query_plan"));
    cfg.query_plan.name = "config-query";
  }
  if (ini.has("patches", "reference_plan")) {
    cfg.reference_plan.steps = parse_rule_list(ini.get("patches", "reference_plan"));
    cfg.reference_plan.name = "config-reference";
  }
  const int max_proposals = ini.get_int("patches", "max_proposals", cfg.query_plan.max_proposals);
  const int min_query_side = ini.get_int("patches", "min_query_side", cfg.query_plan.min_query_side);
  const double exact_ratio =
      ini.get_double("patches", "center_exact_ratio", cfg.query_plan.center_exact_ratio);
  const double third_ratio =
      ini.get_double("patches", "center_third_ratio", cfg.query_plan.center_third_ratio);
  for (PatchPlan* plan : {&cfg.query_plan, &cfg.reference_plan}) {
    plan->max_proposals = max_proposals;
    plan->min_query_side = min_query_side;
    plan->center_exact_ratio = exact_ratio;
    plan->center_third_ratio = third_ratio;
  }

  cfg.model_id = ini.get("features", "model", cfg.model_id);
  cfg.descriptor_grid = ini.get_int("features", "grid", cfg.descriptor_grid);
  cfg.scales = ini.get_int_list("features", "scales", cfg.scales);
  cfg.pca_path = ini.get("features", "pca", cfg.pca_path);
  cfg.whiten = ini.get_bool("features", "whiten", cfg.whiten);

  cfg.specs_path = ini.get("matching", "specs", cfg.specs_path);
  cfg.tricks.partial_penalty =
      ini.get_double("matching", "partial_penalty", cfg.tricks.partial_penalty);
  cfg.tricks.min_patch_side = min_query_side;
  cfg.tricks.top2_average = ini.get_bool("matching", "top2_average", cfg.tricks.top2_average);
  const int top_t = ini.get_int("matching", "top_t", static_cast<int>(cfg.top_t));
  if (top_t < 0) throw ConfigError("config [matching] top_t: must be >= 0");
  cfg.top_t = static_cast<std::size_t>(top_t);

  cfg.seed = ini.get_u64("pipeline", "seed", cfg.seed);
  const int jobs = ini.get_int("pipeline", "jobs", static_cast<int>(cfg.jobs));
  if (jobs < 0) throw ConfigError("config [pipeline] jobs: must be >= 0");
  cfg.jobs = static_cast<unsigned>(jobs);

  cfg.validate();
  return cfg;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  return from_ini(Ini::load(path));
}

void PipelineConfig::validate() const {
  augment.validate();
  tricks.validate();
  if (descriptor_grid < 1) throw ConfigError("config [features] grid: must be >= 1");
  if (model_id.empty()) throw ConfigError("config [features] model: must be non-empty");
  if (scales.empty()) throw ConfigError("config [features] scales: must be non-empty");
  for (int s : scales) {
    if (s < 8) throw ConfigError("config [features] scales: each scale must be >= 8");
  }
  if (query_plan.steps.empty() || reference_plan.steps.empty()) {
    throw ConfigError("config [patches]: plans must have at least one rule");
  }
  if (query_plan.max_proposals < 0) {
    throw ConfigError("config [patches] max_proposals: must be >= 0");
  }
  if (query_plan.min_query_side < 1) {
    throw ConfigError("config [patches] min_query_side: must be >= 1");
  }
}

} // namespace d2lv
