#include "d2lv/matching.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "d2lv/errors.hpp"
#include "d2lv/parallel.hpp"
#include "d2lv/patches.hpp"

namespace d2lv {
namespace {

constexpr std::string_view kOrigPatch = "orig";

std::vector<std::string> split_tokens(const std::string& line) {
  std::vector<std::string> tokens;
  std::istringstream in(line);
  std::string token;
  while (in >> token) tokens.push_back(token);
  return tokens;
}

} // namespace

std::uint32_t ScoreTable::intern(std::vector<std::string>& names,
                                 std::unordered_map<std::string, std::uint32_t>& index,
                                 std::string_view id) {
  const auto it = index.find(std::string(id));
  if (it != index.end()) return it->second;
  const auto slot = static_cast<std::uint32_t>(names.size());
  names.emplace_back(id);
  index.emplace(names.back(), slot);
  return slot;
}

std::uint32_t ScoreTable::intern_query(std::string_view id) {
  return intern(queries_, query_index_, id);
}
std::uint32_t ScoreTable::intern_reference(std::string_view id) {
  return intern(references_, reference_index_, id);
}
std::uint32_t ScoreTable::intern_patch(std::string_view id) {
  return intern(patches_, patch_index_, id);
}
std::uint32_t ScoreTable::intern_model(std::string_view id) {
  return intern(models_, model_index_, id);
}

void ScoreTable::add(const Entry& entry) {
  if (!std::isfinite(entry.score)) throw DomainError("ScoreTable: non-finite score");
  entries_.push_back(entry);
}

std::vector<float> blocked_dot(std::span<const float> a, std::size_t rows_a,
                               std::span<const float> b, std::size_t rows_b, std::size_t dim,
                               unsigned jobs) {
  if (a.size() != rows_a * dim || b.size() != rows_b * dim) {
    throw DomainError("blocked_dot: matrix size mismatch");
  }
  std::vector<float> out(rows_a * rows_b, 0.0f);
  if (rows_a == 0 || rows_b == 0) return out;

  constexpr std::size_t kTile = 32;
  parallel_for(rows_a, jobs, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i0 = begin; i0 < end; i0 += kTile) {
      const std::size_t i1 = std::min(end, i0 + kTile);
      for (std::size_t j0 = 0; j0 < rows_b; j0 += kTile) {
        const std::size_t j1 = std::min(rows_b, j0 + kTile);
        for (std::size_t i = i0; i < i1; ++i) {
          const float* ra = a.data() + i * dim;
          for (std::size_t j = j0; j < j1; ++j) {
            const float* rb = b.data() + j * dim;
            double acc = 0.0;
            for (std::size_t k = 0; k < dim; ++k) {
              acc += static_cast<double>(ra[k]) * rb[k];
            }
            out[i * rows_b + j] = static_cast<float>(acc);
          }
        }
      }
    }
  });
  return out;
}

ScoreTable pairwise_scores(const FeatureStore& queries, const FeatureStore& references,
                           unsigned jobs) {
  if (queries.dim() != references.dim()) {
    throw ConfigError("pairwise_scores: feature dimensions differ");
  }
  const std::size_t dim = queries.dim();
  ScoreTable table;

  // Group record indices by (model, scale); sorted map keeps emission order
  // independent of store construction details.
  using GroupKey = std::pair<std::string, std::uint32_t>;
  std::map<GroupKey, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> groups;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    groups[{queries[i].model, queries[i].scale}].first.push_back(i);
  }
  for (std::size_t i = 0; i < references.size(); ++i) {
    groups[{references[i].model, references[i].scale}].second.push_back(i);
  }

  const auto pack = [dim](const FeatureStore& store, const std::vector<std::size_t>& rows) {
    std::vector<float> m(rows.size() * dim);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      std::copy(store[rows[r]].vector.begin(), store[rows[r]].vector.end(),
                m.begin() + static_cast<std::ptrdiff_t>(r * dim));
    }
    return m;
  };

  for (const auto& [key, rows] : groups) {
    const auto& [q_rows, r_rows] = rows;
    if (q_rows.empty() || r_rows.empty()) continue;

    std::vector<std::size_t> q_orig;
    for (std::size_t i : q_rows) {
      if (queries[i].patch == kOrigPatch) q_orig.push_back(i);
    }
    std::vector<std::size_t> r_orig, r_local;
    for (std::size_t i : r_rows) {
      (references[i].patch == kOrigPatch ? r_orig : r_local).push_back(i);
    }

    const std::uint32_t model_idx = table.intern_model(key.first);
    const std::uint32_t scale = key.second;

    const auto emit = [&](const std::vector<std::size_t>& qs, const std::vector<std::size_t>& rs) {
      if (qs.empty() || rs.empty()) return;
      const std::vector<float> qm = pack(queries, qs);
      const std::vector<float> rm = pack(references, rs);
      const std::vector<float> scores = blocked_dot(qm, qs.size(), rm, rs.size(), dim, jobs);
      for (std::size_t i = 0; i < qs.size(); ++i) {
        const FeatureRecord& qr = queries[qs[i]];
        const std::uint32_t qi = table.intern_query(qr.image.str());
        const std::uint32_t qp = table.intern_patch(qr.patch);
        for (std::size_t j = 0; j < rs.size(); ++j) {
          const FeatureRecord& rr = references[rs[j]];
          ScoreTable::Entry entry;
          entry.query = qi;
          entry.query_patch = qp;
          entry.reference = table.intern_reference(rr.image.str());
          entry.reference_patch = table.intern_patch(rr.patch);
          entry.model = model_idx;
          entry.scale = scale;
          entry.score = scores[i * rs.size() + j];
          table.add(entry);
        }
      }
    };

    emit(q_rows, r_orig);  // global-global + global-local
    emit(q_orig, r_local); // local-global
  }
  return table;
}

void EnsembleSpec::validate() const {
  if (models.empty()) throw ConfigError("ensemble spec: no models listed");
  for (const auto& m : models) {
    if (m.empty()) throw ConfigError("ensemble spec: empty model id");
  }
  if (criterion == Criterion::kConfidence) {
    if (thresholds.size() != models.size()) {
      throw ConfigError("ensemble spec: confidence requires one threshold per model");
    }
    for (double t : thresholds) {
      if (!std::isfinite(t)) throw ConfigError("ensemble spec: non-finite threshold");
    }
  } else if (!thresholds.empty()) {
    throw ConfigError("ensemble spec: completeness takes no thresholds");
  }
}

std::vector<EnsembleSpec> EnsembleSpec::parse(std::istream& source) {
  std::vector<EnsembleSpec> specs;
  std::string line;
  while (std::getline(source, line)) {
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::vector<std::string> tokens = split_tokens(line);
    if (tokens.empty()) continue;
    EnsembleSpec spec;
    if (tokens[0] == "confidence") {
      spec.criterion = Criterion::kConfidence;
    } else if (tokens[0] == "completeness") {
      spec.criterion = Criterion::kCompleteness;
    } else {
      throw ConfigError("ensemble spec: unknown criterion '" + tokens[0] + "'");
    }
    for (std::size_t i = 1; i < tokens.size(); ++i) {
      const std::string& token = tokens[i];
      const std::size_t colon = token.find(':');
      if (spec.criterion == Criterion::kConfidence) {
        if (colon == std::string::npos) {
          throw ConfigError("ensemble spec: confidence entry needs model:threshold, got '" +
                            token + "'");
        }
        spec.models.push_back(token.substr(0, colon));
        try {
          spec.thresholds.push_back(std::stod(token.substr(colon + 1)));
        } catch (const std::exception&) {
          throw ConfigError("ensemble spec: bad threshold in '" + token + "'");
        }
      } else {
        if (colon != std::string::npos) {
          throw ConfigError("ensemble spec: completeness takes no thresholds, got '" + token +
                            "'");
        }
        spec.models.push_back(token);
      }
    }
    spec.validate();
    specs.push_back(std::move(spec));
  }
  return specs;
}

std::vector<EnsembleSpec> EnsembleSpec::parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open ensemble spec file: " + path.string());
  return parse(in);
}

std::optional<double> confidence_ensemble(
    const std::vector<std::pair<double, double>>& score_threshold) {
  if (score_threshold.empty()) throw DomainError("confidence_ensemble: no models");
  double best = score_threshold.front().first;
  for (const auto& [score, threshold] : score_threshold) {
    if (!(score > threshold)) return std::nullopt; // strict gate
    best = std::max(best, score);
  }
  return best;
}

double completeness_ensemble(const std::vector<double>& scores) {
  if (scores.empty()) throw DomainError("completeness_ensemble: no scores");
  return *std::max_element(scores.begin(), scores.end());
}

std::optional<double> patch_ensemble(const std::vector<double>& gl, const std::vector<double>& lg,
                                     bool top2_average) {
  if (gl.empty() && lg.empty()) return std::nullopt;
  if (!top2_average) {
    double best = -std::numeric_limits<double>::infinity();
    for (double v : gl) best = std::max(best, v);
    for (double v : lg) best = std::max(best, v);
    return best;
  }
  double top1 = -std::numeric_limits<double>::infinity();
  double top2 = -std::numeric_limits<double>::infinity();
  const auto feed = [&](double v) {
    if (v > top1) {
      top2 = top1;
      top1 = v;
    } else if (v > top2) {
      top2 = v;
    }
  };
  for (double v : gl) feed(v);
  for (double v : lg) feed(v);
  if (gl.size() + lg.size() == 1) return top1;
  return (top1 + top2) / 2.0;
}

void TrickConfig::validate() const {
  if (!(partial_penalty > 0.0 && partial_penalty <= 1.0)) {
    throw ConfigError("trick config: partial_penalty must lie in (0, 1]");
  }
  if (min_patch_side < 1) throw ConfigError("trick config: min_patch_side must be >= 1");
}

ScoreTable apply_tricks(const ScoreTable& table, const TrickConfig& config,
                        const std::vector<std::pair<ImageId, ImageBuffer>>& reference_images) {
  config.validate();

  std::set<std::string> skipped;
  if (config.face_skip) {
    for (const auto& [id, img] : reference_images) {
      if (config.face_skip(id, img)) skipped.insert(id.str());
    }
  }

  // Rebuild so interned tables stay minimal after drops.
  ScoreTable out;
  for (const ScoreTable::Entry& e : table.entries()) {
    const std::string& r_patch = table.patch_ids()[e.reference_patch];
    const std::string& reference = table.references()[e.reference];
    if (r_patch != kOrigPatch && skipped.count(reference) > 0) continue;

    const std::string& q_patch = table.patch_ids()[e.query_patch];
    ScoreTable::Entry copy = e;
    copy.query = out.intern_query(table.queries()[e.query]);
    copy.query_patch = out.intern_patch(q_patch);
    copy.reference = out.intern_reference(reference);
    copy.reference_patch = out.intern_patch(r_patch);
    copy.model = out.intern_model(table.models()[e.model]);
    if (!is_whole_frame_patch(q_patch) || !is_whole_frame_patch(r_patch)) {
      copy.score = static_cast<float>(copy.score * config.partial_penalty);
    }
    out.add(copy);
  }
  return out;
}

eval::RankedPairList match_pipeline(const FeatureStore& queries, const FeatureStore& references,
                                    const MatchOptions& options) {
  if (queries.empty() || references.empty()) {
    return eval::RankedPairList::from_pairs({});
  }

  const ScoreTable raw = pairwise_scores(queries, references, options.jobs);
  const ScoreTable table = apply_tricks(raw, options.tricks, options.reference_images);

  std::vector<EnsembleSpec> specs = options.specs;
  if (specs.empty()) {
    EnsembleSpec all;
    all.criterion = EnsembleSpec::Criterion::kCompleteness;
    all.models = table.models();
    if (all.models.empty()) return eval::RankedPairList::from_pairs({});
    specs.push_back(std::move(all));
  }
  for (const EnsembleSpec& spec : specs) {
    spec.validate();
    for (const auto& m : spec.models) {
      if (std::find(table.models().begin(), table.models().end(), m) == table.models().end() &&
          std::find(raw.models().begin(), raw.models().end(), m) == raw.models().end()) {
        throw ConfigError("ensemble spec references unknown model '" + m + "'");
      }
    }
  }

  // Candidate references per query: union over its patches of the top-T
  // references by raw (pre-trick) score. Ties break on reference name so the
  // result is independent of store insertion order.
  const std::size_t n_refs_raw = raw.references().size();
  std::vector<std::set<std::string>> candidates_by_query; // by raw query index
  candidates_by_query.resize(raw.queries().size());
  if (options.top_t == 0) {
    for (const ScoreTable::Entry& e : raw.entries()) {
      candidates_by_query[e.query].insert(raw.references()[e.reference]);
    }
  } else {
    // best[query_patch-wise] raw score per reference, per (query, patch).
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::vector<float>> best;
    for (const ScoreTable::Entry& e : raw.entries()) {
      auto& scores = best[{e.query, e.query_patch}];
      if (scores.empty()) {
        scores.assign(n_refs_raw, -std::numeric_limits<float>::infinity());
      }
      scores[e.reference] = std::max(scores[e.reference], e.score);
    }
    for (const auto& [key, scores] : best) {
      std::vector<std::uint32_t> order;
      for (std::uint32_t r = 0; r < n_refs_raw; ++r) {
        if (scores[r] > -std::numeric_limits<float>::infinity()) order.push_back(r);
      }
      std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return raw.references()[a] < raw.references()[b];
      });
      if (order.size() > options.top_t) order.resize(options.top_t);
      for (std::uint32_t r : order) {
        candidates_by_query[key.first].insert(raw.references()[r]);
      }
    }
  }
  std::map<std::string, std::set<std::string>> candidates; // query name -> reference names
  for (std::size_t q = 0; q < candidates_by_query.size(); ++q) {
    if (!candidates_by_query[q].empty()) {
      candidates[raw.queries()[q]] = std::move(candidates_by_query[q]);
    }
  }

  // Group post-trick entries by (query, reference) pair.
  std::vector<const ScoreTable::Entry*> sorted;
  sorted.reserve(table.entries().size());
  for (const auto& e : table.entries()) sorted.push_back(&e);
  std::sort(sorted.begin(), sorted.end(),
            [&](const ScoreTable::Entry* a, const ScoreTable::Entry* b) {
              if (a->query != b->query) return a->query < b->query;
              if (a->reference != b->reference) return a->reference < b->reference;
              if (a->query_patch != b->query_patch) return a->query_patch < b->query_patch;
              if (a->reference_patch != b->reference_patch) {
                return a->reference_patch < b->reference_patch;
              }
              if (a->model != b->model) return a->model < b->model;
              return a->scale < b->scale;
            });

  const std::uint32_t n_models = static_cast<std::uint32_t>(table.models().size());
  std::vector<PairScore> results;

  std::size_t pos = 0;
  while (pos < sorted.size()) {
    const std::uint32_t q = sorted[pos]->query;
    const std::uint32_t r = sorted[pos]->reference;
    std::size_t end = pos;
    while (end < sorted.size() && sorted[end]->query == q && sorted[end]->reference == r) ++end;

    const std::string& query_name = table.queries()[q];
    const std::string& reference_name = table.references()[r];
    const auto cand_it = candidates.find(query_name);
    if (cand_it == candidates.end() || cand_it->second.count(reference_name) == 0) {
      pos = end;
      continue;
    }

    std::vector<double> gl, lg;
    std::size_t i = pos;
    while (i < end) {
      const std::uint32_t qp = sorted[i]->query_patch;
      const std::uint32_t rp = sorted[i]->reference_patch;
      // Fold scales into one score per model (max), within this patch pair.
      std::vector<double> model_best(n_models, -std::numeric_limits<double>::infinity());
      while (i < end && sorted[i]->query_patch == qp && sorted[i]->reference_patch == rp) {
        model_best[sorted[i]->model] =
            std::max(model_best[sorted[i]->model], static_cast<double>(sorted[i]->score));
        ++i;
      }

      std::optional<double> pair_score;
      for (const EnsembleSpec& spec : specs) {
        std::optional<double> spec_score;
        if (spec.criterion == EnsembleSpec::Criterion::kConfidence) {
          std::vector<std::pair<double, double>> gated;
          bool missing = false;
          for (std::size_t m = 0; m < spec.models.size(); ++m) {
            const auto& name = spec.models[m];
            const auto it = std::find(table.models().begin(), table.models().end(), name);
            if (it == table.models().end()) {
              missing = true;
              break;
            }
            const auto idx = static_cast<std::uint32_t>(it - table.models().begin());
            if (model_best[idx] == -std::numeric_limits<double>::infinity()) {
              missing = true;
              break;
            }
            gated.emplace_back(model_best[idx], spec.thresholds[m]);
          }
          if (!missing) spec_score = confidence_ensemble(gated);
        } else {
          std::vector<double> present;
          for (const auto& name : spec.models) {
            const auto it = std::find(table.models().begin(), table.models().end(), name);
            if (it == table.models().end()) continue;
            const auto idx = static_cast<std::uint32_t>(it - table.models().begin());
            if (model_best[idx] != -std::numeric_limits<double>::infinity()) {
              present.push_back(model_best[idx]);
            }
          }
          if (!present.empty()) spec_score = completeness_ensemble(present);
        }
        if (spec_score && (!pair_score || *spec_score > *pair_score)) {
          pair_score = spec_score;
        }
      }
      if (pair_score) {
        const std::string& rp_name = table.patch_ids()[rp];
        if (rp_name == kOrigPatch) {
          gl.push_back(*pair_score); // includes the orig x orig (global-global) pair
        } else {
          lg.push_back(*pair_score);
        }
      }
    }

    const std::optional<double> final_score = patch_ensemble(gl, lg, options.tricks.top2_average);
    if (final_score) {
      results.push_back(PairScore{ImageId(query_name), ImageId(reference_name), *final_score});
    }
    pos = end;
  }

  return eval::RankedPairList::from_pairs(std::move(results));
}

} // namespace d2lv
