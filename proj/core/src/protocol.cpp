#include "osb/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "json.hpp"
#include "osb/error.hpp"
#include "osb/rng.hpp"

namespace osb {
namespace {

using nlohmann::ordered_json;

std::vector<std::string> sorted_subjects(const EmbeddingSet& set) {
  auto subjects = set.subjects();
  std::sort(subjects.begin(), subjects.end());
  return subjects;
}

SampleKey pick_probe(const EmbeddingSet& set, const std::string& subject, Rng& rng) {
  const auto rows = set.rows_of(subject);
  return set[rows[rng.uniform_index(rows.size())]].key();
}

void finish(OpenSetSplit& split, const EmbeddingSet& set, const std::vector<std::string>& mated,
            const std::vector<std::string>& nonmated, Rng& rng) {
  split.gallery_subjects = mated;
  for (const auto& s : mated) split.mated_probes.push_back(pick_probe(set, s, rng));
  for (const auto& s : nonmated) {
    for (std::size_t r : set.rows_of(s)) split.nonmated_probes.push_back(set[r].key());
  }
  std::sort(split.gallery_subjects.begin(), split.gallery_subjects.end());
  std::sort(split.mated_probes.begin(), split.mated_probes.end());
  std::sort(split.nonmated_probes.begin(), split.nonmated_probes.end());
}

ordered_json split_json(const OpenSetSplit& split) {
  ordered_json j;
  j["seed"] = split.seed;
  j["gallery_subjects"] = split.gallery_subjects;
  auto keys = [](const std::vector<SampleKey>& v) {
    ordered_json arr = ordered_json::array();
    for (const auto& k : v) arr.push_back({k.subject_id, k.sample_id});
    return arr;
  };
  j["mated_probes"] = keys(split.mated_probes);
  j["nonmated_probes"] = keys(split.nonmated_probes);
  return j;
}

}  // namespace

std::size_t round_half_up_count(double fraction, std::size_t n) {
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 0.5));
}

std::vector<OpenSetSplit> generate_splits(const EmbeddingSet& test_set, const EvalConfig& cfg) {
  cfg.validate();
  const auto subjects = sorted_subjects(test_set);
  const std::size_t S = subjects.size();
  if (S < 2) throw UsageError("open-set splits need at least 2 subjects, got " + std::to_string(S));

  std::vector<std::string> singles;
  std::vector<std::string> multi;
  for (const auto& s : subjects) {
    (test_set.rows_of(s).size() >= 2 ? multi : singles).push_back(s);
  }

  std::vector<OpenSetSplit> splits;
  splits.reserve(cfg.num_splits);

  if (cfg.fixed_gallery) {
    const std::size_t G = *cfg.fixed_gallery;
    if (G > multi.size()) {
      throw UsageError("fixed gallery of " + std::to_string(G) + " subjects needs that many " +
                       "subjects with at least 2 samples; only " +
                       std::to_string(multi.size()) + " available");
    }
    Rng gallery_rng(derive_seed(cfg.seed, "fixed-gallery"));
    std::vector<std::string> gallery;
    for (std::size_t idx : gallery_rng.sample_without_replacement(multi.size(), G)) {
      gallery.push_back(multi[idx]);
    }
    std::sort(gallery.begin(), gallery.end());
    std::vector<std::string> rest;
    std::set_difference(subjects.begin(), subjects.end(), gallery.begin(), gallery.end(),
                        std::back_inserter(rest));
    const double ratio = cfg.q_nonmated / (1.0 - cfg.q_nonmated);
    const std::size_t n_u = nonmated_subject_count(ratio, G);
    if (n_u > rest.size()) {
      throw UsageError("q = " + std::to_string(cfg.q_nonmated) + " with a fixed gallery of " +
                       std::to_string(G) + " needs " + std::to_string(n_u) +
                       " non-mated subjects; only " + std::to_string(rest.size()) + " remain");
    }
    for (std::size_t k = 0; k < cfg.num_splits; ++k) {
      OpenSetSplit split;
      split.seed = derive_seed(cfg.seed, k);
      Rng rng(split.seed);
      std::vector<std::string> nonmated;
      for (std::size_t idx : rng.sample_without_replacement(rest.size(), n_u)) {
        nonmated.push_back(rest[idx]);
      }
      finish(split, test_set, gallery, nonmated, rng);
      splits.push_back(std::move(split));
    }
    return splits;
  }

  const std::size_t n_u = nonmated_subject_count(cfg.q_nonmated, S);
  if (n_u >= S) {
    throw UsageError("q = " + std::to_string(cfg.q_nonmated) + " leaves no gallery subjects out of " +
                     std::to_string(S));
  }
  if (singles.size() > n_u) {
    throw UsageError(std::to_string(singles.size()) +
                     " subjects have a single sample and can only be non-mated, but q allows " +
                     std::to_string(n_u) + " non-mated subjects");
  }
  for (std::size_t k = 0; k < cfg.num_splits; ++k) {
    OpenSetSplit split;
    split.seed = derive_seed(cfg.seed, k);
    Rng rng(split.seed);
    auto chosen = rng.sample_without_replacement(multi.size(), n_u - singles.size());
    std::vector<bool> is_nonmated(multi.size(), false);
    for (std::size_t idx : chosen) is_nonmated[idx] = true;
    std::vector<std::string> mated;
    std::vector<std::string> nonmated = singles;
    for (std::size_t i = 0; i < multi.size(); ++i) {
      (is_nonmated[i] ? nonmated : mated).push_back(multi[i]);
    }
    finish(split, test_set, mated, nonmated, rng);
    splits.push_back(std::move(split));
  }
  return splits;
}

AppliedSplit apply_split(const EmbeddingSet& test_set, const OpenSetSplit& split) {
  std::set<std::string_view> gallery(split.gallery_subjects.begin(), split.gallery_subjects.end());
  std::set<SampleKey> probe_keys;
  for (const auto& s : split.gallery_subjects) {
    if (!test_set.has_subject(s)) throw DataError("split references unknown subject '" + s + "'");
  }
  for (const auto* list : {&split.mated_probes, &split.nonmated_probes}) {
    for (const auto& k : *list) {
      if (test_set.find(k) == test_set.size()) {
        throw DataError("split references unknown sample (" + k.subject_id + ", " + k.sample_id + ")");
      }
      probe_keys.insert(k);
    }
  }

  std::vector<std::size_t> gallery_rows;
  std::vector<std::size_t> probe_rows;
  for (std::size_t i = 0; i < test_set.size(); ++i) {
    const auto& e = test_set[i];
    if (probe_keys.count(e.key())) {
      probe_rows.push_back(i);
    } else if (gallery.count(e.subject_id)) {
      gallery_rows.push_back(i);
    }
  }

  AppliedSplit out{test_set.subset(gallery_rows), test_set.subset(probe_rows), {}};
  for (const auto& s : split.gallery_subjects) {
    if (!out.gallery.has_subject(s)) {
      throw DataError("gallery subject '" + s + "' has no templates left after reserving probes");
    }
  }
  out.mated_flags.reserve(out.probes.size());
  for (const auto& p : out.probes) out.mated_flags.push_back(gallery.count(p.subject_id) > 0);
  return out;
}

std::string to_json(const OpenSetSplit& split, int indent) { return split_json(split).dump(indent); }

std::string splits_to_json(const std::vector<OpenSetSplit>& splits, int indent) {
  ordered_json arr = ordered_json::array();
  for (const auto& s : splits) arr.push_back(split_json(s));
  return arr.dump(indent);
}

std::vector<OpenSetSplit> splits_from_json(const std::string& text) {
  std::vector<OpenSetSplit> out;
  try {
    auto j = nlohmann::json::parse(text);
    if (j.is_object()) j = nlohmann::json::array({j});
    for (const auto& item : j) {
      OpenSetSplit s;
      s.seed = item.at("seed").get<std::uint64_t>();
      s.gallery_subjects = item.at("gallery_subjects").get<std::vector<std::string>>();
      for (const auto& p : item.at("mated_probes")) {
        s.mated_probes.push_back({p.at(0).get<std::string>(), p.at(1).get<std::string>()});
      }
      for (const auto& p : item.at("nonmated_probes")) {
        s.nonmated_probes.push_back({p.at(0).get<std::string>(), p.at(1).get<std::string>()});
      }
      out.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw DataError(std::string("malformed split JSON: ") + ex.what());
  }
  return out;
}

}  // namespace osb
