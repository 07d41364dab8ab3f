#include "osb/episode.hpp"

#include <cmath>
#include <set>

#include "osb/error.hpp"
#include "osb/protocol.hpp"
#include "osb/rng.hpp"

namespace osb {

void EpisodeBatch::validate() const {
  const std::size_t d = dim();
  std::set<std::string_view> subjects;
  for (const auto& g : gallery) {
    if (!subjects.insert(g.subject_id).second) {
      throw DataError("episode gallery repeats subject '" + g.subject_id + "'");
    }
    if (g.feature.size() != d) throw DataError("episode gallery dimension mismatch");
  }
  for (const auto& p : mated_probes) {
    if (p.gallery_index >= gallery.size() || gallery[p.gallery_index].subject_id != p.subject_id) {
      throw DataError("mated probe of '" + p.subject_id + "' has no gallery mate");
    }
    if (p.feature.size() != d) throw DataError("episode probe dimension mismatch");
  }
  for (const auto& p : nonmated_probes) {
    if (subjects.count(p.subject_id)) {
      throw DataError("non-mated probe subject '" + p.subject_id + "' appears in the gallery");
    }
    if (p.feature.size() != d) throw DataError("episode probe dimension mismatch");
  }
}

EpisodeBatch sample_episode(const EmbeddingSet& batch, double p_mated, std::uint64_t seed) {
  if (!(p_mated > 0.0 && p_mated < 1.0)) throw UsageError("p_mated must lie in (0, 1)");
  const auto& subjects = batch.subjects();
  const std::size_t S = subjects.size();
  if (S < 2) throw UsageError("an episode needs at least 2 subjects");
  const std::size_t n_mated = round_half_up_count(p_mated, S);
  if (n_mated == 0) throw UsageError("p_mated leaves no mated subject in the episode");
  if (n_mated >= S) throw UsageError("p_mated leaves no non-mated subject in the episode");

  std::vector<std::size_t> eligible;
  for (std::size_t s = 0; s < S; ++s) {
    if (batch.rows_of(subjects[s]).size() >= 2) eligible.push_back(s);
  }
  if (eligible.size() < n_mated) {
    throw UsageError("episode needs " + std::to_string(n_mated) +
                     " subjects with at least 2 samples; only " + std::to_string(eligible.size()));
  }

  Rng rng(seed);
  std::vector<bool> mated(S, false);
  for (std::size_t idx : rng.sample_without_replacement(eligible.size(), n_mated)) {
    mated[eligible[idx]] = true;
  }

  EpisodeBatch ep;
  ep.metric = batch.metric();
  for (std::size_t s = 0; s < S; ++s) {
    const auto span_rows = batch.rows_of(subjects[s]);
    std::vector<std::size_t> rows(span_rows.begin(), span_rows.end());
    if (!mated[s]) {
      for (std::size_t r : rows) {
        ep.nonmated_probes.push_back({subjects[s], batch[r].feature, r, kNoIndex});
      }
      continue;
    }
    rng.shuffle(rows);
    const std::size_t n_gallery = rows.size() / 2;
    GalleryEntry g{subjects[s], Feature(batch.dim(), 0.0), {}};
    for (std::size_t i = 0; i < n_gallery; ++i) {
      g.members.push_back(rows[i]);
      const auto& f = batch[rows[i]].feature;
      for (std::size_t k = 0; k < f.size(); ++k) g.feature[k] += f[k];
    }
    for (double& v : g.feature) v /= static_cast<double>(n_gallery);
    const std::size_t gi = ep.gallery.size();
    ep.gallery.push_back(std::move(g));
    for (std::size_t i = n_gallery; i < rows.size(); ++i) {
      ep.mated_probes.push_back({subjects[s], batch[rows[i]].feature, rows[i], gi});
    }
  }
  return ep;
}

}  // namespace osb
