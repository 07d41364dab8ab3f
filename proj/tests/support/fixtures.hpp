#pragma once

#include <string>
#include <vector>

#include "osb/matrix.hpp"
#include "osb/rng.hpp"
#include "osb/similarity.hpp"
#include "reference.hpp"

namespace osb_fix {

struct Labelled {
  osb::ScoreMatrix scores;
  std::vector<bool> mated;
  std::vector<std::string> truth;
  std::vector<osb_ref::ProbeRow> rows;
};

// Gallery columns are "g0".."g{C-1}"; a mated row names its genuine column,
// non-mated rows get subject "n<i>".
inline Labelled build(const std::vector<osb_ref::ProbeRow>& rows) {
  const std::size_t cols = rows.front().scores.size();
  std::vector<std::string> gallery;
  for (std::size_t j = 0; j < cols; ++j) gallery.push_back("g" + std::to_string(j));
  osb::Matrix m(rows.size(), cols);
  std::vector<osb::SampleKey> probes;
  Labelled out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = rows[i].scores[j];
    const std::string subject =
        rows[i].mated ? gallery[rows[i].genuine_col] : "n" + std::to_string(i);
    probes.push_back({subject, "p" + std::to_string(i)});
    out.mated.push_back(rows[i].mated);
    out.truth.push_back(subject);
  }
  out.scores = osb::ScoreMatrix(std::move(probes), std::move(gallery), std::move(m));
  out.rows = rows;
  return out;
}

// Three non-mated probes whose maxima are 0.8, 0.7, 0.6 and four mated probes
// with (genuine, rank) = (0.7, 1), (0.9, 2), (0.74, 1), (0.8, 1). Every
// non-mated and genuine score lies in [0.5, 0.9].
inline Labelled toy_pipeline() {
  return build({
      {{0.7, 0.6}, true, 0},
      {{0.9, 0.95}, true, 0},
      {{0.74, 0.55}, true, 0},
      {{0.8, 0.65}, true, 0},
      {{0.8, 0.5}, false, 0},
      {{0.7, 0.6}, false, 0},
      {{0.6, 0.55}, false, 0},
  });
}

// Random matrix with at least one mated and one non-mated row. Scores are
// drawn from a coarse grid so that ties are common.
inline std::vector<osb_ref::ProbeRow> random_rows(osb::Rng& rng, std::size_t max_probes,
                                                  std::size_t max_gallery) {
  const std::size_t n = 2 + rng.uniform_index(max_probes - 1);
  const std::size_t c = 1 + rng.uniform_index(max_gallery);
  std::vector<osb_ref::ProbeRow> rows(n);
  for (std::size_t i = 0; i < n; ++i) {
    rows[i].scores.resize(c);
    for (auto& v : rows[i].scores) v = static_cast<double>(rng.uniform_index(11)) / 10.0;
    rows[i].mated = i == 0 ? true : (i == 1 ? false : rng.uniform() < 0.6);
    rows[i].genuine_col = rng.uniform_index(c);
  }
  return rows;
}

}  // namespace osb_fix
