#include "osb/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <thread>

#include "osb/error.hpp"
#include "osb/io.hpp"
#include "osb/rng.hpp"

namespace osb {
namespace {

void check_dims(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw UsageError("dimension mismatch: " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
}

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

double distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace

double similarity(std::span<const double> a, std::span<const double> b, Metric metric) {
  check_dims(a, b);
  if (metric == Metric::Euclidean) return 1.0 / (1.0 + distance(a, b));
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) throw DataError("zero-norm vector under cosine similarity");
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

SimilarityGrad similarity_grad(std::span<const double> a, std::span<const double> b,
                               Metric metric) {
  check_dims(a, b);
  const std::size_t n = a.size();
  SimilarityGrad g{0.0, Feature(n, 0.0), Feature(n, 0.0)};
  if (metric == Metric::Euclidean) {
    const double d = distance(a, b);
    g.value = 1.0 / (1.0 + d);
    if (d == 0.0) return g;
    // ds/dd = -1/(1+d)^2, dd/da = (a-b)/d
    const double scale = -g.value * g.value / d;
    for (std::size_t k = 0; k < n; ++k) {
      g.d_a[k] = scale * (a[k] - b[k]);
      g.d_b[k] = -g.d_a[k];
    }
    return g;
  }
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) throw DataError("zero-norm vector under cosine similarity");
  const double s = dot(a, b) / (na * nb);
  g.value = std::clamp(s, -1.0, 1.0);
  for (std::size_t k = 0; k < n; ++k) {
    g.d_a[k] = b[k] / (na * nb) - s * a[k] / (na * na);
    g.d_b[k] = a[k] / (na * nb) - s * b[k] / (nb * nb);
  }
  return g;
}

Feature aggregate_gallery(const EmbeddingSet& set, std::string_view subject_id,
                          GalleryAggregation mode, std::uint64_t seed) {
  const auto rows = set.rows_of(subject_id);
  if (rows.empty()) {
    throw DataError("unknown gallery subject '" + std::string(subject_id) + "'");
  }
  if (mode == GalleryAggregation::RandomTemplate) {
    Rng rng(derive_seed(seed, subject_id));
    return set[rows[rng.uniform_index(rows.size())]].feature;
  }
  Feature mean(set.dim(), 0.0);
  for (std::size_t r : rows) {
    const auto& f = set[r].feature;
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += f[k];
  }
  for (double& v : mean) v /= static_cast<double>(rows.size());
  return mean;
}

ScoreMatrix::ScoreMatrix(std::vector<SampleKey> probes, std::vector<std::string> gallery_subjects,
                         Matrix scores)
    : probes_(std::move(probes)), gallery_(std::move(gallery_subjects)), scores_(std::move(scores)) {
  if (scores_.rows() != probes_.size() || scores_.cols() != gallery_.size()) {
    throw DataError("score matrix shape does not match probe/gallery metadata");
  }
  std::set<std::string_view> seen;
  for (const auto& s : gallery_) {
    if (!seen.insert(s).second) throw DataError("duplicate gallery subject '" + s + "'");
  }
  for (std::size_t i = 0; i < scores_.rows(); ++i) {
    for (double v : scores_.row(i)) {
      if (!std::isfinite(v)) throw DataError("non-finite score", i + 1);
    }
  }
}

std::optional<std::size_t> ScoreMatrix::column_of(std::string_view subject_id) const {
  auto it = std::find(gallery_.begin(), gallery_.end(), subject_id);
  if (it == gallery_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - gallery_.begin());
}

std::vector<std::string> ScoreMatrix::probe_subjects() const {
  std::vector<std::string> out;
  out.reserve(probes_.size());
  for (const auto& p : probes_) out.push_back(p.subject_id);
  return out;
}

std::vector<bool> ScoreMatrix::mated_flags() const {
  std::set<std::string_view> gallery(gallery_.begin(), gallery_.end());
  std::vector<bool> out;
  out.reserve(probes_.size());
  for (const auto& p : probes_) out.push_back(gallery.count(p.subject_id) > 0);
  return out;
}

ScoreMatrix score_matrix(const EmbeddingSet& probes, const EmbeddingSet& gallery,
                         const SimilarityConfig& cfg, GalleryAggregation agg,
                         std::uint64_t seed, unsigned threads) {
  if (gallery.empty()) throw DataError("empty gallery");
  if (probes.dim() != gallery.dim()) {
    throw UsageError("probe dimension " + std::to_string(probes.dim()) +
                     " does not match gallery dimension " + std::to_string(gallery.dim()));
  }
  const auto& subjects = gallery.subjects();
  std::vector<Feature> templates;
  templates.reserve(subjects.size());
  for (const auto& s : subjects) templates.push_back(aggregate_gallery(gallery, s, agg, seed));

  Matrix scores(probes.size(), subjects.size());
  auto fill_rows = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      for (std::size_t j = 0; j < templates.size(); ++j) {
        scores(i, j) = similarity(probes[i].feature, templates[j], cfg.metric);
      }
    }
  };

  const std::size_t n = probes.size();
  const std::size_t workers = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(n, 1));
  if (workers == 1) {
    fill_rows(0, n);
  } else {
    std::vector<std::jthread> pool;
    std::vector<std::exception_ptr> errors(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          fill_rows(std::min(n, w * chunk), std::min(n, (w + 1) * chunk));
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    pool.clear();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  std::vector<SampleKey> keys;
  keys.reserve(n);
  for (const auto& p : probes) keys.push_back(p.key());
  return ScoreMatrix(std::move(keys), subjects, std::move(scores));
}

void write_score_matrix_csv(const ScoreMatrix& m, std::ostream& out, std::string_view comment) {
  if (!comment.empty()) out << "# " << comment << '\n';
  out << "probe_subject,probe_sample";
  for (const auto& s : m.gallery_subjects()) out << ',' << s;
  out << '\n';
  for (std::size_t i = 0; i < m.rows(); ++i) {
    out << m.probes()[i].subject_id << ',' << m.probes()[i].sample_id;
    for (double v : m.row(i)) out << ',' << format_exact(v);
    out << '\n';
  }
}

ScoreMatrix read_score_matrix_csv(std::istream& in) {
  std::string line;
  std::vector<std::string> gallery;
  bool have_header = false;
  std::vector<SampleKey> probes;
  std::vector<double> values;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    auto fields = split_csv_line(line);
    if (!have_header) {
      if (fields.size() < 3 || fields[0] != "probe_subject" || fields[1] != "probe_sample") {
        throw DataError("score matrix header must be probe_subject,probe_sample,<gallery...>");
      }
      for (std::size_t k = 2; k < fields.size(); ++k) gallery.emplace_back(fields[k]);
      have_header = true;
      continue;
    }
    ++row;
    if (fields.size() != gallery.size() + 2) {
      throw DataError("expected " + std::to_string(gallery.size()) + " scores", row);
    }
    probes.push_back({std::string(fields[0]), std::string(fields[1])});
    for (std::size_t k = 2; k < fields.size(); ++k) values.push_back(parse_real(fields[k], row));
  }
  if (!have_header) throw DataError("score matrix CSV is missing its header");
  Matrix scores(probes.size(), gallery.size());
  std::copy(values.begin(), values.end(), scores.data().begin());
  return ScoreMatrix(std::move(probes), std::move(gallery), std::move(scores));
}

}  // namespace osb
