#include "osb/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>

#include "osb/episode.hpp"
#include "osb/error.hpp"
#include "osb/io.hpp"
#include "osb/losses.hpp"
#include "osb/rng.hpp"

namespace osb {

double normalize_score(double x, double lo, double hi) noexcept {
  return hi > lo ? (x - lo) / (hi - lo) : 0.0;
}

HistogramTable score_histograms(const ScoreMatrix& scores, const std::vector<bool>& mated_flags,
                                std::span<const std::string> true_subject, std::size_t bins,
                                std::span<const double> fpirs) {
  if (bins < 2) throw UsageError("histograms need at least 2 bins");
  if (mated_flags.size() != scores.rows() || true_subject.size() != scores.rows()) {
    throw UsageError("mated flags / true subjects must have one entry per probe row");
  }
  std::vector<double> nonmated;
  std::vector<double> maxima;
  std::vector<double> genuine;
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    const auto row = scores.row(i);
    if (mated_flags[i]) {
      const auto col = scores.column_of(true_subject[i]);
      if (!col) throw DataError("mated probe has no gallery column", i + 1);
      genuine.push_back(row[*col]);
    } else if (!row.empty()) {
      nonmated.insert(nonmated.end(), row.begin(), row.end());
      maxima.push_back(*std::max_element(row.begin(), row.end()));
    }
  }
  if (nonmated.empty()) throw DataError("no non-mated scores to histogram");
  if (genuine.empty()) throw DataError("no genuine scores to histogram");

  HistogramTable t;
  t.bins = bins;
  t.lo = std::min(*std::min_element(nonmated.begin(), nonmated.end()),
                  *std::min_element(genuine.begin(), genuine.end()));
  t.hi = std::max(*std::max_element(nonmated.begin(), nonmated.end()),
                  *std::max_element(genuine.begin(), genuine.end()));
  auto fill = [&](const std::vector<double>& values, std::vector<std::size_t>& counts) {
    counts.assign(bins, 0);
    for (double v : values) {
      const double u = normalize_score(v, t.lo, t.hi);
      const auto b = static_cast<std::size_t>(std::floor(u * static_cast<double>(bins)));
      ++counts[std::min(b, bins - 1)];
    }
  };
  fill(nonmated, t.nonmated);
  fill(maxima, t.max_nonmated);
  fill(genuine, t.genuine);
  for (double f : fpirs) {
    t.thresholds.push_back({f, normalize_score(threshold_at_fpir(maxima, f), t.lo, t.hi)});
  }
  return t;
}

void write_histogram_csv(const HistogramTable& t, std::ostream& out, std::string_view comment) {
  if (!comment.empty()) out << "# " << comment << '\n';
  out << "# range," << format_exact(t.lo) << ',' << format_exact(t.hi) << '\n';
  for (const auto& th : t.thresholds) {
    out << "# threshold," << format_exact(th[0]) << ',' << format_exact(th[1]) << '\n';
  }
  out << "bin,bin_lo,bin_hi,nonmated,max_nonmated,genuine\n";
  for (std::size_t b = 0; b < t.bins; ++b) {
    const double w = 1.0 / static_cast<double>(t.bins);
    out << b << ',' << format_exact(b * w) << ',' << format_exact((b + 1) * w) << ','
        << t.nonmated[b] << ',' << t.max_nonmated[b] << ',' << t.genuine[b] << '\n';
  }
}

HistogramTable read_histogram_csv(std::istream& in) {
  HistogramTable t;
  std::string line;
  bool header = false;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (line.front() == '#') {
      if (fields.size() == 3 && fields[0] == "# range") {
        t.lo = parse_real(fields[1], 0);
        t.hi = parse_real(fields[2], 0);
      } else if (fields.size() == 3 && fields[0] == "# threshold") {
        t.thresholds.push_back({parse_real(fields[1], 0), parse_real(fields[2], 0)});
      }
      continue;
    }
    if (!header) {
      header = true;
      continue;
    }
    ++row;
    if (fields.size() != 6) throw DataError("histogram row needs 6 fields", row);
    auto count = [&](std::string_view s) {
      return static_cast<std::size_t>(parse_real(s, row));
    };
    t.nonmated.push_back(count(fields[3]));
    t.max_nonmated.push_back(count(fields[4]));
    t.genuine.push_back(count(fields[5]));
  }
  t.bins = t.genuine.size();
  return t;
}

BreakdownTable fn_breakdown(std::span<const OpenSetResult> results,
                            std::optional<std::span<const OpenSetResult>> comparison) {
  if (results.empty()) throw UsageError("breakdown needs at least one result");
  if (comparison && comparison->size() != results.size()) {
    throw UsageError("compared result lists must have the same number of splits");
  }
  const double n = static_cast<double>(results.size());
  BreakdownTable t;
  t.splits = results.size();
  for (const auto& r : results) {
    t.mean_detection_only += static_cast<double>(r.fn_detection_only) / n;
    t.mean_identification_only += static_cast<double>(r.fn_identification_only) / n;
    t.mean_both += static_cast<double>(r.fn_both) / n;
  }
  if (!comparison) return t;

  BreakdownTable::Comparison c;
  bool aligned = true;
  for (std::size_t k = 0; k < results.size(); ++k) {
    const auto& a = results[k];
    const auto& b = (*comparison)[k];
    c.mean_detection_only += static_cast<double>(b.fn_detection_only) / n;
    c.mean_identification_only += static_cast<double>(b.fn_identification_only) / n;
    c.mean_both += static_cast<double>(b.fn_both) / n;
    aligned = aligned && a.seed == b.seed && a.mated_outcomes.size() == b.mated_outcomes.size() &&
              a.mated_outcomes.size() == a.num_mated;
  }
  if (aligned) {
    for (std::size_t k = 0; k < results.size(); ++k) {
      const auto& a = results[k].mated_outcomes;
      const auto& b = (*comparison)[k].mated_outcomes;
      for (std::size_t i = 0; i < a.size(); ++i) {
        const bool fa = a[i] != FnCause::None;
        const bool fb = b[i] != FnCause::None;
        c.mean_shared += (fa && fb) ? 1.0 / n : 0.0;
        c.mean_only_first += (fa && !fb) ? 1.0 / n : 0.0;
        c.mean_only_second += (!fa && fb) ? 1.0 / n : 0.0;
      }
    }
  }
  t.comparison = c;
  return t;
}

void write_breakdown_csv(const BreakdownTable& t, std::ostream& out, std::string_view comment) {
  if (!comment.empty()) out << "# " << comment << '\n';
  out << "arm,splits,mean_fn_det,mean_fn_id,mean_fn_both,mean_shared,mean_exclusive\n";
  const bool cmp = t.comparison.has_value();
  out << "first," << t.splits << ',' << format_exact(t.mean_detection_only) << ','
      << format_exact(t.mean_identification_only) << ',' << format_exact(t.mean_both) << ','
      << (cmp ? format_exact(t.comparison->mean_shared) : "") << ','
      << (cmp ? format_exact(t.comparison->mean_only_first) : "") << '\n';
  if (cmp) {
    const auto& c = *t.comparison;
    out << "second," << t.splits << ',' << format_exact(c.mean_detection_only) << ','
        << format_exact(c.mean_identification_only) << ',' << format_exact(c.mean_both) << ','
        << format_exact(c.mean_shared) << ',' << format_exact(c.mean_only_second) << '\n';
  }
}

std::string_view to_string(FieldLoss loss) noexcept {
  switch (loss) {
    case FieldLoss::Softmax: return "softmax";
    case FieldLoss::Triplet: return "triplet";
    case FieldLoss::Detection: return "detection";
    case FieldLoss::RelativeThreshold: return "rtm";
  }
  return "unknown";
}

FieldLoss parse_field_loss(std::string_view text) {
  for (auto l : {FieldLoss::Softmax, FieldLoss::Triplet, FieldLoss::Detection,
                 FieldLoss::RelativeThreshold}) {
    if (text == to_string(l)) return l;
  }
  throw UsageError("unknown field loss '" + std::string(text) +
                   "' (expected softmax|triplet|detection|rtm)");
}

namespace {

Feature point(const std::array<double, 2>& p) { return {p[0], p[1]}; }

EpisodeBatch field_episode(const FieldLayout& layout) {
  EpisodeBatch ep;
  ep.metric = Metric::Euclidean;
  for (std::size_t j = 0; j < layout.gallery.size(); ++j) {
    ep.gallery.push_back({"g" + std::to_string(j), point(layout.gallery[j]), {}});
  }
  for (std::size_t k = 0; k < layout.nonmated.size(); ++k) {
    ep.nonmated_probes.push_back({"n" + std::to_string(k), point(layout.nonmated[k]), kNoIndex, kNoIndex});
  }
  return ep;
}

void check_layout(FieldLoss loss, const FieldLayout& layout) {
  if (layout.label >= layout.gallery.size()) throw UsageError("field label has no gallery point");
  if ((loss != FieldLoss::Softmax) && layout.nonmated.empty()) {
    throw UsageError("field layout needs at least one non-mated point");
  }
}

struct FieldEval {
  double value = 0.0;
  double dx = 0.0;
  double dy = 0.0;
};

FieldEval evaluate(FieldLoss loss, const FieldLayout& layout, double x, double y) {
  check_layout(loss, layout);
  const Feature v{x, y};
  switch (loss) {
    case FieldLoss::Softmax: {
      Matrix logits(1, layout.gallery.size());
      for (std::size_t c = 0; c < layout.gallery.size(); ++c) {
        logits(0, c) = layout.gallery[c][0] * x + layout.gallery[c][1] * y;
      }
      const std::size_t label = layout.label;
      const auto out = softmax_loss(logits, std::span<const std::size_t>(&label, 1));
      FieldEval e{out.value, 0.0, 0.0};
      for (std::size_t c = 0; c < layout.gallery.size(); ++c) {
        e.dx += out.grad_logits(0, c) * layout.gallery[c][0];
        e.dy += out.grad_logits(0, c) * layout.gallery[c][1];
      }
      return e;
    }
    case FieldLoss::Triplet: {
      const auto out = triplet_loss(point(layout.gallery[layout.label]), v,
                                    point(layout.nonmated.front()), layout.margin);
      return {out.value, out.d_positive[0], out.d_positive[1]};
    }
    case FieldLoss::Detection: {
      auto ep = field_episode(layout);
      ep.mated_probes.push_back({ep.gallery[layout.label].subject_id, v, kNoIndex, layout.label});
      const auto out = s_det_averaged(ep, 0, layout.hp.alpha, layout.hp.detach_threshold);
      return {-out.value, -out.grad.mated[0][0], -out.grad.mated[0][1]};
    }
    case FieldLoss::RelativeThreshold: {
      auto ep = field_episode(layout);
      ep.nonmated_probes.front().feature = v;
      const auto out = rtm_loss(ep, layout.hp.rtm_pooling);
      return {out.value, out.grad.nonmated[0][0], out.grad.nonmated[0][1]};
    }
  }
  throw UsageError("unknown field loss");
}

}  // namespace

FieldSample field_gradient(FieldLoss loss, const FieldLayout& layout, double x, double y) {
  const auto e = evaluate(loss, layout, x, y);
  return {x, y, e.dx, e.dy, std::hypot(e.dx, e.dy)};
}

double field_value(FieldLoss loss, const FieldLayout& layout, double x, double y) {
  return evaluate(loss, layout, x, y).value;
}

std::vector<FieldSample> gradient_field(FieldLoss loss, const FieldLayout& layout,
                                        const GridSpec& grid) {
  if (grid.resolution < 2) throw UsageError("grid resolution must be at least 2");
  if (!(grid.x_max > grid.x_min) || !(grid.y_max > grid.y_min)) {
    throw UsageError("grid bounds must be increasing");
  }
  std::vector<FieldSample> out;
  out.reserve(grid.resolution * grid.resolution);
  const double n = static_cast<double>(grid.resolution - 1);
  for (std::size_t r = 0; r < grid.resolution; ++r) {
    const double y = grid.y_min + (grid.y_max - grid.y_min) * static_cast<double>(r) / n;
    for (std::size_t c = 0; c < grid.resolution; ++c) {
      const double x = grid.x_min + (grid.x_max - grid.x_min) * static_cast<double>(c) / n;
      out.push_back(field_gradient(loss, layout, x, y));
    }
  }
  return out;
}

void write_field_csv(std::span<const FieldSample> field, std::ostream& out, std::string_view comment) {
  if (!comment.empty()) out << "# " << comment << '\n';
  out << "x,y,du,dv,magnitude\n";
  for (const auto& s : field) {
    out << format_exact(s.x) << ',' << format_exact(s.y) << ',' << format_exact(s.du) << ','
        << format_exact(s.dv) << ',' << format_exact(s.magnitude) << '\n';
  }
}

std::string fingerprint(std::string_view canonical_config) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "config=%016llx",
                static_cast<unsigned long long>(fnv1a64(canonical_config)));
  return buf;
}

}  // namespace osb
