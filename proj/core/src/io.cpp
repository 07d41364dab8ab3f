#include "osb/io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include "json.hpp"
#include <sstream>

#include "osb/error.hpp"

namespace osb {
namespace {

constexpr std::array<char, 4> kMagic{'O', 'S', 'B', 'E'};
constexpr std::uint32_t kVersion = 1;

void check_id(const std::string& id, std::size_t row) {
  if (id.empty()) throw DataError("empty identifier", row);
  if (id.find_first_of(",\"\r\n") != std::string::npos) {
    throw DataError("identifier '" + id + "' contains a comma, quote, or line break", row);
  }
}

template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(std::is_unsigned_v<T>);
  std::array<char, sizeof(T)> buf{};
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf[i] = static_cast<char>((value >> (8 * i)) & 0xff);
  }
  out.write(buf.data(), buf.size());
}

template <typename T>
T get_le(std::istream& in, std::size_t row, const char* what) {
  std::array<unsigned char, sizeof(T)> buf{};
  in.read(reinterpret_cast<char*>(buf.data()), buf.size());
  if (in.gcount() != static_cast<std::streamsize>(buf.size())) {
    throw DataError(std::string("truncated file while reading ") + what,
                    row == 0 ? std::nullopt : std::optional<std::size_t>(row));
  }
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(buf[i]) << (8 * i);
  return value;
}

std::string get_string(std::istream& in, std::size_t row) {
  const auto len = get_le<std::uint16_t>(in, row, "identifier length");
  std::string s(len, '\0');
  in.read(s.data(), len);
  if (in.gcount() != static_cast<std::streamsize>(len)) {
    throw DataError("truncated file while reading identifier", row);
  }
  return s;
}

void put_string(std::ostream& out, const std::string& s, std::size_t row) {
  if (s.size() > std::numeric_limits<std::uint16_t>::max()) {
    throw DataError("identifier longer than 65535 bytes", row);
  }
  put_le(out, static_cast<std::uint16_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

EmbeddingSet load_csv(const std::filesystem::path& path, Metric metric) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());

  std::string line;
  std::size_t dim = 0;
  bool have_header = false;
  std::vector<Embedding> entries;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    auto fields = split_csv_line(line);
    if (!have_header) {
      if (fields.size() < 3 || fields[0] != "subject_id" || fields[1] != "sample_id") {
        throw DataError(path.string() + ": header must be subject_id,sample_id,f0,...");
      }
      dim = fields.size() - 2;
      have_header = true;
      continue;
    }
    ++row;
    if (fields.size() != dim + 2) {
      throw DataError(path.string() + ": dimension " +
                          std::to_string(fields.size() < 2 ? 0 : fields.size() - 2) +
                          " does not match header dimension " + std::to_string(dim),
                      row);
    }
    Embedding e;
    e.subject_id = std::string(fields[0]);
    e.sample_id = std::string(fields[1]);
    e.feature.reserve(dim);
    for (std::size_t k = 0; k < dim; ++k) e.feature.push_back(parse_real(fields[k + 2], row));
    entries.push_back(std::move(e));
  }
  if (!have_header) throw DataError(path.string() + ": missing header");
  try {
    return EmbeddingSet(std::move(entries), dim, metric);
  } catch (const DataError& err) {
    throw DataError(path.string() + ": " + err.what());
  }
}

EmbeddingSet load_binary(const std::filesystem::path& path, std::optional<Metric> metric) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());

  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (in.gcount() != 4 || magic != kMagic) throw DataError(path.string() + ": bad magic");
  const auto version = get_le<std::uint32_t>(in, 0, "version");
  if (version != kVersion) {
    throw DataError(path.string() + ": unsupported version " + std::to_string(version));
  }
  const auto count = get_le<std::uint32_t>(in, 0, "record count");
  const auto dim = get_le<std::uint32_t>(in, 0, "dimension");
  if (dim == 0) throw DataError(path.string() + ": dimension must be at least 1");

  Metric resolved = Metric::Euclidean;
  const auto meta = sidecar_path(path);
  if (std::filesystem::exists(meta)) {
    std::ifstream mf(meta);
    nlohmann::json j;
    try {
      mf >> j;
    } catch (const nlohmann::json::exception& ex) {
      throw DataError(meta.string() + ": " + ex.what());
    }
    if (j.value("count", std::uint64_t{count}) != count || j.value("dim", std::uint64_t{dim}) != dim) {
      throw DataError(meta.string() + ": count/dim disagree with " + path.string());
    }
    if (j.contains("metric")) resolved = parse_metric(j["metric"].get<std::string>());
  }
  if (metric) resolved = *metric;

  std::vector<Embedding> entries;
  entries.reserve(count);
  for (std::uint32_t r = 0; r < count; ++r) {
    const std::size_t row = r + 1;
    Embedding e;
    e.subject_id = get_string(in, row);
    e.sample_id = get_string(in, row);
    e.feature.resize(dim);
    for (std::uint32_t k = 0; k < dim; ++k) {
      const auto bits = get_le<std::uint32_t>(in, row, "feature value");
      e.feature[k] = static_cast<double>(std::bit_cast<float>(bits));
    }
    entries.push_back(std::move(e));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw DataError(path.string() + ": trailing bytes after " + std::to_string(count) + " records");
  }
  try {
    return EmbeddingSet(std::move(entries), dim, resolved);
  } catch (const DataError& err) {
    throw DataError(path.string() + ": " + err.what());
  }
}

}  // namespace

EmbeddingFormat format_from_path(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  return ext == ".csv" || ext == ".CSV" ? EmbeddingFormat::Csv : EmbeddingFormat::BinaryF32;
}

EmbeddingFormat parse_format(std::string_view text) {
  if (text == "csv") return EmbeddingFormat::Csv;
  if (text == "binary" || text == "osbe" || text == "f32") return EmbeddingFormat::BinaryF32;
  throw UsageError("unknown embedding format '" + std::string(text) + "' (expected csv|binary)");
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".meta.json");
}

std::string format_real(double value) {
  std::array<char, 40> buf{};
  std::snprintf(buf.data(), buf.size(), "%.9g", value);
  return buf.data();
}

std::string format_exact(double value) {
  std::array<char, 40> buf{};
  std::snprintf(buf.data(), buf.size(), "%.17g", value);
  return buf.data();
}

std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

double parse_real(std::string_view text, std::size_t row) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw DataError("cannot parse number '" + std::string(text) + "'", row);
  }
  if (!std::isfinite(value)) throw DataError("non-finite feature value", row);
  return value;
}

EmbeddingSet load_embeddings(const std::filesystem::path& path, EmbeddingFormat format,
                             std::optional<Metric> metric) {
  if (format == EmbeddingFormat::Csv) return load_csv(path, metric.value_or(Metric::Euclidean));
  return load_binary(path, metric);
}

void save_embeddings(const EmbeddingSet& set, const std::filesystem::path& path,
                     EmbeddingFormat format) {
  for (std::size_t i = 0; i < set.size(); ++i) {
    check_id(set[i].subject_id, i + 1);
    check_id(set[i].sample_id, i + 1);
  }

  if (format == EmbeddingFormat::Csv) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << "subject_id,sample_id";
    for (std::size_t k = 0; k < set.dim(); ++k) out << ",f" << k;
    out << '\n';
    for (const auto& e : set) {
      out << e.subject_id << ',' << e.sample_id;
      for (double v : e.feature) out << ',' << format_real(v);
      out << '\n';
    }
    if (!out) throw DataError("I/O failure writing " + path.string());
    return;
  }

  if (set.size() > std::numeric_limits<std::uint32_t>::max() ||
      set.dim() > std::numeric_limits<std::uint32_t>::max()) {
    throw DataError("embedding set too large for the binary format");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(kMagic.data(), kMagic.size());
  put_le(out, kVersion);
  put_le(out, static_cast<std::uint32_t>(set.size()));
  put_le(out, static_cast<std::uint32_t>(set.dim()));
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto& e = set[i];
    put_string(out, e.subject_id, i + 1);
    put_string(out, e.sample_id, i + 1);
    for (double v : e.feature) {
      const auto f = static_cast<float>(v);
      if (!std::isfinite(f)) throw DataError("feature value overflows f32", i + 1);
      put_le(out, std::bit_cast<std::uint32_t>(f));
    }
  }
  if (!out) throw DataError("I/O failure writing " + path.string());

  nlohmann::ordered_json meta;
  meta["count"] = set.size();
  meta["dim"] = set.dim();
  meta["metric"] = std::string(to_string(set.metric()));
  std::ofstream mf(sidecar_path(path), std::ios::binary);
  if (!mf) throw DataError("cannot write " + sidecar_path(path).string());
  mf << meta.dump(2) << '\n';
}

}  // namespace osb
