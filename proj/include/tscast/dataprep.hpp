#pragma once

// Data preparation: min-max normalization, sliding-window matrices with the
// train/test split, CSV ingestion, and the synthetic series generators.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "tscast/errors.hpp"
#include "tscast/matrix.hpp"
#include "tscast/rng.hpp"

namespace tscast {

struct Series {
  std::string name;
  std::vector<double> values;
  std::vector<std::string> dates;  // optional, parallel to values when present

  std::size_t length() const { return values.size(); }
};

/// Min/max of the reference segment; enough to invert the normalization.
struct NormRecord {
  double v_min = 0.0;
  double v_max = 1.0;

  double range() const { return v_max - v_min; }
};

struct NormalizedSeries {
  Series series;
  NormRecord record;
};

inline NormRecord min_max_of(std::span<const double> values, const std::string& name) {
  if (values.empty()) throw DataError("normalize: series '" + name + "' is empty");
  double lo = values[0], hi = values[0];
  for (double v : values) {
    if (!std::isfinite(v)) throw DataError("normalize: non-finite value in series '" + name + "'");
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi == lo) {
    throw DegenerateSeriesError("series '" + name + "' is constant (min == max == " +
                                std::to_string(lo) + "), min-max normalization undefined");
  }
  return {lo, hi};
}

/// Rescale with an existing record: x = (v - v_min) / (v_max - v_min).
inline Series apply_normalization(const Series& s, const NormRecord& rec) {
  Series out = s;
  const double range = rec.range();
  for (double& v : out.values) v = (v - rec.v_min) / range;
  return out;
}

/// Min-max normalize to [0, 1] using the full series min and max.
inline NormalizedSeries normalize(const Series& s) {
  const NormRecord rec = min_max_of(s.values, s.name);
  return {apply_normalization(s, rec), rec};
}

/// Exact inverse of the normalization.
inline Series denormalize(const Series& s, const NormRecord& rec) {
  Series out = s;
  const double range = rec.range();
  for (double& v : out.values) v = v * range + rec.v_min;
  return out;
}

/// Window matrix X (one window of w consecutive samples per row), target
/// matrix Y (the following f samples per row), and the train/test split:
/// the first n_train rows train, the rest test.
struct WindowedDataset {
  Matrix x;  // rows x w
  Matrix y;  // rows x f
  std::size_t n_train = 0;
  std::size_t window = 0;
  std::size_t horizon = 0;
  NormRecord norm;
  std::string source;

  std::size_t rows() const { return x.rows(); }
  std::size_t test_rows() const { return rows() - n_train; }
};

/// Builds the sliding windows over a normalized series. With Q samples the
/// result has Q - (w - 1 + f) rows; row k (0-based) covers samples
/// [k, k+w) with targets [k+w, k+w+f). n_train = Q - test_s - w.
inline WindowedDataset make_windows(const NormalizedSeries& s, std::size_t w, std::size_t f,
                                    std::size_t test_s) {
  const std::size_t q = s.series.length();
  if (f < 1) throw ConfigError("make_windows: horizon f must be >= 1");
  if (!(f < w)) {
    throw ConfigError("make_windows: violated f < w (f=" + std::to_string(f) +
                      ", w=" + std::to_string(w) + ")");
  }
  if (q < test_s + w + 1) {
    throw ConfigError("make_windows: violated N > 0 (Q=" + std::to_string(q) +
                      ", test_s=" + std::to_string(test_s) + ", w=" + std::to_string(w) + ")");
  }
  const std::size_t n_train = q - test_s - w;
  if (!(w < n_train)) {
    throw ConfigError("make_windows: violated w < N (w=" + std::to_string(w) +
                      ", N=" + std::to_string(n_train) + ")");
  }
  if (test_s + 1 < f) {
    throw ConfigError("make_windows: test_s=" + std::to_string(test_s) +
                      " leaves no complete test window for f=" + std::to_string(f));
  }

  const std::size_t rows = q - (w - 1 + f);
  WindowedDataset d;
  d.x = Matrix(rows, w);
  d.y = Matrix(rows, f);
  const auto& v = s.series.values;
  for (std::size_t k = 0; k < rows; ++k) {
    for (std::size_t t = 0; t < w; ++t) d.x(k, t) = v[k + t];
    for (std::size_t t = 0; t < f; ++t) d.y(k, t) = v[k + w + t];
  }
  d.n_train = n_train;
  d.window = w;
  d.horizon = f;
  d.norm = s.record;
  d.source = s.series.name;
  return d;
}

/// Keeps the last `keep` values of a series.
inline Series truncate_tail(const Series& s, std::size_t keep) {
  if (keep > s.length()) {
    throw ConfigError("truncate_tail: keep=" + std::to_string(keep) + " exceeds length " +
                      std::to_string(s.length()));
  }
  Series out;
  out.name = s.name;
  out.values.assign(s.values.end() - static_cast<std::ptrdiff_t>(keep), s.values.end());
  if (!s.dates.empty()) {
    out.dates.assign(s.dates.end() - static_cast<std::ptrdiff_t>(keep), s.dates.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV ingestion. Dialect: comma-separated, first line is the header, '.'
// decimal point, rows in chronological order. No quoting or locale handling.
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  fields.push_back(cur);
  return fields;
}

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline bool is_missing_token(std::string t) {
  for (char& c : t) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return t.empty() || t == "null" || t == "na" || t == "n/a" || t == "nan";
}

inline double parse_number(const std::string& token, const std::string& context) {
  const char* begin = token.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0') {
    throw DataError(context + ": cannot parse number '" + token + "'");
  }
  if (!std::isfinite(v)) throw DataError(context + ": non-finite value '" + token + "'");
  return v;
}

}  // namespace detail

/// Loads one value column from a dated CSV (header must contain "Date" and
/// the requested column). Rows whose value is missing ("", null, NA, N/A,
/// nan) are skipped; anything else that fails to parse is an error naming
/// the row. The series name is the file stem.
inline Series load_csv(const std::filesystem::path& path, const std::string& column = "Close") {
  std::ifstream in(path);
  if (!in) throw DataError("load_csv: cannot open '" + path.string() + "'");

  std::string line;
  if (!std::getline(in, line)) throw DataError("load_csv: '" + path.string() + "' is empty");
  const auto header = detail::split_csv_line(line);
  std::ptrdiff_t date_idx = -1, value_idx = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string name = detail::trim(header[i]);
    if (name == "Date") date_idx = static_cast<std::ptrdiff_t>(i);
    if (name == column) value_idx = static_cast<std::ptrdiff_t>(i);
  }
  if (date_idx < 0) {
    throw DataError("load_csv: '" + path.string() + "' has no 'Date' column");
  }
  if (value_idx < 0) {
    throw DataError("load_csv: '" + path.string() + "' has no '" + column + "' column");
  }

  Series s;
  s.name = path.stem().string();
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() <= static_cast<std::size_t>(std::max(date_idx, value_idx))) {
      throw DataError("load_csv: '" + path.string() + "' row " + std::to_string(row) +
                      " has only " + std::to_string(fields.size()) + " fields");
    }
    const std::string token = detail::trim(fields[static_cast<std::size_t>(value_idx)]);
    if (detail::is_missing_token(token)) continue;
    s.values.push_back(detail::parse_number(
        token, "load_csv: '" + path.string() + "' row " + std::to_string(row)));
    s.dates.push_back(detail::trim(fields[static_cast<std::size_t>(date_idx)]));
  }
  if (s.values.empty()) {
    throw DataError("load_csv: '" + path.string() + "' contains no usable rows");
  }
  return s;
}

// ---------------------------------------------------------------------------
// Multi-series CSV: header `t,series_1,...,series_n`, one row per timestep,
// 17 significant digits so values round-trip exactly.
// ---------------------------------------------------------------------------

inline void write_multi_csv(const std::filesystem::path& path, const std::vector<Series>& set) {
  if (set.empty()) throw DataError("write_multi_csv: no series to write");
  std::ofstream out(path);
  if (!out) throw DataError("write_multi_csv: cannot open '" + path.string() + "'");
  out << "t";
  for (const auto& s : set) out << "," << s.name;
  out << "\n";
  char buf[40];
  for (std::size_t t = 0; t < set[0].length(); ++t) {
    out << t;
    for (const auto& s : set) {
      if (t >= s.length()) throw DataError("write_multi_csv: series lengths differ");
      std::snprintf(buf, sizeof(buf), "%.17g", s.values[t]);
      out << "," << buf;
    }
    out << "\n";
  }
}

inline std::vector<Series> load_multi_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("load_multi_csv: cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError("load_multi_csv: '" + path.string() + "' is empty");
  const auto header = detail::split_csv_line(line);
  if (header.size() < 2 || detail::trim(header[0]) != "t") {
    throw DataError("load_multi_csv: '" + path.string() + "' header must start with 't'");
  }
  std::vector<Series> set(header.size() - 1);
  for (std::size_t i = 1; i < header.size(); ++i) set[i - 1].name = detail::trim(header[i]);
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != header.size()) {
      throw DataError("load_multi_csv: '" + path.string() + "' row " + std::to_string(row) +
                      " has " + std::to_string(fields.size()) + " fields, expected " +
                      std::to_string(header.size()));
    }
    for (std::size_t i = 1; i < fields.size(); ++i) {
      set[i - 1].values.push_back(detail::parse_number(
          detail::trim(fields[i]),
          "load_multi_csv: '" + path.string() + "' row " + std::to_string(row)));
    }
  }
  if (set[0].values.empty()) {
    throw DataError("load_multi_csv: '" + path.string() + "' contains no rows");
  }
  return set;
}

// ---------------------------------------------------------------------------
// Synthetic generators.
// ---------------------------------------------------------------------------

/// Weekly-activity generator: a (1,1,1,1,1,0,0) pattern plus a linear trend,
/// circularly rotated per series, with Gaussian noise and a per-series scale.
struct ActivitiesConfig {
  std::size_t n_series = 10;
  std::size_t length = 3584;
  double slope = 0.0001;
  double noise_sd = 0.05;
  double scale_min = 0.5;
  double scale_max = 10.0;
  bool noise_after_scaling = false;  // default: noise added before scaling
};

/// Deterministic given the seed. Per series i (0-based): draw the scale
/// factor, then one noise value per sample; the base series is rotated left
/// by i positions.
inline std::vector<Series> generate_activities(const ActivitiesConfig& cfg, std::uint64_t seed) {
  if (cfg.n_series < 1) throw ConfigError("generate_activities: n_series must be >= 1");
  if (cfg.length < 7) throw ConfigError("generate_activities: length must be >= 7");
  static constexpr double kPattern[7] = {1, 1, 1, 1, 1, 0, 0};

  std::vector<double> base(cfg.length);
  for (std::size_t t = 0; t < cfg.length; ++t) {
    base[t] = kPattern[t % 7] + cfg.slope * static_cast<double>(t);
  }

  Rng rng(seed);
  std::vector<Series> set(cfg.n_series);
  for (std::size_t i = 0; i < cfg.n_series; ++i) {
    Series& s = set[i];
    s.name = "series_" + std::to_string(i + 1);
    s.values.resize(cfg.length);
    const double scale = rng.uniform(cfg.scale_min, cfg.scale_max);
    for (std::size_t t = 0; t < cfg.length; ++t) {
      const double rotated = base[(t + i) % cfg.length];
      const double noise = rng.gaussian(0.0, cfg.noise_sd);
      s.values[t] = cfg.noise_after_scaling ? rotated * scale + noise : (rotated + noise) * scale;
    }
  }
  return set;
}

/// Random walks with seeded Gaussian increments; the increment scale is
/// drawn per series so the set has heterogeneous volatility.
struct RandomWalkConfig {
  std::size_t n_series = 10;
  std::size_t length = 700;
  double sd_min = 0.5;
  double sd_max = 2.0;
  double start = 100.0;
};

inline std::vector<Series> generate_random_walks(const RandomWalkConfig& cfg, std::uint64_t seed) {
  if (cfg.n_series < 1) throw ConfigError("generate_random_walks: n_series must be >= 1");
  if (cfg.length < 2) throw ConfigError("generate_random_walks: length must be >= 2");
  Rng rng(seed);
  std::vector<Series> set(cfg.n_series);
  for (std::size_t i = 0; i < cfg.n_series; ++i) {
    Series& s = set[i];
    s.name = "series_" + std::to_string(i + 1);
    s.values.resize(cfg.length);
    const double sd = rng.uniform(cfg.sd_min, cfg.sd_max);
    double level = cfg.start;
    for (std::size_t t = 0; t < cfg.length; ++t) {
      s.values[t] = level;
      level += rng.gaussian(0.0, sd);
    }
  }
  return set;
}

}  // namespace tscast
