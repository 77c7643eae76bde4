#pragma once

#include "milv/binary_io.hpp"
#include "milv/core.hpp"

#include <charconv>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace milv {

/// One image: its proposal features (one row per instance) and binary labels.
/// All-zero labels mean "unknown" and are only valid for prediction inputs.
struct Bag {
  std::string id;
  Matrix instances;
  std::vector<std::uint8_t> labels;

  Index size() const { return instances.rows(); }

  bool has_labels() const {
    for (auto v : labels)
      if (v) return true;
    return false;
  }

  bool operator==(const Bag&) const = default;
};

/// Names used when a file format carries only the class count.
inline std::vector<std::string> default_class_names(std::size_t num_classes) {
  std::vector<std::string> names;
  names.reserve(num_classes);
  for (std::size_t c = 0; c < num_classes; ++c) names.push_back("class" + std::to_string(c));
  return names;
}

struct Dataset {
  std::vector<Bag> bags;
  std::vector<std::string> class_names;
  Index feature_dim = 0;

  std::size_t num_classes() const { return class_names.size(); }
  std::size_t size() const { return bags.size(); }

  Index total_instances() const {
    Index total = 0;
    for (const auto& b : bags) total += b.size();
    return total;
  }

  /// Every instance of every bag stacked in bag order.
  Matrix stacked_instances() const {
    Matrix out(total_instances(), feature_dim);
    Index row = 0;
    for (const auto& b : bags) {
      out.middleRows(row, b.size()) = b.instances;
      row += b.size();
    }
    return out;
  }

  /// n x C label matrix as doubles (0/1).
  Matrix label_matrix() const {
    Matrix out(static_cast<Index>(bags.size()), static_cast<Index>(num_classes()));
    for (std::size_t i = 0; i < bags.size(); ++i)
      for (std::size_t c = 0; c < num_classes(); ++c)
        out(static_cast<Index>(i), static_cast<Index>(c)) = bags[i].labels[c];
    return out;
  }

  std::vector<std::string> ids() const {
    std::vector<std::string> out;
    out.reserve(bags.size());
    for (const auto& b : bags) out.push_back(b.id);
    return out;
  }

  Dataset subset(const std::vector<std::size_t>& indices) const {
    Dataset out{{}, class_names, feature_dim};
    out.bags.reserve(indices.size());
    for (auto i : indices) out.bags.push_back(bags.at(i));
    return out;
  }

  /// Throws InvalidArgument describing the first violated invariant.
  void validate() const {
    detail::require(class_names.size() >= 2, "dataset needs at least 2 classes");
    detail::require(feature_dim > 0, "feature dimension must be positive");
    detail::require(!bags.empty(), "dataset needs at least one bag");
    for (const auto& b : bags) {
      detail::require(b.size() >= 1, "bag '" + b.id + "' has no instances");
      detail::require(b.instances.cols() == feature_dim,
                      "bag '" + b.id + "' has instance dimension " + std::to_string(b.instances.cols()) +
                          ", expected " + std::to_string(feature_dim));
      detail::require(b.labels.size() == class_names.size(), "bag '" + b.id + "' label length mismatch");
      for (auto v : b.labels) detail::require(v <= 1, "bag '" + b.id + "' has a non-binary label");
      detail::require(b.instances.allFinite(), "bag '" + b.id + "' has a non-finite feature");
      detail::require(b.id.size() <= UINT16_MAX, "bag id too long");
    }
  }

  /// Training-time check: every bag carries at least one positive label.
  void require_labeled() const {
    for (const auto& b : bags)
      detail::require(b.has_labels(), "bag '" + b.id + "' has no positive label; training requires labeled bags");
  }

  bool operator==(const Dataset&) const = default;
};

/// Strong-label exemplars: one single-class feature vector per row.
struct ExemplarSet {
  Matrix features;
  std::vector<std::uint32_t> classes;
  std::size_t num_classes = 0;

  std::size_t size() const { return classes.size(); }

  void validate() const {
    detail::require(num_classes >= 2, "exemplar set needs at least 2 classes");
    detail::require(features.rows() == static_cast<Index>(classes.size()), "exemplar rows/classes mismatch");
    detail::require(features.cols() > 0, "exemplar dimension must be positive");
    detail::require(features.allFinite(), "non-finite exemplar feature");
    for (auto c : classes)
      detail::require(c < num_classes, "exemplar class index " + std::to_string(c) + " out of range");
  }

  ExemplarSet restricted_to(const std::vector<std::uint32_t>& keep) const {
    std::vector<Index> rows;
    for (std::size_t i = 0; i < classes.size(); ++i)
      for (auto k : keep)
        if (classes[i] == k) {
          rows.push_back(static_cast<Index>(i));
          break;
        }
    ExemplarSet out{Matrix(static_cast<Index>(rows.size()), features.cols()), {}, num_classes};
    for (std::size_t r = 0; r < rows.size(); ++r) {
      out.features.row(static_cast<Index>(r)) = features.row(rows[r]);
      out.classes.push_back(classes[static_cast<std::size_t>(rows[r])]);
    }
    return out;
  }

  bool operator==(const ExemplarSet&) const = default;
};

/// Classifier outputs: one row per bag, one column per class.
struct ScoreMatrix {
  std::vector<std::string> bag_ids;
  std::vector<std::string> class_names;
  Matrix scores;

  void validate() const {
    detail::require(scores.rows() == static_cast<Index>(bag_ids.size()), "score rows do not match bag ids");
    detail::require(scores.cols() == static_cast<Index>(class_names.size()), "score columns do not match classes");
    detail::require(scores.allFinite(), "non-finite score");
  }
};

// ---------------------------------------------------------------------------
// BagFile: "MILB" u32 version=1, C, D, n; per bag: u16 id length, id bytes,
// C label bytes, u32 n_i, n_i*D float64. All little-endian.

inline constexpr std::uint32_t kFormatVersion = 1;

inline std::string encode_bags(const Dataset& ds) {
  ds.validate();
  io::ByteWriter w;
  w.magic("MILB", kFormatVersion);
  w.u32(io::checked_u32(static_cast<Index>(ds.num_classes()), "class count"));
  w.u32(io::checked_u32(ds.feature_dim, "feature dimension"));
  w.u32(io::checked_u32(static_cast<Index>(ds.size()), "bag count"));
  for (const auto& b : ds.bags) {
    w.u16(static_cast<std::uint16_t>(b.id.size()));
    w.bytes(b.id);
    for (auto v : b.labels) w.u8(v);
    w.u32(io::checked_u32(b.size(), "instance count"));
    w.f64_block(b.instances);
  }
  return w.buffer();
}

inline Dataset decode_bags(std::string bytes) {
  io::ByteReader r(std::move(bytes));
  r.magic("MILB", kFormatVersion);
  const std::uint64_t header_at = r.offset();
  const auto C = r.u32("class count");
  const auto D = r.u32("feature dimension");
  const auto n = r.u32("bag count");
  if (C < 2) throw FormatError("malformed header: class count must be >= 2", header_at);
  if (D == 0) throw FormatError("malformed header: feature dimension must be > 0", header_at + 4);
  if (n == 0) throw FormatError("malformed header: bag count must be >= 1", header_at + 8);

  Dataset ds{{}, default_class_names(C), static_cast<Index>(D)};
  ds.bags.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    Bag b;
    const auto id_len = r.u16("bag id length");
    b.id = std::string(r.bytes(id_len, "bag id"));
    b.labels.resize(C);
    for (std::uint32_t c = 0; c < C; ++c) {
      const std::uint64_t at = r.offset();
      const auto v = r.u8("label byte");
      if (v > 1) throw FormatError("label byte must be 0 or 1", at);
      b.labels[c] = v;
    }
    const std::uint64_t count_at = r.offset();
    const auto ni = r.u32("instance count");
    if (ni == 0) throw FormatError("bag '" + b.id + "' declares zero instances", count_at);
    r.expect_payload(static_cast<std::uint64_t>(ni) * D, 8, "instance block");
    b.instances.resize(ni, D);
    r.f64_block(b.instances, "instance feature");
    ds.bags.push_back(std::move(b));
  }
  r.expect_end();
  return ds;
}

inline void write_bag_file(const Dataset& ds, const std::filesystem::path& path) {
  io::write_file(path, encode_bags(ds));
}

inline Dataset read_bag_file(const std::filesystem::path& path) { return decode_bags(io::read_file(path)); }

// ---------------------------------------------------------------------------
// PoolFile: "MILP" u32 version=1, C, D, m; per exemplar: u32 class, D float64.

inline std::string encode_pool(const ExemplarSet& pool) {
  pool.validate();
  detail::require(pool.size() >= 1, "exemplar set is empty");
  io::ByteWriter w;
  w.magic("MILP", kFormatVersion);
  w.u32(io::checked_u32(static_cast<Index>(pool.num_classes), "class count"));
  w.u32(io::checked_u32(pool.features.cols(), "feature dimension"));
  w.u32(io::checked_u32(static_cast<Index>(pool.size()), "exemplar count"));
  for (std::size_t i = 0; i < pool.size(); ++i) {
    w.u32(pool.classes[i]);
    w.f64_block(pool.features.row(static_cast<Index>(i)));
  }
  return w.buffer();
}

inline ExemplarSet decode_pool(std::string bytes) {
  io::ByteReader r(std::move(bytes));
  r.magic("MILP", kFormatVersion);
  const std::uint64_t header_at = r.offset();
  const auto C = r.u32("class count");
  const auto D = r.u32("feature dimension");
  const auto m = r.u32("exemplar count");
  if (C < 2) throw FormatError("malformed header: class count must be >= 2", header_at);
  if (D == 0) throw FormatError("malformed header: feature dimension must be > 0", header_at + 4);
  if (m == 0) throw FormatError("malformed header: exemplar count must be >= 1", header_at + 8);
  r.expect_payload(m, 4 + 8ull * D, "exemplar block");

  ExemplarSet pool{Matrix(m, D), std::vector<std::uint32_t>(m), C};
  for (std::uint32_t i = 0; i < m; ++i) {
    const std::uint64_t at = r.offset();
    const auto cls = r.u32("exemplar class");
    if (cls >= C) throw FormatError("exemplar class index " + std::to_string(cls) + " >= class count", at);
    pool.classes[i] = cls;
    for (std::uint32_t d = 0; d < D; ++d) pool.features(i, d) = r.f64("exemplar feature");
  }
  r.expect_end();
  return pool;
}

inline void write_pool_file(const ExemplarSet& pool, const std::filesystem::path& path) {
  io::write_file(path, encode_pool(pool));
}

inline ExemplarSet read_pool_file(const std::filesystem::path& path) { return decode_pool(io::read_file(path)); }

// ---------------------------------------------------------------------------
// Encoded-matrix file: "MILM" u32 version=1, u32 rows, u32 cols, float64
// payload; bag ids in row order go to a "<path>.ids" sidecar, one per line.

inline std::filesystem::path ids_sidecar(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".ids");
}

inline void write_matrix_file(const Matrix& m, const std::vector<std::string>& ids,
                              const std::filesystem::path& path) {
  detail::require(static_cast<Index>(ids.size()) == m.rows(), "row id count mismatch");
  detail::require_finite(m, "matrix");
  io::ByteWriter w;
  w.magic("MILM", kFormatVersion);
  w.u32(io::checked_u32(m.rows(), "rows"));
  w.u32(io::checked_u32(m.cols(), "cols"));
  w.f64_block(m);
  io::write_file(path, w.buffer());

  std::string text;
  for (const auto& id : ids) {
    detail::require(id.find('\n') == std::string::npos, "bag id contains a newline");
    text += id;
    text += '\n';
  }
  io::write_file(ids_sidecar(path), text);
}

struct LabeledMatrix {
  Matrix values;
  std::vector<std::string> ids;
};

inline LabeledMatrix read_matrix_file(const std::filesystem::path& path) {
  io::ByteReader r(io::read_file(path));
  r.magic("MILM", kFormatVersion);
  const auto rows = r.u32("rows");
  const auto cols = r.u32("cols");
  r.expect_payload(static_cast<std::uint64_t>(rows) * cols, 8, "matrix payload");
  LabeledMatrix out{Matrix(rows, cols), {}};
  r.f64_block(out.values, "matrix payload");
  r.expect_end();

  std::istringstream lines(io::read_file(ids_sidecar(path)));
  for (std::string line; std::getline(lines, line);) out.ids.push_back(line);
  if (out.ids.size() != rows)
    throw Error("id sidecar of " + path.string() + " lists " + std::to_string(out.ids.size()) +
                " ids for " + std::to_string(rows) + " rows");
  return out;
}

// ---------------------------------------------------------------------------
// ScoreMatrix CSV: header "bag_id,<class names>", shortest round-trip decimals.

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view text, const std::string& context) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end || !std::isfinite(v))
    throw Error("invalid number '" + std::string(text) + "' " + context);
  return v;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::string encode_scores_csv(const ScoreMatrix& s) {
  s.validate();
  std::string out = "bag_id";
  for (const auto& name : s.class_names) out += "," + name;
  out += '\n';
  for (Index i = 0; i < s.scores.rows(); ++i) {
    out += s.bag_ids[static_cast<std::size_t>(i)];
    for (Index c = 0; c < s.scores.cols(); ++c) out += "," + format_double(s.scores(i, c));
    out += '\n';
  }
  return out;
}

inline ScoreMatrix decode_scores_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error("score CSV is empty");
  auto header = split_csv_line(line);
  if (header.empty() || header[0] != "bag_id") throw Error("score CSV header must start with bag_id");
  ScoreMatrix s;
  s.class_names.assign(header.begin() + 1, header.end());
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw Error("score CSV line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                  " fields, expected " + std::to_string(header.size()));
    s.bag_ids.push_back(fields[0]);
    std::vector<double> row;
    for (std::size_t c = 1; c < fields.size(); ++c)
      row.push_back(parse_double(fields[c], "on score CSV line " + std::to_string(line_no)));
    rows.push_back(std::move(row));
  }
  s.scores.resize(static_cast<Index>(rows.size()), static_cast<Index>(s.class_names.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t c = 0; c < rows[i].size(); ++c) s.scores(static_cast<Index>(i), static_cast<Index>(c)) = rows[i][c];
  return s;
}

inline void write_scores_csv(const ScoreMatrix& s, const std::filesystem::path& path) {
  io::write_file(path, encode_scores_csv(s));
}

inline ScoreMatrix read_scores_csv(const std::filesystem::path& path) {
  return decode_scores_csv(io::read_file(path));
}

}  // namespace milv
