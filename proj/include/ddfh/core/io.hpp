#pragma once

#include <charconv>
#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "ddfh/core/types.hpp"
#include "ddfh/error.hpp"

namespace ddfh {

enum class InstanceFormat { jsonl, csv };

/// Shortest decimal text that round-trips to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw InvariantError("failed to format a double");
  return std::string(buf, end);
}

/// Parses decimal text (scientific notation accepted). Throws DataError.
inline double parse_double(std::string_view text, std::size_t line, std::string_view field) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t')) text.remove_suffix(1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
    throw DataError(line, "field '" + std::string(field) + "' is not a number: '" + std::string(text) + "'");
  }
  return v;
}

inline long long parse_integer(std::string_view text, std::size_t line, std::string_view field) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t')) text.remove_suffix(1);
  long long v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
    throw DataError(line, "field '" + std::string(field) + "' is not an integer: '" + std::string(text) + "'");
  }
  return v;
}

namespace detail {

struct ParsedRecord {
  InstanceRecord record;
  std::optional<long long> instance;
  std::size_t line = 0;
};

inline void check_record(const ParsedRecord& p) {
  const auto& r = p.record;
  if (r.frame_id.empty()) throw DataError(p.line, "empty frame_id");
  if (!(r.confidence >= 0.0 && r.confidence <= 1.0)) {
    throw DataError(p.line, "confidence " + format_double(r.confidence) + " outside [0, 1]");
  }
  if (r.class_id < 0) throw DataError(p.line, "unknown class_id " + std::to_string(r.class_id));
  if (r.embedding.size() < 2) throw DataError(p.line, "embedding dimension must be at least 2");
  for (double v : r.embedding) {
    if (!std::isfinite(v)) throw DataError(p.line, "non-finite embedding value");
  }
  if (auto v = r.geometry.violation(); !v.empty()) throw DataError(p.line, v);
}

inline double json_number(const nlohmann::json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) throw DataError(line, std::string("missing key '") + key + "'");
  if (!it->is_number()) throw DataError(line, std::string("key '") + key + "' must be a number");
  return it->get<double>();
}

inline ParsedRecord parse_json_line(const std::string& text, std::size_t line) {
  nlohmann::json obj;
  try {
    obj = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(line, std::string("malformed JSON: ") + e.what());
  }
  if (!obj.is_object()) throw DataError(line, "expected a JSON object");

  ParsedRecord p;
  p.line = line;
  auto& r = p.record;

  auto fid = obj.find("frame_id");
  if (fid == obj.end() || !fid->is_string()) throw DataError(line, "key 'frame_id' must be a string");
  r.frame_id = fid->get<std::string>();

  auto cid = obj.find("class_id");
  if (cid == obj.end() || !cid->is_number_integer()) throw DataError(line, "key 'class_id' must be an integer");
  r.class_id = cid->get<int>();

  r.confidence = json_number(obj, "confidence", line);

  auto emb = obj.find("embedding");
  if (emb == obj.end() || !emb->is_array()) throw DataError(line, "key 'embedding' must be an array");
  for (const auto& v : *emb) {
    if (!v.is_number()) throw DataError(line, "embedding entries must be numbers");
    r.embedding.push_back(v.get<double>());
  }

  auto geom = obj.find("geom");
  if (geom == obj.end() || !geom->is_object()) throw DataError(line, "key 'geom' must be an object");
  r.geometry.length = json_number(*geom, "l", line);
  r.geometry.width = json_number(*geom, "w", line);
  r.geometry.height = json_number(*geom, "h", line);
  r.geometry.volume = json_number(*geom, "vol", line);
  r.geometry.rotation = json_number(*geom, "rot", line);
  r.geometry.point_density = json_number(*geom, "pts", line);

  if (auto inst = obj.find("instance"); inst != obj.end()) {
    if (!inst->is_number_integer()) throw DataError(line, "key 'instance' must be an integer");
    p.instance = inst->get<long long>();
  }
  return p;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      out.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

inline std::string_view strip_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

inline bool blank(std::string_view s) {
  return s.find_first_not_of(" \t\r") == std::string_view::npos;
}

}  // namespace detail

/// Reads an instance stream into a pool. `labeled` frames absent from the
/// stream become empty labeled frames. When `class_count` is not given it is
/// inferred as max(class_id) + 1.
inline FramePool parse_instances(std::istream& in, InstanceFormat format,
                                 const std::set<FrameId>& labeled = {},
                                 std::optional<int> class_count = std::nullopt) {
  std::vector<detail::ParsedRecord> parsed;
  std::string line;
  std::size_t line_no = 0;

  if (format == InstanceFormat::jsonl) {
    while (std::getline(in, line)) {
      ++line_no;
      if (detail::blank(line)) continue;
      parsed.push_back(detail::parse_json_line(line, line_no));
    }
  } else {
    std::size_t dim = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
      ++line_no;
      const auto text = detail::strip_cr(line);
      if (detail::blank(text) || text.front() == '#') continue;
      const auto fields = detail::split_csv(text);
      if (!have_header) {
        if (fields.size() < 11) throw DataError(line_no, "CSV header has too few columns");
        dim = fields.size() - 9;
        std::vector<std::string> expected = {"frame_id", "class_id", "confidence"};
        for (std::size_t d = 0; d < dim; ++d) expected.push_back("e" + std::to_string(d));
        for (const char* g : {"l", "w", "h", "vol", "rot", "pts"}) expected.emplace_back(g);
        for (std::size_t i = 0; i < fields.size(); ++i) {
          if (fields[i] != expected[i]) {
            throw DataError(line_no, "unexpected CSV header column '" + std::string(fields[i]) +
                                         "', expected '" + expected[i] + "'");
          }
        }
        have_header = true;
        continue;
      }
      if (fields.size() != dim + 9) {
        throw DataError(line_no, "expected " + std::to_string(dim + 9) + " columns, found " +
                                     std::to_string(fields.size()));
      }
      detail::ParsedRecord p;
      p.line = line_no;
      auto& r = p.record;
      r.frame_id = std::string(fields[0]);
      r.class_id = static_cast<int>(parse_integer(fields[1], line_no, "class_id"));
      r.confidence = parse_double(fields[2], line_no, "confidence");
      for (std::size_t d = 0; d < dim; ++d) {
        r.embedding.push_back(parse_double(fields[3 + d], line_no, "e" + std::to_string(d)));
      }
      const std::size_t g = 3 + dim;
      r.geometry.length = parse_double(fields[g], line_no, "l");
      r.geometry.width = parse_double(fields[g + 1], line_no, "w");
      r.geometry.height = parse_double(fields[g + 2], line_no, "h");
      r.geometry.volume = parse_double(fields[g + 3], line_no, "vol");
      r.geometry.rotation = parse_double(fields[g + 4], line_no, "rot");
      r.geometry.point_density = parse_double(fields[g + 5], line_no, "pts");
      parsed.push_back(std::move(p));
    }
  }

  if (parsed.empty()) throw DataError("no records");

  const std::size_t dim = parsed.front().record.embedding.size();
  int max_class = 0;
  for (const auto& p : parsed) {
    detail::check_record(p);
    if (p.record.embedding.size() != dim) {
      throw DataError(p.line, "embedding dimension " + std::to_string(p.record.embedding.size()) +
                                  " differs from " + std::to_string(dim));
    }
    if (class_count && p.record.class_id >= *class_count) {
      throw DataError(p.line, "unknown class_id " + std::to_string(p.record.class_id));
    }
    max_class = std::max(max_class, p.record.class_id);
  }

  FramePool::FrameMap frames;
  std::set<std::pair<FrameId, long long>> seen;
  for (auto& p : parsed) {
    if (p.instance && !seen.emplace(p.record.frame_id, *p.instance).second) {
      throw DataError(p.line, "duplicate instance " + std::to_string(*p.instance) + " in frame '" +
                                  p.record.frame_id + "'");
    }
    frames[p.record.frame_id].push_back(std::move(p.record));
  }
  for (const auto& id : labeled) frames.try_emplace(id);

  return FramePool(std::move(frames), labeled, class_count.value_or(max_class + 1));
}

/// One frame id per line; blank lines and '#' comments are skipped.
inline std::set<FrameId> parse_labels(std::istream& in) {
  std::set<FrameId> ids;
  std::string line;
  while (std::getline(in, line)) {
    auto text = detail::strip_cr(line);
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t')) text.remove_suffix(1);
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
    if (text.empty() || text.front() == '#') continue;
    ids.emplace(text);
  }
  return ids;
}

/// Writes every record as JSONL in canonical pool order.
inline void write_jsonl(const FramePool& pool, std::ostream& out) {
  for (const auto& [id, records] : pool.frames()) {
    for (const auto& r : records) {
      out << "{\"frame_id\":" << nlohmann::json(r.frame_id).dump() << ",\"class_id\":" << r.class_id
          << ",\"confidence\":" << format_double(r.confidence) << ",\"embedding\":[";
      for (std::size_t d = 0; d < r.embedding.size(); ++d) {
        if (d) out << ',';
        out << format_double(r.embedding[d]);
      }
      const auto& g = r.geometry;
      out << "],\"geom\":{\"l\":" << format_double(g.length) << ",\"w\":" << format_double(g.width)
          << ",\"h\":" << format_double(g.height) << ",\"vol\":" << format_double(g.volume)
          << ",\"rot\":" << format_double(g.rotation) << ",\"pts\":" << format_double(g.point_density)
          << "}}\n";
    }
  }
}

inline void write_csv(const FramePool& pool, std::ostream& out) {
  out << "frame_id,class_id,confidence";
  for (std::size_t d = 0; d < pool.embedding_dim(); ++d) out << ",e" << d;
  out << ",l,w,h,vol,rot,pts\n";
  for (const auto& [id, records] : pool.frames()) {
    for (const auto& r : records) {
      out << r.frame_id << ',' << r.class_id << ',' << format_double(r.confidence);
      for (double v : r.embedding) out << ',' << format_double(v);
      for (double v : r.geometry.as_array()) out << ',' << format_double(v);
      out << '\n';
    }
  }
}

inline void write_labels(const FramePool& pool, std::ostream& out) {
  for (const auto& id : pool.labeled()) out << id << '\n';
}

}  // namespace ddfh
