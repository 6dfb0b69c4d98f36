#ifndef ROIKIT_HARNESS_CSV_IO_HPP
#define ROIKIT_HARNESS_CSV_IO_HPP

#include <charconv>
#include <cmath>
#include <cstddef>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "roikit/error.hpp"
#include "roikit/eval.hpp"
#include "roikit/geometry.hpp"
#include "roikit/postprocess.hpp"

namespace roikit::io {

/// Shortest decimal text that parses back to the same double.
inline std::string format_real(Real v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

struct CsvRow {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.emplace_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

/// Reads a comma-separated table whose first line must equal `header`.
/// Blank lines are skipped; every other row must have the header's width.
inline std::vector<CsvRow> read_csv(std::istream& is, std::span<const std::string_view> header) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<CsvRow> rows;
  bool have_header = false;
  while (std::getline(is, line)) {
    ++line_no;
    if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
    if (trim(line).empty()) continue;
    auto fields = split_fields(line);
    if (!have_header) {
      bool ok = fields.size() == header.size();
      for (std::size_t i = 0; ok && i < header.size(); ++i) ok = fields[i] == header[i];
      if (!ok) {
        std::string expected;
        for (auto h : header) expected += (expected.empty() ? "" : ",") + std::string(h);
        throw ParseError("expected header '" + expected + "'", line_no);
      }
      have_header = true;
      continue;
    }
    if (fields.size() != header.size())
      throw ParseError("expected " + std::to_string(header.size()) + " fields, got " + std::to_string(fields.size()),
                       line_no);
    rows.push_back({line_no, std::move(fields)});
  }
  if (!have_header) throw ParseError("missing header row", line_no == 0 ? 1 : line_no);
  return rows;
}

inline Real parse_real(const std::string& s, std::size_t line) {
  Real v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || !std::isfinite(v))
    throw ParseError("invalid number '" + s + "'", line);
  return v;
}

template <typename Int>
Int parse_int(const std::string& s, std::size_t line) {
  Int v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) throw ParseError("invalid integer '" + s + "'", line);
  return v;
}

inline bool parse_bool(const std::string& s, std::size_t line) {
  if (s == "1" || s == "true") return true;
  if (s == "0" || s == "false") return false;
  throw ParseError("invalid boolean '" + s + "'", line);
}

inline Box parse_box(const std::vector<std::string>& f, std::size_t first, std::size_t line) {
  Box b{parse_real(f[first], line), parse_real(f[first + 1], line), parse_real(f[first + 2], line),
        parse_real(f[first + 3], line)};
  if (!b.well_formed()) throw ParseError("box must satisfy x2 > x1 and y2 > y1", line);
  return b;
}

// --- proposals: batch,x1,y1,x2,y2,score ------------------------------------

struct Proposal {
  Roi roi;
  Real score = 0;
};

inline constexpr std::string_view kProposalHeader[] = {"batch", "x1", "y1", "x2", "y2", "score"};

inline std::vector<Proposal> read_proposals(std::istream& is) {
  std::vector<Proposal> out;
  for (const auto& row : read_csv(is, kProposalHeader)) {
    const auto& f = row.fields;
    out.push_back({{parse_box(f, 1, row.line), parse_int<std::size_t>(f[0], row.line)}, parse_real(f[5], row.line)});
  }
  return out;
}

inline void write_proposals(std::ostream& os, std::span<const Proposal> props) {
  os << "batch,x1,y1,x2,y2,score\n";
  for (const auto& p : props)
    os << p.roi.batch_index << ',' << format_real(p.roi.box.x1) << ',' << format_real(p.roi.box.y1) << ','
       << format_real(p.roi.box.x2) << ',' << format_real(p.roi.box.y2) << ',' << format_real(p.score) << '\n';
}

// --- detections: class,score,x1,y1,x2,y2 -----------------------------------

inline constexpr std::string_view kDetectionHeader[] = {"class", "score", "x1", "y1", "x2", "y2"};

inline Detection parse_detection(const std::vector<std::string>& f, std::size_t first, std::size_t line) {
  return {parse_int<int>(f[first], line), parse_real(f[first + 1], line), parse_box(f, first + 2, line)};
}

inline std::vector<Detection> read_detections(std::istream& is) {
  std::vector<Detection> out;
  for (const auto& row : read_csv(is, kDetectionHeader)) out.push_back(parse_detection(row.fields, 0, row.line));
  return out;
}

inline void write_detection_fields(std::ostream& os, const Detection& d) {
  os << d.class_id << ',' << format_real(d.score) << ',' << format_real(d.box.x1) << ',' << format_real(d.box.y1)
     << ',' << format_real(d.box.x2) << ',' << format_real(d.box.y2);
}

inline void write_detections(std::ostream& os, std::span<const Detection> dets) {
  os << "class,score,x1,y1,x2,y2\n";
  for (const auto& d : dets) {
    write_detection_fields(os, d);
    os << '\n';
  }
}

// --- evaluation inputs -----------------------------------------------------

inline constexpr std::string_view kImageDetectionHeader[] = {"image", "class", "score", "x1", "y1", "x2", "y2"};
inline constexpr std::string_view kGroundTruthHeader[] = {"image", "class", "x1", "y1", "x2", "y2", "ignore"};

inline std::vector<ImageDetection> read_image_detections(std::istream& is) {
  std::vector<ImageDetection> out;
  for (const auto& row : read_csv(is, kImageDetectionHeader))
    out.push_back({row.fields[0], parse_detection(row.fields, 1, row.line)});
  return out;
}

inline void write_image_detections(std::ostream& os, std::span<const ImageDetection> dets) {
  os << "image,class,score,x1,y1,x2,y2\n";
  for (const auto& d : dets) {
    os << d.image << ',';
    write_detection_fields(os, d.det);
    os << '\n';
  }
}

inline std::vector<ImageGroundTruth> read_ground_truth(std::istream& is) {
  std::vector<ImageGroundTruth> out;
  for (const auto& row : read_csv(is, kGroundTruthHeader)) {
    const auto& f = row.fields;
    out.push_back({f[0], make_ground_truth(parse_int<int>(f[1], row.line), parse_box(f, 2, row.line),
                                           parse_bool(f[6], row.line))});
  }
  return out;
}

inline void write_ground_truth(std::ostream& os, std::span<const ImageGroundTruth> gts) {
  os << "image,class,x1,y1,x2,y2,ignore\n";
  for (const auto& g : gts)
    os << g.image << ',' << g.gt.class_id << ',' << format_real(g.gt.box.x1) << ',' << format_real(g.gt.box.y1)
       << ',' << format_real(g.gt.box.x2) << ',' << format_real(g.gt.box.y2) << ',' << (g.gt.ignore ? 1 : 0)
       << '\n';
}

inline void write_eval_results(std::ostream& os, std::span<const BinResult> results) {
  os << "class,bin,ap,n_positive,n_tp,n_fp\n";
  for (const auto& r : results)
    os << r.class_id << ',' << (r.bin ? to_string(*r.bin) : std::string_view("all")) << ',' << format_real(r.ap)
       << ',' << r.n_positive << ',' << r.n_tp << ',' << r.n_fp << '\n';
}

}  // namespace roikit::io

#endif  // ROIKIT_HARNESS_CSV_IO_HPP
