#pragma once

#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "ebfkit/csv.hpp"
#include "ebfkit/ebf.hpp"

namespace ebfkit {

inline constexpr const char* kReportHeader = "block_id,variant,dim,log_numerator,log_denominator,log_ebf01";

/// One CSV row per result, in the order given.
inline void write_ebf_report(std::ostream& out, std::span<const EbfResult> results) {
  out << kReportHeader << '\n';
  for (const auto& r : results) {
    out << r.block_id << ',' << to_string(r.variant) << ',' << r.dim << ',' << csv::format_double(r.log_numerator)
        << ',' << csv::format_double(r.log_denominator) << ',' << csv::format_double(r.log_ebf01) << '\n';
  }
}

inline void write_ebf_report(const std::string& path, std::span<const EbfResult> results) {
  auto out = csv::open_output(path);
  write_ebf_report(out, results);
  if (!out) throw IoError("failed writing '" + path + "'");
}

inline std::vector<EbfResult> read_ebf_report(std::istream& in) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line) || csv::trim(line) != kReportHeader) {
    throw ParseError(1, 1, "expected report header '" + std::string(kReportHeader) + "'");
  }
  std::vector<EbfResult> out;
  while (std::getline(in, line)) {
    ++line_no;
    if (csv::trim(line).empty()) continue;
    const auto f = csv::split(line);
    if (f.size() != 6) throw ParseError(line_no, 1, "expected 6 fields");
    EbfResult r;
    r.block_id = std::string(csv::trim(f[0]));
    try {
      r.variant = parse_variant(std::string(csv::trim(f[1])));
    } catch (const InvalidArgument&) {
      throw ParseError(line_no, 2, "unknown variant '" + std::string(f[1]) + "'");
    }
    r.dim = static_cast<std::size_t>(csv::parse_integer(f[2], line_no, 3));
    r.log_numerator = csv::parse_double(f[3], line_no, 4);
    r.log_denominator = csv::parse_double(f[4], line_no, 5);
    r.log_ebf01 = csv::parse_double(f[5], line_no, 6);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace ebfkit
