#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "magloc/core.hpp"
#include "magloc/error.hpp"

namespace magloc::io {

inline constexpr std::string_view csv_header = "timestamp,device_id,location_id,location_type,bx,by,bz";

/// One line per sample; timestamps are start_time + t, values at 17 significant digits.
inline std::string emit_csv(const dataset& d) {
  std::string out;
  out.reserve(d.size() * 600 * 96);
  out += csv_header;
  out += '\n';
  char buf[160];
  for (const auto& o : d.observations()) {
    for (const auto& s : o.samples()) {
      const int n = std::snprintf(buf, sizeof buf, "%lld,", static_cast<long long>(o.start_time() + s.t));
      out.append(buf, static_cast<std::size_t>(n));
      out += o.device_id();
      out += ',';
      out += o.location_id();
      out += ',';
      out += o.location_type();
      const int m = std::snprintf(buf, sizeof buf, ",%.17g,%.17g,%.17g\n", s.bx, s.by, s.bz);
      out.append(buf, static_cast<std::size_t>(m));
    }
  }
  return out;
}

struct ingest_result {
  dataset data;
  std::vector<std::string> warnings;
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <class T>
T parse_number(std::string_view field, std::size_t line, const char* name) {
  T value{};
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end || field.empty())
    fail(errc::parse, "line " + std::to_string(line) + ": " + name + " '" + std::string(field) + "' is not a number");
  return value;
}

struct row {
  std::int64_t timestamp;
  std::string location_type;
  double bx, by, bz;
  std::size_t line;
};

}  // namespace detail

/// Parses the CSV schema and groups rows into observations by (device,
/// location) and contiguous 1 Hz timestamps. A gap splits an observation;
/// pieces shorter than the minimum observation length are dropped. Both
/// events are reported as warnings.
inline ingest_result ingest_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) fail(errc::parse, "line 1: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != csv_header) fail(errc::parse, "line 1: expected header '" + std::string(csv_header) + "'");

  std::vector<std::pair<std::string, std::string>> order;
  std::map<std::pair<std::string, std::string>, std::vector<detail::row>> groups;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = detail::split_fields(line);
    if (f.size() != 7)
      fail(errc::parse, "line " + std::to_string(line_no) + ": expected 7 fields, found " + std::to_string(f.size()));
    for (std::size_t k = 1; k <= 3; ++k)
      if (f[k].empty()) fail(errc::parse, "line " + std::to_string(line_no) + ": empty identifier field");
    detail::row r{detail::parse_number<std::int64_t>(f[0], line_no, "timestamp"),
                  std::string(f[3]),
                  detail::parse_number<double>(f[4], line_no, "bx"),
                  detail::parse_number<double>(f[5], line_no, "by"),
                  detail::parse_number<double>(f[6], line_no, "bz"),
                  line_no};
    std::pair<std::string, std::string> key{std::string(f[1]), std::string(f[2])};
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(std::move(r));
  }

  ingest_result result;
  std::vector<observation> obs;
  for (const auto& key : order) {
    auto& rows = groups[key];
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
    std::size_t begin = 0;
    while (begin < rows.size()) {
      std::size_t end = begin + 1;
      while (end < rows.size()) {
        const auto step = rows[end].timestamp - rows[end - 1].timestamp;
        if (step == 0)
          fail(errc::data, "line " + std::to_string(rows[end].line) + ": duplicate timestamp for " + key.first + "/" +
                               key.second);
        if (step != 1) break;
        ++end;
      }
      if (end < rows.size())
        result.warnings.push_back("line " + std::to_string(rows[end].line) + ": timestamp gap splits " + key.first +
                                  "/" + key.second);
      const std::size_t n = end - begin;
      if (n < min_observation_length) {
        result.warnings.push_back("dropped " + std::to_string(n) + "-sample piece of " + key.first + "/" + key.second +
                                  " starting at line " + std::to_string(rows[begin].line));
      } else {
        const auto start = rows[begin].timestamp;
        const auto& label = rows[begin].location_type;
        std::vector<sample> samples;
        samples.reserve(n);
        for (std::size_t i = begin; i < end; ++i) {
          if (rows[i].location_type != label)
            fail(errc::data, "line " + std::to_string(rows[i].line) + ": location '" + key.second +
                                 "' changes type within one trace");
          samples.push_back({rows[i].timestamp - start, rows[i].bx, rows[i].by, rows[i].bz});
        }
        obs.emplace_back(key.first, key.second, label, start, std::move(samples));
      }
      begin = end;
    }
  }
  result.data = dataset(std::move(obs));
  const auto report = validate_dataset(result.data);
  if (!report.ok()) {
    std::string msg = "ingested data failed validation:";
    for (const auto& v : report.violations) msg += "\n  " + std::string(to_string(v.kind)) + ": " + v.message;
    fail(errc::data, msg);
  }
  return result;
}

inline ingest_result ingest_csv_text(const std::string& text) {
  std::istringstream in(text);
  return ingest_csv(in);
}

}  // namespace magloc::io
