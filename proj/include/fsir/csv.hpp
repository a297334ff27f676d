#pragma once

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "fsir/dataset.hpp"
#include "fsir/errors.hpp"

namespace fsir {

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

inline double parse_double(const std::string& raw, long line_no, const char* column) {
  const std::string s = trim(raw);
  if (s.empty())
    throw Error(ErrorKind::ParseError,
                "line " + std::to_string(line_no) + ": empty " + column + " field");
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size())
    throw Error(ErrorKind::ParseError, "line " + std::to_string(line_no) + ": cannot parse " +
                                           column + " value '" + s + "'");
  return v;
}

// Decimal form with enough digits to round-trip a binary64 exactly.
inline std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string format_sig(double v, int digits = 6) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
  return buf;
}

}  // namespace detail

// Long-format ingestion. Expected header: subject_id,time,value,response.
// Subjects keep their order of first appearance; rows within a subject are
// sorted by time. Every row of a subject must repeat the same response value.
inline LongitudinalDataset ingest_csv(const std::string& path, double t_min, double t_max) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ParseError, "cannot open '" + path + "'");

  std::string line;
  long line_no = 0;
  if (!std::getline(in, line))
    throw Error(ErrorKind::ParseError, "'" + path + "' is empty");
  ++line_no;
  {
    auto fields = detail::split_csv_line(line);
    for (auto& f : fields) f = detail::trim(f);
    const std::vector<std::string> expected = {"subject_id", "time", "value", "response"};
    if (fields.size() != 4 || !std::equal(fields.begin(), fields.end(), expected.begin()))
      throw Error(ErrorKind::ParseError,
                  "line 1: header must be 'subject_id,time,value,response'");
  }

  struct Accum {
    std::vector<double> times, values;
    double response = 0.0;
  };
  std::vector<std::string> order;
  std::unordered_map<std::string, Accum> by_id;

  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_csv_line(line);
    if (fields.size() != 4)
      throw Error(ErrorKind::ParseError, "line " + std::to_string(line_no) + ": expected 4 fields, got " +
                                             std::to_string(fields.size()));
    const std::string id = detail::trim(fields[0]);
    if (id.empty())
      throw Error(ErrorKind::ParseError,
                  "line " + std::to_string(line_no) + ": empty subject_id");
    const double t = detail::parse_double(fields[1], line_no, "time");
    const double x = detail::parse_double(fields[2], line_no, "value");
    const double y = detail::parse_double(fields[3], line_no, "response");
    if (!(t >= t_min && t <= t_max))
      throw Error(ErrorKind::OutOfInterval,
                  "line " + std::to_string(line_no) + ": time " + detail::format_full(t) +
                      " outside [" + detail::format_full(t_min) + ", " +
                      detail::format_full(t_max) + "]");
    auto it = by_id.find(id);
    if (it == by_id.end()) {
      order.push_back(id);
      Accum a;
      a.response = y;
      it = by_id.emplace(id, std::move(a)).first;
    } else if (it->second.response != y) {
      throw Error(ErrorKind::InconsistentResponse,
                  "line " + std::to_string(line_no) + ": subject '" + id +
                      "' has conflicting responses " +
                      detail::format_full(it->second.response) + " and " +
                      detail::format_full(y));
    }
    it->second.times.push_back(t);
    it->second.values.push_back(x);
  }
  if (order.empty())
    throw Error(ErrorKind::ParseError, "'" + path + "' contains no data rows");

  LongitudinalDataset data;
  data.t_min = t_min;
  data.t_max = t_max;
  data.subjects.reserve(order.size());
  for (const auto& id : order) {
    Accum& a = by_id[id];
    std::vector<std::size_t> perm(a.times.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    std::stable_sort(perm.begin(), perm.end(),
                     [&](std::size_t i, std::size_t j) { return a.times[i] < a.times[j]; });
    Subject s;
    s.id = id;
    s.response = a.response;
    s.times.resize(static_cast<Eigen::Index>(perm.size()));
    s.values.resize(static_cast<Eigen::Index>(perm.size()));
    for (std::size_t i = 0; i < perm.size(); ++i) {
      s.times[static_cast<Eigen::Index>(i)] = a.times[perm[i]];
      s.values[static_cast<Eigen::Index>(i)] = a.values[perm[i]];
    }
    data.subjects.push_back(std::move(s));
  }
  validate_dataset(data);
  return data;
}

// Inverse of ingest_csv, written at full binary64 precision so a round trip
// reproduces the dataset bit for bit.
inline void write_dataset_csv(const LongitudinalDataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::ConfigInvalid, "cannot write '" + path + "'", "out");
  out << "subject_id,time,value,response\n";
  for (const auto& s : data.subjects)
    for (Eigen::Index j = 0; j < s.times.size(); ++j)
      out << s.id << ',' << detail::format_full(s.times[j]) << ','
          << detail::format_full(s.values[j]) << ',' << detail::format_full(s.response)
          << '\n';
}

}  // namespace fsir
