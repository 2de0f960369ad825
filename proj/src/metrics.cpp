#include "sacnf/metrics.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace sacnf {

namespace {

double parse_field(const std::string& s, std::size_t line) {
  if (s == "nan") return kNotRecorded;
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ConfigError("metrics line " + std::to_string(line) + ": bad number '" + s + "'");
  return v;
}

std::int64_t parse_int(const std::string& s, std::size_t line) {
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ConfigError("metrics line " + std::to_string(line) + ": bad integer '" + s + "'");
  return v;
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format_metrics(const std::vector<LogRow>& rows) {
  std::string out = std::string(kMetricsHeader) + "\n";
  for (const LogRow& r : rows) {
    out += std::to_string(r.env_step) + "," + std::to_string(r.episode);
    for (double v : {r.train_return, r.eval_return_mean, r.eval_return_std, r.loss_q, r.loss_v, r.loss_pi,
                     r.policy_entropy_mc})
      out += "," + format_double(v);
    out += "\n";
  }
  return out;
}

std::vector<LogRow> parse_metrics(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) throw ConfigError("metrics: unexpected header");
  std::vector<LogRow> rows;
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) f.push_back(item);
    if (f.size() != 9) throw ConfigError("metrics line " + std::to_string(number) + ": expected 9 fields");
    LogRow r;
    r.env_step = parse_int(f[0], number);
    r.episode = parse_int(f[1], number);
    double* dst[] = {&r.train_return, &r.eval_return_mean, &r.eval_return_std, &r.loss_q,
                     &r.loss_v,       &r.loss_pi,          &r.policy_entropy_mc};
    for (std::size_t i = 0; i < 7; ++i) *dst[i] = parse_field(f[i + 2], number);
    rows.push_back(r);
  }
  return rows;
}

void write_metrics(const std::string& path, const std::vector<LogRow>& rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << format_metrics(rows);
  if (!out) throw IoError("write failed for '" + path + "'");
}

std::vector<LogRow> read_metrics(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_metrics(ss.str());
}

}  // namespace sacnf
