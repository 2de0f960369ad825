#pragma once

// Metrics CSV with a fixed header. Every number is written with 17 significant
// digits so a read/write round trip reproduces the file byte for byte;
// unrecorded fields are written as "nan".

#include <string>
#include <vector>

#include "sacnf/trainer.hpp"

namespace sacnf {

inline constexpr const char* kMetricsHeader =
    "env_step,episode,train_return,eval_return_mean,eval_return_std,loss_q,loss_v,loss_pi,policy_entropy_mc";

std::string format_metrics(const std::vector<LogRow>& rows);
std::vector<LogRow> parse_metrics(const std::string& text);

// Throw IoError on file errors; parse_metrics/read_metrics throw ConfigError
// on a malformed header or row.
void write_metrics(const std::string& path, const std::vector<LogRow>& rows);
std::vector<LogRow> read_metrics(const std::string& path);

// "%.17g", with non-finite values as nan / inf / -inf.
std::string format_double(double v);

}  // namespace sacnf
