// Copyright 2026 The pedtutor Authors
// SPDX-License-Identifier: Apache-2.0

#include "pedtutor/config.hpp"

#include <charconv>
#include <functional>
#include <map>

#include <fmt/format.h>

#include "pedtutor/error.hpp"
#include "pedtutor/jsonl.hpp"

namespace pedtutor {

namespace {

constexpr std::string_view kRoles[] = {"tutor", "student", "judge", "labeler"};
constexpr std::string_view kEndpointFields[] = {
    "base_url", "model",       "api_key_env", "temperature", "max_tokens",
    "timeout_ms", "max_retries", "backoff_ms", "jitter",      "max_in_flight"};

EndpointConfig& endpoint(RunConfig& c, std::string_view role) {
  if (role == "tutor") return c.tutor;
  if (role == "student") return c.student;
  if (role == "judge") return c.judge;
  return c.labeler;
}

const EndpointConfig& endpoint(const RunConfig& c, std::string_view role) {
  return endpoint(const_cast<RunConfig&>(c), role);
}


std::int64_t to_int(std::string_view key, std::string_view v) {
  std::int64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw RangeError(std::string(key) + ": expected an integer, got '" + std::string(v) + "'");
  }
  return out;
}

int to_int32(std::string_view key, std::string_view v) {
  auto x = to_int(key, v);
  if (x < INT32_MIN || x > INT32_MAX) throw RangeError(std::string(key) + ": out of range");
  return static_cast<int>(x);
}

double to_double(std::string_view key, std::string_view v) {
  try {
    std::size_t used = 0;
    std::string s(v);
    double d = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing");
    return d;
  } catch (const std::exception&) {
    throw RangeError(std::string(key) + ": expected a number, got '" + std::string(v) + "'");
  }
}

bool to_bool(std::string_view key, std::string_view v) {
  auto l = to_lower(v);
  if (l == "true" || l == "1" || l == "yes") return true;
  if (l == "false" || l == "0" || l == "no") return false;
  throw RangeError(std::string(key) + ": expected true or false, got '" + std::string(v) + "'");
}

std::string num(double d) { return fmt::format("{}", d); }

void set_endpoint_field(EndpointConfig& e, std::string_view field, std::string_view key,
                        std::string_view v) {
  if (field == "base_url") e.base_url = std::string(v);
  else if (field == "model") e.model_name = std::string(v);
  else if (field == "api_key_env") e.api_key_env = std::string(v);
  else if (field == "temperature") e.temperature = to_double(key, v);
  else if (field == "max_tokens") e.max_tokens = to_int32(key, v);
  else if (field == "timeout_ms") e.request_timeout = Millis(to_int(key, v));
  else if (field == "max_retries") e.max_retries = to_int32(key, v);
  else if (field == "backoff_ms") e.backoff_base = Millis(to_int(key, v));
  else if (field == "jitter") e.jitter = to_bool(key, v);
  else if (field == "max_in_flight") e.max_in_flight = to_int32(key, v);
  else throw UnknownKey(std::string(key));
}

std::string endpoint_field(const EndpointConfig& e, std::string_view field) {
  if (field == "base_url") return e.base_url;
  if (field == "model") return e.model_name;
  if (field == "api_key_env") return e.api_key_env;
  if (field == "temperature") return num(e.temperature);
  if (field == "max_tokens") return std::to_string(e.max_tokens);
  if (field == "timeout_ms") return std::to_string(e.request_timeout.count());
  if (field == "max_retries") return std::to_string(e.max_retries);
  if (field == "backoff_ms") return std::to_string(e.backoff_base.count());
  if (field == "jitter") return e.jitter ? "true" : "false";
  return std::to_string(e.max_in_flight);
}

}  // namespace

RunConfig::RunConfig() {
  tutor.model_name = "tutor";
  tutor.temperature = 1.0;
  student.model_name = "student";
  student.temperature = 0.7;
  judge.model_name = "judge";
  judge.temperature = 0.0;
  labeler.model_name = "labeler";
  labeler.temperature = 0.0;
}

void RunConfig::validate() const {
  for (auto role : kRoles) {
    try {
      endpoint(*this, role).validate();
    } catch (const RangeError& e) {
      throw RangeError(std::string(role) + "." + e.what());
    }
  }
  condition.validate();
  weights.validate();
  if (K < 1) throw RangeError("K must be >= 1");
  if (group_size < 1) throw RangeError("group_size must be >= 1");
  if (batch_problems < 1) throw RangeError("batch_problems must be >= 1");
  if (max_turns < 1) throw RangeError("max_turns must be >= 1");
  if (parallelism < 1) throw RangeError("parallelism must be >= 1");
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k = {"condition", "lambda_ped",     "lambda_think", "theta",
                                  "K",         "group_size",     "batch_problems",
                                  "max_turns", "parallelism",    "seed",
                                  "dataset",   "run_dir"};
    for (auto role : kRoles) {
      for (auto f : kEndpointFields) k.push_back(std::string(role) + "." + std::string(f));
    }
    return k;
  }();
  return keys;
}

void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value) {
  const auto v = trim(value);
  if (auto dot = key.find('.'); dot != std::string_view::npos) {
    auto role = key.substr(0, dot);
    for (auto r : kRoles) {
      if (r == role) {
        set_endpoint_field(endpoint(cfg, role), key.substr(dot + 1), key, v);
        return;
      }
    }
    throw UnknownKey(std::string(key));
  }
  if (key == "condition") cfg.condition = Condition::preset(v);
  else if (key == "lambda_ped") cfg.weights.lambda_ped = to_double(key, v);
  else if (key == "lambda_think") cfg.weights.lambda_think = to_double(key, v);
  else if (key == "theta") cfg.weights.theta = to_double(key, v);
  else if (key == "K") cfg.K = to_int32(key, v);
  else if (key == "group_size") cfg.group_size = to_int32(key, v);
  else if (key == "batch_problems") cfg.batch_problems = to_int32(key, v);
  else if (key == "max_turns") cfg.max_turns = to_int32(key, v);
  else if (key == "parallelism") cfg.parallelism = to_int32(key, v);
  else if (key == "seed") cfg.seed = to_int(key, v);
  else if (key == "dataset") cfg.dataset = v;
  else if (key == "run_dir") cfg.run_dir = v;
  else throw UnknownKey(std::string(key));
}

RunConfig parse_config(std::string_view text, RunConfig base) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    auto line = trim(text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos));
    ++line_no;
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    set_config_value(base, trim(std::string_view(line).substr(0, eq)),
                     std::string_view(line).substr(eq + 1));
  }
  return base;
}

RunConfig load_config(const std::filesystem::path& path,
                      const std::vector<std::string>& overrides) {
  RunConfig cfg;
  if (!path.empty()) cfg = parse_config(read_file(path));
  for (const auto& o : overrides) {
    auto eq = o.find('=');
    if (eq == std::string::npos) throw UsageError("override '" + o + "' is not key=value");
    set_config_value(cfg, trim(std::string_view(o).substr(0, eq)),
                     std::string_view(o).substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

std::string format_config(const RunConfig& cfg) {
  std::string out;
  auto line = [&](std::string_view k, const std::string& v) {
    out += std::string(k) + " = " + v + "\n";
  };
  line("condition", cfg.condition.name);
  line("lambda_ped", num(cfg.weights.lambda_ped));
  line("lambda_think", num(cfg.weights.lambda_think));
  line("theta", num(cfg.weights.theta));
  line("K", std::to_string(cfg.K));
  line("group_size", std::to_string(cfg.group_size));
  line("batch_problems", std::to_string(cfg.batch_problems));
  line("max_turns", std::to_string(cfg.max_turns));
  line("parallelism", std::to_string(cfg.parallelism));
  line("seed", std::to_string(cfg.seed));
  line("dataset", cfg.dataset);
  line("run_dir", cfg.run_dir);
  for (auto role : kRoles) {
    for (auto f : kEndpointFields) {
      line(std::string(role) + "." + std::string(f), endpoint_field(endpoint(cfg, role), f));
    }
  }
  return out;
}

void require_endpoint(const EndpointConfig& e, std::string_view role) {
  if (e.base_url.empty()) {
    throw MissingEndpoint(std::string(role) + ".base_url is not set (use --mock or configure it)");
  }
}

}  // namespace pedtutor
