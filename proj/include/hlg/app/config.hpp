#pragma once

// Run configuration: a JSON document with a fixed top-level schema and an experiment-specific
// "params" object. Unknown keys at either level are configuration errors.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "hlg/errors.hpp"
#include "hlg/presets.hpp"

namespace hlg::app {

using json = nlohmann::json;

namespace detail {

template <class T>
T convert(const json & v, const std::string & what)
{
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) { throw ConfigError(what + ": expected a boolean"); }
    return v.get<bool>();
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number()) { throw ConfigError(what + ": expected an integer"); }
    if (v.is_number_float()) {
      const double d = v.get<double>();
      if (d != std::floor(d)) { throw ConfigError(what + ": expected an integer"); }
    }
    if (std::is_unsigned_v<T> && v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0) {
      throw ConfigError(what + ": expected a nonnegative integer");
    }
    return v.get<T>();
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) { throw ConfigError(what + ": expected a number"); }
    return v.get<T>();
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) { throw ConfigError(what + ": expected a string"); }
    return v.get<std::string>();
  } else {
    // std::vector<...>
    if (!v.is_array()) { throw ConfigError(what + ": expected an array"); }
    T out;
    for (std::size_t k = 0; k < v.size(); ++k) {
      out.push_back(convert<typename T::value_type>(v[k], what + "[" + std::to_string(k) + "]"));
    }
    return out;
  }
}

}  // namespace detail

/**
 * @brief Typed reader over a JSON object that remembers which keys were consumed.
 *
 * finish() rejects every key that was never read, which catches misspelled parameters.
 */
class ParamReader
{
public:
  ParamReader(json obj, std::string context) : obj_(std::move(obj)), context_(std::move(context))
  {
    if (obj_.is_null()) { obj_ = json::object(); }
    if (!obj_.is_object()) { throw ConfigError(context_ + ": expected an object"); }
  }

  bool has(const std::string & key) const { return obj_.contains(key); }

  template <class T>
  T get(const std::string & key, T fallback)
  {
    used_.insert(key);
    if (!obj_.contains(key)) { return fallback; }
    return detail::convert<T>(obj_.at(key), context_ + "." + key);
  }

  template <class T>
  T require(const std::string & key)
  {
    used_.insert(key);
    if (!obj_.contains(key)) { throw ConfigError(context_ + ": missing required key '" + key + "'"); }
    return detail::convert<T>(obj_.at(key), context_ + "." + key);
  }

  /// Raw subtree (null when absent); the key counts as consumed.
  json raw(const std::string & key)
  {
    used_.insert(key);
    return obj_.contains(key) ? obj_.at(key) : json();
  }

  const std::string & context() const { return context_; }

  void finish() const
  {
    for (const auto & item : obj_.items()) {
      if (!used_.count(item.key())) { throw ConfigError(context_ + ": unknown key '" + item.key() + "'"); }
    }
  }

private:
  json obj_;
  std::string context_;
  std::set<std::string> used_;
};

inline const std::vector<std::string> & experiment_names()
{
  static const std::vector<std::string> names = {
    "curvature",        "distance",           "simulate",          "convergence",
    "verify-cd",        "verify-harnack",     "verify-reverse-poincare", "verify-reverse-logsobolev",
    "verify-integrated-harnack", "verify-strong-feller", "oracle-h3",
  };
  return names;
}

struct RunConfig
{
  std::string experiment;
  PresetSpec preset{"heisenberg", {1}};
  /// Empty means the full horizontal dimension.
  std::vector<int> ranks;
  std::uint64_t seed{0};
  int workers{1};
  json params = json::object();
};

/// Validates the top-level schema. Experiment parameters are validated by the experiment itself.
inline RunConfig parse_config(const json & doc)
{
  ParamReader top(doc, "config");
  RunConfig cfg;
  cfg.experiment = top.get<std::string>("experiment", "");
  if (top.has("preset")) {
    ParamReader preset(top.raw("preset"), "config.preset");
    cfg.preset.name = preset.require<std::string>("name");
    cfg.preset.params = preset.get<std::vector<double>>("params", {});
    preset.finish();
  } else {
    top.raw("preset");
  }
  cfg.ranks = top.get<std::vector<int>>("ranks", {});
  cfg.seed = top.get<std::uint64_t>("seed", 0);
  cfg.workers = top.get<int>("workers", 1);
  if (cfg.workers < 1) { throw ConfigError("config.workers must be at least 1"); }
  cfg.params = top.raw("params");
  if (cfg.params.is_null()) { cfg.params = json::object(); }
  if (!cfg.params.is_object()) { throw ConfigError("config.params: expected an object"); }
  top.finish();
  if (!cfg.experiment.empty()) {
    const auto & names = experiment_names();
    if (std::find(names.begin(), names.end(), cfg.experiment) == names.end()) {
      throw ConfigError("unknown experiment '" + cfg.experiment + "'");
    }
  }
  return cfg;
}

inline json config_to_json(const RunConfig & cfg)
{
  json out;
  out["experiment"] = cfg.experiment;
  out["preset"] = {{"name", cfg.preset.name}, {"params", cfg.preset.params}};
  out["ranks"] = cfg.ranks;
  out["seed"] = cfg.seed;
  out["workers"] = cfg.workers;
  out["params"] = cfg.params;
  return out;
}

inline json load_json_file(const std::string & path)
{
  std::ifstream in(path);
  if (!in) { throw ConfigError("cannot open config file '" + path + "'"); }
  try {
    return json::parse(in);
  } catch (const json::parse_error & e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
}

}  // namespace hlg::app
