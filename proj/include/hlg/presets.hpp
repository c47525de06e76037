#pragma once

// Shipped structure forms. Horizontal coordinates are ordered in symplectic pairs
// (x_1, y_1, x_2, y_2, ...), so rank-2k projections keep the first k pairs.

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "hlg/errors.hpp"
#include "hlg/group.hpp"

namespace hlg {

struct GroupPreset
{
  std::string name;
  OmegaForm form;
  std::string description;
};

/// Preset name plus numeric parameters, as addressed from run configs.
struct PresetSpec
{
  std::string name;
  std::vector<double> params;
};

namespace detail {

inline int positive_count(double v, const char * what)
{
  if (!(v >= 1.0) || v != std::floor(v) || v > 4096) {
    throw ConfigError(std::string(what) + " must be a positive integer");
  }
  return static_cast<int>(v);
}

}  // namespace detail

/// k symplectic pairs feeding a single vertical coordinate: the 2k+1 dimensional Heisenberg group.
inline GroupPreset heisenberg(int k)
{
  if (k < 1) { throw ConfigError("heisenberg: need at least one pair"); }
  OmegaForm form(2 * k, 1);
  for (int j = 0; j < k; ++j) { form.set(2 * j, 2 * j + 1, 0, 1.0); }
  std::ostringstream desc;
  desc << "Heisenberg group H^" << 2 * k + 1 << ", omega(w, z) = Im<w, z> on C^" << k;
  return {"heisenberg", std::move(form), desc.str()};
}

/// One symplectic pair per vertical coordinate, pair l scaled by weights[l].
inline GroupPreset block_sum(const std::vector<double> & weights)
{
  if (weights.empty()) { throw ConfigError("block_sum: need at least one block"); }
  const int d = static_cast<int>(weights.size());
  OmegaForm form(2 * d, d);
  for (int l = 0; l < d; ++l) {
    if (!(weights[l] != 0.0) || !std::isfinite(weights[l])) {
      throw ConfigError("block_sum: weights must be finite and nonzero");
    }
    form.set(2 * l, 2 * l + 1, l, weights[l]);
  }
  std::ostringstream desc;
  desc << d << " independent symplectic blocks, one per vertical coordinate";
  return {"block_sum", std::move(form), desc.str()};
}

/// Rank-2N truncation of Im<., .>_Q with Q = diag(j^{-s}); s > 1 keeps Q trace class.
inline GroupPreset wiener_truncation(int pairs, double s)
{
  if (pairs < 1) { throw ConfigError("wiener_truncation: need at least one pair"); }
  if (!(s > 1.0)) { throw ConfigError("wiener_truncation: exponent s must exceed 1 (Q trace class)"); }
  OmegaForm form(2 * pairs, 1);
  for (int j = 0; j < pairs; ++j) { form.set(2 * j, 2 * j + 1, 0, std::pow(static_cast<double>(j + 1), -s)); }
  std::ostringstream desc;
  desc << "symplectic truncation with " << pairs << " pairs, q_j = j^-" << s;
  return {"wiener_truncation", std::move(form), desc.str()};
}

inline GroupPreset make_preset(const PresetSpec & spec)
{
  const auto & p = spec.params;
  GroupPreset out;
  if (spec.name == "heisenberg") {
    if (p.size() != 1) { throw ConfigError("heisenberg expects [pairs]"); }
    out = heisenberg(detail::positive_count(p[0], "heisenberg pairs"));
  } else if (spec.name == "block_sum") {
    out = block_sum(p);
  } else if (spec.name == "wiener_truncation") {
    if (p.size() != 2) { throw ConfigError("wiener_truncation expects [pairs, s]"); }
    out = wiener_truncation(detail::positive_count(p[0], "wiener_truncation pairs"), p[1]);
  } else {
    throw ConfigError("unknown preset '" + spec.name + "'");
  }
  if (!out.form.is_antisymmetric() || !out.form.satisfies_hormander()) {
    throw ConfigError("preset '" + spec.name + "' violates the structure-form invariants");
  }
  return out;
}

inline std::string to_string(const PresetSpec & spec)
{
  std::ostringstream os;
  os << spec.name << "(";
  for (std::size_t k = 0; k < spec.params.size(); ++k) { os << (k ? " " : "") << spec.params[k]; }
  os << ")";
  return os.str();
}

/// Representative instances of every preset family, used by the catalog listing.
inline std::vector<PresetSpec> catalog_specs()
{
  return {
    {"heisenberg", {1}},
    {"heisenberg", {2}},
    {"block_sum", {1, 1}},
    {"block_sum", {1, 3}},
    {"wiener_truncation", {3, 2}},
    {"wiener_truncation", {8, 2}},
    {"wiener_truncation", {16, 2}},
  };
}

}  // namespace hlg
