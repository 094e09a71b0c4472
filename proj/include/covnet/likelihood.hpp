#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "covnet/dataset.hpp"
#include "covnet/error.hpp"
#include "covnet/jsonio.hpp"

namespace covnet {

// Probability floor used by the guarded log inside optimization; keeps the
// objective finite on parameter-boundary plateaus.
inline constexpr double kGuardFloor = 1e-300;

// Above this roster size the per-record kernel switches to log-space
// products to dodge underflow in long responder chains.
inline constexpr std::size_t kLogSpaceThreshold = 64;

// Transmission matrix r (row = initiator, column = responder, unit
// diagonal) plus initiator weights f. The full parameter set the estimator
// searches over.
struct ModelParams {
  std::size_t n = 0;
  std::vector<double> r;  // row-major n*n
  std::vector<double> f;  // length n

  double transmission(std::size_t j, std::size_t k) const { return r[j * n + k]; }
  double& transmission(std::size_t j, std::size_t k) { return r[j * n + k]; }

  bool operator==(const ModelParams&) const = default;
};

inline ModelParams uniform_params(std::size_t n, double off_diagonal = 0.5) {
  ModelParams mp;
  mp.n = n;
  mp.r.assign(n * n, off_diagonal);
  for (std::size_t j = 0; j < n; ++j) mp.r[j * n + j] = 1.0;
  mp.f.assign(n, n ? 1.0 / static_cast<double>(n) : 0.0);
  return mp;
}

// Structural checks on a parameter set; empty result means valid. The
// simplex constraint on f is our normalization convention and can be
// waived for the unnormalized fitting mode.
inline std::vector<std::string> check_params(const ModelParams& mp,
                                             bool require_simplex = true) {
  std::vector<std::string> out;
  if (mp.r.size() != mp.n * mp.n) out.push_back("transmission matrix has wrong shape");
  if (mp.f.size() != mp.n) out.push_back("initiator vector has wrong length");
  if (!out.empty()) return out;
  for (std::size_t j = 0; j < mp.n; ++j) {
    if (mp.r[j * mp.n + j] != 1.0) {
      out.push_back("diagonal entry r(" + std::to_string(j) + "," + std::to_string(j) + ") != 1");
    }
    for (std::size_t k = 0; k < mp.n; ++k) {
      double v = mp.r[j * mp.n + k];
      if (!(v >= 0.0 && v <= 1.0)) {
        out.push_back("r(" + std::to_string(j) + "," + std::to_string(k) + ") outside [0,1]");
      }
    }
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < mp.n; ++j) {
    if (!(mp.f[j] >= 0.0)) out.push_back("f(" + std::to_string(j) + ") negative");
    if (!require_simplex && !(mp.f[j] <= 1.0)) {
      out.push_back("f(" + std::to_string(j) + ") above 1");
    }
    sum += mp.f[j];
  }
  if (require_simplex && std::abs(sum - 1.0) > 1e-12) {
    out.push_back("initiator weights do not sum to 1");
  }
  return out;
}

// Probability that responder k's presence/absence in record i matches the
// observation, given initiator j: d_ik * r_jk + (1 - d_ik) * (1 - r_jk).
inline double responder_factor(const ModelParams& mp, const Dataset& ds,
                               std::size_t i, std::size_t j, std::size_t k) {
  if (i >= ds.record_count() || j >= mp.n || k >= mp.n) {
    throw Error(ErrorKind::validation, "responder_factor index out of range");
  }
  const double r = mp.transmission(j, k);
  return ds.contains(i, k) ? r : 1.0 - r;
}

// Per-record probability, straight product form. The product runs over all
// responders; the unit diagonal makes the k == j factor neutral for any
// participating initiator.
inline double record_probability_linear(const ModelParams& mp, const Dataset& ds,
                                        std::size_t i) {
  const std::size_t n = mp.n;
  const std::uint8_t* row = ds.row(i);
  double p = 0.0;
  for (std::size_t j : ds.records[i].participants) {
    double term = mp.f[j];
    const double* rj = mp.r.data() + j * n;
    for (std::size_t k = 0; k < n; ++k) {
      term *= row[k] ? rj[k] : 1.0 - rj[k];
    }
    p += term;
  }
  return p;
}

// Log of the per-record probability via per-term log sums; immune to
// underflow in the responder product. Returns -inf when the probability is
// exactly zero.
inline double log_record_probability(const ModelParams& mp, const Dataset& ds,
                                     std::size_t i) {
  const std::size_t n = mp.n;
  const std::uint8_t* row = ds.row(i);
  constexpr double neg_inf = -std::numeric_limits<double>::infinity();
  double max_log = neg_inf;
  std::vector<double> logs;
  logs.reserve(ds.records[i].participants.size());
  for (std::size_t j : ds.records[i].participants) {
    double lt = std::log(mp.f[j]);
    const double* rj = mp.r.data() + j * n;
    for (std::size_t k = 0; k < n; ++k) {
      lt += std::log(row[k] ? rj[k] : 1.0 - rj[k]);
    }
    logs.push_back(lt);
    if (lt > max_log) max_log = lt;
  }
  if (max_log == neg_inf) return neg_inf;
  double acc = 0.0;
  for (double lt : logs) acc += std::exp(lt - max_log);
  return max_log + std::log(acc);
}

inline double record_probability_logspace(const ModelParams& mp, const Dataset& ds,
                                          std::size_t i) {
  double lp = log_record_probability(mp, ds, i);
  return lp == -std::numeric_limits<double>::infinity() ? 0.0 : std::exp(lp);
}

inline double record_probability(const ModelParams& mp, const Dataset& ds,
                                 std::size_t i) {
  if (i >= ds.record_count()) {
    throw Error(ErrorKind::validation,
                "record index " + std::to_string(i) + " out of range");
  }
  return mp.n > kLogSpaceThreshold ? record_probability_logspace(mp, ds, i)
                                   : record_probability_linear(mp, ds, i);
}

// Per-initiator decomposition of a record probability. terms[j] is zero for
// non-participants; the probability is their ordered sum.
struct RecordBreakdown {
  double probability = 0.0;
  std::vector<double> terms;
};

inline RecordBreakdown record_breakdown(const ModelParams& mp, const Dataset& ds,
                                        std::size_t i) {
  if (i >= ds.record_count()) {
    throw Error(ErrorKind::validation,
                "record index " + std::to_string(i) + " out of range");
  }
  const std::size_t n = mp.n;
  const std::uint8_t* row = ds.row(i);
  RecordBreakdown out;
  out.terms.assign(n, 0.0);
  for (std::size_t j : ds.records[i].participants) {
    double term = mp.f[j];
    const double* rj = mp.r.data() + j * n;
    for (std::size_t k = 0; k < n; ++k) {
      term *= row[k] ? rj[k] : 1.0 - rj[k];
    }
    out.terms[j] = term;
    out.probability += term;
  }
  return out;
}

enum class LogMode {
  exact,    // log 0 propagates as -inf
  guarded,  // probabilities floored at kGuardFloor
};

// Total log-likelihood: ordered sum of per-record logs, so independent
// re-evaluation of the same sum is bit-identical.
inline double log_likelihood(const ModelParams& mp, const Dataset& ds,
                             LogMode mode = LogMode::exact) {
  const bool logspace = mp.n > kLogSpaceThreshold;
  const double log_floor = std::log(kGuardFloor);
  double acc = 0.0;
  for (std::size_t i = 0; i < ds.record_count(); ++i) {
    double li;
    if (logspace) {
      li = log_record_probability(mp, ds, i);
      if (mode == LogMode::guarded && li < log_floor) li = log_floor;
    } else {
      double p = record_probability_linear(mp, ds, i);
      li = mode == LogMode::guarded ? std::log(std::max(p, kGuardFloor)) : std::log(p);
    }
    acc += li;
  }
  return acc;
}

// --- parameter document ---------------------------------------------------

// Fit metadata carried alongside the estimate; everything a re-run needs to
// reproduce or audit the result.
struct FitInfo {
  double log_likelihood = 0.0;
  std::uint64_t seed = 0;
  std::size_t restarts = 0;
  std::size_t restart_index = 0;
  std::size_t sweeps_used = 0;
  bool converged = false;
};

struct ParamsDocument {
  std::vector<std::string> roster;
  ModelParams params;
  bool normalized_f = true;
  std::optional<FitInfo> fit;
};

inline std::string serialize_params(const ParamsDocument& doc) {
  std::string out = "{\n";
  out += "\"roster\":" + jsonio::string_array(doc.roster) + ",\n";
  out += "\"n\":" + std::to_string(doc.params.n) + ",\n";
  out += "\"r\":" + jsonio::number_array(doc.params.r) + ",\n";
  out += "\"f\":" + jsonio::number_array(doc.params.f) + ",\n";
  out += std::string("\"normalized_f\":") + (doc.normalized_f ? "true" : "false");
  if (doc.fit) {
    out += ",\n\"fit\":{";
    out += "\"log_likelihood\":" + jsonio::number(doc.fit->log_likelihood);
    out += ",\"seed\":" + std::to_string(doc.fit->seed);
    out += ",\"restarts\":" + std::to_string(doc.fit->restarts);
    out += ",\"restart_index\":" + std::to_string(doc.fit->restart_index);
    out += ",\"sweeps_used\":" + std::to_string(doc.fit->sweeps_used);
    out += std::string(",\"converged\":") + (doc.fit->converged ? "true" : "false");
    out += "}";
  }
  out += "\n}\n";
  return out;
}

inline ParamsDocument parse_params(const std::string& text) {
  nlohmann::json obj;
  try {
    obj = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, std::string("params document: ") + e.what());
  }
  ParamsDocument doc;
  try {
    doc.roster = obj.at("roster").get<std::vector<std::string>>();
    doc.params.n = obj.at("n").get<std::size_t>();
    doc.params.r = obj.at("r").get<std::vector<double>>();
    doc.params.f = obj.at("f").get<std::vector<double>>();
    doc.normalized_f = obj.value("normalized_f", true);
    if (obj.contains("fit")) {
      const auto& fit = obj["fit"];
      FitInfo info;
      info.log_likelihood = fit.value("log_likelihood", 0.0);
      info.seed = fit.value("seed", std::uint64_t{0});
      info.restarts = fit.value("restarts", std::size_t{0});
      info.restart_index = fit.value("restart_index", std::size_t{0});
      info.sweeps_used = fit.value("sweeps_used", std::size_t{0});
      info.converged = fit.value("converged", false);
      doc.fit = info;
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, std::string("params document: ") + e.what());
  }
  if (doc.roster.size() != doc.params.n) {
    throw Error(ErrorKind::validation, "params document: roster size disagrees with n");
  }
  auto problems = check_params(doc.params, /*require_simplex=*/doc.normalized_f);
  if (!problems.empty()) {
    throw Error(ErrorKind::validation, "params document: " + problems.front());
  }
  return doc;
}

inline void write_params(const std::string& path, const ParamsDocument& doc) {
  jsonio::write_file(path, serialize_params(doc));
}

inline ParamsDocument read_params(const std::string& path) {
  return parse_params(jsonio::read_file(path));
}

}  // namespace covnet
