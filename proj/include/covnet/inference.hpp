#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "covnet/dataset.hpp"
#include "covnet/error.hpp"
#include "covnet/likelihood.hpp"
#include "covnet/rng.hpp"

namespace covnet {

struct FitConfig {
  std::size_t restarts = 20;
  std::uint64_t seed = 0;
  double initial_step = 0.25;
  double min_step = 1e-4;
  std::size_t max_sweeps = 500;
  double tolerance = 1e-9;
  bool normalize_f = true;
  std::size_t jobs = 1;  // 0 = all hardware threads
};

inline std::vector<std::string> check_fit_config(const FitConfig& cfg) {
  std::vector<std::string> out;
  if (cfg.restarts < 1) out.push_back("restarts must be >= 1");
  if (!(cfg.min_step > 0.0)) out.push_back("min_step must be positive");
  if (!(cfg.min_step <= cfg.initial_step)) out.push_back("min_step must not exceed initial_step");
  if (!(cfg.initial_step <= 0.5)) out.push_back("initial_step must be <= 0.5");
  if (!(cfg.tolerance > 0.0)) out.push_back("tolerance must be positive");
  if (cfg.max_sweeps < 1) out.push_back("max_sweeps must be >= 1");
  return out;
}

struct FitResult {
  ModelParams params;
  double log_likelihood = -std::numeric_limits<double>::infinity();
  std::size_t restart_index = 0;
  std::size_t sweeps_used = 0;
  bool converged = false;
  // Guarded objective after each accepted move; nondecreasing by
  // construction.
  std::vector<double> accepted_trace;
  // Exact log-likelihood reached by every restart (fit_mle only).
  std::vector<double> restart_history;
};

// Uniform random starting point: off-diagonal transmissions in [0,1),
// initiator weights drawn uniform then projected onto the simplex. Fully
// determined by the generator state.
inline ModelParams random_init(std::size_t roster_size, std::mt19937_64& rng) {
  ModelParams mp;
  mp.n = roster_size;
  mp.r.assign(roster_size * roster_size, 0.0);
  for (std::size_t j = 0; j < roster_size; ++j) {
    for (std::size_t k = 0; k < roster_size; ++k) {
      mp.r[j * roster_size + k] = j == k ? 1.0 : uniform01(rng);
    }
  }
  mp.f.assign(roster_size, 0.0);
  double sum = 0.0;
  for (std::size_t j = 0; j < roster_size; ++j) {
    mp.f[j] = uniform01(rng);
    sum += mp.f[j];
  }
  if (sum == 0.0) {
    std::fill(mp.f.begin(), mp.f.end(), 1.0 / static_cast<double>(roster_size));
  } else {
    for (double& v : mp.f) v /= sum;
  }
  return mp;
}

namespace detail {

// Incremental guarded-likelihood state for single-coordinate moves.
//
// For every record i and participating initiator j the responder product
// P(i,j) = prod_k [d_ik r_jk + (1-d_ik)(1-r_jk)] is cached, along with the
// record probability p(i) = sum_j f_j P(i,j) and its guarded log. A
// candidate move touches one transmission entry (affects P(.,j) in the
// records where j participates) or one initiator weight (affects p only),
// so evaluating its objective delta is linear in the touched records.
class ClimbState {
 public:
  ClimbState(const Dataset& ds, ModelParams params, bool normalize_f)
      : ds_(&ds),
        mp_(std::move(params)),
        normalize_f_(normalize_f),
        n_(mp_.n),
        m_(ds.record_count()) {
    by_node_.assign(n_, {});
    for (std::size_t i = 0; i < m_; ++i) {
      for (std::size_t j : ds.records[i].participants) by_node_[j].push_back(i);
    }
    prod_.assign(m_ * n_, 0.0);
    p_.assign(m_, 0.0);
    logp_.assign(m_, 0.0);
    for (auto& bank : scratch_) {
      bank.prod.assign(m_, 0.0);
      bank.p.assign(m_, 0.0);
      bank.logp.assign(m_, 0.0);
    }
    rebuild();
  }

  const ModelParams& params() const { return mp_; }
  ModelParams take_params() { return std::move(mp_); }

  double guarded_total() const {
    double acc = 0.0;
    for (double v : logp_) acc += v;
    return acc;
  }

  double try_transmission(std::size_t j, std::size_t k, double value, int bank) {
    auto& s = scratch_[bank];
    double delta = 0.0;
    for (std::size_t i : by_node_[j]) {
      const std::uint8_t* row = ds_->row(i);
      const double* rj = mp_.r.data() + j * n_;
      double prod = 1.0;
      for (std::size_t c = 0; c < n_; ++c) {
        const double r = c == k ? value : rj[c];
        prod *= row[c] ? r : 1.0 - r;
      }
      double p = 0.0;
      for (std::size_t member : ds_->records[i].participants) {
        p += mp_.f[member] * (member == j ? prod : prod_[i * n_ + member]);
      }
      s.prod[i] = prod;
      s.p[i] = p;
      s.logp[i] = guarded_log(p);
      delta += s.logp[i] - logp_[i];
    }
    return delta;
  }

  void commit_transmission(std::size_t j, std::size_t k, double value, int bank) {
    auto& s = scratch_[bank];
    mp_.r[j * n_ + k] = value;
    for (std::size_t i : by_node_[j]) {
      prod_[i * n_ + j] = s.prod[i];
      p_[i] = s.p[i];
      logp_[i] = s.logp[i];
    }
  }

  // Weight move under simplex projection: every record is rescaled by the
  // new total mass.
  double try_weight_normalized(std::size_t j, double raw, int bank) {
    auto& s = scratch_[bank];
    const double scale = 1.0 + (raw - mp_.f[j]);
    const double inv = 1.0 / scale;
    double delta = 0.0;
    for (std::size_t i = 0; i < m_; ++i) {
      double base = p_[i];
      if (ds_->contains(i, j)) base += (raw - mp_.f[j]) * prod_[i * n_ + j];
      const double p = std::max(0.0, base * inv);
      s.p[i] = p;
      s.logp[i] = guarded_log(p);
      delta += s.logp[i] - logp_[i];
    }
    return delta;
  }

  void commit_weight_normalized(std::size_t j, double raw) {
    mp_.f[j] = raw;
    double sum = 0.0;
    for (double v : mp_.f) sum += v;
    for (double& v : mp_.f) v /= sum;
    refresh_probabilities();
  }

  // Weight move without normalization: only records containing j change.
  double try_weight_box(std::size_t j, double raw, int bank) {
    auto& s = scratch_[bank];
    double delta = 0.0;
    for (std::size_t i : by_node_[j]) {
      const double p = std::max(0.0, p_[i] + (raw - mp_.f[j]) * prod_[i * n_ + j]);
      s.p[i] = p;
      s.logp[i] = guarded_log(p);
      delta += s.logp[i] - logp_[i];
    }
    return delta;
  }

  void commit_weight_box(std::size_t j, double raw, int bank) {
    auto& s = scratch_[bank];
    mp_.f[j] = raw;
    for (std::size_t i : by_node_[j]) {
      p_[i] = s.p[i];
      logp_[i] = s.logp[i];
    }
  }

 private:
  static double guarded_log(double p) { return std::log(std::max(p, kGuardFloor)); }

  void rebuild() {
    for (std::size_t i = 0; i < m_; ++i) {
      const std::uint8_t* row = ds_->row(i);
      for (std::size_t j : ds_->records[i].participants) {
        const double* rj = mp_.r.data() + j * n_;
        double prod = 1.0;
        for (std::size_t k = 0; k < n_; ++k) {
          prod *= row[k] ? rj[k] : 1.0 - rj[k];
        }
        prod_[i * n_ + j] = prod;
      }
    }
    refresh_probabilities();
  }

  void refresh_probabilities() {
    for (std::size_t i = 0; i < m_; ++i) {
      double p = 0.0;
      for (std::size_t j : ds_->records[i].participants) {
        p += mp_.f[j] * prod_[i * n_ + j];
      }
      p_[i] = p;
      logp_[i] = guarded_log(p);
    }
  }

  struct Scratch {
    std::vector<double> prod;
    std::vector<double> p;
    std::vector<double> logp;
  };

  const Dataset* ds_;
  ModelParams mp_;
  bool normalize_f_;
  std::size_t n_;
  std::size_t m_;
  std::vector<std::vector<std::size_t>> by_node_;
  std::vector<double> prod_;
  std::vector<double> p_;
  std::vector<double> logp_;
  Scratch scratch_[2];
};

inline double clip01(double v) { return std::min(1.0, std::max(0.0, v)); }

}  // namespace detail

// Coordinate-ascent hill climbing. Sweeps all free coordinates in a fixed
// order (off-diagonal transmissions row-major, then initiator weights),
// trying +/- step per coordinate and keeping the better candidate when it
// improves the guarded objective by more than the tolerance. A sweep with
// no accepted move halves the step; the climb stops once the step falls
// below min_step (converged) or the sweep budget runs out.
inline FitResult hill_climb_once(const Dataset& ds, ModelParams start, const FitConfig& cfg) {
  {
    auto problems = check_fit_config(cfg);
    if (!problems.empty()) throw Error(ErrorKind::config, problems.front());
    auto bad = check_params(start, cfg.normalize_f);
    if (!bad.empty()) throw Error(ErrorKind::validation, "hill_climb_once: " + bad.front());
  }
  constexpr double neg_inf = -std::numeric_limits<double>::infinity();
  const std::size_t n = start.n;
  detail::ClimbState state(ds, std::move(start), cfg.normalize_f);

  FitResult res;
  double level = state.guarded_total();
  double step = cfg.initial_step;
  std::size_t sweeps = 0;
  bool converged = false;

  while (sweeps < cfg.max_sweeps) {
    bool accepted_any = false;

    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < n; ++k) {
        if (k == j) continue;
        const double cur = state.params().r[j * n + k];
        const double up = detail::clip01(cur + step);
        const double down = detail::clip01(cur - step);
        double d_up = neg_inf;
        double d_down = neg_inf;
        if (up != cur) d_up = state.try_transmission(j, k, up, 0);
        if (down != cur && down != up) d_down = state.try_transmission(j, k, down, 1);
        const bool take_up = d_up >= d_down;
        const double best = take_up ? d_up : d_down;
        if (best > cfg.tolerance) {
          state.commit_transmission(j, k, take_up ? up : down, take_up ? 0 : 1);
          level += best;
          res.accepted_trace.push_back(level);
          accepted_any = true;
        }
      }
    }

    for (std::size_t j = 0; j < n; ++j) {
      const double cur = state.params().f[j];
      if (cfg.normalize_f) {
        // Negative raw weights are infeasible and skipped rather than
        // clipped; the projection keeps every surviving weight interior.
        const double up = cur + step;
        const double down = cur - step;
        double d_up = state.try_weight_normalized(j, up, 0);
        double d_down = down >= 0.0 ? state.try_weight_normalized(j, down, 1) : neg_inf;
        const bool take_up = d_up >= d_down;
        const double best = take_up ? d_up : d_down;
        if (best > cfg.tolerance) {
          state.commit_weight_normalized(j, take_up ? up : down);
          level += best;
          res.accepted_trace.push_back(level);
          accepted_any = true;
        }
      } else {
        const double up = detail::clip01(cur + step);
        const double down = detail::clip01(cur - step);
        double d_up = neg_inf;
        double d_down = neg_inf;
        if (up != cur) d_up = state.try_weight_box(j, up, 0);
        if (down != cur && down != up) d_down = state.try_weight_box(j, down, 1);
        const bool take_up = d_up >= d_down;
        const double best = take_up ? d_up : d_down;
        if (best > cfg.tolerance) {
          state.commit_weight_box(j, take_up ? up : down, take_up ? 0 : 1);
          level += best;
          res.accepted_trace.push_back(level);
          accepted_any = true;
        }
      }
    }

    ++sweeps;
    if (!accepted_any) {
      step *= 0.5;
      if (step < cfg.min_step) {
        converged = true;
        break;
      }
    }
  }

  res.params = state.take_params();
  res.log_likelihood = log_likelihood(res.params, ds, LogMode::exact);
  res.sweeps_used = sweeps;
  res.converged = converged;
  return res;
}

using FitProgress = std::function<void(const FitResult&)>;

// Multi-restart estimator. Every restart draws its start from a generator
// derived from (seed, restart index), so the outcome does not depend on the
// worker count; the winner is the restart with the best exact
// log-likelihood, ties broken toward the lower index.
inline FitResult fit_mle(const Dataset& ds, const FitConfig& cfg,
                         const FitProgress& progress = {}) {
  {
    auto problems = check_fit_config(cfg);
    if (!problems.empty()) throw Error(ErrorKind::config, problems.front());
    auto bad = validate(ds);
    if (!bad.empty()) throw Error(ErrorKind::validation, "fit_mle: " + bad.front().message);
  }
  constexpr double neg_inf = -std::numeric_limits<double>::infinity();

  std::size_t workers = cfg.jobs == 0
                            ? std::max(1u, std::thread::hardware_concurrency())
                            : cfg.jobs;
  workers = std::max<std::size_t>(1, std::min(workers, cfg.restarts));

  std::vector<double> restart_history(cfg.restarts, neg_inf);
  struct Candidate {
    bool has = false;
    FitResult result;
  };
  std::vector<Candidate> worker_best(workers);
  std::mutex progress_mutex;

  auto better = [](const FitResult& a, const FitResult& b) {
    if (a.log_likelihood != b.log_likelihood) return a.log_likelihood > b.log_likelihood;
    return a.restart_index < b.restart_index;
  };

  auto run_worker = [&](std::size_t w) {
    for (std::size_t idx = w; idx < cfg.restarts; idx += workers) {
      auto rng = make_rng(cfg.seed, idx);
      ModelParams init = random_init(ds.node_count(), rng);
      FitResult fr = hill_climb_once(ds, std::move(init), cfg);
      fr.restart_index = idx;
      restart_history[idx] = fr.log_likelihood;
      if (progress) {
        std::lock_guard<std::mutex> lock(progress_mutex);
        progress(fr);
      }
      Candidate& best = worker_best[w];
      if (!best.has || better(fr, best.result)) {
        best.result = std::move(fr);
        best.has = true;
      }
    }
  };

  if (workers == 1) {
    run_worker(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run_worker, w);
    run_worker(0);
    for (auto& t : pool) t.join();
  }

  FitResult* winner = nullptr;
  for (auto& cand : worker_best) {
    if (!cand.has) continue;
    if (!winner || better(cand.result, *winner)) winner = &cand.result;
  }
  FitResult out = std::move(*winner);
  out.restart_history = std::move(restart_history);
  return out;
}

}  // namespace covnet
