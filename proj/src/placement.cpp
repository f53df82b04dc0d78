#include "pmuplace/placement.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <unordered_map>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "pmuplace/batch_eval.hpp"
#include "pmuplace/descriptor_model.hpp"
#include "pmuplace/errors.hpp"

namespace pmuplace {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double now_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch())
      .count();
}

void check_scale(const PlacementProblem& prob) {
  if (prob.M() > 64)
    throw RefusedScale("placement supports at most 64 candidates, got " +
                       std::to_string(prob.M()));
}

// Memoized subset-trace evaluation. Batches go through evaluate_subsets so
// they can use the parallel kernel; every solver decision reads from the map
// afterwards, which keeps results independent of worker count.
class TraceCache {
 public:
  TraceCache(const PlacementProblem& prob) : prob_(prob) {}

  void prime(const std::vector<std::uint64_t>& masks) {
    std::vector<std::uint64_t> missing;
    for (std::uint64_t m : masks)
      if (!map_.count(m)) {
        map_.emplace(m, kInf);  // reserve so duplicates are not re-queued
        missing.push_back(m);
      }
    if (missing.empty()) return;
    auto evals =
        evaluate_subsets(prob_.sys, prob_.candidates, missing, prob_.riccati);
    for (const auto& ev : evals) map_[ev.mask] = ev.trace;
    solves_ += static_cast<long>(missing.size());
  }

  double trace(std::uint64_t mask) {
    auto it = map_.find(mask);
    if (it != map_.end()) return it->second;
    prime({mask});
    return map_.at(mask);
  }

  long solves() const { return solves_; }

 private:
  const PlacementProblem& prob_;
  std::unordered_map<std::uint64_t, double> map_;
  long solves_ = 0;
};

std::uint64_t full_mask(int m) {
  return m == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << m) - 1);
}

double mask_cost(const PlacementProblem& prob, std::uint64_t mask) {
  double c = 0.0;
  for (int i = 0; i < prob.M(); ++i)
    if (mask >> i & 1) c += prob.candidates[static_cast<size_t>(i)].cost;
  return c;
}

PlacementSolution make_solution(Method method, std::uint64_t mask, int m,
                                double objective) {
  PlacementSolution sol;
  sol.method = method;
  sol.gamma = SensorSelection(mask, m);
  sol.objective = objective;
  sol.non_detectable = !std::isfinite(objective);
  return sol;
}

}  // namespace

double PlacementProblem::total_cost() const {
  double c = 0.0;
  for (const auto& cand : candidates) c += cand.cost;
  return c;
}

double PlacementProblem::selection_cost(const SensorSelection& sel) const {
  return mask_cost(*this, sel.mask);
}

const char* method_name(Method m) {
  switch (m) {
    case Method::BranchAndBound: return "bnb";
    case Method::GreedyBestIn: return "greedy-in";
    case Method::GreedyWorstOut: return "greedy-out";
    case Method::Exhaustive: return "exhaustive";
  }
  return "unknown";
}

PlacementSolution greedy_best_in(const PlacementProblem& prob) {
  check_scale(prob);
  const double t0 = now_seconds();
  TraceCache cache(prob);
  const int m = prob.M();

  std::uint64_t on = 0;
  double spent = 0.0;
  double objective = cache.trace(0);
  while (true) {
    std::vector<int> affordable;
    std::vector<std::uint64_t> trials;
    for (int i = 0; i < m; ++i) {
      if (on >> i & 1) continue;
      if (spent + prob.candidates[static_cast<size_t>(i)].cost > prob.budget)
        continue;
      affordable.push_back(i);
      trials.push_back(on | (std::uint64_t{1} << i));
    }
    if (affordable.empty()) break;
    cache.prime(trials);
    int best = affordable.front();
    double best_trace = cache.trace(trials.front());
    for (size_t k = 1; k < affordable.size(); ++k) {
      double t = cache.trace(trials[k]);
      if (t < best_trace) {
        best_trace = t;
        best = affordable[k];
      }
    }
    on |= std::uint64_t{1} << best;
    spent += prob.candidates[static_cast<size_t>(best)].cost;
    objective = best_trace;
  }

  PlacementSolution sol =
      make_solution(Method::GreedyBestIn, on, m, objective);
  sol.evaluated = cache.solves();
  sol.wall_time = now_seconds() - t0;
  return sol;
}

PlacementSolution greedy_worst_out(const PlacementProblem& prob) {
  check_scale(prob);
  const double t0 = now_seconds();
  TraceCache cache(prob);
  const int m = prob.M();

  std::uint64_t on = full_mask(m);
  double spent = prob.total_cost();
  double objective = cache.trace(on);
  bool infeasible = false;

  if (!std::isfinite(objective)) {
    // The full candidate set does not render the system detectable; removal
    // scores would all tie at +inf, so report the failure as-is.
    PlacementSolution sol = make_solution(Method::GreedyWorstOut, on, m, kInf);
    sol.evaluated = cache.solves();
    sol.wall_time = now_seconds() - t0;
    return sol;
  }

  while (spent > prob.budget) {
    std::vector<int> members;
    std::vector<std::uint64_t> trials;
    for (int i = 0; i < m; ++i)
      if (on >> i & 1) {
        members.push_back(i);
        trials.push_back(on & ~(std::uint64_t{1} << i));
      }
    cache.prime(trials);
    int best = -1;
    double best_trace = kInf;
    for (size_t k = 0; k < members.size(); ++k) {
      double t = cache.trace(trials[k]);
      if (t < best_trace) {
        best_trace = t;
        best = members[k];
      }
    }
    if (best < 0) {
      // Every removal diverges: keep the last convergent set even though it
      // exceeds the budget.
      infeasible = true;
      break;
    }
    on &= ~(std::uint64_t{1} << best);
    spent -= prob.candidates[static_cast<size_t>(best)].cost;
    objective = best_trace;
  }

  PlacementSolution sol =
      make_solution(Method::GreedyWorstOut, on, m, objective);
  sol.budget_infeasible = infeasible;
  sol.evaluated = cache.solves();
  sol.wall_time = now_seconds() - t0;
  return sol;
}

PlacementSolution exhaustive(const PlacementProblem& prob,
                             int max_candidates) {
  check_scale(prob);
  const int m = prob.M();
  if (m > max_candidates)
    throw RefusedScale("exhaustive search refused for " + std::to_string(m) +
                       " candidates (limit " +
                       std::to_string(max_candidates) + ")");
  const double t0 = now_seconds();
  TraceCache cache(prob);

  std::uint64_t best_mask = 0;
  double best_trace = kInf;
  bool have_best = false;

  std::vector<std::uint64_t> batch;
  const std::uint64_t end = std::uint64_t{1} << m;
  auto flush = [&] {
    cache.prime(batch);
    for (std::uint64_t mask : batch) {
      double t = cache.trace(mask);
      if (!have_best || t < best_trace ||
          (t == best_trace && lex_less(mask, best_mask))) {
        have_best = true;
        best_trace = t;
        best_mask = mask;
      }
    }
    batch.clear();
  };
  for (std::uint64_t mask = 0; mask < end; ++mask) {
    if (mask_cost(prob, mask) > prob.budget) continue;
    batch.push_back(mask);
    if (batch.size() >= 4096) flush();
  }
  flush();

  PlacementSolution sol =
      make_solution(Method::Exhaustive, best_mask, m, best_trace);
  sol.evaluated = cache.solves();
  sol.wall_time = now_seconds() - t0;
  return sol;
}

namespace {

struct BnbNode {
  std::uint64_t on = 0;
  std::uint64_t excluded = 0;
  double bound = 0.0;
  long seq = 0;  // insertion order, for deterministic tie-breaking
};

struct BnbNodeOrder {
  bool operator()(const BnbNode& a, const BnbNode& b) const {
    if (a.bound != b.bound) return a.bound > b.bound;  // min-heap on bound
    return a.seq > b.seq;
  }
};

// Minimum number of exclusions any feasible completion of `pool` must make:
// drop the most expensive undecided candidates until the pool fits.
int min_exclusions(const PlacementProblem& prob, double pool_cost,
                   double budget, std::uint64_t undecided) {
  if (pool_cost <= budget) return 0;
  std::vector<double> costs;
  for (int i = 0; i < prob.M(); ++i)
    if (undecided >> i & 1)
      costs.push_back(prob.candidates[static_cast<size_t>(i)].cost);
  std::sort(costs.begin(), costs.end(), std::greater<double>());
  int k = 0;
  for (double c : costs) {
    if (pool_cost <= budget) break;
    pool_cost -= c;
    ++k;
  }
  return k;
}

// Counts subsets of the undecided candidates that fit in `slack`, giving up
// at cap+1. Costs are nonnegative, so a branch whose cheapest remaining item
// does not fit can only continue by skipping.
long count_completions(const std::vector<double>& costs, size_t idx,
                       double slack, long cap) {
  if (idx == costs.size()) return 1;
  long skip = count_completions(costs, idx + 1, slack, cap);
  if (skip > cap) return skip;
  if (costs[idx] <= slack) {
    long take = count_completions(costs, idx + 1, slack - costs[idx], cap);
    skip += take;
  }
  return skip;
}

void enumerate_completions(const std::vector<std::pair<int, double>>& items,
                           size_t idx, double slack, std::uint64_t acc,
                           std::vector<std::uint64_t>& out) {
  if (idx == items.size()) {
    out.push_back(acc);
    return;
  }
  enumerate_completions(items, idx + 1, slack, acc, out);
  if (items[idx].second <= slack)
    enumerate_completions(items, idx + 1, slack - items[idx].second,
                          acc | (std::uint64_t{1} << items[idx].first), out);
}

}  // namespace

PlacementSolution branch_and_bound(const PlacementProblem& prob,
                                   const BnbOptions& opts) {
  check_scale(prob);
  const double t0 = now_seconds();
  const int m = prob.M();
  TraceCache cache(prob);

  std::uint64_t inc_mask = 0;
  double inc_obj = cache.trace(0);  // empty selection always fits (b >= 0)
  auto offer = [&](std::uint64_t mask, double trace) {
    if (trace < inc_obj ||
        (trace == inc_obj && lex_less(mask, inc_mask))) {
      inc_obj = trace;
      inc_mask = mask;
    }
  };

  // Warm start: the greedy selection is usually optimal or close.
  long warm_evals = 0;
  {
    PlacementSolution warm = greedy_best_in(prob);
    warm_evals = warm.evaluated;
    if (std::isfinite(warm.objective))
      offer(warm.gamma.mask, cache.trace(warm.gamma.mask));
  }

  long nodes = 0;
  long seq = 0;
  std::priority_queue<BnbNode, std::vector<BnbNode>, BnbNodeOrder> queue;
  {
    BnbNode root;
    root.bound = cache.trace(full_mask(m));
    root.seq = seq++;
    queue.push(root);
  }
  // Smallest bound at which any subtree was discarded; the true optimum is
  // never below min(incumbent, pruned_min).
  double pruned_min = kInf;

  while (!queue.empty()) {
    BnbNode node = queue.top();
    ++nodes;  // examined, whether expanded or used to terminate
    if (node.bound >= inc_obj - opts.abs_gap) {
      pruned_min = std::min(pruned_min, node.bound);
      break;
    }
    queue.pop();

    const std::uint64_t pool = full_mask(m) & ~node.excluded;
    const std::uint64_t undecided = pool & ~node.on;
    const double pool_cost = mask_cost(prob, pool);
    const double on_cost = mask_cost(prob, node.on);

    if (pool_cost <= prob.budget) {
      offer(pool, cache.trace(pool));
      continue;
    }

    // Finish small nodes by enumerating every feasible completion.
    {
      std::vector<double> costs;
      for (int i = 0; i < m; ++i)
        if (undecided >> i & 1)
          costs.push_back(prob.candidates[static_cast<size_t>(i)].cost);
      long n_comp = count_completions(costs, 0, prob.budget - on_cost,
                                      opts.enumerate_limit);
      if (n_comp <= opts.enumerate_limit) {
        std::vector<std::pair<int, double>> items;
        for (int i = 0; i < m; ++i)
          if (undecided >> i & 1)
            items.emplace_back(i, prob.candidates[static_cast<size_t>(i)].cost);
        std::vector<std::uint64_t> leaves;
        enumerate_completions(items, 0, prob.budget - on_cost, node.on,
                              leaves);
        cache.prime(leaves);
        // Deterministic winner regardless of enumeration order.
        std::sort(leaves.begin(), leaves.end());
        for (std::uint64_t leaf : leaves) offer(leaf, cache.trace(leaf));
        continue;
      }
    }

    const double pool_trace = cache.trace(pool);

    // Single-removal scores over the undecided candidates: used both for the
    // sharpened bound and for picking the branching variable.
    std::vector<int> idxs;
    std::vector<std::uint64_t> removals;
    for (int i = 0; i < m; ++i)
      if (undecided >> i & 1) {
        idxs.push_back(i);
        removals.push_back(pool & ~(std::uint64_t{1} << i));
      }
    cache.prime(removals);

    int need = min_exclusions(prob, pool_cost, prob.budget, undecided);
    double sharpened = pool_trace;
    if (need >= 1) {
      // Any feasible completion omits >= need undecided candidates, and the
      // trace of a completion dominates each of its single-removal traces.
      std::vector<double> scores;
      scores.reserve(removals.size());
      for (std::uint64_t r : removals) scores.push_back(cache.trace(r));
      std::nth_element(scores.begin(), scores.begin() + (need - 1),
                       scores.end());
      sharpened = std::max(sharpened, scores[static_cast<size_t>(need - 1)]);
    }
    if (sharpened >= inc_obj - opts.abs_gap) {
      pruned_min = std::min(pruned_min, sharpened);
      continue;
    }

    int branch = idxs.front();
    double branch_score = cache.trace(removals.front());
    std::uint64_t branch_removal = removals.front();
    for (size_t k = 1; k < idxs.size(); ++k) {
      double s = cache.trace(removals[k]);
      if (s > branch_score) {
        branch_score = s;
        branch = idxs[k];
        branch_removal = removals[k];
      }
    }

    const std::uint64_t bit = std::uint64_t{1} << branch;
    if (on_cost + prob.candidates[static_cast<size_t>(branch)].cost <=
        prob.budget) {
      BnbNode child;
      child.on = node.on | bit;
      child.excluded = node.excluded;
      child.bound = std::max(node.bound, sharpened);
      child.seq = seq++;
      queue.push(child);
    }
    {
      BnbNode child;
      child.on = node.on;
      child.excluded = node.excluded | bit;
      child.bound = std::max(node.bound, branch_score);
      child.seq = seq++;
      if (child.bound < inc_obj - opts.abs_gap) queue.push(child);
      else pruned_min = std::min(pruned_min, child.bound);
    }
  }

  double lower_bound = std::min(inc_obj, pruned_min);
  if (!std::isfinite(inc_obj)) lower_bound = inc_obj;

  PlacementSolution sol =
      make_solution(Method::BranchAndBound, inc_mask, m, inc_obj);
  sol.evaluated = cache.solves() + warm_evals;
  BoundCertificate cert;
  cert.lower_bound = lower_bound;
  cert.gap = std::isfinite(inc_obj) ? inc_obj - lower_bound : 0.0;
  cert.nodes_explored = nodes;
  sol.certificate = cert;
  sol.wall_time = now_seconds() - t0;
  return sol;
}

CertificateReport verify_certificate(const DescriptorSystem& sys,
                                     const Eigen::MatrixXd& S,
                                     const Eigen::MatrixXd& P) {
  const int n = sys.n();
  if (P.rows() != n || P.cols() != n)
    throw ModelError("certificate: P must be n x n");
  if (S.rows() != n || S.cols() != n)
    throw ModelError("certificate: S must be n x n");

  Eigen::MatrixXd Psym = 0.5 * (P + P.transpose());
  Eigen::LLT<Eigen::MatrixXd> pllt(Psym);
  if (pllt.info() != Eigen::Success)
    throw NumericalError("certificate: P is not positive definite");
  Eigen::MatrixXd X = pllt.solve(Eigen::MatrixXd::Identity(n, n));
  X = 0.5 * (X + X.transpose());

  CertificateReport rep;
  Eigen::MatrixXd next = riccati_step(Psym, sys, S);
  rep.fixed_point_residual = (next - Psym).norm() / Psym.norm();

  Eigen::MatrixXd schur(2 * n, 2 * n);
  schur.topLeftCorner(n, n) = Psym;
  schur.topRightCorner(n, n) = Eigen::MatrixXd::Identity(n, n);
  schur.bottomLeftCorner(n, n) = Eigen::MatrixXd::Identity(n, n);
  schur.bottomRightCorner(n, n) = X;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es1(schur);
  rep.schur_pair_min_eig = es1.eigenvalues().minCoeff();
  double schur_norm = es1.eigenvalues().cwiseAbs().maxCoeff();

  Eigen::LLT<Eigen::MatrixXd> qllt(sys.Q);
  if (qllt.info() != Eigen::Success)
    throw NumericalError("certificate: Q is not positive definite");
  Eigen::MatrixXd QiA = qllt.solve(sys.A);
  Eigen::MatrixXd QiE = qllt.solve(sys.E);

  Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(3 * n, 3 * n);
  theta.block(0, 0, n, n) = X + sys.A.transpose() * QiA;
  theta.block(0, 2 * n, n, n) = sys.A.transpose() * QiE;
  theta.block(n, n, n, n) = X;
  theta.block(n, 2 * n, n, n) = X;
  theta.block(2 * n, 0, n, n) = theta.block(0, 2 * n, n, n).transpose();
  theta.block(2 * n, n, n, n) = X;
  theta.block(2 * n, 2 * n, n, n) = sys.E.transpose() * QiE + S;
  theta = 0.5 * (theta + theta.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es2(theta);
  rep.theta_min_eig = es2.eigenvalues().minCoeff();
  double theta_norm = es2.eigenvalues().cwiseAbs().maxCoeff();

  rep.passed = rep.fixed_point_residual < 1e-7 &&
               rep.schur_pair_min_eig > -1e-7 * std::max(1.0, schur_norm) &&
               rep.theta_min_eig > -1e-7 * std::max(1.0, theta_norm);
  return rep;
}

std::optional<SubmodularityWitness> non_submodularity_witness(
    const PlacementProblem& prob, int max_candidates) {
  check_scale(prob);
  const int m = prob.M();
  if (m > max_candidates)
    throw RefusedScale("witness search refused for " + std::to_string(m) +
                       " candidates (limit " +
                       std::to_string(max_candidates) + ")");
  TraceCache cache(prob);

  // Prime everything up front in one batch: 2^m evaluations, m <= 12.
  {
    std::vector<std::uint64_t> all;
    all.reserve(std::size_t{1} << m);
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << m); ++mask)
      all.push_back(mask);
    cache.prime(all);
  }

  constexpr double kMargin = 1e-9;
  // Smallest supersets first, then numeric order, so the reported witness is
  // stable and easy to inspect.
  std::vector<std::uint64_t> by_size;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << m); ++mask)
    by_size.push_back(mask);
  std::stable_sort(by_size.begin(), by_size.end(),
                   [](std::uint64_t a, std::uint64_t b) {
                     int pa = __builtin_popcountll(a);
                     int pb = __builtin_popcountll(b);
                     if (pa != pb) return pa < pb;
                     return a < b;
                   });

  for (std::uint64_t t2 : by_size) {
    if (t2 == 0) continue;
    double tr2 = cache.trace(t2);
    if (!std::isfinite(tr2)) continue;
    // Proper subsets of t2 in increasing numeric order.
    for (std::uint64_t t1 = 0; t1 != t2; t1 = (t1 - t2) & t2) {
      double tr1 = cache.trace(t1);
      if (std::isfinite(tr1)) {
        for (int e = 0; e < m; ++e) {
          if (t2 >> e & 1) continue;
          const std::uint64_t bit = std::uint64_t{1} << e;
          double a1 = cache.trace(t1 | bit);
          double a2 = cache.trace(t2 | bit);
          if (!std::isfinite(a1) || !std::isfinite(a2)) continue;
          double gain1 = tr1 - a1;
          double gain2 = tr2 - a2;
          if (gain2 > gain1 + kMargin) {
            SubmodularityWitness w;
            w.t1 = SensorSelection(t1, m);
            w.t2 = SensorSelection(t2, m);
            w.element = e;
            w.gain_t1 = gain1;
            w.gain_t2 = gain2;
            return w;
          }
        }
      }
    }
  }
  return std::nullopt;
}

}  // namespace pmuplace
