#include "dpbm/async_sim.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace dpbm {

Growth parse_growth(const std::string& name) {
  if (name == "zero") return Growth::zero;
  if (name == "sqrt") return Growth::sqrt;
  if (name == "log") return Growth::log;
  throw std::invalid_argument("unknown growth '" + name + "' (zero, sqrt, log)");
}

std::string to_string(Growth g) {
  switch (g) {
    case Growth::zero: return "zero";
    case Growth::sqrt: return "sqrt";
    case Growth::log: return "log";
  }
  return "?";
}

long envelope(Growth g, long k) {
  if (k < 0) throw std::invalid_argument("envelope: negative tick");
  switch (g) {
    case Growth::zero:
      return 0;
    case Growth::sqrt: {
      auto r = static_cast<long>(std::sqrt(static_cast<double>(k)));
      while (r * r > k) --r;
      while ((r + 1) * (r + 1) <= k) ++r;
      return r;
    }
    case Growth::log:
      return static_cast<long>(std::floor(std::log1p(static_cast<double>(k))));
  }
  return 0;
}

namespace {

long uniform(std::mt19937_64& rng, long lo, long hi) {
  return std::uniform_int_distribution<long>(lo, hi)(rng);
}

// Shared generator: gap(k) bounds the next activation gap, lag(k) the staleness.
template <typename Gap, typename Lag>
AsyncSchedule generate(const Graph& graph, long horizon, std::uint64_t seed, long first_max, Gap gap, Lag lag) {
  if (horizon < 1) throw std::invalid_argument("schedule horizon must be >= 1");
  const Index n = graph.size();
  AsyncSchedule s;
  s.horizon = horizon;
  for (Index i = 0; i < n; ++i) s.neighbors.push_back(graph.neighbors(i));
  s.active.assign(static_cast<std::size_t>(horizon), std::vector<char>(static_cast<std::size_t>(n), 0));
  s.reads.resize(static_cast<std::size_t>(horizon));

  std::mt19937_64 rng(seed);
  std::vector<long> next(static_cast<std::size_t>(n));
  for (auto& t : next) t = uniform(rng, 0, first_max);
  std::vector<std::vector<long>> last(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) last[static_cast<std::size_t>(i)].assign(graph.neighbors(i).size(), 0);

  for (long k = 0; k < horizon; ++k) {
    auto& row = s.reads[static_cast<std::size_t>(k)];
    row.resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      auto& prev = last[ui];
      if (next[ui] == k) {
        s.active[static_cast<std::size_t>(k)][ui] = 1;
        next[ui] = k + uniform(rng, 1, 1 + gap(k));
        const long lo = std::max(0L, k - lag(k));
        for (auto& p : prev) p = std::max(p, uniform(rng, lo, k));
      }
      row[ui] = prev;
    }
  }
  return s;
}

}  // namespace

AsyncSchedule schedule_partial(const Graph& graph, long horizon, long B, long D, std::uint64_t seed) {
  if (B < 0 || D < 0) throw std::invalid_argument("schedule_partial: B and D must be >= 0");
  AsyncSchedule s = generate(graph, horizon, seed, B, [B](long) { return B; }, [D](long) { return D; });
  s.mode = AsyncSchedule::Mode::partial;
  s.B = B;
  s.D = D;
  return s;
}

AsyncSchedule schedule_total(const Graph& graph, long horizon, std::uint64_t seed, Growth growth) {
  auto g = [growth](long k) { return envelope(growth, k); };
  AsyncSchedule s = generate(graph, horizon, seed, 0, g, g);
  s.mode = AsyncSchedule::Mode::total;
  s.growth = growth;
  return s;
}

ScheduleReport verify_schedule(const AsyncSchedule& s) {
  auto fail = [](std::string msg, Index i, Index j, long k) { return ScheduleReport{false, std::move(msg), i, j, k}; };
  const Index n = s.nodes();
  if (static_cast<long>(s.active.size()) != s.horizon || static_cast<long>(s.reads.size()) != s.horizon)
    return fail("table sizes differ from the horizon", -1, -1, -1);

  const bool partial = s.mode == AsyncSchedule::Mode::partial;
  for (Index i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const auto& nbrs = s.neighbors[ui];
    std::vector<long> prev(nbrs.size(), 0);
    long last_active = -1;
    for (long k = 0; k < s.horizon; ++k) {
      const auto uk = static_cast<std::size_t>(k);
      if (s.active[uk].size() != static_cast<std::size_t>(n) || s.reads[uk].size() != static_cast<std::size_t>(n) ||
          s.reads[uk][ui].size() != nbrs.size())
        return fail("table row has the wrong shape", i, -1, k);
      if (!s.active[uk][ui]) continue;

      const long allowed_gap = partial ? s.B + 1 : 1 + envelope(s.growth, k);
      if (k - last_active > allowed_gap) {
        const long from = last_active + 1;
        return fail("node " + std::to_string(i) + " silent over ticks [" + std::to_string(from) + ", " +
                        std::to_string(k - 1) + "]",
                    i, -1, from);
      }
      last_active = k;

      const long lag = partial ? s.D : envelope(s.growth, k);
      for (std::size_t slot = 0; slot < nbrs.size(); ++slot) {
        const long r = s.reads[uk][ui][slot];
        const Index j = nbrs[slot];
        if (r < 0 || r > k) return fail("read index outside [0, k]", i, j, k);
        if (r < k - lag)
          return fail("read of node " + std::to_string(j) + " is " + std::to_string(k - r) + " ticks stale (bound " +
                          std::to_string(lag) + ")",
                      i, j, k);
        if (r < prev[slot]) return fail("read index went backwards", i, j, k);
        prev[slot] = r;
      }
    }
    // Trailing window: the last activation must be close enough to the horizon.
    const long tail_gap = partial ? s.B + 1 : 1 + envelope(s.growth, s.horizon - 1);
    if (s.horizon - last_active > tail_gap) {
      const long from = last_active + 1;
      return fail("node " + std::to_string(i) + " silent over ticks [" + std::to_string(from) + ", " +
                      std::to_string(s.horizon - 1) + "]",
                  i, -1, from);
    }
  }
  return {};
}

namespace {

// x_j as of tick s: latest history entry with tick <= s.
const Vector& lookup(const std::vector<std::pair<long, Vector>>& history, long s) {
  auto it = std::upper_bound(history.begin(), history.end(), s,
                             [](long value, const std::pair<long, Vector>& e) { return value < e.first; });
  if (it == history.begin()) throw std::logic_error("history lookup before tick 0");
  return std::prev(it)->second;
}

Matrix gather(const std::vector<NodeState>& nodes, Index d) {
  Matrix X(d, static_cast<Index>(nodes.size()));
  for (std::size_t i = 0; i < nodes.size(); ++i) X.col(static_cast<Index>(i)) = nodes[i].x;
  return X;
}

}  // namespace

Trace run_simulation(const Problem& problem, const Graph& graph, const Matrix& W, const AlgoConfig& cfg,
                     const AsyncSchedule& schedule, const Matrix& x0, std::uint64_t seed, const SimOptions& options) {
  const long ticks = options.iterations < 0 ? schedule.horizon : options.iterations;
  if (ticks > schedule.horizon) throw std::invalid_argument("schedule horizon is shorter than the iteration budget");
  if (options.stride < 1) throw std::invalid_argument("snapshot stride must be >= 1");
  if (schedule.nodes() != graph.size()) throw std::invalid_argument("schedule and graph disagree on the node count");
  for (Index i = 0; i < graph.size(); ++i)
    if (schedule.neighbors[static_cast<std::size_t>(i)] != graph.neighbors(i))
      throw std::invalid_argument("schedule was built for a different graph");

  std::vector<NodeState> nodes = make_nodes(problem, graph, W, cfg, x0, seed);
  const Index n = problem.nodes();
  const Index d = problem.dim();

  std::vector<std::vector<std::pair<long, Vector>>> history(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) history[static_cast<std::size_t>(i)].emplace_back(0, x0.col(i));

  Trace trace;
  trace.nodes = n;
  trace.dim = d;
  trace.seed = seed;
  trace.iterations.push_back(0);
  trace.snapshots.push_back(x0);

  long delay_count = 0;
  double delay_sum = 0.0;
  for (long k = 0; k < ticks; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    for (Index i = 0; i < n; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      if (!schedule.active[uk][ui]) continue;
      NodeState& node = nodes[ui];
      for (std::size_t slot = 0; slot < node.neighbors.size(); ++slot) {
        const long s = schedule.reads[uk][ui][slot];
        const auto j = static_cast<std::size_t>(node.neighbors[slot].id);
        node.receive(slot, lookup(history[j], s), s);
        trace.max_delay = std::max(trace.max_delay, k - s);
        delay_sum += static_cast<double>(k - s);
        ++delay_count;
      }
      UpdateRecord rec = node_update(node, cfg, problem.reg, k);
      if (options.keep_log) trace.log.push_back(rec);
      history[ui].emplace_back(k + 1, node.x);
    }
    if ((k + 1) % options.stride == 0 || k + 1 == ticks) {
      trace.iterations.push_back(k + 1);
      trace.snapshots.push_back(gather(nodes, d));
    }
  }
  trace.mean_delay = delay_count > 0 ? delay_sum / static_cast<double>(delay_count) : 0.0;
  return trace;
}

}  // namespace dpbm
