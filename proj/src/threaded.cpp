// Real-thread runtime: each worker owns one NodeState and exchanges iterates
// through latest-wins slots. Used for demonstrations only.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <mutex>
#include <thread>

#include "dpbm/async_sim.hpp"

namespace dpbm {
namespace {

struct Slot {
  std::mutex mutex;
  Vector x;
  long version = 0;
};

}  // namespace

Trace run_threaded(const Problem& problem, const Graph& graph, const Matrix& W, const AlgoConfig& cfg,
                   const Matrix& x0, std::uint64_t seed, const ThreadedOptions& options) {
  if (!(options.wall_seconds > 0.0)) throw std::invalid_argument("wall budget must be positive");
  std::vector<NodeState> nodes = make_nodes(problem, graph, W, cfg, x0, seed);
  const Index n = problem.nodes();
  const auto un = static_cast<std::size_t>(n);

  // inbox[i][slot] receives from the slot-th neighbor of i.
  std::vector<std::vector<Slot>> inbox(un);
  for (std::size_t i = 0; i < un; ++i) {
    inbox[i] = std::vector<Slot>(nodes[i].neighbors.size());
    for (std::size_t s = 0; s < inbox[i].size(); ++s) inbox[i][s].x = nodes[i].neighbors[s].x;
  }
  // outbox[i] lists (j, slot of i at j).
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> outbox(un);
  for (std::size_t j = 0; j < un; ++j)
    for (std::size_t s = 0; s < nodes[j].neighbors.size(); ++s)
      outbox[static_cast<std::size_t>(nodes[j].neighbors[s].id)].emplace_back(j, s);

  std::vector<std::vector<Vector>> history(un);
  std::vector<std::vector<UpdateRecord>> logs(un);
  std::vector<long> max_delay(un, 0);
  std::vector<double> delay_sum(un, 0.0);
  std::vector<long> delay_count(un, 0);
  std::atomic<bool> stop{false};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(options.wall_seconds);

  auto worker = [&](std::size_t i) {
    NodeState& node = nodes[i];
    history[i].push_back(node.x);
    try {
      while (!stop.load() && std::chrono::steady_clock::now() < deadline &&
             (options.max_updates == 0 || node.updates < options.max_updates)) {
        for (std::size_t s = 0; s < inbox[i].size(); ++s) {
          std::lock_guard<std::mutex> lock(inbox[i][s].mutex);
          if (inbox[i][s].version > node.neighbors[s].version)
            node.receive(s, inbox[i][s].x, inbox[i][s].version);
          const long lag = std::max(0L, node.updates - node.neighbors[s].version);
          max_delay[i] = std::max(max_delay[i], lag);
          delay_sum[i] += static_cast<double>(lag);
          ++delay_count[i];
        }
        logs[i].push_back(node_update(node, cfg, problem.reg, node.updates));
        history[i].push_back(node.x);
        for (auto [j, s] : outbox[i]) {
          std::lock_guard<std::mutex> lock(inbox[j][s].mutex);
          inbox[j][s].x = node.x;
          inbox[j][s].version = node.updates;
        }
        // Workers usually outnumber cores; without a hand-off one node can
        // finish its whole budget against stale neighbors.
        std::this_thread::yield();
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      stop.store(true);
    }
  };

  std::vector<std::thread> threads;
  threads.reserve(un);
  for (std::size_t i = 0; i < un; ++i) threads.emplace_back(worker, i);
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);

  Trace trace;
  trace.nodes = n;
  trace.dim = problem.dim();
  trace.seed = seed;
  std::size_t rounds = 0;
  for (const auto& h : history) rounds = std::max(rounds, h.size());
  for (std::size_t t = 0; t < rounds; ++t) {
    Matrix X(problem.dim(), n);
    for (std::size_t i = 0; i < un; ++i) X.col(static_cast<Index>(i)) = history[i][std::min(t, history[i].size() - 1)];
    trace.iterations.push_back(static_cast<long>(t));
    trace.snapshots.push_back(std::move(X));
  }
  long count = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < un; ++i) {
    trace.log.insert(trace.log.end(), logs[i].begin(), logs[i].end());
    trace.max_delay = std::max(trace.max_delay, max_delay[i]);
    sum += delay_sum[i];
    count += delay_count[i];
  }
  trace.mean_delay = count > 0 ? sum / static_cast<double>(count) : 0.0;
  return trace;
}

}  // namespace dpbm
