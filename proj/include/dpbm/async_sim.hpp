#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dpbm/algorithms.hpp"
#include "dpbm/graph.hpp"
#include "dpbm/problem.hpp"

namespace dpbm {

/// Delay envelope g(k) for total asynchrony.
enum class Growth { zero, sqrt, log };

Growth parse_growth(const std::string& name);
std::string to_string(Growth g);
long envelope(Growth g, long k);

/// Activation sets and read indices over a shared tick counter 0..horizon-1.
///
/// active[k][i] says whether node i updates at tick k. For an active node,
/// reads[k][i][slot] is the tick s whose iterate x_j^s of the slot-th neighbor
/// is used; reads of inactive nodes repeat the previous value.
struct AsyncSchedule {
  enum class Mode { partial, total };
  Mode mode = Mode::partial;
  long horizon = 0;
  long B = 0;
  long D = 0;
  Growth growth = Growth::zero;
  std::vector<std::vector<Index>> neighbors;
  std::vector<std::vector<char>> active;
  std::vector<std::vector<std::vector<long>>> reads;

  Index nodes() const { return static_cast<Index>(neighbors.size()); }
};

/// Every node is active in each window of B+1 ticks and reads are at most D stale.
/// B = D = 0 gives the synchronous schedule.
AsyncSchedule schedule_partial(const Graph& graph, long horizon, long B, long D, std::uint64_t seed);

/// Activation gaps and staleness bounded by 1 + g(k) and g(k).
AsyncSchedule schedule_total(const Graph& graph, long horizon, std::uint64_t seed, Growth growth = Growth::sqrt);

struct ScheduleReport {
  bool ok = true;
  std::string message;
  Index node = -1;
  Index neighbor = -1;
  long tick = -1;
};

/// Checks the schedule's mode invariants and read monotonicity; reports the first violation.
ScheduleReport verify_schedule(const AsyncSchedule& schedule);

/// Recorded run: x_i at selected ticks (columns are nodes), plus per-update log.
struct Trace {
  Index nodes = 0;
  Index dim = 0;
  std::uint64_t seed = 0;
  std::vector<long> iterations;
  std::vector<Matrix> snapshots;
  std::vector<UpdateRecord> log;
  long max_delay = 0;
  double mean_delay = 0.0;

  const Matrix& final() const { return snapshots.back(); }
};

struct SimOptions {
  /// Ticks to run; defaults to the schedule horizon.
  long iterations = -1;
  /// Snapshot every `stride` ticks (the initial and final states are always kept).
  long stride = 1;
  bool keep_log = true;
};

/// Jacobi-style simulation: at tick k every active node reads x_j^{s_ij^k}
/// from the shared history and computes x_i^{k+1} from pre-tick state.
Trace run_simulation(const Problem& problem, const Graph& graph, const Matrix& W, const AlgoConfig& cfg,
                     const AsyncSchedule& schedule, const Matrix& x0, std::uint64_t seed,
                     const SimOptions& options = {});

struct ThreadedOptions {
  double wall_seconds = 1.0;
  /// Each worker stops after this many updates (0 = only the wall budget).
  long max_updates = 0;
};

/// One worker thread per node with latest-wins inboxes. Nondeterministic.
/// Snapshot t holds every node's iterate after min(t, updates_i) of its own updates.
Trace run_threaded(const Problem& problem, const Graph& graph, const Matrix& W, const AlgoConfig& cfg,
                   const Matrix& x0, std::uint64_t seed, const ThreadedOptions& options);

// -- trace files ------------------------------------------------------------

/// Binary snapshot file: "DPBMTRC\0", u32 version, u64 n, u64 d, u64 count,
/// then per snapshot u64 iteration and n*d doubles (column-major), little-endian.
void write_trace_binary(const std::string& path, const Trace& trace);
Trace read_trace_binary(const std::string& path);

}  // namespace dpbm
