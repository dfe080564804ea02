#pragma once

#include <cstdint>
#include <vector>

#include "treenav/env.hpp"
#include "treenav/rng.hpp"

namespace treenav {

struct Transition {
    NavState state;
    Action action = Action::Stop;
    double reward = 0.0;
    NavState next_state;  // unused when terminal (left empty to save memory)
    bool terminal = false;
};

/// Proportional prioritized replay over a sum tree. Single-writer. New items
/// enter at the running max priority; priorities are (|TD| + 1e-3)^alpha.
class PrioritizedBuffer {
  public:
    PrioritizedBuffer(std::size_t capacity, double alpha);

    void push(Transition t);

    struct Batch {
        std::vector<const Transition*> transitions;
        std::vector<std::uint64_t> ticket;  // stable ids for priority updates
        std::vector<double> is_weights;     // normalized by batch max
    };

    /// Stratified sample: one draw per equal segment of the cumulative
    /// priority range. Throws when size < batch_size.
    Batch sample(std::size_t batch_size, double beta, Rng& rng);

    /// Replace priorities for sampled items; entries already evicted are
    /// skipped and counted.
    void update_priorities(const std::vector<std::uint64_t>& tickets,
                           const std::vector<double>& td_errors);

    std::size_t size() const { return size_; }
    std::size_t capacity() const { return capacity_; }
    double max_priority() const { return max_priority_; }
    long evictions() const { return evictions_; }
    long stale_updates() const { return stale_updates_; }

    /// Root of the sum tree (total priority mass), for consistency checks.
    double total_priority() const;
    double priority_at_slot(std::size_t slot) const;
    const Transition& transition_at_slot(std::size_t slot) const;

  private:
    void set_priority(std::size_t slot, double p);
    std::size_t find_prefix(double mass) const;

    std::size_t capacity_;
    double alpha_;
    std::size_t base_;              // leaf count, power of two
    std::vector<double> tree_;      // 1-indexed heap layout, 2*base_ entries
    std::vector<Transition> items_;
    std::vector<std::uint64_t> tickets_;
    std::size_t next_slot_ = 0;     // FIFO cursor
    std::size_t size_ = 0;
    std::uint64_t next_ticket_ = 1;
    double max_priority_ = 1.0;
    long evictions_ = 0;
    long stale_updates_ = 0;
};

inline constexpr double kPriorityEps = 1e-3;

}  // namespace treenav
