#include "treenav/replay.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace treenav {

PrioritizedBuffer::PrioritizedBuffer(std::size_t capacity, double alpha)
    : capacity_(capacity), alpha_(alpha) {
    if (capacity_ == 0) throw std::invalid_argument("replay: capacity must be > 0");
    if (alpha_ < 0.0) throw std::invalid_argument("replay: alpha must be >= 0");
    base_ = 1;
    while (base_ < capacity_) base_ <<= 1;
    tree_.assign(2 * base_, 0.0);
    items_.resize(capacity_);
    tickets_.assign(capacity_, 0);
}

void PrioritizedBuffer::set_priority(std::size_t slot, double p) {
    std::size_t i = base_ + slot;
    tree_[i] = p;
    for (i >>= 1; i >= 1; i >>= 1) tree_[i] = tree_[2 * i] + tree_[2 * i + 1];
}

double PrioritizedBuffer::total_priority() const { return tree_[1]; }

double PrioritizedBuffer::priority_at_slot(std::size_t slot) const { return tree_[base_ + slot]; }

const Transition& PrioritizedBuffer::transition_at_slot(std::size_t slot) const {
    return items_.at(slot);
}

std::size_t PrioritizedBuffer::find_prefix(double mass) const {
    std::size_t i = 1;
    while (i < base_) {
        if (mass < tree_[2 * i] || tree_[2 * i + 1] <= 0.0) {
            i = 2 * i;
        } else {
            mass -= tree_[2 * i];
            i = 2 * i + 1;
        }
        if (mass > tree_[i]) mass = tree_[i];  // guard fp drift at the leaf
    }
    return i - base_;
}

void PrioritizedBuffer::push(Transition t) {
    std::size_t slot = next_slot_;
    if (size_ == capacity_) ++evictions_;
    items_[slot] = std::move(t);
    tickets_[slot] = next_ticket_++;
    set_priority(slot, std::pow(max_priority_, alpha_));
    next_slot_ = (next_slot_ + 1) % capacity_;
    size_ = std::min(size_ + 1, capacity_);
}

PrioritizedBuffer::Batch PrioritizedBuffer::sample(std::size_t batch_size, double beta, Rng& rng) {
    if (size_ < batch_size) throw std::logic_error("replay: buffer underfull for batch");
    Batch out;
    double total = tree_[1];
    double seg = total / static_cast<double>(batch_size);
    std::vector<std::size_t> slots;
    for (std::size_t k = 0; k < batch_size; ++k) {
        double mass = (static_cast<double>(k) + rng.uniform()) * seg;
        std::size_t slot = find_prefix(mass);
        if (slot >= size_) slot = size_ - 1;  // unreachable unless fp drift
        slots.push_back(slot);
    }
    double n = static_cast<double>(size_);
    double max_w = 0.0;
    std::vector<double> ws(batch_size);
    for (std::size_t k = 0; k < batch_size; ++k) {
        double p = tree_[base_ + slots[k]] / total;
        ws[k] = std::pow(n * p, -beta);
        max_w = std::max(max_w, ws[k]);
    }
    for (std::size_t k = 0; k < batch_size; ++k) {
        out.transitions.push_back(&items_[slots[k]]);
        out.ticket.push_back(tickets_[slots[k]]);
        out.is_weights.push_back(max_w > 0.0 ? ws[k] / max_w : 1.0);
    }
    return out;
}

void PrioritizedBuffer::update_priorities(const std::vector<std::uint64_t>& tickets,
                                          const std::vector<double>& td_errors) {
    if (tickets.size() != td_errors.size())
        throw std::invalid_argument("replay: tickets/errors size mismatch");
    for (std::size_t k = 0; k < tickets.size(); ++k) {
        // Recover the slot from the ticket: tickets are assigned round-robin,
        // so a live ticket t sits at slot (t-1) % capacity.
        std::size_t slot = static_cast<std::size_t>((tickets[k] - 1) % capacity_);
        if (tickets_[slot] != tickets[k]) {
            ++stale_updates_;  // evicted since sampling
            continue;
        }
        double p = std::abs(td_errors[k]) + kPriorityEps;
        max_priority_ = std::max(max_priority_, p);
        set_priority(slot, std::pow(p, alpha_));
    }
}

}  // namespace treenav
