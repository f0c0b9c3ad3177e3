#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "steady_replay/env.hpp"
#include "steady_replay/errors.hpp"

namespace steady_replay {

struct Experience {
    Observation s{};
    Action a{};
    double r = 0.0;
    Observation s_next{};
    bool done = false;
};

/// A and C admit steady-state transitions only; B and D admit every tick. C and D penalize object pushes.
enum class UpdateMethod { A, B, C, D };

inline bool is_adaptive(UpdateMethod m) { return m == UpdateMethod::A || m == UpdateMethod::C; }
inline bool penalizes_push(UpdateMethod m) { return m == UpdateMethod::C || m == UpdateMethod::D; }
inline StepMode step_mode(UpdateMethod m) { return is_adaptive(m) ? StepMode::settle : StepMode::tick; }

inline char to_char(UpdateMethod m) { return "ABCD"[static_cast<int>(m)]; }

inline UpdateMethod parse_method(const std::string& text) {
    if (text == "A" || text == "a") return UpdateMethod::A;
    if (text == "B" || text == "b") return UpdateMethod::B;
    if (text == "C" || text == "c") return UpdateMethod::C;
    if (text == "D" || text == "d") return UpdateMethod::D;
    throw ConfigError("unknown update method '" + text + "' (expected A, B, C or D)");
}

inline bool admit(UpdateMethod method, const StepOutcome& outcome) {
    return is_adaptive(method) ? outcome.stored : true;
}

/// Fixed-capacity ring; index 0 is always the oldest item.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
        if (capacity == 0) throw ConfigError("replay capacity must be positive");
        storage_.reserve(std::min<std::size_t>(capacity, 1u << 16));
    }

    void push(const Experience& e) {
        if (storage_.size() < capacity_) {
            storage_.push_back(e);
        } else {
            storage_[head_] = e;
            head_ = (head_ + 1) % capacity_;
        }
        ++inserted_;
    }

    std::size_t size() const { return storage_.size(); }
    std::size_t capacity() const { return capacity_; }
    std::uint64_t inserted() const { return inserted_; }

    const Experience& at(std::size_t i) const {
        if (i >= storage_.size()) throw ContractViolation("replay index out of range");
        return storage_[(head_ + i) % storage_.size()];
    }

    /// n independent uniform draws with replacement.
    std::vector<std::size_t> sample_indices(std::size_t n, Rng& rng) const {
        if (n == 0) throw ContractViolation("sample size must be at least 1");
        if (storage_.size() < n)
            throw InsufficientData("replay holds " + std::to_string(storage_.size()) + " items, " +
                                   std::to_string(n) + " requested");
        std::uniform_int_distribution<std::size_t> pick(0, storage_.size() - 1);
        std::vector<std::size_t> idx(n);
        for (auto& i : idx) i = pick(rng);
        return idx;
    }

    std::vector<Experience> sample_uniform(std::size_t n, Rng& rng) const {
        std::vector<Experience> batch;
        batch.reserve(n);
        for (std::size_t i : sample_indices(n, rng)) batch.push_back(at(i));
        return batch;
    }

private:
    std::size_t capacity_;
    std::vector<Experience> storage_;
    std::size_t head_ = 0;
    std::uint64_t inserted_ = 0;
};

}  // namespace steady_replay
